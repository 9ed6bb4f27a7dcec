//! Canonical data model and on-disk format for handover recordings.
//!
//! One record lives in a directory holding `signals.csv` (one row per
//! 120 Hz frame, fixed column order) and `meta.json` (weight, dataset tag,
//! participants). A dataset is described by a `manifest.json` listing the
//! record directories.
//!
//! All types are immutable after construction and validated on load; the
//! load/save pair round-trips every finite value bit-exactly.

mod io;

pub use io::{load_manifest, load_record, save_manifest, save_record};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 3-vector, SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }

    pub fn scale(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }

    pub fn norm(self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// One 6-DoF force/torque reading on the 120 Hz sample grid.
///
/// `t` is the sample index within the record; indices are strictly
/// consecutive starting at 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WrenchSample {
    pub t: usize,
    pub force: Vec3,
    pub torque: Vec3,
}

/// Rigid-body pose: position in meters, unit quaternion (q0 scalar-first).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vec3,
    pub rotation: [f64; 4],
}

impl Pose {
    pub const IDENTITY: Pose = Pose {
        position: Vec3::ZERO,
        rotation: [1.0, 0.0, 0.0, 0.0],
    };

    pub fn quat_norm(&self) -> f64 {
        self.rotation.iter().map(|q| q * q).sum::<f64>().sqrt()
    }
}

/// The 13 tracked upper-body segments, in canonical column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(usize)]
pub enum Body {
    Hip = 0,
    Ab,
    Chest,
    Neck,
    Head,
    LeftShoulder,
    RightShoulder,
    LeftUpperArm,
    RightUpperArm,
    LeftForearm,
    RightForearm,
    LeftHand,
    RightHand,
}

pub const BODY_COUNT: usize = 13;

pub const BODIES: [Body; BODY_COUNT] = [
    Body::Hip,
    Body::Ab,
    Body::Chest,
    Body::Neck,
    Body::Head,
    Body::LeftShoulder,
    Body::RightShoulder,
    Body::LeftUpperArm,
    Body::RightUpperArm,
    Body::LeftForearm,
    Body::RightForearm,
    Body::LeftHand,
    Body::RightHand,
];

impl Body {
    pub fn column_name(self) -> &'static str {
        match self {
            Body::Hip => "hip",
            Body::Ab => "ab",
            Body::Chest => "chest",
            Body::Neck => "neck",
            Body::Head => "head",
            Body::LeftShoulder => "l_shoulder",
            Body::RightShoulder => "r_shoulder",
            Body::LeftUpperArm => "l_upperarm",
            Body::RightUpperArm => "r_upperarm",
            Body::LeftForearm => "l_forearm",
            Body::RightForearm => "r_forearm",
            Body::LeftHand => "l_hand",
            Body::RightHand => "r_hand",
        }
    }
}

/// Poses of all 13 body segments at one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonFrame {
    pub bodies: [Pose; BODY_COUNT],
}

impl SkeletonFrame {
    pub fn body(&self, b: Body) -> &Pose {
        &self.bodies[b as usize]
    }
}

/// Per-participant metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Participant {
    pub height_m: f64,
    pub arm_length_m: f64,
    pub age: u32,
    pub handedness: Handedness,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Handedness {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DatasetTag {
    #[serde(rename = "RPL")]
    Rpl,
    #[serde(rename = "RPL-2.0")]
    Rpl2,
    #[serde(rename = "YCB")]
    Ycb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Participants {
    pub giver: Participant,
    pub taker: Participant,
}

/// Contents of `meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub weight_kg: f64,
    pub dataset_tag: DatasetTag,
    pub object_label: String,
    pub sample_rate_hz: f64,
    pub participants: Participants,
    /// False when the record carries no wrench columns (YCB recordings).
    #[serde(default = "default_true")]
    pub has_forces: bool,
}

fn default_true() -> bool {
    true
}

/// The three wrench streams of a baton recording.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceSignals {
    pub interaction: Vec<WrenchSample>,
    pub giver_grip: Vec<WrenchSample>,
    pub taker_grip: Vec<WrenchSample>,
}

/// One segmented handover (or an unsegmented session buffer of any length).
///
/// All signal sequences share one length. Force signals are absent for
/// motion-only (YCB) recordings; force-dependent operations fail fast on
/// such records.
#[derive(Debug, Clone, PartialEq)]
pub struct HandoverRecord {
    pub forces: Option<ForceSignals>,
    pub object_pose: Vec<Pose>,
    pub giver_skeleton: Vec<SkeletonFrame>,
    pub taker_skeleton: Vec<SkeletonFrame>,
    pub meta: RecordMeta,
    /// False when motion-capture gaps longer than the interpolation limit
    /// were found on load; motion metrics should skip such records.
    pub motion_usable: bool,
}

impl HandoverRecord {
    pub fn len(&self) -> usize {
        self.object_pose.len()
    }

    pub fn is_empty(&self) -> bool {
        self.object_pose.is_empty()
    }

    pub fn weight_kg(&self) -> f64 {
        self.meta.weight_kg
    }

    pub fn forces(&self) -> Result<&ForceSignals> {
        self.forces.as_ref().ok_or(Error::MissingForces)
    }

    /// Checks every structural invariant, reporting the first violation.
    pub fn validate(&self) -> Result<()> {
        let n = self.object_pose.len();
        if let Some(f) = &self.forces {
            for (name, seq) in [
                ("interaction", &f.interaction),
                ("giver_grip", &f.giver_grip),
                ("taker_grip", &f.taker_grip),
            ] {
                if seq.len() != n {
                    return Err(Error::validation(
                        "aligned-lengths",
                        format!("{name} has {} samples, object_pose has {n}", seq.len()),
                    ));
                }
                for (i, s) in seq.iter().enumerate() {
                    if s.t != i {
                        return Err(Error::validation(
                            "consecutive-sample-indices",
                            format!("{name}[{i}] has t = {}", s.t),
                        ));
                    }
                    if !s.force.is_finite() || !s.torque.is_finite() {
                        return Err(Error::validation(
                            "finite-wrench",
                            format!("{name}[{i}] has non-finite components"),
                        ));
                    }
                }
            }
        }
        for (name, len) in [
            ("giver_skeleton", self.giver_skeleton.len()),
            ("taker_skeleton", self.taker_skeleton.len()),
        ] {
            if len != n {
                return Err(Error::validation(
                    "aligned-lengths",
                    format!("{name} has {len} frames, object_pose has {n}"),
                ));
            }
        }
        for (i, p) in self.object_pose.iter().enumerate() {
            validate_pose(p, "object_pose", i)?;
        }
        for (name, skel) in [
            ("giver_skeleton", &self.giver_skeleton),
            ("taker_skeleton", &self.taker_skeleton),
        ] {
            for (i, frame) in skel.iter().enumerate() {
                for pose in &frame.bodies {
                    validate_pose(pose, name, i)?;
                }
            }
        }
        if !(self.meta.weight_kg > 0.0) {
            return Err(Error::validation(
                "positive-weight",
                format!("object_weight_kg = {}", self.meta.weight_kg),
            ));
        }
        if !(self.meta.sample_rate_hz > 0.0) {
            return Err(Error::validation(
                "positive-sample-rate",
                format!("sample_rate_hz = {}", self.meta.sample_rate_hz),
            ));
        }
        if self.meta.has_forces != self.forces.is_some() {
            return Err(Error::validation(
                "forces-flag-consistent",
                "meta.has_forces disagrees with presence of wrench signals".to_string(),
            ));
        }
        Ok(())
    }
}

fn validate_pose(p: &Pose, name: &str, i: usize) -> Result<()> {
    if !p.position.is_finite() || p.rotation.iter().any(|q| !q.is_finite()) {
        return Err(Error::validation(
            "finite-pose",
            format!("{name}[{i}] has non-finite components"),
        ));
    }
    if (p.quat_norm() - 1.0).abs() > 1e-6 {
        return Err(Error::validation(
            "unit-quaternion",
            format!("{name}[{i}] quaternion norm {}", p.quat_norm()),
        ));
    }
    Ok(())
}

/// One entry of `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub weight_kg: f64,
    pub object_label: String,
    pub dataset_tag: DatasetTag,
    pub has_forces: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.path.as_str()) {
                return Err(Error::validation(
                    "unique-paths",
                    format!("duplicate path {}", e.path),
                ));
            }
            if e.dataset_tag == DatasetTag::Ycb && e.has_forces {
                return Err(Error::validation(
                    "ycb-has-no-forces",
                    format!("{} is tagged YCB but claims force data", e.path),
                ));
            }
        }
        Ok(())
    }
}

/// Grip force of a grip sensor stream: element-wise negated z force.
pub fn grip_force(seq: &[WrenchSample]) -> Result<Vec<f64>> {
    if seq.is_empty() {
        return Err(Error::EmptySignal);
    }
    Ok(seq.iter().map(|s| -s.force.z).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, GeneratorSpec};

    #[test]
    fn grip_force_flips_sign() {
        let seq: Vec<WrenchSample> = [-1.0, -2.5]
            .iter()
            .enumerate()
            .map(|(t, &z)| WrenchSample {
                t,
                force: Vec3::new(0.0, 0.0, z),
                torque: Vec3::ZERO,
            })
            .collect();
        assert_eq!(grip_force(&seq).unwrap(), vec![1.0, 2.5]);
    }

    #[test]
    fn grip_force_zero_case() {
        let seq = vec![WrenchSample {
            t: 0,
            force: Vec3::ZERO,
            torque: Vec3::ZERO,
        }];
        assert_eq!(grip_force(&seq).unwrap(), vec![0.0]);
    }

    #[test]
    fn grip_force_rejects_empty() {
        assert!(matches!(grip_force(&[]), Err(Error::EmptySignal)));
    }

    #[test]
    fn validation_names_one_invariant() {
        let (mut record, _) = generate(&GeneratorSpec::default()).unwrap();
        record.meta.weight_kg = -1.0;
        match record.validate() {
            Err(Error::Validation { invariant, .. }) => assert_eq!(invariant, "positive-weight"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn validation_rejects_nan_force() {
        let (mut record, _) = generate(&GeneratorSpec::default()).unwrap();
        record.forces.as_mut().unwrap().interaction[3].force.x = f64::NAN;
        match record.validate() {
            Err(Error::Validation { invariant, .. }) => assert_eq!(invariant, "finite-wrench"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn validation_rejects_misaligned_lengths() {
        let (mut record, _) = generate(&GeneratorSpec::default()).unwrap();
        record.forces.as_mut().unwrap().interaction.pop();
        match record.validate() {
            Err(Error::Validation { invariant, .. }) => assert_eq!(invariant, "aligned-lengths"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn manifest_rejects_duplicates_and_ycb_forces() {
        let entry = ManifestEntry {
            path: "a".into(),
            weight_kg: 1.0,
            object_label: "baton".into(),
            dataset_tag: DatasetTag::Rpl2,
            has_forces: true,
        };
        let m = DatasetManifest {
            entries: vec![entry.clone(), entry.clone()],
        };
        assert!(m.validate().is_err());

        let mut ycb = entry;
        ycb.dataset_tag = DatasetTag::Ycb;
        let m = DatasetManifest {
            entries: vec![ycb],
        };
        match m.validate() {
            Err(Error::Validation { invariant, .. }) => assert_eq!(invariant, "ycb-has-no-forces"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }
}
