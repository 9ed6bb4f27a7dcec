//! `signals.csv` / `meta.json` reading and writing.
//!
//! Numeric cells are written with Rust's shortest round-trip float
//! formatting, so save -> load reproduces every value bit-exactly.
//! Empty pose cells mark motion-capture occlusion gaps; gaps of up to
//! `MAX_GAP_FRAMES` frames are linearly interpolated on load, longer
//! gaps flag the record unusable for motion metrics.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::{
    DatasetManifest, ForceSignals, HandoverRecord, Pose, RecordMeta, SkeletonFrame, Vec3,
    WrenchSample, BODIES, BODY_COUNT,
};

/// Longest occlusion gap (frames) that is still interpolated.
pub const MAX_GAP_FRAMES: usize = 5;

const WRENCH_GROUPS: [&str; 3] = ["wint", "wgiv", "wtak"];
const WRENCH_PARTS: [&str; 6] = ["fx", "fy", "fz", "tx", "ty", "tz"];
const POSE_PARTS: [&str; 7] = ["px", "py", "pz", "q0", "q1", "q2", "q3"];

fn header(has_forces: bool) -> Vec<String> {
    let mut cols = Vec::new();
    if has_forces {
        for group in WRENCH_GROUPS {
            for part in WRENCH_PARTS {
                cols.push(format!("{group}_{part}"));
            }
        }
    }
    for part in POSE_PARTS {
        cols.push(format!("obj_{part}"));
    }
    for prefix in ["giv", "tak"] {
        for body in BODIES {
            for part in POSE_PARTS {
                cols.push(format!("{prefix}_{}_{part}", body.column_name()));
            }
        }
    }
    cols
}

/// Loads and fully validates one record directory.
pub fn load_record(dir: &Path) -> Result<HandoverRecord> {
    let meta_path = dir.join("meta.json");
    let meta_text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: RecordMeta = serde_json::from_str(&meta_text)
        .map_err(|e| Error::format(&meta_path, format!("bad meta.json: {e}")))?;

    let csv_path = dir.join("signals.csv");
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(&csv_path)
        .map_err(|e| Error::format(&csv_path, e.to_string()))?;

    let expected = header(meta.has_forces);
    {
        let got = reader
            .headers()
            .map_err(|e| Error::format(&csv_path, e.to_string()))?;
        let got: Vec<&str> = got.iter().collect();
        if got != expected.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(Error::format(
                &csv_path,
                format!(
                    "unexpected header: expected {} columns starting with {:?}",
                    expected.len(),
                    expected.first()
                ),
            ));
        }
    }

    let mut forces = meta.has_forces.then(|| ForceSignals {
        interaction: Vec::new(),
        giver_grip: Vec::new(),
        taker_grip: Vec::new(),
    });
    // Raw pose streams with gaps; interpolated afterwards.
    let mut object_pose: Vec<Option<Pose>> = Vec::new();
    let mut giver_bodies: Vec<Vec<Option<Pose>>> = vec![Vec::new(); BODY_COUNT];
    let mut taker_bodies: Vec<Vec<Option<Pose>>> = vec![Vec::new(); BODY_COUNT];

    for (row_idx, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::format(&csv_path, e.to_string()))?;
        if row.len() != expected.len() {
            return Err(Error::format(
                &csv_path,
                format!(
                    "row {}: expected {} fields, got {}",
                    row_idx + 2,
                    expected.len(),
                    row.len()
                ),
            ));
        }
        let mut col = 0usize;
        let mut num = |ctx: &str| -> Result<f64> {
            let cell = row.get(col).unwrap();
            col += 1;
            cell.parse::<f64>().map_err(|_| {
                Error::format(
                    &csv_path,
                    format!("row {}, column {ctx}: bad number {cell:?}", row_idx + 2),
                )
            })
        };

        if let Some(f) = forces.as_mut() {
            for seq in [&mut f.interaction, &mut f.giver_grip, &mut f.taker_grip] {
                let force = Vec3::new(num("force")?, num("force")?, num("force")?);
                let torque = Vec3::new(num("torque")?, num("torque")?, num("torque")?);
                seq.push(WrenchSample {
                    t: row_idx,
                    force,
                    torque,
                });
            }
        }

        let mut pose_cell = |ctx: &str| -> Result<Option<Pose>> {
            let start = col;
            let empty = (0..7).all(|k| row.get(start + k).unwrap().is_empty());
            if empty {
                col += 7;
                return Ok(None);
            }
            let mut vals = [0.0f64; 7];
            for v in vals.iter_mut() {
                let cell = row.get(col).unwrap();
                col += 1;
                *v = cell.parse::<f64>().map_err(|_| {
                    Error::format(
                        &csv_path,
                        format!("row {}, {ctx}: bad number {cell:?}", row_idx + 2),
                    )
                })?;
            }
            Ok(Some(Pose {
                position: Vec3::new(vals[0], vals[1], vals[2]),
                rotation: [vals[3], vals[4], vals[5], vals[6]],
            }))
        };

        object_pose.push(pose_cell("object pose")?);
        for stream in giver_bodies.iter_mut() {
            stream.push(pose_cell("giver body")?);
        }
        for stream in taker_bodies.iter_mut() {
            stream.push(pose_cell("taker body")?);
        }
    }

    let mut motion_usable = true;
    let object_pose = fill_gaps(object_pose, &mut motion_usable, &csv_path)?;
    let mut giver_filled = Vec::with_capacity(BODY_COUNT);
    for stream in giver_bodies {
        giver_filled.push(fill_gaps(stream, &mut motion_usable, &csv_path)?);
    }
    let mut taker_filled = Vec::with_capacity(BODY_COUNT);
    for stream in taker_bodies {
        taker_filled.push(fill_gaps(stream, &mut motion_usable, &csv_path)?);
    }

    let n = object_pose.len();
    let to_frames = |streams: Vec<Vec<Pose>>| -> Vec<SkeletonFrame> {
        (0..n)
            .map(|i| {
                let mut bodies = [Pose::IDENTITY; BODY_COUNT];
                for (b, stream) in streams.iter().enumerate() {
                    bodies[b] = stream[i];
                }
                SkeletonFrame { bodies }
            })
            .collect()
    };

    let record = HandoverRecord {
        forces,
        object_pose,
        giver_skeleton: to_frames(giver_filled),
        taker_skeleton: to_frames(taker_filled),
        meta,
        motion_usable,
    };
    record.validate()?;
    Ok(record)
}

fn fill_gaps(
    stream: Vec<Option<Pose>>,
    motion_usable: &mut bool,
    path: &Path,
) -> Result<Vec<Pose>> {
    if stream.iter().all(Option::is_none) {
        return Err(Error::format(path, "a pose stream is entirely empty"));
    }
    let n = stream.len();
    let mut out = Vec::with_capacity(n);
    let mut i = 0usize;
    while i < n {
        if let Some(p) = stream[i] {
            out.push(p);
            i += 1;
            continue;
        }
        // Start of a gap: find its extent.
        let gap_start = i;
        while i < n && stream[i].is_none() {
            i += 1;
        }
        let gap_len = i - gap_start;
        if gap_len > MAX_GAP_FRAMES {
            *motion_usable = false;
        }
        let before = gap_start.checked_sub(1).map(|j| stream[j].unwrap());
        let after = (i < n).then(|| stream[i].unwrap());
        for k in 0..gap_len {
            let pose = match (before, after) {
                (Some(a), Some(b)) => {
                    let t = (k + 1) as f64 / (gap_len + 1) as f64;
                    lerp_pose(&a, &b, t)
                }
                // Edge gap: hold the nearest observed pose.
                (Some(a), None) => a,
                (None, Some(b)) => b,
                (None, None) => unreachable!(),
            };
            out.push(pose);
        }
    }
    Ok(out)
}

fn lerp_pose(a: &Pose, b: &Pose, t: f64) -> Pose {
    let position = a.position.scale(1.0 - t).add(b.position.scale(t));
    // Normalized linear quaternion blend, shortest arc.
    let sign = if a.rotation.iter().zip(&b.rotation).map(|(x, y)| x * y).sum::<f64>() < 0.0 {
        -1.0
    } else {
        1.0
    };
    let mut q = [0.0f64; 4];
    for k in 0..4 {
        q[k] = a.rotation[k] * (1.0 - t) + sign * b.rotation[k] * t;
    }
    let norm = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in q.iter_mut() {
        *x /= norm;
    }
    Pose {
        position,
        rotation: q,
    }
}

/// Writes a validated record to `dir` as `signals.csv` + `meta.json`.
pub fn save_record(record: &HandoverRecord, dir: &Path) -> Result<()> {
    record.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let meta_path = dir.join("meta.json");
    let meta_text = serde_json::to_string_pretty(&record.meta)
        .map_err(|e| Error::format(&meta_path, e.to_string()))?;
    fs::write(&meta_path, meta_text).map_err(|e| Error::io(&meta_path, e))?;

    let csv_path = dir.join("signals.csv");
    let mut writer = csv::Writer::from_path(&csv_path)
        .map_err(|e| Error::io(&csv_path, std::io::Error::other(e)))?;
    writer
        .write_record(header(record.forces.is_some()))
        .map_err(|e| Error::format(&csv_path, e.to_string()))?;

    let mut row: Vec<String> = Vec::new();
    for i in 0..record.len() {
        row.clear();
        if let Some(f) = &record.forces {
            for seq in [&f.interaction, &f.giver_grip, &f.taker_grip] {
                let s = &seq[i];
                for v in [
                    s.force.x, s.force.y, s.force.z, s.torque.x, s.torque.y, s.torque.z,
                ] {
                    row.push(format!("{v}"));
                }
            }
        }
        push_pose(&mut row, &record.object_pose[i]);
        for frame in [&record.giver_skeleton[i], &record.taker_skeleton[i]] {
            for pose in &frame.bodies {
                push_pose(&mut row, pose);
            }
        }
        writer
            .write_record(&row)
            .map_err(|e| Error::format(&csv_path, e.to_string()))?;
    }
    writer
        .flush()
        .map_err(|e| Error::io(&csv_path, e))?;
    Ok(())
}

fn push_pose(row: &mut Vec<String>, p: &Pose) {
    for v in [
        p.position.x,
        p.position.y,
        p.position.z,
        p.rotation[0],
        p.rotation[1],
        p.rotation[2],
        p.rotation[3],
    ] {
        row.push(format!("{v}"));
    }
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: DatasetManifest = serde_json::from_str(&text)
        .map_err(|e| Error::format(path, format!("bad manifest.json: {e}")))?;
    manifest.validate()?;
    Ok(manifest)
}

pub fn save_manifest(manifest: &DatasetManifest, path: &Path) -> Result<()> {
    manifest.validate()?;
    let text = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::format(path, e.to_string()))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
