//! Round-trip and error-path tests for record directories.

use std::fs;

use proptest::prelude::*;

use handover::data::{
    load_record, save_record, DatasetTag, ForceSignals, Handedness, HandoverRecord, Participant,
    Participants, Pose, RecordMeta, SkeletonFrame, Vec3, WrenchSample, BODY_COUNT,
};
use handover::error::Error;

fn meta(weight_kg: f64, sample_rate_hz: f64, has_forces: bool) -> RecordMeta {
    RecordMeta {
        weight_kg,
        dataset_tag: if has_forces {
            DatasetTag::Rpl
        } else {
            DatasetTag::Ycb
        },
        object_label: "ball".to_string(),
        sample_rate_hz,
        participants: Participants {
            giver: Participant {
                height_m: 1.75,
                arm_length_m: 0.62,
                age: 31,
                handedness: Handedness::Right,
            },
            taker: Participant {
                height_m: 1.68,
                arm_length_m: 0.58,
                age: 27,
                handedness: Handedness::Left,
            },
        },
        has_forces,
    }
}

fn finite() -> impl Strategy<Value = f64> {
    -100.0..100.0f64
}

fn vec3() -> impl Strategy<Value = Vec3> {
    (finite(), finite(), finite()).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn quat() -> impl Strategy<Value = [f64; 4]> {
    [-1.0..1.0f64, -1.0..1.0, -1.0..1.0, -1.0..1.0]
        .prop_filter("nonzero quaternion", |q| {
            q.iter().map(|x| x * x).sum::<f64>().sqrt() > 0.3
        })
        .prop_map(|q| {
            let norm = q.iter().map(|x| x * x).sum::<f64>().sqrt();
            [q[0] / norm, q[1] / norm, q[2] / norm, q[3] / norm]
        })
}

fn pose() -> impl Strategy<Value = Pose> {
    (vec3(), quat()).prop_map(|(position, rotation)| Pose { position, rotation })
}

fn frame() -> impl Strategy<Value = SkeletonFrame> {
    prop::collection::vec(pose(), BODY_COUNT).prop_map(|poses| {
        let mut bodies = [Pose::IDENTITY; BODY_COUNT];
        bodies.copy_from_slice(&poses);
        SkeletonFrame { bodies }
    })
}

fn wrenches(n: usize) -> impl Strategy<Value = Vec<WrenchSample>> {
    prop::collection::vec((vec3(), vec3()), n).prop_map(|samples| {
        samples
            .into_iter()
            .enumerate()
            .map(|(t, (force, torque))| WrenchSample { t, force, torque })
            .collect()
    })
}

fn record() -> impl Strategy<Value = HandoverRecord> {
    (3usize..12, any::<bool>(), 0.01..5.0f64, 30.0..240.0f64).prop_flat_map(
        |(n, has_forces, weight_kg, sample_rate_hz)| {
            let forces = if has_forces {
                (wrenches(n), wrenches(n), wrenches(n))
                    .prop_map(|(interaction, giver_grip, taker_grip)| {
                        Some(ForceSignals {
                            interaction,
                            giver_grip,
                            taker_grip,
                        })
                    })
                    .boxed()
            } else {
                Just(None).boxed()
            };
            (
                forces,
                prop::collection::vec(pose(), n),
                prop::collection::vec(frame(), n),
                prop::collection::vec(frame(), n),
            )
                .prop_map(move |(forces, object_pose, giver_skeleton, taker_skeleton)| {
                    HandoverRecord {
                        forces,
                        object_pose,
                        giver_skeleton,
                        taker_skeleton,
                        meta: meta(weight_kg, sample_rate_hz, has_forces),
                        motion_usable: true,
                    }
                })
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn round_trip_is_bit_exact(original in record()) {
        let dir = tempfile::tempdir().unwrap();
        save_record(&original, dir.path()).unwrap();
        let loaded = load_record(dir.path()).unwrap();
        prop_assert_eq!(loaded, original);
    }
}

fn simple_record(n: usize, has_forces: bool) -> HandoverRecord {
    let pose = |i: usize| Pose {
        position: Vec3::new(0.25 * i as f64, -1.5, 1.0),
        rotation: [1.0, 0.0, 0.0, 0.0],
    };
    let wrench = |t: usize| WrenchSample {
        t,
        force: Vec3::new(0.5, -2.0 + t as f64, 3.25),
        torque: Vec3::ZERO,
    };
    HandoverRecord {
        forces: has_forces.then(|| ForceSignals {
            interaction: (0..n).map(wrench).collect(),
            giver_grip: (0..n).map(wrench).collect(),
            taker_grip: (0..n).map(wrench).collect(),
        }),
        object_pose: (0..n).map(pose).collect(),
        giver_skeleton: (0..n)
            .map(|i| SkeletonFrame {
                bodies: [pose(i); BODY_COUNT],
            })
            .collect(),
        taker_skeleton: (0..n)
            .map(|i| SkeletonFrame {
                bodies: [pose(i); BODY_COUNT],
            })
            .collect(),
        meta: meta(1.18, 120.0, has_forces),
        motion_usable: true,
    }
}

#[test]
fn misaligned_streams_refuse_to_save() {
    let mut record = simple_record(800, true);
    record.forces.as_mut().unwrap().interaction.pop();
    let dir = tempfile::tempdir().unwrap();
    let err = save_record(&record, dir.path()).unwrap_err();
    match err {
        Error::Validation { invariant, .. } => assert_eq!(invariant, "aligned-lengths"),
        other => panic!("expected alignment error, got {other}"),
    }
}

#[test]
fn nan_force_refuses_to_save() {
    let mut record = simple_record(10, true);
    record.forces.as_mut().unwrap().taker_grip[4].force.y = f64::NAN;
    let dir = tempfile::tempdir().unwrap();
    let err = save_record(&record, dir.path()).unwrap_err();
    match err {
        Error::Validation { invariant, .. } => assert_eq!(invariant, "finite-wrench"),
        other => panic!("expected finite-wrench error, got {other}"),
    }
}

#[test]
fn short_row_is_a_format_error() {
    let record = simple_record(10, true);
    let dir = tempfile::tempdir().unwrap();
    save_record(&record, dir.path()).unwrap();
    let csv_path = dir.path().join("signals.csv");
    let text = fs::read_to_string(&csv_path).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    // Drop the trailing field of one data row.
    let row = &lines[5];
    lines[5] = row[..row.rfind(',').unwrap()].to_string();
    fs::write(&csv_path, lines.join("\n")).unwrap();
    assert!(matches!(
        load_record(dir.path()),
        Err(Error::Format { .. })
    ));
}

// Blanks the object-pose cells (first 7 columns of a force-less record)
// of `rows` consecutive data rows starting at `start`.
fn blank_object_pose(csv_text: &str, start: usize, rows: usize) -> String {
    let mut lines: Vec<String> = csv_text.lines().map(str::to_string).collect();
    for line in lines.iter_mut().skip(1 + start).take(rows) {
        let fields: Vec<&str> = line.split(',').collect();
        let mut fields: Vec<String> = fields.into_iter().map(str::to_string).collect();
        for f in fields.iter_mut().take(7) {
            f.clear();
        }
        *line = fields.join(",");
    }
    lines.join("\n")
}

#[test]
fn short_occlusion_gap_is_interpolated() {
    let record = simple_record(20, false);
    let dir = tempfile::tempdir().unwrap();
    save_record(&record, dir.path()).unwrap();
    let csv_path = dir.path().join("signals.csv");
    let text = fs::read_to_string(&csv_path).unwrap();
    fs::write(&csv_path, blank_object_pose(&text, 6, 3)).unwrap();

    let loaded = load_record(dir.path()).unwrap();
    assert!(loaded.motion_usable);
    // Neighbours at x = 1.25 and 2.5 bracket a linear gap.
    let xs: Vec<f64> = (6..9).map(|i| loaded.object_pose[i].position.x).collect();
    let expect = [
        0.25 * 5.0 + 0.25 * 4.0 / 4.0,
        0.25 * 5.0 + 0.25 * 4.0 * 2.0 / 4.0,
        0.25 * 5.0 + 0.25 * 4.0 * 3.0 / 4.0,
    ];
    for (got, want) in xs.iter().zip(expect) {
        assert!((got - want).abs() < 1e-12, "got {got}, want {want}");
    }
}

#[test]
fn long_occlusion_gap_flags_motion_unusable() {
    let record = simple_record(20, false);
    let dir = tempfile::tempdir().unwrap();
    save_record(&record, dir.path()).unwrap();
    let csv_path = dir.path().join("signals.csv");
    let text = fs::read_to_string(&csv_path).unwrap();
    fs::write(&csv_path, blank_object_pose(&text, 6, 6)).unwrap();

    let loaded = load_record(dir.path()).unwrap();
    assert!(!loaded.motion_usable);
    assert_eq!(loaded.len(), 20);
}
