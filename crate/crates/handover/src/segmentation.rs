//! Cutting continuous session recordings into individual handovers.
//!
//! Baton sessions are segmented at the grip-force intersection (the giver's
//! decreasing grip equals the taker's increasing grip); motion-only
//! sessions at co-holding intervals where both hands are near the object.

use serde::{Deserialize, Serialize};

use crate::data::{ForceSignals, HandoverRecord, Pose, WrenchSample};
use crate::error::{Error, Result};
use crate::signal::{filtfilt, FilterSpec};
use crate::{CENTER_INDEX, CONTACT_THRESHOLD_N, RECORD_LEN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentMethod {
    GripIntersection,
    MotionCoholding,
}

/// One detected handover window inside a session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentBoundary {
    /// Sample index of t = 0 within the session.
    pub center_index: usize,
    pub start_index: usize,
    pub end_index: usize,
    pub method: SegmentMethod,
}

impl SegmentBoundary {
    fn centered(center: usize, method: SegmentMethod) -> Option<SegmentBoundary> {
        let start = center.checked_sub(CENTER_INDEX)?;
        Some(SegmentBoundary {
            center_index: center,
            start_index: start,
            end_index: start + RECORD_LEN,
            method,
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SegmentationConfig {
    /// Both grips must exceed this at the crossing (noise guard).
    pub contact_threshold_n: f64,
    /// The sign of giver - taker must be stable this many samples on each
    /// side of the crossing.
    pub persistence_samples: usize,
    /// Hand-to-object distance that counts as holding, meters.
    pub grasp_radius_m: f64,
    /// Shortest co-holding interval that counts, samples.
    pub min_coholding_samples: usize,
    pub filter: FilterSpec,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        SegmentationConfig {
            contact_threshold_n: CONTACT_THRESHOLD_N,
            persistence_samples: 5,
            grasp_radius_m: 0.12,
            min_coholding_samples: 12,
            filter: FilterSpec::default(),
        }
    }
}

/// Finds grip-force intersections: indices where the giver's grip falls
/// through the taker's rising grip, both above the contact threshold.
/// Boundaries closer than one window length are de-duplicated keeping the
/// crossing with the larger combined grip force.
pub fn find_grip_intersections(
    giver_grip: &[f64],
    taker_grip: &[f64],
    cfg: &SegmentationConfig,
) -> Result<Vec<SegmentBoundary>> {
    if giver_grip.len() != taker_grip.len() {
        return Err(Error::Alignment {
            detail: format!(
                "giver grip has {} samples, taker grip {}",
                giver_grip.len(),
                taker_grip.len()
            ),
        });
    }
    if giver_grip.len() < RECORD_LEN {
        return Err(Error::Length {
            needed: RECORD_LEN,
            got: giver_grip.len(),
        });
    }

    let giver_s = filtfilt(giver_grip, &cfg.filter)?;
    let taker_s = filtfilt(taker_grip, &cfg.filter)?;
    let diff: Vec<f64> = giver_s.iter().zip(&taker_s).map(|(g, t)| g - t).collect();

    let p = cfg.persistence_samples;
    let mut raw: Vec<(usize, f64)> = Vec::new();
    for i in 1..diff.len() {
        if !(diff[i - 1] > 0.0 && diff[i] <= 0.0) {
            continue;
        }
        if giver_s[i] <= cfg.contact_threshold_n || taker_s[i] <= cfg.contact_threshold_n {
            continue;
        }
        if i < p || i + p >= diff.len() {
            continue;
        }
        let stable = (1..=p).all(|k| diff[i - k] > 0.0) && (0..p).all(|k| diff[i + k] <= 0.0);
        if !stable {
            continue;
        }
        raw.push((i, giver_s[i] + taker_s[i]));
    }

    // De-duplicate crossings closer than one window, keeping the stronger.
    let mut kept: Vec<(usize, f64)> = Vec::new();
    for (idx, strength) in raw {
        match kept.last() {
            Some(&(prev, prev_strength)) if idx - prev < RECORD_LEN => {
                if strength > prev_strength {
                    *kept.last_mut().unwrap() = (idx, strength);
                }
            }
            _ => kept.push((idx, strength)),
        }
    }

    Ok(kept
        .into_iter()
        .filter_map(|(i, _)| SegmentBoundary::centered(i, SegmentMethod::GripIntersection))
        .filter(|b| b.end_index <= giver_grip.len())
        .collect())
}

/// Finds maximal intervals where both hands are within the grasp radius of
/// the object; one boundary per interval, centered at the midpoint.
pub fn find_coholding_segments(
    giver_hand: &[Pose],
    taker_hand: &[Pose],
    object_pose: &[Pose],
    cfg: &SegmentationConfig,
) -> Result<Vec<SegmentBoundary>> {
    if giver_hand.len() != object_pose.len() || taker_hand.len() != object_pose.len() {
        return Err(Error::Alignment {
            detail: format!(
                "pose sequences have lengths {}/{}/{}",
                giver_hand.len(),
                taker_hand.len(),
                object_pose.len()
            ),
        });
    }
    let holding: Vec<bool> = (0..object_pose.len())
        .map(|i| {
            let obj = object_pose[i].position;
            giver_hand[i].position.sub(obj).norm() <= cfg.grasp_radius_m
                && taker_hand[i].position.sub(obj).norm() <= cfg.grasp_radius_m
        })
        .collect();

    let mut boundaries = Vec::new();
    let mut i = 0usize;
    while i < holding.len() {
        if !holding[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < holding.len() && holding[i] {
            i += 1;
        }
        if i - start >= cfg.min_coholding_samples {
            let center = (start + i - 1) / 2;
            if let Some(b) = SegmentBoundary::centered(center, SegmentMethod::MotionCoholding) {
                if b.end_index <= holding.len() {
                    boundaries.push(b);
                }
            }
        }
    }
    Ok(boundaries)
}

/// Cuts one window out of a session buffer, re-indexed so the boundary
/// center lands on sample `CENTER_INDEX`.
pub fn extract(session: &HandoverRecord, boundary: &SegmentBoundary) -> Result<HandoverRecord> {
    if boundary.end_index - boundary.start_index != RECORD_LEN
        || boundary.center_index != boundary.start_index + CENTER_INDEX
    {
        return Err(Error::Bounds {
            detail: format!(
                "boundary [{}, {}) with center {} is not a centered {RECORD_LEN}-sample window",
                boundary.start_index, boundary.end_index, boundary.center_index
            ),
        });
    }
    if boundary.end_index > session.len() {
        return Err(Error::Bounds {
            detail: format!(
                "window [{}, {}) exceeds session length {}",
                boundary.start_index,
                boundary.end_index,
                session.len()
            ),
        });
    }
    let range = boundary.start_index..boundary.end_index;
    let reindex = |seq: &[WrenchSample]| -> Vec<WrenchSample> {
        seq[range.clone()]
            .iter()
            .enumerate()
            .map(|(t, s)| WrenchSample { t, ..*s })
            .collect()
    };
    Ok(HandoverRecord {
        forces: session.forces.as_ref().map(|f| ForceSignals {
            interaction: reindex(&f.interaction),
            giver_grip: reindex(&f.giver_grip),
            taker_grip: reindex(&f.taker_grip),
        }),
        object_pose: session.object_pose[range.clone()].to_vec(),
        giver_skeleton: session.giver_skeleton[range.clone()].to_vec(),
        taker_skeleton: session.taker_skeleton[range].to_vec(),
        meta: session.meta.clone(),
        motion_usable: session.motion_usable,
    })
}
