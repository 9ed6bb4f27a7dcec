//! Per-handover metrics and weight categories.
//!
//! All timing metrics are reported in milliseconds relative to t = 0, the
//! grip-force intersection at sample `CENTER_INDEX`. Operations that find
//! nothing to measure return `Error::MetricUndefined`; the record-level
//! driver maps those to `None` fields so one bad channel does not sink a
//! whole record.

pub mod stats;

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::data::{grip_force, Body, Handedness, HandoverRecord, Vec3};
use crate::error::{Error, Result};
use crate::signal::{differentiate, filtfilt, Direction, FilterSpec};
use crate::{index_to_ms, CENTER_INDEX, CONTACT_THRESHOLD_N, GRAVITY, RECORD_LEN};

/// Sustained-decrease drop threshold for release-start detection, newtons.
const RELEASE_DROP_N: f64 = 0.2;
/// Samples that must sit on the origin side of the threshold right before a
/// grip crossing for it to count (kills noise dither near the threshold).
const CROSSING_PERSIST: usize = 5;
/// Hand-speed gate that opens the reach-phase window, m/s.
const REACH_SPEED_GATE: f64 = 0.05;
/// Samples the speed gate must hold to count as sustained.
const REACH_GATE_PERSIST: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum WeightCategory {
    Low,
    Moderate,
    High,
}

pub const WEIGHT_RANGE_KG: (f64, f64) = (0.008, 2.06);

impl WeightCategory {
    pub const ALL: [WeightCategory; 3] =
        [WeightCategory::Low, WeightCategory::Moderate, WeightCategory::High];

    /// Half-open [low, high) bounds, except High which includes its upper end.
    pub fn bounds_kg(self) -> (f64, f64) {
        match self {
            WeightCategory::Low => (0.008, 0.1),
            WeightCategory::Moderate => (0.1, 0.95),
            WeightCategory::High => (0.95, 2.06),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            WeightCategory::Low => "Low",
            WeightCategory::Moderate => "Moderate",
            WeightCategory::High => "High",
        }
    }
}

impl std::fmt::Display for WeightCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Weight category for `weight_kg`. Weights outside the supported range map
/// to the nearest category with the flag set.
pub fn categorize(weight_kg: f64) -> Result<(WeightCategory, bool)> {
    if !(weight_kg > 0.0) {
        return Err(Error::Parameter(format!(
            "weight must be positive, got {weight_kg} kg"
        )));
    }
    let out_of_range = !(WEIGHT_RANGE_KG.0..=WEIGHT_RANGE_KG.1).contains(&weight_kg);
    let category = if weight_kg < 0.1 {
        WeightCategory::Low
    } else if weight_kg < 0.95 {
        WeightCategory::Moderate
    } else {
        WeightCategory::High
    };
    Ok((category, out_of_range))
}

/// Contact and release instants, as sample indices of a centered record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransferTimes {
    pub t_tak_con: usize,
    pub t_giv_rel: usize,
}

impl TransferTimes {
    pub fn t_tak_con_ms(&self) -> f64 {
        index_to_ms(self.t_tak_con)
    }

    pub fn t_giv_rel_ms(&self) -> f64 {
        index_to_ms(self.t_giv_rel)
    }

    pub fn t_tf_ms(&self) -> f64 {
        self.t_giv_rel_ms() - self.t_tak_con_ms()
    }
}

/// 3-sample moving average; first and last sample are kept as-is. Exact on
/// locally linear signals, shrinks white sensor noise by sqrt(3).
fn moving_average3(signal: &[f64]) -> Vec<f64> {
    let n = signal.len();
    let mut out = signal.to_vec();
    for i in 1..n.saturating_sub(1) {
        out[i] = (signal[i - 1] + signal[i] + signal[i + 1]) / 3.0;
    }
    out
}

/// A crossing at `i` counts only when the `CROSSING_PERSIST` samples before
/// it all sit on the origin side of the threshold.
fn is_sustained_crossing(sig: &[f64], thr: f64, direction: Direction, i: usize) -> bool {
    if i <= CROSSING_PERSIST || i >= sig.len() {
        return false;
    }
    let before_ok = match direction {
        Direction::Rising => (i - CROSSING_PERSIST..i).all(|k| sig[k] <= thr),
        Direction::Falling => (i - CROSSING_PERSIST..i).all(|k| sig[k] >= thr),
    };
    let crossed = match direction {
        Direction::Rising => sig[i] > thr,
        Direction::Falling => sig[i] < thr,
    };
    before_ok && crossed
}

/// First falling 0.4 N crossing of the giver grip after `from`.
fn giver_release_crossing(giver_ma3: &[f64], from: usize) -> Result<usize> {
    (from + 1..giver_ma3.len())
        .find(|&i| {
            is_sustained_crossing(giver_ma3, CONTACT_THRESHOLD_N, Direction::Falling, i)
        })
        .ok_or_else(|| Error::MetricUndefined {
            metric: "t_giv_rel",
            detail: format!("giver grip never falls through {CONTACT_THRESHOLD_N} N after contact"),
        })
}

/// Taker contact (last rising 0.4 N crossing before t = 0) and giver release
/// (first falling 0.4 N crossing after contact). The contact crossing is
/// taken on the 5 Hz zero-phase smoothed taker grip: the rise toward the
/// threshold is shallow, so sample-level averaging leaves too much crossing
/// jitter under sensor noise, while the grip curve itself lies well inside
/// the filter passband and is not displaced. The giver crossing sits on a
/// steep release slope and uses a 3-sample moving average. Both must be
/// approached from a sustained run on the origin side.
pub fn transfer_time(giver_grip: &[f64], taker_grip: &[f64]) -> Result<TransferTimes> {
    if giver_grip.len() != taker_grip.len() {
        return Err(Error::Alignment {
            detail: format!(
                "giver grip has {} samples, taker grip {}",
                giver_grip.len(),
                taker_grip.len()
            ),
        });
    }
    let taker_smooth = filtfilt(taker_grip, &FilterSpec::default())?;
    let giver_ma3 = moving_average3(giver_grip);
    let until = CENTER_INDEX.min(taker_smooth.len().saturating_sub(1));
    let t_tak_con = (1..=until)
        .rev()
        .find(|&i| {
            is_sustained_crossing(&taker_smooth, CONTACT_THRESHOLD_N, Direction::Rising, i)
        })
        .ok_or_else(|| Error::MetricUndefined {
            metric: "t_tak_con",
            detail: format!("taker grip never rises through {CONTACT_THRESHOLD_N} N before t = 0"),
        })?;
    let t_giv_rel = giver_release_crossing(&giver_ma3, t_tak_con)?;
    Ok(TransferTimes {
        t_tak_con,
        t_giv_rel,
    })
}

/// First sample after taker contact where the giver's grip begins a
/// sustained decrease.
///
/// A candidate is located on the 5 Hz zero-phase smoothed grip (first sample
/// whose 5-sample lookahead drop exceeds 0.2 N), then refined on the raw
/// 3-sample moving average: the onset is the last sample near the candidate
/// still within a noise band of the pre-release plateau level. The
/// refinement undoes the smearing the zero-phase filter spreads across the
/// onset, which matters for noise-free traces with a sharp release kink.
pub fn release_start(giver_grip: &[f64], t_tak_con: usize) -> Result<usize> {
    let undefined = |detail: String| Error::MetricUndefined {
        metric: "t_rel_start",
        detail,
    };
    if t_tak_con + 6 >= giver_grip.len() {
        return Err(undefined("no room after taker contact".into()));
    }
    let smoothed = filtfilt(giver_grip, &FilterSpec::default())?;
    let cand = (t_tak_con..smoothed.len() - 5)
        .find(|&i| smoothed[i] - smoothed[i + 5] > RELEASE_DROP_N)
        .ok_or_else(|| {
            undefined(format!(
                "no sustained decrease of more than {RELEASE_DROP_N} N after taker contact"
            ))
        })?;

    let ma3 = |j: usize| (giver_grip[j - 1] + giver_grip[j] + giver_grip[j + 1]) / 3.0;

    // Plateau level and spread from raw samples well before the candidate.
    let lo = cand.saturating_sub(85).max(1);
    let hi = cand.saturating_sub(25);
    if hi <= lo + 4 {
        // Not enough pre-release context to refine; keep the smoothed candidate.
        return Ok(cand.max(t_tak_con));
    }
    let plateau: Vec<f64> = giver_grip[lo..hi].to_vec();
    let mean = plateau.iter().sum::<f64>() / plateau.len() as f64;
    let var =
        plateau.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (plateau.len() - 1) as f64;
    // The 3-sample average shrinks iid noise by sqrt(3).
    let band = (2.5 * var.sqrt() / 3f64.sqrt()).max(1e-9);

    let j_hi = (cand + 10).min(giver_grip.len() - 2);
    let j_lo = cand.saturating_sub(20).max(1);
    let onset = (j_lo..=j_hi)
        .rev()
        .find(|&j| ma3(j) >= mean - band)
        .unwrap_or(j_lo);
    Ok(onset.max(t_tak_con))
}

/// Release-start and giver-release instants; `t_gr` is their difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GripRelease {
    pub t_rel_start: usize,
    pub t_giv_rel: usize,
}

impl GripRelease {
    pub fn t_rel_start_ms(&self) -> f64 {
        index_to_ms(self.t_rel_start)
    }

    pub fn t_gr_ms(&self) -> f64 {
        index_to_ms(self.t_giv_rel) - index_to_ms(self.t_rel_start)
    }
}

pub fn grip_release_time(giver_grip: &[f64], t_tak_con: usize) -> Result<GripRelease> {
    let t_rel_start = release_start(giver_grip, t_tak_con)?;
    let t_giv_rel = giver_release_crossing(&moving_average3(giver_grip), t_tak_con)?;
    Ok(GripRelease {
        t_rel_start: t_rel_start.min(t_giv_rel),
        t_giv_rel,
    })
}

/// Greatest |F_z(t) - F_z(t_tak_con)| over the transfer window, newtons.
pub fn max_pull(interaction_fz: &[f64], t_tak_con: usize, t_giv_rel: usize) -> Result<f64> {
    if t_tak_con > t_giv_rel || t_giv_rel >= interaction_fz.len() {
        return Err(Error::MetricUndefined {
            metric: "max_pull",
            detail: format!(
                "transfer window [{t_tak_con}, {t_giv_rel}] invalid for {} samples",
                interaction_fz.len()
            ),
        });
    }
    let baseline = interaction_fz[t_tak_con];
    Ok(interaction_fz[t_tak_con..=t_giv_rel]
        .iter()
        .map(|v| (v - baseline).abs())
        .fold(0.0, f64::max))
}

/// First sample in the transfer window where F_y is positive (the giver is
/// shedding vertical load onto the taker).
pub fn loadshare_shift(
    interaction_fy: &[f64],
    t_tak_con: usize,
    t_giv_rel: usize,
) -> Result<usize> {
    if t_tak_con > t_giv_rel || t_giv_rel >= interaction_fy.len() {
        return Err(Error::MetricUndefined {
            metric: "t_ld_shift",
            detail: format!(
                "transfer window [{t_tak_con}, {t_giv_rel}] invalid for {} samples",
                interaction_fy.len()
            ),
        });
    }
    (t_tak_con..=t_giv_rel)
        .find(|&i| interaction_fy[i] > 0.0)
        .ok_or_else(|| Error::MetricUndefined {
            metric: "t_ld_shift",
            detail: "F_y never positive in the transfer window".into(),
        })
}

/// Object height over the participants' mean chest height.
pub fn transfer_height(
    object_z_at_t0: f64,
    giver_chest_z: f64,
    taker_chest_z: f64,
) -> Result<f64> {
    if !(giver_chest_z > 0.0) || !(taker_chest_z > 0.0) {
        return Err(Error::Parameter(format!(
            "chest heights must be positive, got {giver_chest_z} and {taker_chest_z}"
        )));
    }
    Ok(object_z_at_t0 / ((giver_chest_z + taker_chest_z) / 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionMetrics {
    pub avg_velocity: f64,
    pub max_velocity: f64,
    pub avg_acceleration: f64,
    pub max_acceleration: f64,
}

/// Velocity/acceleration statistics of a (pre-filtered) hand trajectory
/// over the reach-phase window.
pub fn motion_metrics(
    hand_positions: &[Vec3],
    window: Range<usize>,
    sample_rate_hz: f64,
) -> Result<MotionMetrics> {
    if window.end > hand_positions.len() || window.start >= window.end {
        return Err(Error::Bounds {
            detail: format!(
                "window {}..{} outside trajectory of {} samples",
                window.start,
                window.end,
                hand_positions.len()
            ),
        });
    }
    if window.len() < 3 {
        return Err(Error::Length {
            needed: 3,
            got: window.len(),
        });
    }
    let dt = 1.0 / sample_rate_hz;
    let velocity = differentiate(hand_positions, dt)?;
    let acceleration = differentiate(&velocity, dt)?;
    let speeds: Vec<f64> = velocity[window.clone()].iter().map(|v| v.norm()).collect();
    let accels: Vec<f64> = acceleration[window].iter().map(|v| v.norm()).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    Ok(MotionMetrics {
        avg_velocity: mean(&speeds),
        max_velocity: max(&speeds),
        avg_acceleration: mean(&accels),
        max_acceleration: max(&accels),
    })
}

/// Reach-phase window: from the first sustained hand speed above the gate
/// to `end` (taker contact). Returns `None` when the hand never moves.
pub fn reach_window(hand_speed: &[f64], end: usize) -> Option<Range<usize>> {
    let end = end.min(hand_speed.len());
    let start = (0..end.saturating_sub(REACH_GATE_PERSIST)).find(|&i| {
        (i..i + REACH_GATE_PERSIST).all(|k| hand_speed[k] > REACH_SPEED_GATE)
    })?;
    (end - start >= 3).then_some(start..end)
}

/// All per-handover metrics for one record. Timing fields are milliseconds
/// relative to t = 0; `None` marks a metric that is undefined for this
/// record (missing forces, unusable motion, or nothing to measure).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub t_tak_con_ms: Option<f64>,
    pub t_giv_rel_ms: Option<f64>,
    pub t_tf_ms: Option<f64>,
    pub t_gr_ms: Option<f64>,
    pub max_pull_n: Option<f64>,
    pub max_pull_over_weight: Option<f64>,
    pub t_ld_shift_ms: Option<f64>,
    pub transfer_height_norm: Option<f64>,
    pub avg_velocity: Option<f64>,
    pub max_velocity: Option<f64>,
    pub avg_acceleration: Option<f64>,
    pub max_acceleration: Option<f64>,
    pub weight_kg: f64,
    pub category: WeightCategory,
}

fn giver_hand_body(record: &HandoverRecord) -> Body {
    match record.meta.participants.giver.handedness {
        Handedness::Left => Body::LeftHand,
        Handedness::Right => Body::RightHand,
    }
}

fn undefined_to_none<T>(result: Result<T>) -> Result<Option<T>> {
    match result {
        Ok(v) => Ok(Some(v)),
        Err(Error::MetricUndefined { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Computes every metric for one centered record.
pub fn extract_features(record: &HandoverRecord) -> Result<FeatureSet> {
    if record.len() != RECORD_LEN {
        return Err(Error::Length {
            needed: RECORD_LEN,
            got: record.len(),
        });
    }
    let (category, _) = categorize(record.meta.weight_kg)?;
    let mut fs = FeatureSet {
        t_tak_con_ms: None,
        t_giv_rel_ms: None,
        t_tf_ms: None,
        t_gr_ms: None,
        max_pull_n: None,
        max_pull_over_weight: None,
        t_ld_shift_ms: None,
        transfer_height_norm: None,
        avg_velocity: None,
        max_velocity: None,
        avg_acceleration: None,
        max_acceleration: None,
        weight_kg: record.meta.weight_kg,
        category,
    };

    let mut t_tak_con = None;
    if let Some(forces) = &record.forces {
        let giver = grip_force(&forces.giver_grip)?;
        let taker = grip_force(&forces.taker_grip)?;
        if let Some(times) = undefined_to_none(transfer_time(&giver, &taker))? {
            t_tak_con = Some(times.t_tak_con);
            fs.t_tak_con_ms = Some(times.t_tak_con_ms());
            fs.t_giv_rel_ms = Some(times.t_giv_rel_ms());
            fs.t_tf_ms = Some(times.t_tf_ms());

            if let Some(gr) = undefined_to_none(grip_release_time(&giver, times.t_tak_con))? {
                fs.t_gr_ms = Some(gr.t_gr_ms());
            }

            let fz: Vec<f64> = forces.interaction.iter().map(|s| s.force.z).collect();
            let fy: Vec<f64> = forces.interaction.iter().map(|s| s.force.y).collect();
            if let Some(pull) =
                undefined_to_none(max_pull(&fz, times.t_tak_con, times.t_giv_rel))?
            {
                fs.max_pull_n = Some(pull);
                fs.max_pull_over_weight = Some(pull / (record.meta.weight_kg * GRAVITY));
            }
            fs.t_ld_shift_ms =
                undefined_to_none(loadshare_shift(&fy, times.t_tak_con, times.t_giv_rel))?
                    .map(index_to_ms);
        }
    }

    let chest_mean = |frames: &[crate::data::SkeletonFrame]| {
        frames
            .iter()
            .map(|f| f.body(Body::Chest).position.z)
            .sum::<f64>()
            / frames.len() as f64
    };
    fs.transfer_height_norm = transfer_height(
        record.object_pose[CENTER_INDEX].position.z,
        chest_mean(&record.giver_skeleton),
        chest_mean(&record.taker_skeleton),
    )
    .ok();

    if record.motion_usable {
        let hand = giver_hand_body(record);
        let raw: Vec<Vec3> = record
            .giver_skeleton
            .iter()
            .map(|f| f.body(hand).position)
            .collect();
        let spec = FilterSpec {
            sample_rate_hz: record.meta.sample_rate_hz,
            ..FilterSpec::default()
        };
        let filtered = filter_positions(&raw, &spec)?;
        let dt = 1.0 / record.meta.sample_rate_hz;
        let velocity = differentiate(&filtered, dt)?;
        let speed: Vec<f64> = velocity.iter().map(|v| v.norm()).collect();
        let window_end = t_tak_con.unwrap_or(CENTER_INDEX);
        if let Some(window) = reach_window(&speed, window_end) {
            let m = motion_metrics(&filtered, window, record.meta.sample_rate_hz)?;
            fs.avg_velocity = Some(m.avg_velocity);
            fs.max_velocity = Some(m.max_velocity);
            fs.avg_acceleration = Some(m.avg_acceleration);
            fs.max_acceleration = Some(m.max_acceleration);
        }
    }
    Ok(fs)
}

/// Low-passes each Cartesian component of a position sequence.
pub fn filter_positions(positions: &[Vec3], spec: &FilterSpec) -> Result<Vec<Vec3>> {
    let xs: Vec<f64> = positions.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = positions.iter().map(|p| p.y).collect();
    let zs: Vec<f64> = positions.iter().map(|p| p.z).collect();
    let xs = filtfilt(&xs, spec)?;
    let ys = filtfilt(&ys, spec)?;
    let zs = filtfilt(&zs, spec)?;
    Ok((0..positions.len())
        .map(|i| Vec3::new(xs[i], ys[i], zs[i]))
        .collect())
}
