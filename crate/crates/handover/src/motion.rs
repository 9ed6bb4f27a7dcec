//! Weight-adaptive minimum-jerk reach planning.
//!
//! Point-to-point segments are quintic polynomials with zero boundary
//! velocity and acceleration; segment durations are chosen time-optimally
//! under the per-weight-category peak-acceleration cap.

use crate::data::Vec3;
use crate::error::{Error, Result};
use crate::features::WeightCategory;

/// Peak speed of a minimum-jerk segment is `MIN_JERK_PEAK_SPEED * d / T`.
pub const MIN_JERK_PEAK_SPEED: f64 = 1.875;
/// Peak acceleration is `MIN_JERK_PEAK_ACCEL * d / T^2` (10 / sqrt(3)).
pub const MIN_JERK_PEAK_ACCEL: f64 = 5.773502691896258;

/// Per-category trajectory limits, m/s^2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryProfile {
    pub category: WeightCategory,
    pub max_accel_cap: f64,
    /// Descriptive reference average acceleration for the category; not a
    /// planning constraint.
    pub avg_accel_ref: f64,
}

impl TrajectoryProfile {
    pub fn for_category(category: WeightCategory) -> TrajectoryProfile {
        let (max_accel_cap, avg_accel_ref) = match category {
            WeightCategory::Low => (38.676, 5.270),
            WeightCategory::Moderate => (27.575, 4.920),
            WeightCategory::High => (20.575, 4.580),
        };
        TrajectoryProfile {
            category,
            max_accel_cap,
            avg_accel_ref,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub position: Vec3,
    pub time_s: f64,
}

/// A sampled trajectory; all sequences share one length.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub time_s: Vec<f64>,
    pub position: Vec<Vec3>,
    pub velocity: Vec<Vec3>,
    pub acceleration: Vec<Vec3>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.time_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time_s.is_empty()
    }

    pub fn max_speed(&self) -> f64 {
        self.velocity.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_accel(&self) -> f64 {
        self.acceleration.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Evaluates the quintic minimum-jerk blend at normalized time `u` in [0, 1].
/// Returns (position fraction, velocity factor, acceleration factor); the
/// velocity factor is per unit T, acceleration per unit T^2.
fn min_jerk_basis(u: f64) -> (f64, f64, f64) {
    let u2 = u * u;
    let u3 = u2 * u;
    let s = 10.0 * u3 - 15.0 * u2 * u2 + 6.0 * u2 * u3;
    let ds = 30.0 * u2 - 60.0 * u3 + 30.0 * u2 * u2;
    let dds = 60.0 * u - 180.0 * u2 + 120.0 * u3;
    (s, ds, dds)
}

/// Samples one minimum-jerk segment, endpoint included.
pub fn min_jerk_segment(
    start: Vec3,
    end: Vec3,
    duration_s: f64,
    sample_rate_hz: f64,
) -> Result<Trajectory> {
    if !(duration_s > 0.0) {
        return Err(Error::Parameter(format!(
            "segment duration must be positive, got {duration_s}"
        )));
    }
    if !(sample_rate_hz > 0.0) {
        return Err(Error::Parameter("sample rate must be positive".into()));
    }
    let delta = end.sub(start);
    let steps = (duration_s * sample_rate_hz).ceil() as usize;
    let mut traj = Trajectory::default();
    for k in 0..=steps {
        let t = (k as f64 / sample_rate_hz).min(duration_s);
        let u = t / duration_s;
        let (s, ds, dds) = min_jerk_basis(u);
        traj.time_s.push(t);
        traj.position.push(start.add(delta.scale(s)));
        traj.velocity.push(delta.scale(ds / duration_s));
        traj.acceleration
            .push(delta.scale(dds / (duration_s * duration_s)));
    }
    Ok(traj)
}

/// Result of planning a multi-waypoint reach.
#[derive(Debug, Clone)]
pub struct ReachPlan {
    pub trajectory: Trajectory,
    pub profile: TrajectoryProfile,
    pub segment_durations_s: Vec<f64>,
    /// Consecutive duplicate waypoints dropped during planning.
    pub collapsed_waypoints: usize,
}

/// Plans a reach through `waypoints` for the given weight category. Each
/// segment's duration is the minimum T with peak acceleration under the
/// category cap.
pub fn plan_reach(
    waypoints: &[Vec3],
    category: WeightCategory,
    sample_rate_hz: f64,
) -> Result<ReachPlan> {
    let profile = TrajectoryProfile::for_category(category);
    let mut points: Vec<Vec3> = Vec::with_capacity(waypoints.len());
    let mut collapsed = 0usize;
    for &p in waypoints {
        if points.last().is_some_and(|last| last.sub(p).norm() < 1e-12) {
            collapsed += 1;
            continue;
        }
        points.push(p);
    }
    if points.len() < 2 {
        return Err(Error::Parameter(format!(
            "need at least 2 distinct waypoints, got {}",
            points.len()
        )));
    }

    let mut trajectory = Trajectory::default();
    let mut durations = Vec::new();
    let mut t_offset = 0.0;
    for pair in points.windows(2) {
        let d = pair[1].sub(pair[0]).norm();
        let duration = (MIN_JERK_PEAK_ACCEL * d / profile.max_accel_cap).sqrt();
        let seg = min_jerk_segment(pair[0], pair[1], duration, sample_rate_hz)?;
        let skip = usize::from(!trajectory.is_empty());
        for i in skip..seg.len() {
            trajectory.time_s.push(t_offset + seg.time_s[i]);
            trajectory.position.push(seg.position[i]);
            trajectory.velocity.push(seg.velocity[i]);
            trajectory.acceleration.push(seg.acceleration[i]);
        }
        t_offset += duration;
        durations.push(duration);
    }
    Ok(ReachPlan {
        trajectory,
        profile,
        segment_durations_s: durations,
        collapsed_waypoints: collapsed,
    })
}
