//! Deterministic signal-processing primitives shared by all analysis
//! modules: Butterworth low-pass design, zero-phase filtering, numerical
//! differentiation, and threshold-crossing detection.

use num_complex::Complex64;

use crate::data::Vec3;
use crate::error::{Error, Result};

/// Butterworth low-pass design parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSpec {
    pub order: usize,
    pub cutoff_hz: f64,
    pub sample_rate_hz: f64,
}

impl Default for FilterSpec {
    fn default() -> Self {
        FilterSpec {
            order: 4,
            cutoff_hz: 5.0,
            sample_rate_hz: 120.0,
        }
    }
}

impl FilterSpec {
    pub fn validate(&self) -> Result<()> {
        if self.order == 0 {
            return Err(Error::Parameter("filter order must be >= 1".into()));
        }
        if !(self.cutoff_hz > 0.0) || !(self.sample_rate_hz > 0.0) {
            return Err(Error::Parameter(
                "cutoff and sample rate must be positive".into(),
            ));
        }
        if self.cutoff_hz >= self.sample_rate_hz / 2.0 {
            return Err(Error::Parameter(format!(
                "cutoff {} Hz is at or above Nyquist ({} Hz)",
                self.cutoff_hz,
                self.sample_rate_hz / 2.0
            )));
        }
        Ok(())
    }
}

/// IIR transfer-function coefficients; `a[0]` is normalized to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub b: Vec<f64>,
    pub a: Vec<f64>,
}

impl Coefficients {
    /// Complex frequency response at `freq_hz` for the given sample rate.
    pub fn response(&self, freq_hz: f64, sample_rate_hz: f64) -> Complex64 {
        let w = 2.0 * std::f64::consts::PI * freq_hz / sample_rate_hz;
        let eval = |coeffs: &[f64]| -> Complex64 {
            coeffs
                .iter()
                .enumerate()
                .map(|(k, &c)| Complex64::from_polar(c, -(k as f64) * w))
                .sum()
        };
        eval(&self.b) / eval(&self.a)
    }
}

/// Designs the discrete Butterworth low-pass by bilinear transform with
/// frequency pre-warping. DC gain is normalized to exactly 1.
pub fn butterworth_coeffs(spec: &FilterSpec) -> Result<Coefficients> {
    spec.validate()?;
    let n = spec.order;
    let fs = spec.sample_rate_hz;
    // Pre-warped analog cutoff so the discrete -3 dB point lands on cutoff_hz.
    let warped = 2.0 * fs * (std::f64::consts::PI * spec.cutoff_hz / fs).tan();

    // Analog prototype poles on the left-half-plane Butterworth circle,
    // mapped through the bilinear transform.
    let mut digital_poles = Vec::with_capacity(n);
    for k in 0..n {
        let theta = std::f64::consts::PI * (2.0 * k as f64 + n as f64 + 1.0) / (2.0 * n as f64);
        let pole = Complex64::from_polar(warped, theta);
        let two_fs = Complex64::new(2.0 * fs, 0.0);
        digital_poles.push((two_fs + pole) / (two_fs - pole));
    }

    // Denominator from the digital poles; numerator has n zeros at z = -1.
    let a = real_poly_from_roots(&digital_poles);
    let minus_ones = vec![Complex64::new(-1.0, 0.0); n];
    let b_unit = real_poly_from_roots(&minus_ones);

    let gain = a.iter().sum::<f64>() / b_unit.iter().sum::<f64>();
    let b = b_unit.iter().map(|c| c * gain).collect();
    Ok(Coefficients { b, a })
}

fn real_poly_from_roots(roots: &[Complex64]) -> Vec<f64> {
    let mut poly = vec![Complex64::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); poly.len() + 1];
        for (i, &c) in poly.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c * r;
        }
        poly = next;
    }
    poly.into_iter().map(|c| c.re).collect()
}

/// Single forward pass of the IIR filter (direct form II transposed) with
/// initial state `zi` scaled to the first sample's steady state.
fn lfilter_steady(coeffs: &Coefficients, x: &[f64]) -> Vec<f64> {
    let b = &coeffs.b;
    let a = &coeffs.a;
    let order = a.len() - 1;
    let zi_unit = steady_state(coeffs);
    let mut z: Vec<f64> = zi_unit.iter().map(|v| v * x[0]).collect();
    let mut y = Vec::with_capacity(x.len());
    for &xn in x {
        let yn = b[0] * xn + z[0];
        for i in 0..order {
            let next = if i + 1 < order { z[i + 1] } else { 0.0 };
            z[i] = b[i + 1] * xn + next - a[i + 1] * yn;
        }
        y.push(yn);
    }
    y
}

/// State vector that keeps a unit-step input at unit output from sample 0.
fn steady_state(coeffs: &Coefficients) -> Vec<f64> {
    let a = &coeffs.a;
    let b = &coeffs.b;
    let n = a.len() - 1;
    // Solve (I - A^T) zi = B for the transposed companion form.
    let mut m = vec![vec![0.0f64; n]; n];
    let mut rhs = vec![0.0f64; n];
    for i in 0..n {
        for j in 0..n {
            let companion_t = if j == 0 {
                -a[i + 1]
            } else if j == i + 1 {
                1.0
            } else {
                0.0
            };
            m[i][j] = if i == j { 1.0 } else { 0.0 } - companion_t;
        }
        rhs[i] = b[i + 1] - a[i + 1] * b[0];
    }
    solve_linear(&mut m, &mut rhs);
    rhs
}

fn solve_linear(m: &mut [Vec<f64>], rhs: &mut [f64]) {
    let n = rhs.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        let p = m[col][col];
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = m[row][col] / p;
            for k in col..n {
                m[row][k] -= f * m[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    for i in 0..n {
        rhs[i] /= m[i][i];
    }
}

/// Zero-phase filtering. The signal is extended at both ends by odd
/// reflection (length 3 x order), filtered forward and backward, and the
/// two pass orders are averaged so the result commutes exactly with time
/// reversal.
pub fn filtfilt(signal: &[f64], spec: &FilterSpec) -> Result<Vec<f64>> {
    let coeffs = butterworth_coeffs(spec)?;
    let pad = 3 * spec.order;
    if signal.len() < 3 * spec.order {
        return Err(Error::Length {
            needed: 3 * spec.order,
            got: signal.len(),
        });
    }

    let n = signal.len();
    let mut ext = Vec::with_capacity(n + 2 * pad);
    let first = signal[0];
    let last = signal[n - 1];
    for k in (1..=pad).rev() {
        ext.push(2.0 * first - signal[k.min(n - 1)]);
    }
    ext.extend_from_slice(signal);
    for k in 1..=pad {
        ext.push(2.0 * last - signal[n - 1 - k.min(n - 1)]);
    }

    let forward_backward = |x: &[f64]| -> Vec<f64> {
        let mut y = lfilter_steady(&coeffs, x);
        y.reverse();
        let mut y = lfilter_steady(&coeffs, &y);
        y.reverse();
        y
    };
    let fb = forward_backward(&ext);
    let mut rev = ext.clone();
    rev.reverse();
    let mut bf = forward_backward(&rev);
    bf.reverse();

    Ok((pad..pad + n).map(|i| 0.5 * (fb[i] + bf[i])).collect())
}

/// Central differences on interior points, first-order one-sided at the ends.
pub fn differentiate(signal: &[Vec3], dt: f64) -> Result<Vec<Vec3>> {
    if signal.len() < 3 {
        return Err(Error::Length {
            needed: 3,
            got: signal.len(),
        });
    }
    if !(dt > 0.0) {
        return Err(Error::Parameter("dt must be positive".into()));
    }
    let n = signal.len();
    let mut out = Vec::with_capacity(n);
    out.push(signal[1].sub(signal[0]).scale(1.0 / dt));
    for i in 1..n - 1 {
        out.push(signal[i + 1].sub(signal[i - 1]).scale(0.5 / dt));
    }
    out.push(signal[n - 1].sub(signal[n - 2]).scale(1.0 / dt));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Rising,
    Falling,
}

/// Smallest index >= `from` at which the signal crosses `threshold` in the
/// given direction. A crossing at index i means the previous sample was on
/// or before the threshold and sample i is strictly past it.
pub fn first_crossing(
    signal: &[f64],
    threshold: f64,
    direction: Direction,
    from: usize,
) -> Option<usize> {
    let start = from.max(1);
    (start..signal.len()).find(|&i| is_crossing(signal, threshold, direction, i))
}

/// Largest crossing index that is <= `until`.
pub fn last_crossing(
    signal: &[f64],
    threshold: f64,
    direction: Direction,
    until: usize,
) -> Option<usize> {
    let until = until.min(signal.len().saturating_sub(1));
    (1..=until).rev().find(|&i| is_crossing(signal, threshold, direction, i))
}

fn is_crossing(signal: &[f64], threshold: f64, direction: Direction, i: usize) -> bool {
    match direction {
        Direction::Rising => signal[i - 1] <= threshold && signal[i] > threshold,
        Direction::Falling => signal[i - 1] >= threshold && signal[i] < threshold,
    }
}
