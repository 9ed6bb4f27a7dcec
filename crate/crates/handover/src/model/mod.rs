//! From-scratch VAE-LSTM grip-release classifier.
//!
//! An encoder LSTM reads a 100-step window of (F_y, F_z, w), two affine
//! heads produce a Gaussian latent (dim 10), and a decoder LSTM fed the
//! latent at every step drives a logistic output head that predicts
//! whether the giver's release has started by the window's end step.

mod io;
mod lstm;
mod train;

pub use io::{load_model, save_model};
pub use train::{
    backward, batch_loss, train, BatchGradients, EpochStats, Stage, TrainConfig, TrainOutcome,
};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::HandoverRecord;
use crate::{Error, Result, CENTER_INDEX};

/// Input channels per step: loadshare force F_y, pull force F_z, weight w.
pub const INPUT_DIM: usize = 3;
/// Hidden size of both LSTMs.
pub const HIDDEN_DIM: usize = 10;
/// Latent dimension.
pub const LATENT_DIM: usize = 10;
/// Steps per window (833 ms at 120 Hz).
pub const WINDOW_STEPS: usize = 100;
/// Earliest window end step relative to t = 0.
pub const T_E_MIN: i64 = -215;
/// Latest window end step relative to t = 0.
pub const T_E_MAX: i64 = 0;

// Flat parameter layout (row-major, gate order i/f/g/o).
pub(crate) const ENC_WIH: usize = 0;
pub(crate) const ENC_WHH: usize = ENC_WIH + 4 * HIDDEN_DIM * INPUT_DIM;
pub(crate) const ENC_B: usize = ENC_WHH + 4 * HIDDEN_DIM * HIDDEN_DIM;
pub(crate) const MU_W: usize = ENC_B + 4 * HIDDEN_DIM;
pub(crate) const MU_B: usize = MU_W + LATENT_DIM * HIDDEN_DIM;
pub(crate) const LV_W: usize = MU_B + LATENT_DIM;
pub(crate) const LV_B: usize = LV_W + LATENT_DIM * HIDDEN_DIM;
pub(crate) const DEC_WIH: usize = LV_B + LATENT_DIM;
pub(crate) const DEC_WHH: usize = DEC_WIH + 4 * HIDDEN_DIM * LATENT_DIM;
pub(crate) const DEC_B: usize = DEC_WHH + 4 * HIDDEN_DIM * HIDDEN_DIM;
pub(crate) const OUT_W: usize = DEC_B + 4 * HIDDEN_DIM;
pub(crate) const OUT_B: usize = OUT_W + HIDDEN_DIM;
/// Total learnable parameter count.
pub const PARAM_COUNT: usize = OUT_B + 1;

/// One training/inference window: 100 steps of (F_y, F_z, w).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GripWindow {
    /// 100 rows of [F_y N, F_z N, weight kg]; the weight column is constant.
    pub series: Vec<[f64; 3]>,
    /// End step relative to t = 0, in [-215, 0].
    pub t_e: i64,
    /// 1 iff the release had started by the end step.
    pub label: u8,
}

impl GripWindow {
    pub fn validate(&self) -> Result<()> {
        if self.series.len() != WINDOW_STEPS {
            return Err(Error::Shape(format!(
                "window has {} steps, expected {WINDOW_STEPS}",
                self.series.len()
            )));
        }
        if !(T_E_MIN..=T_E_MAX).contains(&self.t_e) {
            return Err(Error::Parameter(format!(
                "window end step {} outside [{T_E_MIN}, {T_E_MAX}]",
                self.t_e
            )));
        }
        let w = self.series[0][2];
        if self.series.iter().any(|row| row[2] != w) {
            return Err(Error::validation(
                "constant-weight-channel",
                "weight channel varies across steps".to_string(),
            ));
        }
        if self.label > 1 {
            return Err(Error::Parameter(format!("label {} not in {{0,1}}", self.label)));
        }
        Ok(())
    }
}

/// Cuts every window ending in [-215, 0] out of a segmented record.
///
/// `t_rel_start` is the release-start index within the record (as returned
/// by the release detector). Labels are 1 for windows ending at or after it.
pub fn make_windows(record: &HandoverRecord, t_rel_start: usize) -> Result<Vec<GripWindow>> {
    let forces = record.forces()?;
    let n = record.len();
    let first = (CENTER_INDEX as i64 + T_E_MIN) - (WINDOW_STEPS as i64 - 1);
    if first < 0 || CENTER_INDEX >= n {
        return Err(Error::Bounds {
            detail: format!("record of {n} samples cannot hold windows ending at t=0"),
        });
    }
    let rel = t_rel_start as i64 - CENTER_INDEX as i64;
    let w = record.weight_kg();
    let mut out = Vec::with_capacity((T_E_MAX - T_E_MIN + 1) as usize);
    for t_e in T_E_MIN..=T_E_MAX {
        let end = (CENTER_INDEX as i64 + t_e) as usize;
        let start = end + 1 - WINDOW_STEPS;
        let series = forces.interaction[start..=end]
            .iter()
            .map(|s| [s.force.y, s.force.z, w])
            .collect();
        out.push(GripWindow {
            series,
            t_e,
            label: u8::from(t_e >= rel),
        });
    }
    Ok(out)
}

/// Per-channel z-score statistics, computed on the training split only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

impl NormStats {
    /// Identity normalization (mean 0, std 1).
    pub fn identity() -> Self {
        NormStats {
            mean: [0.0; 3],
            std: [1.0; 3],
        }
    }

    /// Population mean/std over all steps of all windows, per channel.
    /// Channels with zero variance get std 1 so they normalize to 0.
    pub fn from_windows(windows: &[GripWindow]) -> Result<Self> {
        if windows.is_empty() {
            return Err(Error::Parameter("no windows for normalization".into()));
        }
        let n = (windows.len() * WINDOW_STEPS) as f64;
        let mut mean = [0.0; 3];
        for w in windows {
            for row in &w.series {
                for c in 0..3 {
                    mean[c] += row[c];
                }
            }
        }
        for m in mean.iter_mut() {
            *m /= n;
        }
        let mut var = [0.0; 3];
        for w in windows {
            for row in &w.series {
                for c in 0..3 {
                    let d = row[c] - mean[c];
                    var[c] += d * d;
                }
            }
        }
        let mut std = [0.0; 3];
        for c in 0..3 {
            let s = (var[c] / n).sqrt();
            std[c] = if s > 1e-12 { s } else { 1.0 };
        }
        Ok(NormStats { mean, std })
    }

    fn apply(&self, series: &[[f64; 3]]) -> Vec<Vec<f64>> {
        series
            .iter()
            .map(|row| {
                (0..3)
                    .map(|c| (row[c] - self.mean[c]) / self.std[c])
                    .collect()
            })
            .collect()
    }
}

/// All learnable parameters in one flat little-endian-serializable vector,
/// plus the training-split normalization statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct VaeLstmModel {
    pub params: Vec<f64>,
    pub norm: NormStats,
}

/// Inference mode: eval uses z = mu, train draws z = mu + exp(lv/2) * eps.
#[derive(Debug, Clone, Copy)]
pub enum ForwardMode<'a> {
    Eval,
    Train { eps: &'a [f64] },
}

/// Forward-pass outputs.
#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub p: f64,
    pub mu: Vec<f64>,
    pub logvar: Vec<f64>,
}

impl VaeLstmModel {
    /// Uniform random initialization. The range is wide enough that the
    /// latent carries input information from the start; tighter inits sit on
    /// the posterior-collapse plateau for tens of epochs.
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = (0..PARAM_COUNT).map(|_| rng.gen_range(-0.4..0.4)).collect();
        VaeLstmModel {
            params,
            norm: NormStats::identity(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.params.len() != PARAM_COUNT {
            return Err(Error::Shape(format!(
                "{} parameters, expected {PARAM_COUNT}",
                self.params.len()
            )));
        }
        if let Some(k) = self.params.iter().position(|p| !p.is_finite()) {
            return Err(Error::Numeric(format!("non-finite parameter at index {k}")));
        }
        Ok(())
    }

    pub(crate) fn enc_wih(&self) -> &[f64] {
        &self.params[ENC_WIH..ENC_WHH]
    }
    pub(crate) fn enc_whh(&self) -> &[f64] {
        &self.params[ENC_WHH..ENC_B]
    }
    pub(crate) fn enc_b(&self) -> &[f64] {
        &self.params[ENC_B..MU_W]
    }
    pub(crate) fn dec_wih(&self) -> &[f64] {
        &self.params[DEC_WIH..DEC_WHH]
    }
    pub(crate) fn dec_whh(&self) -> &[f64] {
        &self.params[DEC_WHH..DEC_B]
    }
    pub(crate) fn dec_b(&self) -> &[f64] {
        &self.params[DEC_B..OUT_W]
    }

    /// Runs the full pipeline on one window.
    pub fn forward(&self, window: &GripWindow, mode: ForwardMode) -> Result<ForwardOutput> {
        self.validate()?;
        window.validate()?;
        if let ForwardMode::Train { eps } = mode {
            if eps.len() != LATENT_DIM {
                return Err(Error::Shape(format!(
                    "epsilon has dim {}, expected {LATENT_DIM}",
                    eps.len()
                )));
            }
        }
        let xs = self.norm.apply(&window.series);
        let enc = lstm::lstm_forward(
            self.enc_wih(),
            self.enc_whh(),
            self.enc_b(),
            INPUT_DIM,
            HIDDEN_DIM,
            &xs,
        );
        let h = enc.last_hidden(HIDDEN_DIM);
        let mut mu = vec![0.0; LATENT_DIM];
        let mut lv = vec![0.0; LATENT_DIM];
        for j in 0..LATENT_DIM {
            let mut m = self.params[MU_B + j];
            let mut l = self.params[LV_B + j];
            for (k, &hk) in h.iter().enumerate() {
                m += self.params[MU_W + j * HIDDEN_DIM + k] * hk;
                l += self.params[LV_W + j * HIDDEN_DIM + k] * hk;
            }
            mu[j] = m;
            lv[j] = l;
        }
        let z: Vec<f64> = match mode {
            ForwardMode::Eval => mu.clone(),
            ForwardMode::Train { eps } => (0..LATENT_DIM)
                .map(|j| mu[j] + (0.5 * lv[j]).exp() * eps[j])
                .collect(),
        };
        let zs = vec![z; WINDOW_STEPS];
        let dec = lstm::lstm_forward(
            self.dec_wih(),
            self.dec_whh(),
            self.dec_b(),
            LATENT_DIM,
            HIDDEN_DIM,
            &zs,
        );
        let hd = dec.last_hidden(HIDDEN_DIM);
        let mut logit = self.params[OUT_B];
        for (k, &hk) in hd.iter().enumerate() {
            logit += self.params[OUT_W + k] * hk;
        }
        let p = lstm::sigmoid(logit);
        if !p.is_finite() || mu.iter().chain(lv.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite forward output (p = {p}, window t_e = {})",
                window.t_e
            )));
        }
        Ok(ForwardOutput { p, mu, logvar: lv })
    }
}

/// Per-sample loss terms: binary cross-entropy (p clamped to
/// [1e-7, 1 - 1e-7]) and the Gaussian KL divergence to the standard normal.
/// Batch losses are the means of these over the batch.
pub fn loss(p: f64, label: u8, mu: &[f64], logvar: &[f64]) -> (f64, f64, f64) {
    let p = p.clamp(1e-7, 1.0 - 1e-7);
    let recon = if label == 1 { -p.ln() } else { -(1.0 - p).ln() };
    let kl = -0.5
        * mu.iter()
            .zip(logvar)
            .map(|(&m, &l)| 1.0 + l - m * m - l.exp())
            .sum::<f64>();
    (recon, kl, recon + kl)
}

/// Builds a linearly separable synthetic window corpus for training checks.
///
/// Negative windows hold a negative loadshare force throughout; positive
/// windows flip its sign partway through and add a pull-force ramp.
pub fn separable_windows(per_class: usize, seed: u64) -> Vec<GripWindow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = [0.8, 1.0, 1.2, 1.4, 1.6, 1.8, 2.0];
    let mut out = Vec::with_capacity(2 * per_class);
    for label in [0u8, 1u8] {
        for _ in 0..per_class {
            let w = weights[rng.gen_range(0..weights.len())];
            let flip = rng.gen_range(10..40);
            let base = -0.5 * w * crate::GRAVITY;
            let series = (0..WINDOW_STEPS)
                .map(|i| {
                    let noise = rng.gen_range(-0.3..0.3);
                    let fy = if label == 1 && i >= flip {
                        -base + noise
                    } else {
                        base + noise
                    };
                    let fz = if label == 1 && i >= flip {
                        0.08 * (i - flip) as f64 + rng.gen_range(-0.2..0.2)
                    } else {
                        rng.gen_range(-0.2..0.2)
                    };
                    [fy, fz, w]
                })
                .collect();
            out.push(GripWindow {
                series,
                t_e: -(rng.gen_range(0..=215) as i64),
                label,
            });
        }
    }
    out
}
