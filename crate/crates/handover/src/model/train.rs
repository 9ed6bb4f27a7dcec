//! Batch gradients (backpropagation through time, including the
//! reparameterization path) and the two-stage training loop.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lstm;
use super::{
    loss, ForwardMode, GripWindow, NormStats, VaeLstmModel, DEC_B, DEC_WHH, DEC_WIH, ENC_B,
    ENC_WHH, ENC_WIH, HIDDEN_DIM, INPUT_DIM, LATENT_DIM, LV_B, LV_W, MU_B, MU_W, OUT_B, OUT_W,
    PARAM_COUNT, WINDOW_STEPS,
};
use crate::{Error, Result};

struct ForwardCache {
    xs: Vec<Vec<f64>>,
    enc: lstm::LstmCache,
    mu: Vec<f64>,
    lv: Vec<f64>,
    z: Vec<f64>,
    dec: lstm::LstmCache,
    p: f64,
}

fn forward_cached(model: &VaeLstmModel, window: &GripWindow, eps: &[f64]) -> Result<ForwardCache> {
    window.validate()?;
    if eps.len() != LATENT_DIM {
        return Err(Error::Shape(format!(
            "epsilon has dim {}, expected {LATENT_DIM}",
            eps.len()
        )));
    }
    let xs = model.norm.apply(&window.series);
    let enc = lstm::lstm_forward(
        model.enc_wih(),
        model.enc_whh(),
        model.enc_b(),
        INPUT_DIM,
        HIDDEN_DIM,
        &xs,
    );
    let h = enc.last_hidden(HIDDEN_DIM);
    let mut mu = vec![0.0; LATENT_DIM];
    let mut lv = vec![0.0; LATENT_DIM];
    for j in 0..LATENT_DIM {
        let mut m = model.params[MU_B + j];
        let mut l = model.params[LV_B + j];
        for (k, &hk) in h.iter().enumerate() {
            m += model.params[MU_W + j * HIDDEN_DIM + k] * hk;
            l += model.params[LV_W + j * HIDDEN_DIM + k] * hk;
        }
        mu[j] = m;
        lv[j] = l;
    }
    let z: Vec<f64> = (0..LATENT_DIM)
        .map(|j| mu[j] + (0.5 * lv[j]).exp() * eps[j])
        .collect();
    let zs = vec![z.clone(); WINDOW_STEPS];
    let dec = lstm::lstm_forward(
        model.dec_wih(),
        model.dec_whh(),
        model.dec_b(),
        LATENT_DIM,
        HIDDEN_DIM,
        &zs,
    );
    let hd = dec.last_hidden(HIDDEN_DIM);
    let mut logit = model.params[OUT_B];
    for (k, &hk) in hd.iter().enumerate() {
        logit += model.params[OUT_W + k] * hk;
    }
    let p = lstm::sigmoid(logit);
    if !p.is_finite() {
        return Err(Error::Numeric(format!("non-finite logit {logit}")));
    }
    Ok(ForwardCache {
        xs,
        enc,
        mu,
        lv,
        z,
        dec,
        p,
    })
}

/// Batch gradients and batch-mean loss terms.
#[derive(Debug, Clone)]
pub struct BatchGradients {
    /// d L_total / d params, one entry per parameter.
    pub grads: Vec<f64>,
    pub recon: f64,
    pub kl: f64,
    pub total: f64,
}

/// Batch-mean loss in train mode (one ε draw per window), without gradients.
pub fn batch_loss(
    model: &VaeLstmModel,
    windows: &[GripWindow],
    eps: &[Vec<f64>],
) -> Result<(f64, f64, f64)> {
    if windows.is_empty() || windows.len() != eps.len() {
        return Err(Error::Parameter(format!(
            "batch of {} windows with {} epsilon draws",
            windows.len(),
            eps.len()
        )));
    }
    let n = windows.len() as f64;
    let (mut recon, mut kl) = (0.0, 0.0);
    for (w, e) in windows.iter().zip(eps) {
        let cache = forward_cached(model, w, e)?;
        let (r, k, _) = loss(cache.p, w.label, &cache.mu, &cache.lv);
        recon += r;
        kl += k;
    }
    Ok((recon / n, kl / n, (recon + kl) / n))
}

/// Exact gradients of the batch-mean L_total for every parameter.
///
/// Windows are processed in order and summed sequentially, so results are
/// bit-reproducible.
pub fn backward(
    model: &VaeLstmModel,
    windows: &[GripWindow],
    eps: &[Vec<f64>],
) -> Result<BatchGradients> {
    model.validate()?;
    if windows.is_empty() || windows.len() != eps.len() {
        return Err(Error::Parameter(format!(
            "batch of {} windows with {} epsilon draws",
            windows.len(),
            eps.len()
        )));
    }
    let n = windows.len() as f64;
    let mut grads = vec![0.0; PARAM_COUNT];
    let (mut recon_sum, mut kl_sum) = (0.0, 0.0);
    for (window, e) in windows.iter().zip(eps) {
        let cache = forward_cached(model, window, e)?;
        let (r, k, _) = loss(cache.p, window.label, &cache.mu, &cache.lv);
        recon_sum += r;
        kl_sum += k;

        let y = window.label as f64;
        let dlogit = cache.p - y;
        let hd = cache.dec.last_hidden(HIDDEN_DIM);
        let mut dhd = vec![0.0; HIDDEN_DIM];
        for k in 0..HIDDEN_DIM {
            grads[OUT_W + k] += dlogit * hd[k];
            dhd[k] = dlogit * model.params[OUT_W + k];
        }
        grads[OUT_B] += dlogit;

        let zs = vec![cache.z.clone(); WINDOW_STEPS];
        let dec_grads = lstm::lstm_backward(
            model.dec_wih(),
            model.dec_whh(),
            LATENT_DIM,
            HIDDEN_DIM,
            &zs,
            &cache.dec,
            &dhd,
        );
        for (g, d) in grads[DEC_WIH..DEC_WHH].iter_mut().zip(&dec_grads.wih) {
            *g += d;
        }
        for (g, d) in grads[DEC_WHH..DEC_B].iter_mut().zip(&dec_grads.whh) {
            *g += d;
        }
        for (g, d) in grads[DEC_B..OUT_W].iter_mut().zip(&dec_grads.bias) {
            *g += d;
        }
        let mut dz = vec![0.0; LATENT_DIM];
        for step in &dec_grads.xs {
            for (a, &b) in dz.iter_mut().zip(step) {
                *a += b;
            }
        }

        // Reparameterization plus the KL terms.
        let mut dmu = vec![0.0; LATENT_DIM];
        let mut dlv = vec![0.0; LATENT_DIM];
        for j in 0..LATENT_DIM {
            dmu[j] = dz[j] + cache.mu[j];
            dlv[j] = dz[j] * 0.5 * (0.5 * cache.lv[j]).exp() * e[j]
                + 0.5 * (cache.lv[j].exp() - 1.0);
        }

        let h = cache.enc.last_hidden(HIDDEN_DIM);
        let mut dh = vec![0.0; HIDDEN_DIM];
        for j in 0..LATENT_DIM {
            grads[MU_B + j] += dmu[j];
            grads[LV_B + j] += dlv[j];
            for k in 0..HIDDEN_DIM {
                grads[MU_W + j * HIDDEN_DIM + k] += dmu[j] * h[k];
                grads[LV_W + j * HIDDEN_DIM + k] += dlv[j] * h[k];
                dh[k] += model.params[MU_W + j * HIDDEN_DIM + k] * dmu[j]
                    + model.params[LV_W + j * HIDDEN_DIM + k] * dlv[j];
            }
        }

        let enc_grads = lstm::lstm_backward(
            model.enc_wih(),
            model.enc_whh(),
            INPUT_DIM,
            HIDDEN_DIM,
            &cache.xs,
            &cache.enc,
            &dh,
        );
        for (g, d) in grads[ENC_WIH..ENC_WHH].iter_mut().zip(&enc_grads.wih) {
            *g += d;
        }
        for (g, d) in grads[ENC_WHH..ENC_B].iter_mut().zip(&enc_grads.whh) {
            *g += d;
        }
        for (g, d) in grads[ENC_B..MU_W].iter_mut().zip(&enc_grads.bias) {
            *g += d;
        }
    }
    for g in grads.iter_mut() {
        *g /= n;
    }
    Ok(BatchGradients {
        grads,
        recon: recon_sum / n,
        kl: kl_sum / n,
        total: (recon_sum + kl_sum) / n,
    })
}

/// Training stage of the two-stage pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Pretrain,
    Finetune,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Held-out fraction of the dataset; the rest is the training split.
    pub test_fraction: f64,
    pub patience: usize,
    pub min_delta: f64,
    pub seed: u64,
    pub stage: Stage,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 100,
            learning_rate: 0.01,
            max_epochs: 100,
            test_fraction: 0.1,
            patience: 10,
            min_delta: 1e-4,
            seed: 7,
            stage: Stage::Pretrain,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Parameter("batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Parameter("learning_rate must be positive".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::Parameter("max_epochs must be positive".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Parameter(
                "test_fraction must be in (0, 1) so the split fractions sum to 1".into(),
            ));
        }
        if self.patience == 0 {
            return Err(Error::Parameter("patience must be positive".into()));
        }
        if !(self.min_delta >= 0.0) {
            return Err(Error::Parameter("min_delta must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Per-epoch curve point. Losses are eval-mode batch means; accuracy uses
/// the 0.5 threshold.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: VaeLstmModel,
    pub curves: Vec<EpochStats>,
    /// Epoch whose weights were kept (early-stopping selection).
    pub best_epoch: usize,
    /// Dataset indices of the training split.
    pub train_indices: Vec<usize>,
    /// Dataset indices of the held-out split.
    pub test_indices: Vec<usize>,
}

fn eval_split(model: &VaeLstmModel, windows: &[&GripWindow]) -> Result<(f64, f64)> {
    let mut total = 0.0;
    let mut correct = 0usize;
    for w in windows {
        let out = model.forward(w, ForwardMode::Eval)?;
        let (_, _, t) = loss(out.p, w.label, &out.mu, &out.logvar);
        total += t;
        if (out.p >= 0.5) == (w.label == 1) {
            correct += 1;
        }
    }
    let n = windows.len() as f64;
    Ok((total / n, correct as f64 / n))
}

/// Trains a model with adaptive-moment gradient descent, a seeded 90/10
/// shuffle split, and early stopping on held-out total loss.
///
/// `initial` supplies warm-start weights; the finetune stage requires it.
/// Normalization statistics are always recomputed on the new training split.
pub fn train(
    dataset: &[GripWindow],
    config: &TrainConfig,
    initial: Option<&VaeLstmModel>,
) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Parameter("empty training dataset".into()));
    }
    for w in dataset {
        w.validate()?;
    }
    if config.stage == Stage::Finetune && initial.is_none() {
        return Err(Error::Parameter(
            "finetune stage requires an initial model".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut indices: Vec<usize> = (0..dataset.len()).collect();
    indices.shuffle(&mut rng);
    let n_test = ((dataset.len() as f64 * config.test_fraction).round() as usize)
        .clamp(1, dataset.len().saturating_sub(1).max(1));
    if dataset.len() < 2 {
        return Err(Error::Parameter(
            "dataset too small for a train/test split".into(),
        ));
    }
    let (test_indices, train_indices) = indices.split_at(n_test);
    let (test_indices, train_indices) = (test_indices.to_vec(), train_indices.to_vec());
    let train_set: Vec<&GripWindow> = train_indices.iter().map(|&i| &dataset[i]).collect();
    let test_set: Vec<&GripWindow> = test_indices.iter().map(|&i| &dataset[i]).collect();

    let train_owned: Vec<GripWindow> = train_set.iter().map(|w| (*w).clone()).collect();
    let norm = NormStats::from_windows(&train_owned)?;
    let mut model = VaeLstmModel {
        params: match initial {
            Some(m) => {
                m.validate()?;
                m.params.clone()
            }
            None => VaeLstmModel::random(config.seed).params,
        },
        norm,
    };

    // Adaptive-moment state.
    let (beta1, beta2, adam_eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
    let mut m1 = vec![0.0; PARAM_COUNT];
    let mut m2 = vec![0.0; PARAM_COUNT];
    let mut step = 0u32;

    let mut curves = Vec::new();
    let mut best_loss = f64::INFINITY;
    let mut best_params = model.params.clone();
    let mut best_epoch = 0usize;
    let mut since_best = 0usize;

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 0..config.max_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<GripWindow> = chunk.iter().map(|&i| train_set[i].clone()).collect();
            let eps: Vec<Vec<f64>> = (0..batch.len())
                .map(|_| {
                    (0..LATENT_DIM)
                        .map(|_| standard_normal(&mut rng))
                        .collect()
                })
                .collect();
            let bg = backward(&model, &batch, &eps)?;
            step += 1;
            let bc1 = 1.0 - beta1.powi(step as i32);
            let bc2 = 1.0 - beta2.powi(step as i32);
            for k in 0..PARAM_COUNT {
                m1[k] = beta1 * m1[k] + (1.0 - beta1) * bg.grads[k];
                m2[k] = beta2 * m2[k] + (1.0 - beta2) * bg.grads[k] * bg.grads[k];
                let mhat = m1[k] / bc1;
                let vhat = m2[k] / bc2;
                model.params[k] -= config.learning_rate * mhat / (vhat.sqrt() + adam_eps);
            }
        }
        let (train_loss, train_accuracy) = eval_split(&model, &train_set)?;
        let (test_loss, test_accuracy) = eval_split(&model, &test_set)?;
        curves.push(EpochStats {
            epoch,
            train_loss,
            test_loss,
            train_accuracy,
            test_accuracy,
        });
        if test_loss < best_loss - config.min_delta {
            best_loss = test_loss;
            best_params = model.params.clone();
            best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                break;
            }
        }
    }
    model.params = best_params;
    Ok(TrainOutcome {
        model,
        curves,
        best_epoch,
        train_indices,
        test_indices,
    })
}

/// One standard-normal draw via Box-Muller on the loop's generator.
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
