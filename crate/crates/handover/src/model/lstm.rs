//! Single-layer LSTM forward/backward used by both the encoder and the
//! decoder. Weights live in flat slices; gate order is input, forget,
//! candidate, output, each a block of `hidden` rows.

pub(crate) fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Per-step values the backward pass needs.
#[derive(Debug, Clone)]
pub(crate) struct StepCache {
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub o: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct LstmCache {
    pub steps: Vec<StepCache>,
}

impl LstmCache {
    pub fn last_hidden(&self, hidden: usize) -> Vec<f64> {
        self.steps
            .last()
            .map(|s| s.h.clone())
            .unwrap_or_else(|| vec![0.0; hidden])
    }
}

/// Runs the LSTM over `xs` from zero initial state, returning all caches.
pub(crate) fn lstm_forward(
    wih: &[f64],
    whh: &[f64],
    bias: &[f64],
    input: usize,
    hidden: usize,
    xs: &[Vec<f64>],
) -> LstmCache {
    debug_assert_eq!(wih.len(), 4 * hidden * input);
    debug_assert_eq!(whh.len(), 4 * hidden * hidden);
    debug_assert_eq!(bias.len(), 4 * hidden);
    let mut h_prev = vec![0.0; hidden];
    let mut c_prev = vec![0.0; hidden];
    let mut steps = Vec::with_capacity(xs.len());
    let mut pre = vec![0.0; 4 * hidden];
    for x in xs {
        for (r, p) in pre.iter_mut().enumerate() {
            let mut acc = bias[r];
            let wrow = &wih[r * input..(r + 1) * input];
            for (c, &xc) in x.iter().enumerate() {
                acc += wrow[c] * xc;
            }
            let urow = &whh[r * hidden..(r + 1) * hidden];
            for (c, &hc) in h_prev.iter().enumerate() {
                acc += urow[c] * hc;
            }
            *p = acc;
        }
        let mut step = StepCache {
            i: vec![0.0; hidden],
            f: vec![0.0; hidden],
            g: vec![0.0; hidden],
            o: vec![0.0; hidden],
            c: vec![0.0; hidden],
            tanh_c: vec![0.0; hidden],
            h: vec![0.0; hidden],
        };
        for j in 0..hidden {
            step.i[j] = sigmoid(pre[j]);
            step.f[j] = sigmoid(pre[hidden + j]);
            step.g[j] = pre[2 * hidden + j].tanh();
            step.o[j] = sigmoid(pre[3 * hidden + j]);
            step.c[j] = step.f[j] * c_prev[j] + step.i[j] * step.g[j];
            step.tanh_c[j] = step.c[j].tanh();
            step.h[j] = step.o[j] * step.tanh_c[j];
        }
        h_prev.copy_from_slice(&step.h);
        c_prev.copy_from_slice(&step.c);
        steps.push(step);
    }
    LstmCache { steps }
}

/// Gradients accumulated by one backward sweep.
pub(crate) struct LstmGrads {
    pub wih: Vec<f64>,
    pub whh: Vec<f64>,
    pub bias: Vec<f64>,
    /// Gradient w.r.t. each input vector.
    pub xs: Vec<Vec<f64>>,
}

/// Backpropagation through time. `dh_last` is the loss gradient w.r.t. the
/// final hidden state; intermediate hidden states receive gradient only
/// through the recurrence.
pub(crate) fn lstm_backward(
    wih: &[f64],
    whh: &[f64],
    input: usize,
    hidden: usize,
    xs: &[Vec<f64>],
    cache: &LstmCache,
    dh_last: &[f64],
) -> LstmGrads {
    let mut grads = LstmGrads {
        wih: vec![0.0; 4 * hidden * input],
        whh: vec![0.0; 4 * hidden * hidden],
        bias: vec![0.0; 4 * hidden],
        xs: vec![vec![0.0; input]; xs.len()],
    };
    let mut dh = dh_last.to_vec();
    let mut dc = vec![0.0; hidden];
    let mut dpre = vec![0.0; 4 * hidden];
    for t in (0..xs.len()).rev() {
        let step = &cache.steps[t];
        let c_prev: &[f64] = if t == 0 {
            &[]
        } else {
            &cache.steps[t - 1].c
        };
        let h_prev: &[f64] = if t == 0 {
            &[]
        } else {
            &cache.steps[t - 1].h
        };
        for j in 0..hidden {
            let do_j = dh[j] * step.tanh_c[j];
            let dc_j = dc[j] + dh[j] * step.o[j] * (1.0 - step.tanh_c[j] * step.tanh_c[j]);
            let di_j = dc_j * step.g[j];
            let dg_j = dc_j * step.i[j];
            let cp = if t == 0 { 0.0 } else { c_prev[j] };
            let df_j = dc_j * cp;
            dc[j] = dc_j * step.f[j];
            dpre[j] = di_j * step.i[j] * (1.0 - step.i[j]);
            dpre[hidden + j] = df_j * step.f[j] * (1.0 - step.f[j]);
            dpre[2 * hidden + j] = dg_j * (1.0 - step.g[j] * step.g[j]);
            dpre[3 * hidden + j] = do_j * step.o[j] * (1.0 - step.o[j]);
        }
        for (r, &dp) in dpre.iter().enumerate() {
            grads.bias[r] += dp;
            let wrow = r * input;
            for (c, &xc) in xs[t].iter().enumerate() {
                grads.wih[wrow + c] += dp * xc;
            }
            if t > 0 {
                let urow = r * hidden;
                for (c, &hc) in h_prev.iter().enumerate() {
                    grads.whh[urow + c] += dp * hc;
                }
            }
        }
        // dx_t = Wih^T dpre; dh_prev = Whh^T dpre.
        for c in 0..input {
            let mut acc = 0.0;
            for (r, &dp) in dpre.iter().enumerate() {
                acc += wih[r * input + c] * dp;
            }
            grads.xs[t][c] = acc;
        }
        for h in dh.iter_mut() {
            *h = 0.0;
        }
        for (r, &dp) in dpre.iter().enumerate() {
            let urow = r * hidden;
            for (c, dh_c) in dh.iter_mut().enumerate() {
                *dh_c += whh[urow + c] * dp;
            }
        }
    }
    grads
}
