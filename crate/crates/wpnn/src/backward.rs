//! Reverse-mode gradients through the full complex-valued physical graph.
//!
//! Complex quantities are treated as pairs of reals; a gradient matrix packs
//! `dL/dRe X + j dL/dIm X` entrywise. Under that convention a constant linear
//! map `Y = A X` pulls back as `g_X = Aᴴ g_Y`, a weight `Y = Z U` collects
//! `g_Z = g_Y Uᴴ`, a phase diagonal contributes `Re(conj(g) · j e^{jθ} p)` to
//! its angle, and the power normalization gets the full quotient rule.
//! Channel and noise draws are constants of the pass.

use num_complex::Complex;

use crate::config::ExperimentConfig;
use crate::forward::{ForwardCache, LayerCache};
use crate::matrix::{ComplexMatrix, Cplx};
use crate::nonlinear::activation_backward;
use crate::params::{FixedPropagation, ModelParams};
use crate::scalar::{fl, Scalar};

/// Gradients with the same shapes as [`ModelParams`]; complex parameters
/// carry (d/dRe, d/dIm) packed as complex numbers.
#[derive(Debug, Clone)]
pub struct GradientSet<F> {
    pub theta_t: Vec<Vec<F>>,
    pub theta_r: Vec<Vec<F>>,
    pub b_t: Vec<Vec<Cplx<F>>>,
    pub b_r: Vec<Vec<Cplx<F>>>,
    pub z: Option<ComplexMatrix<F>>,
    pub b_s: Vec<Cplx<F>>,
    pub fc_weight: Vec<F>,
    pub fc_bias: Vec<F>,
}

impl<F: Scalar> GradientSet<F> {
    pub fn zeros_like(params: &ModelParams<F>) -> Self {
        let zero = Complex::new(F::zero(), F::zero());
        Self {
            theta_t: params.theta_t.iter().map(|r| vec![F::zero(); r.len()]).collect(),
            theta_r: params.theta_r.iter().map(|r| vec![F::zero(); r.len()]).collect(),
            b_t: params.b_t.iter().map(|r| vec![zero; r.len()]).collect(),
            b_r: params.b_r.iter().map(|r| vec![zero; r.len()]).collect(),
            z: params.z.as_ref().map(|z| ComplexMatrix::zeros(z.rows(), z.cols())),
            b_s: vec![zero; params.b_s.len()],
            fc_weight: vec![F::zero(); params.fc_weight.len()],
            fc_bias: vec![F::zero(); params.fc_bias.len()],
        }
    }

    /// Same canonical flat ordering as [`ModelParams::flatten`].
    pub fn flatten(&self) -> Vec<F> {
        let mut out = Vec::new();
        for row in &self.theta_t {
            out.extend_from_slice(row);
        }
        for row in &self.theta_r {
            out.extend_from_slice(row);
        }
        for row in &self.b_t {
            for c in row {
                out.push(c.re);
                out.push(c.im);
            }
        }
        for row in &self.b_r {
            for c in row {
                out.push(c.re);
                out.push(c.im);
            }
        }
        if let Some(z) = &self.z {
            for c in z.entries() {
                out.push(c.re);
                out.push(c.im);
            }
        }
        for c in &self.b_s {
            out.push(c.re);
            out.push(c.im);
        }
        out.extend_from_slice(&self.fc_weight);
        out.extend_from_slice(&self.fc_bias);
        out
    }

    /// `self += other`, used for batch accumulation in a fixed order.
    pub fn accumulate(&mut self, other: &Self) {
        fn add_rows<T: Copy + std::ops::AddAssign>(a: &mut [Vec<T>], b: &[Vec<T>]) {
            for (ra, rb) in a.iter_mut().zip(b) {
                for (x, y) in ra.iter_mut().zip(rb) {
                    *x += *y;
                }
            }
        }
        add_rows(&mut self.theta_t, &other.theta_t);
        add_rows(&mut self.theta_r, &other.theta_r);
        add_rows(&mut self.b_t, &other.b_t);
        add_rows(&mut self.b_r, &other.b_r);
        if let (Some(a), Some(b)) = (&mut self.z, &other.z) {
            for (x, y) in a.entries_mut().iter_mut().zip(b.entries()) {
                *x += *y;
            }
        }
        for (x, y) in self.b_s.iter_mut().zip(&other.b_s) {
            *x += *y;
        }
        for (x, y) in self.fc_weight.iter_mut().zip(&other.fc_weight) {
            *x += *y;
        }
        for (x, y) in self.fc_bias.iter_mut().zip(&other.fc_bias) {
            *x += *y;
        }
    }

    /// Scale every gradient entry (e.g. by 1/batch).
    pub fn scale(&mut self, s: F) {
        for row in self.theta_t.iter_mut().chain(self.theta_r.iter_mut()) {
            for x in row.iter_mut() {
                *x = *x * s;
            }
        }
        for row in self.b_t.iter_mut().chain(self.b_r.iter_mut()) {
            for x in row.iter_mut() {
                *x = Complex::new(x.re * s, x.im * s);
            }
        }
        if let Some(z) = &mut self.z {
            for x in z.entries_mut() {
                *x = Complex::new(x.re * s, x.im * s);
            }
        }
        for x in self.b_s.iter_mut() {
            *x = Complex::new(x.re * s, x.im * s);
        }
        for x in self.fc_weight.iter_mut().chain(self.fc_bias.iter_mut()) {
            *x = *x * s;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.flatten().iter().all(|x| x.is_finite())
    }
}

/// Numerically stable softmax cross-entropy: the loss and the predictive
/// distribution.
pub fn softmax_cross_entropy<F: Scalar>(logits: &[F], label: usize) -> (F, Vec<F>) {
    assert!(label < logits.len(), "label {label} out of range for {} classes", logits.len());
    let max = logits.iter().copied().fold(F::neg_infinity(), F::max);
    let exps: Vec<F> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum = exps.iter().copied().fold(F::zero(), |a, b| a + b);
    let probs: Vec<F> = exps.iter().map(|&e| e / sum).collect();
    let loss = sum.ln() - (logits[label] - max);
    (loss, probs)
}

fn row_sums<F: Scalar>(g: &ComplexMatrix<F>) -> Vec<Cplx<F>> {
    (0..g.rows())
        .map(|m| {
            g.row(m)
                .iter()
                .fold(Complex::new(F::zero(), F::zero()), |a, &b| a + b)
        })
        .collect()
}

fn conj_scale_rows<F: Scalar>(x: &ComplexMatrix<F>, diag: &[Cplx<F>]) -> ComplexMatrix<F> {
    let mut out = x.clone();
    let cols = out.cols();
    for (m, d) in diag.iter().enumerate() {
        let dc = d.conj();
        for v in &mut out.entries_mut()[m * cols..(m + 1) * cols] {
            *v *= dc;
        }
    }
    out
}

/// Quotient-rule pullback of `y = x / scale`, `scale = sqrt(mean |x|²)`.
fn normalize_backward<F: Scalar>(
    x: &ComplexMatrix<F>,
    y: &ComplexMatrix<F>,
    scale: F,
    g_y: &ComplexMatrix<F>,
) -> ComplexMatrix<F> {
    if scale == F::one() && x == y {
        // All-zero guard branch: normalization was a no-op.
        return g_y.clone();
    }
    let n = fl::<F>(x.entries().len() as f64);
    let dl_ds = -g_y
        .entries()
        .iter()
        .zip(y.entries())
        .map(|(g, v)| g.re * v.re + g.im * v.im)
        .fold(F::zero(), |a, b| a + b)
        / scale;
    let coeff = dl_ds / (n * scale);
    let mut out = g_y.scale_re(F::one() / scale);
    for (o, &xv) in out.entries_mut().iter_mut().zip(x.entries()) {
        *o += Complex::new(xv.re * coeff, xv.im * coeff);
    }
    out
}

/// One stack's reverse sweep; returns the gradient at the stack input.
fn stack_backward<F: Scalar>(
    layers: &[LayerCache<F>],
    ws: &[ComplexMatrix<F>],
    theta: &[Vec<F>],
    g_theta: &mut [Vec<F>],
    g_bias: &mut [Vec<Cplx<F>>],
    cfg: &ExperimentConfig,
    g_out: ComplexMatrix<F>,
) -> ComplexMatrix<F> {
    let mode = cfg.scheme.activation_mode();
    let mut g = g_out;
    for l in (0..layers.len()).rev() {
        let layer = &layers[l];
        let g_pre = activation_backward(&layer.pre, &g, mode, &cfg.activation);
        for (acc, v) in g_bias[l].iter_mut().zip(row_sums(&g_pre)) {
            *acc += v;
        }
        let g_rotated = ws[2 * l + 1].adjoint().matmul(&g_pre);
        let diag = ModelParams::phase_diag(&theta[l]);
        for m in 0..diag.len() {
            let mut acc = F::zero();
            for k in 0..g_rotated.cols() {
                let d_rk = Complex::new(F::zero(), F::one()) * diag[m] * layer.phase_in.get(m, k);
                let gv = g_rotated.get(m, k);
                acc = acc + gv.re * d_rk.re + gv.im * d_rk.im;
            }
            g_theta[l][m] = g_theta[l][m] + acc;
        }
        let g_phase_in = conj_scale_rows(&g_rotated, &diag);
        g = ws[2 * l].adjoint().matmul(&g_phase_in);
    }
    g
}

/// Exact gradient of the scalar cross-entropy loss for one cached pass.
pub fn backward<F: Scalar>(
    cache: &ForwardCache<F>,
    label: usize,
    params: &ModelParams<F>,
    fixed: &FixedPropagation<F>,
    cfg: &ExperimentConfig,
) -> GradientSet<F> {
    let mut grads = GradientSet::zeros_like(params);
    let (_, probs) = softmax_cross_entropy(&cache.logits, label);

    // Head: g_logits = probs - onehot.
    let flen = cfg.feature_len();
    let mut g_features = vec![F::zero(); flen];
    for c in 0..cfg.num_classes {
        let g_l = probs[c] - if c == label { F::one() } else { F::zero() };
        grads.fc_bias[c] = g_l;
        let wrow = &params.fc_weight[c * flen..(c + 1) * flen];
        let grow = &mut grads.fc_weight[c * flen..(c + 1) * flen];
        for j in 0..flen {
            grow[j] = g_l * cache.features[j];
            g_features[j] = g_features[j] + wrow[j] * g_l;
        }
    }

    // Features were (all Re, all Im) over S_r's row-major entries.
    let half = flen / 2;
    let g_s_r = ComplexMatrix::from_fn(cfg.n_r, cfg.k(), |i, j| {
        let idx = i * cfg.k() + j;
        Complex::new(g_features[idx], g_features[half + idx])
    });

    // Receive stack (additive receive noise passes gradients through).
    let g_x_l = fixed.rx[2 * cfg.l].adjoint().matmul(&g_s_r);
    let g_x0_r = stack_backward(
        &cache.rx_layers,
        &fixed.rx[..2 * cfg.l],
        &params.theta_r,
        &mut grads.theta_r,
        &mut grads.b_r,
        cfg,
        g_x_l,
    );

    let g_s_t = if let Some(relay) = &cache.relay {
        let channel = cache.channel.as_ref().expect("relay cache without channel");
        let g_s_s_norm = channel.g_r.adjoint().matmul(&g_x0_r);
        let g_s_s = if cfg.normalize_power {
            normalize_backward(
                &relay.s_s,
                cache.s_s_norm.as_ref().unwrap(),
                cache.scale_s,
                &g_s_s_norm,
            )
        } else {
            g_s_s_norm
        };
        let g_pre = activation_backward(&relay.pre, &g_s_s, cfg.scheme.pa_mode(), &cfg.pa);
        for (acc, v) in grads.b_s.iter_mut().zip(row_sums(&g_pre)) {
            *acc += v;
        }
        let amp_in = relay.s_t_hat.as_ref().unwrap_or(&relay.y_t);
        let g_z = g_pre.matmul(&amp_in.adjoint());
        if let Some(z_acc) = &mut grads.z {
            for (a, b) in z_acc.entries_mut().iter_mut().zip(g_z.entries()) {
                *a += *b;
            }
        }
        let g_amp_in = params.z.as_ref().unwrap().adjoint().matmul(&g_pre);
        let g_y_t = if cfg.scheme.uses_channel_processing() {
            channel.g_t_pinv.as_ref().unwrap().adjoint().matmul(&g_amp_in)
        } else {
            g_amp_in
        };
        let g_s_t_norm = channel.g_t.adjoint().matmul(&g_y_t);
        let s_t = &cache.tx_layers.last().expect("transmit stack nonempty").post;
        if cfg.normalize_power {
            normalize_backward(s_t, &cache.s_t_norm, cache.scale_t, &g_s_t_norm)
        } else {
            g_s_t_norm
        }
    } else {
        // Directly connected stacks: X_0^r was S_t itself.
        g_x0_r
    };

    let _g_s_c = stack_backward(
        &cache.tx_layers,
        &fixed.tx,
        &params.theta_t,
        &mut grads.theta_t,
        &mut grads.b_t,
        cfg,
        g_s_t,
    );
    grads
}
