//! End-to-end physical forward pass: image packing, both metasurface stacks,
//! the relay hop, and the classifier head.
//!
//! Every intermediate needed by the reverse pass is retained in a
//! [`ForwardCache`]; given a channel draw and a noise draw the pass is a pure
//! function, which is what the finite-difference gradient checks rely on.

use num_complex::Complex;

use crate::channel::{snr_to_sigma2, ChannelDraw};
use crate::config::ExperimentConfig;
use crate::matrix::{ComplexMatrix, Cplx};
use crate::nonlinear::activation_apply;
use crate::params::{FixedPropagation, ModelParams};
use crate::rng::SeededRng;
use crate::scalar::{fl, Scalar};

/// Frozen additive-noise realizations for one pass.
#[derive(Debug, Clone)]
pub struct NoiseDraw<F> {
    /// Noise at the relay antennas (N_s x K), absent when σ² = 0 or no relay.
    pub n_t: Option<ComplexMatrix<F>>,
    /// Noise at the receive antennas (N_r x K).
    pub n_r: Option<ComplexMatrix<F>>,
}

impl<F: Scalar> NoiseDraw<F> {
    /// No noise (the no-relay schemes, and σ² = 0).
    pub fn none() -> Self {
        Self { n_t: None, n_r: None }
    }

    /// Sample both noise matrices from one stream. The no-relay schemes are
    /// noiseless by construction.
    pub fn sample(cfg: &ExperimentConfig, rng: &mut SeededRng) -> Self {
        let sigma2 = fl::<F>(snr_to_sigma2(cfg.snr_db));
        if !cfg.scheme.uses_relay() || sigma2 == F::zero() {
            return Self::none();
        }
        let k = cfg.k();
        Self {
            n_t: Some(rng.complex_gaussian_matrix(cfg.n_s, k, sigma2)),
            n_r: Some(rng.complex_gaussian_matrix(cfg.n_r, k, sigma2)),
        }
    }
}

/// Cached tensors of one metasurface layer pair.
#[derive(Debug, Clone)]
pub struct LayerCache<F> {
    /// Input to the phase diagonal: W_{2l-1} X_{l-1}.
    pub phase_in: ComplexMatrix<F>,
    /// Pre-activation: W_{2l} Θ_l W_{2l-1} X_{l-1} + b_l 1ᵀ.
    pub pre: ComplexMatrix<F>,
    /// Layer output X_l.
    pub post: ComplexMatrix<F>,
}

/// Relay-stage intermediates.
#[derive(Debug, Clone)]
pub struct RelayCache<F> {
    /// Received signal Y_t = G_t S_t + N_t.
    pub y_t: ComplexMatrix<F>,
    /// Least-squares estimate G_t† Y_t (absent without channel processing).
    pub s_t_hat: Option<ComplexMatrix<F>>,
    /// Amplifier input Z U + b_s 1ᵀ.
    pub pre: ComplexMatrix<F>,
    /// Relay output S_s.
    pub s_s: ComplexMatrix<F>,
}

/// Every intermediate of one forward pass, sufficient to reproduce the output
/// and to drive the reverse pass without recomputation.
#[derive(Debug, Clone)]
pub struct ForwardCache<F> {
    pub s_c: ComplexMatrix<F>,
    pub tx_layers: Vec<LayerCache<F>>,
    /// Power-normalization scale applied to S_t (1 when disabled).
    pub scale_t: F,
    pub s_t_norm: ComplexMatrix<F>,
    pub relay: Option<RelayCache<F>>,
    /// Power-normalization scale applied to S_s (1 when disabled).
    pub scale_s: F,
    pub s_s_norm: Option<ComplexMatrix<F>>,
    /// Input to the receive-side stack.
    pub x0_r: ComplexMatrix<F>,
    pub rx_layers: Vec<LayerCache<F>>,
    pub s_r: ComplexMatrix<F>,
    pub features: Vec<F>,
    pub logits: Vec<F>,
    pub channel: Option<ChannelDraw<F>>,
    pub noise: NoiseDraw<F>,
}

/// Map a flattened [0,1] pixel vector into the complex transmit matrix
/// (N_t x K): first half of the (zero-padded) values are real parts, second
/// half imaginary parts, filled column-major.
pub fn pack_image<F: Scalar>(pixels: &[F], cfg: &ExperimentConfig) -> ComplexMatrix<F> {
    assert_eq!(
        pixels.len(),
        cfg.pixel_count(),
        "pixel count {} does not match config C*H*W = {}",
        pixels.len(),
        cfg.pixel_count()
    );
    let (n_t, k) = (cfg.n_t, cfg.k());
    let half = n_t * k;
    let at = |i: usize| if i < pixels.len() { pixels[i] } else { F::zero() };
    ComplexMatrix::from_fn(n_t, k, |row, col| {
        let c = col * n_t + row;
        Complex::new(at(c), at(half + c))
    })
}

/// Inverse of [`pack_image`] (padding dropped).
pub fn unpack_image<F: Scalar>(mat: &ComplexMatrix<F>, cfg: &ExperimentConfig) -> Vec<F> {
    let (n_t, k) = (cfg.n_t, cfg.k());
    assert_eq!(mat.shape(), (n_t, k), "unpack shape mismatch");
    let half = n_t * k;
    let mut vals = vec![F::zero(); 2 * half];
    for col in 0..k {
        for row in 0..n_t {
            let c = col * n_t + row;
            let v = mat.get(row, col);
            vals[c] = v.re;
            vals[half + c] = v.im;
        }
    }
    vals.truncate(cfg.pixel_count());
    vals
}

/// Scale a matrix to unit mean power; returns the scaled matrix and the
/// scale. All-zero input is returned unchanged with scale 1.
pub fn normalize_power<F: Scalar>(x: &ComplexMatrix<F>) -> (ComplexMatrix<F>, F) {
    let scale = x.mean_power().sqrt();
    if scale == F::zero() {
        return (x.clone(), F::one());
    }
    (x.scale_re(F::one() / scale), scale)
}

fn add_col_broadcast<F: Scalar>(x: &ComplexMatrix<F>, bias: &[Cplx<F>]) -> ComplexMatrix<F> {
    assert_eq!(x.rows(), bias.len(), "bias length {} vs {} rows", bias.len(), x.rows());
    let mut out = x.clone();
    let cols = out.cols();
    for (m, &b) in bias.iter().enumerate() {
        for v in &mut out.entries_mut()[m * cols..(m + 1) * cols] {
            *v += b;
        }
    }
    out
}

fn scale_rows<F: Scalar>(x: &ComplexMatrix<F>, diag: &[Cplx<F>]) -> ComplexMatrix<F> {
    assert_eq!(x.rows(), diag.len(), "diag length {} vs {} rows", diag.len(), x.rows());
    let mut out = x.clone();
    let cols = out.cols();
    for (m, &d) in diag.iter().enumerate() {
        for v in &mut out.entries_mut()[m * cols..(m + 1) * cols] {
            *v *= d;
        }
    }
    out
}

/// One stack of L (passive, activation) layer pairs:
/// `X_l = π(W_{2l} Θ_l W_{2l-1} X_{l-1} + b_l 1ᵀ)`.
fn stack_forward<F: Scalar>(
    x0: &ComplexMatrix<F>,
    ws: &[ComplexMatrix<F>],
    theta: &[Vec<F>],
    biases: &[Vec<Cplx<F>>],
    cfg: &ExperimentConfig,
) -> Vec<LayerCache<F>> {
    let mode = cfg.scheme.activation_mode();
    let layers = theta.len();
    let mut caches = Vec::with_capacity(layers);
    let mut x = x0.clone();
    for l in 0..layers {
        let phase_in = ws[2 * l].matmul(&x);
        let rotated = scale_rows(&phase_in, &ModelParams::phase_diag(&theta[l]));
        let pre = add_col_broadcast(&ws[2 * l + 1].matmul(&rotated), &biases[l]);
        let post = activation_apply(&pre, mode, &cfg.activation);
        x = post.clone();
        caches.push(LayerCache { phase_in, pre, post });
    }
    caches
}

/// Transmit-side stack: S_c in, S_t = X_L out.
pub fn tx_sim_forward<F: Scalar>(
    s_c: &ComplexMatrix<F>,
    params: &ModelParams<F>,
    fixed: &FixedPropagation<F>,
    cfg: &ExperimentConfig,
) -> Vec<LayerCache<F>> {
    assert_eq!(s_c.shape(), (cfg.n_t, cfg.k()), "transmit input shape");
    stack_forward(s_c, &fixed.tx, &params.theta_t, &params.b_t, cfg)
}

/// Relay stage: receive over G_t, optionally least-squares estimate, then
/// amplify through the (possibly saturating) power amplifier.
pub fn relay_forward<F: Scalar>(
    s_t_norm: &ComplexMatrix<F>,
    params: &ModelParams<F>,
    cfg: &ExperimentConfig,
    channel: &ChannelDraw<F>,
    noise: &NoiseDraw<F>,
) -> RelayCache<F> {
    let mut y_t = channel.g_t.matmul(s_t_norm);
    if let Some(n_t) = &noise.n_t {
        y_t = y_t.add(n_t);
    }
    let s_t_hat = if cfg.scheme.uses_channel_processing() {
        let pinv = channel.g_t_pinv.as_ref().expect("pseudoinverse present for CP schemes");
        Some(pinv.matmul(&y_t))
    } else {
        None
    };
    let z = params.z.as_ref().expect("relay matrix present for relay schemes");
    let amp_in = s_t_hat.as_ref().unwrap_or(&y_t);
    let pre = add_col_broadcast(&z.matmul(amp_in), &params.b_s);
    let s_s = activation_apply(&pre, cfg.scheme.pa_mode(), &cfg.pa);
    RelayCache { y_t, s_t_hat, pre, s_s }
}

/// Receive-side stack: X_0^r in, S_r = W_{2L+1} X_L^r + N_r out.
pub fn rx_sim_forward<F: Scalar>(
    x0_r: &ComplexMatrix<F>,
    params: &ModelParams<F>,
    fixed: &FixedPropagation<F>,
    cfg: &ExperimentConfig,
    noise: &NoiseDraw<F>,
) -> (Vec<LayerCache<F>>, ComplexMatrix<F>) {
    let layers = stack_forward(x0_r, &fixed.rx[..2 * cfg.l], &params.theta_r, &params.b_r, cfg);
    let x_l = layers.last().map(|c| &c.post).unwrap_or(x0_r);
    let mut s_r = fixed.rx[2 * cfg.l].matmul(x_l);
    if let Some(n_r) = &noise.n_r {
        s_r = s_r.add(n_r);
    }
    (layers, s_r)
}

/// Flatten S_r into (Re, Im) features and apply the linear classifier head.
pub fn classify_head<F: Scalar>(
    s_r: &ComplexMatrix<F>,
    params: &ModelParams<F>,
    cfg: &ExperimentConfig,
) -> (Vec<F>, Vec<F>) {
    assert_eq!(s_r.shape(), (cfg.n_r, cfg.k()), "classifier input shape");
    let half = cfg.n_r * cfg.k();
    let mut features = Vec::with_capacity(2 * half);
    features.extend(s_r.entries().iter().map(|c| c.re));
    features.extend(s_r.entries().iter().map(|c| c.im));
    let flen = cfg.feature_len();
    let logits = (0..cfg.num_classes)
        .map(|c| {
            let row = &params.fc_weight[c * flen..(c + 1) * flen];
            let dot = row.iter().zip(&features).map(|(&w, &f)| w * f).fold(F::zero(), |a, b| a + b);
            dot + params.fc_bias[c]
        })
        .collect();
    (features, logits)
}

/// Full forward pass for any scheme. Relay schemes need a channel draw; the
/// noise draw is always explicit so a pass can be replayed exactly.
pub fn forward<F: Scalar>(
    s_c: &ComplexMatrix<F>,
    params: &ModelParams<F>,
    fixed: &FixedPropagation<F>,
    cfg: &ExperimentConfig,
    channel: Option<&ChannelDraw<F>>,
    noise: &NoiseDraw<F>,
) -> ForwardCache<F> {
    let tx_layers = tx_sim_forward(s_c, params, fixed, cfg);
    let s_t = tx_layers.last().map(|c| c.post.clone()).unwrap_or_else(|| s_c.clone());

    if cfg.scheme.uses_relay() {
        let channel = channel.expect("relay schemes need a channel draw");
        let (s_t_norm, scale_t) =
            if cfg.normalize_power { normalize_power(&s_t) } else { (s_t.clone(), F::one()) };
        let relay = relay_forward(&s_t_norm, params, cfg, channel, noise);
        let (s_s_norm, scale_s) = if cfg.normalize_power {
            normalize_power(&relay.s_s)
        } else {
            (relay.s_s.clone(), F::one())
        };
        let x0_r = channel.g_r.matmul(&s_s_norm);
        let (rx_layers, s_r) = rx_sim_forward(&x0_r, params, fixed, cfg, noise);
        let (features, logits) = classify_head(&s_r, params, cfg);
        ForwardCache {
            s_c: s_c.clone(),
            tx_layers,
            scale_t,
            s_t_norm,
            relay: Some(relay),
            scale_s,
            s_s_norm: Some(s_s_norm),
            x0_r,
            rx_layers,
            s_r,
            features,
            logits,
            channel: Some(channel.clone()),
            noise: noise.clone(),
        }
    } else {
        // Directly connected stacks: no fading, no relay, no noise.
        let x0_r = s_t;
        let (rx_layers, s_r) = rx_sim_forward(&x0_r, params, fixed, cfg, &NoiseDraw::none());
        let (features, logits) = classify_head(&s_r, params, cfg);
        ForwardCache {
            s_c: s_c.clone(),
            tx_layers,
            scale_t: F::one(),
            s_t_norm: x0_r.clone(),
            relay: None,
            scale_s: F::one(),
            s_s_norm: None,
            x0_r,
            rx_layers,
            s_r,
            features,
            logits,
            channel: None,
            noise: NoiseDraw::none(),
        }
    }
}
