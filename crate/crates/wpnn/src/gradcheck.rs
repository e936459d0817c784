//! Finite-difference verification of the analytic gradients.
//!
//! On a tiny configuration with frozen channel and noise draws, every real
//! parameter of every scheme is perturbed centrally and compared against the
//! reverse-mode gradient. This is the keystone correctness check; the CLI
//! exposes it as `gradcheck` and the acceptance suite runs it verbatim.

use crate::backward::{backward, softmax_cross_entropy};
use crate::channel::{draw_channels, ChannelDraw};
use crate::config::{ExperimentConfig, Scheme};
use crate::forward::{forward, pack_image, NoiseDraw};
use crate::params::{FixedPropagation, ModelParams};
use crate::rng::SeededRng;

/// Relative-error floor: differences below this magnitude are dominated by
/// finite-difference truncation noise rather than gradient error.
const REL_FLOOR: f64 = 1e-4;

/// Per-scheme outcome of one gradient check.
#[derive(Debug, Clone)]
pub struct SchemeCheck {
    pub scheme: Scheme,
    pub params_checked: usize,
    pub max_rel_err: f64,
    pub worst_index: usize,
}

/// Outcome across all schemes.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub schemes: Vec<SchemeCheck>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.schemes.iter().all(|s| s.max_rel_err < self.tolerance)
    }

    pub fn max_rel_err(&self) -> f64 {
        self.schemes.iter().map(|s| s.max_rel_err).fold(0.0, f64::max)
    }
}

/// The tiny configuration used for gradient checking:
/// N_t = N_s = N_r = 2, M = 4, K = 3, L = 1.
pub fn tiny_config(scheme: Scheme) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default_for(scheme);
    cfg.n_t = 2;
    cfg.n_s = 2;
    cfg.n_r = 2;
    cfg.m = 4;
    cfg.l = 1;
    cfg.channels = 1;
    cfg.height = 3;
    cfg.width = 4;
    cfg.snr_db = 0.0;
    cfg
}

/// Check one scheme; returns the worst relative error over all parameters.
pub fn check_scheme(cfg: &ExperimentConfig, seed: u64) -> SchemeCheck {
    let root = SeededRng::from_seed(seed);
    let mut params = ModelParams::<f64>::init(cfg, &mut root.stream("init"));
    let fixed = FixedPropagation::build(cfg);
    let channel: Option<ChannelDraw<f64>> = if cfg.scheme.uses_relay() {
        Some(draw_channels(cfg, &mut root.stream("channel"), 0).unwrap())
    } else {
        None
    };
    let noise = NoiseDraw::sample(cfg, &mut root.stream("noise"));
    let mut pix_rng = root.stream("pix");
    let pixels: Vec<f64> =
        (0..cfg.pixel_count()).map(|_| pix_rng.uniform(0.0, 1.0)).collect();
    let s_c = pack_image(&pixels, cfg);
    let label = 3usize;

    let cache = forward(&s_c, &params, &fixed, cfg, channel.as_ref(), &noise);
    let analytic = backward(&cache, label, &params, &fixed, cfg).flatten();

    let flat = params.flatten();
    let loss_at = |p: &[f64], params: &mut ModelParams<f64>| -> f64 {
        params.set_from_flat(p);
        let cache = forward(&s_c, params, &fixed, cfg, channel.as_ref(), &noise);
        let (loss, _) = softmax_cross_entropy(&cache.logits, label);
        loss
    };

    let mut max_rel = 0.0f64;
    let mut worst = 0usize;
    let mut perturbed = flat.clone();
    for i in 0..flat.len() {
        let h = 1e-5 * flat[i].abs().max(1.0);
        perturbed[i] = flat[i] + h;
        let up = loss_at(&perturbed, &mut params);
        perturbed[i] = flat[i] - h;
        let down = loss_at(&perturbed, &mut params);
        perturbed[i] = flat[i];
        let fd = (up - down) / (2.0 * h);
        let denom = analytic[i].abs().max(fd.abs()).max(REL_FLOOR);
        let rel = (analytic[i] - fd).abs() / denom;
        if rel > max_rel {
            max_rel = rel;
            worst = i;
        }
    }
    params.set_from_flat(&flat);
    SchemeCheck { scheme: cfg.scheme, params_checked: flat.len(), max_rel_err: max_rel, worst_index: worst }
}

/// Run the full check over every scheme on the tiny configuration.
pub fn run_gradcheck(seed: u64, tolerance: f64) -> GradCheckReport {
    let schemes = Scheme::ALL
        .iter()
        .map(|&scheme| check_scheme(&tiny_config(scheme), seed))
        .collect();
    GradCheckReport { tolerance, schemes }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_schemes_match_finite_differences() {
        let report = run_gradcheck(12345, 1e-4);
        for s in &report.schemes {
            assert!(
                s.max_rel_err < report.tolerance,
                "{}: max rel err {:.3e} at flat index {} over {} params",
                s.scheme,
                s.max_rel_err,
                s.worst_index,
                s.params_checked
            );
        }
    }

    #[test]
    fn normalization_gradient_is_exercised() {
        // The quotient-rule path must be active: with normalization enabled
        // the transmit-side scale depends on every upstream parameter.
        let mut cfg = tiny_config(Scheme::RelayNonlinear);
        cfg.normalize_power = true;
        let check = check_scheme(&cfg, 77);
        assert!(check.max_rel_err < 1e-4, "rel err {}", check.max_rel_err);
        cfg.normalize_power = false;
        let check = check_scheme(&cfg, 78);
        assert!(check.max_rel_err < 1e-4, "rel err {}", check.max_rel_err);
    }

    #[test]
    fn f32_instantiation_runs_forward() {
        // The numeric core is scalar-generic; a coarse f32 pass should agree
        // with f64 to single precision.
        use crate::matrix::ComplexMatrix;
        let cfg = tiny_config(Scheme::NoOtaNonlinear);
        let root = SeededRng::from_seed(11);
        let p64 = ModelParams::<f64>::init(&cfg, &mut root.stream("init"));
        let f64fix = FixedPropagation::<f64>::build(&cfg);
        let f32fix = FixedPropagation::<f32>::build(&cfg);
        let p32 = ModelParams::<f32> {
            theta_t: p64.theta_t.iter().map(|r| r.iter().map(|&x| x as f32).collect()).collect(),
            theta_r: p64.theta_r.iter().map(|r| r.iter().map(|&x| x as f32).collect()).collect(),
            b_t: p64
                .b_t
                .iter()
                .map(|r| r.iter().map(|c| num_complex::Complex::new(c.re as f32, c.im as f32)).collect())
                .collect(),
            b_r: p64
                .b_r
                .iter()
                .map(|r| r.iter().map(|c| num_complex::Complex::new(c.re as f32, c.im as f32)).collect())
                .collect(),
            z: None,
            b_s: vec![],
            fc_weight: p64.fc_weight.iter().map(|&x| x as f32).collect(),
            fc_bias: p64.fc_bias.iter().map(|&x| x as f32).collect(),
        };
        let pix: Vec<f64> = (0..cfg.pixel_count()).map(|i| i as f64 / 12.0).collect();
        let pix32: Vec<f32> = pix.iter().map(|&x| x as f32).collect();
        let c64 = forward(
            &pack_image(&pix, &cfg),
            &p64,
            &f64fix,
            &cfg,
            None,
            &NoiseDraw::none(),
        );
        let c32 = forward(
            &pack_image::<f32>(&pix32, &cfg),
            &p32,
            &f32fix,
            &cfg,
            None,
            &NoiseDraw::none(),
        );
        let _ = ComplexMatrix::<f32>::zeros(1, 1);
        for (a, b) in c64.logits.iter().zip(&c32.logits) {
            assert!((a - *b as f64).abs() < 1e-3, "{a} vs {b}");
        }
    }
}
