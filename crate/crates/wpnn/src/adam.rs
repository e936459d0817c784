//! Bias-corrected Adam on the flat real parameter vector.
//!
//! Complex parameters update componentwise (their gradients are already
//! (re, im) pairs); phase angles are wrapped back into [0, 2π) after each
//! step, which leaves the materialized phase factors unchanged.

use serde::{Deserialize, Serialize};

use crate::backward::GradientSet;
use crate::params::ModelParams;
use crate::scalar::{fl, Scalar};

/// Optimizer hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First/second moment accumulators over the flat parameter vector.
#[derive(Debug, Clone)]
pub struct AdamState<F> {
    m: Vec<F>,
    v: Vec<F>,
    t: u64,
}

impl<F: Scalar> AdamState<F> {
    pub fn new_for(params: &ModelParams<F>) -> Self {
        let n = params.flatten().len();
        Self { m: vec![F::zero(); n], v: vec![F::zero(); n], t: 0 }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One bias-corrected update in place.
    pub fn step(&mut self, params: &mut ModelParams<F>, grads: &GradientSet<F>, cfg: &AdamConfig) {
        let g = grads.flatten();
        assert_eq!(g.len(), self.m.len(), "gradient length does not match optimizer state");
        let mut p = params.flatten();
        self.t += 1;
        let b1 = fl::<F>(cfg.beta1);
        let b2 = fl::<F>(cfg.beta2);
        let lr = fl::<F>(cfg.lr);
        let eps = fl::<F>(cfg.eps);
        let corr1 = F::one() - fl::<F>(cfg.beta1.powi(self.t as i32));
        let corr2 = F::one() - fl::<F>(cfg.beta2.powi(self.t as i32));
        for i in 0..g.len() {
            self.m[i] = b1 * self.m[i] + (F::one() - b1) * g[i];
            self.v[i] = b2 * self.v[i] + (F::one() - b2) * g[i] * g[i];
            let m_hat = self.m[i] / corr1;
            let v_hat = self.v[i] / corr2;
            p[i] = p[i] - lr * m_hat / (v_hat.sqrt() + eps);
        }
        params.set_from_flat(&p);
        params.wrap_phases();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ExperimentConfig, Scheme};
    use crate::rng::SeededRng;

    fn setup() -> (ExperimentConfig, ModelParams<f64>) {
        let mut cfg = ExperimentConfig::default_for(Scheme::RelayNonlinear);
        cfg.n_t = 2;
        cfg.n_s = 2;
        cfg.n_r = 2;
        cfg.m = 4;
        cfg.height = 3;
        cfg.width = 4;
        let params = ModelParams::init(&cfg, &mut SeededRng::from_seed(3).stream("init"));
        (cfg, params)
    }

    #[test]
    fn zero_gradient_leaves_params_fixed() {
        let (_, mut params) = setup();
        let before = params.flatten();
        let grads = GradientSet::zeros_like(&params);
        let mut state = AdamState::new_for(&params);
        state.step(&mut params, &grads, &AdamConfig::default());
        state.step(&mut params, &grads, &AdamConfig::default());
        assert_eq!(params.flatten(), before);
        assert_eq!(state.step_count(), 2);
    }

    #[test]
    fn first_step_matches_closed_form() {
        let (_, mut params) = setup();
        let before = params.flatten();
        let mut grads = GradientSet::zeros_like(&params);
        // A nonzero gradient on a few representative entries.
        grads.theta_t[0][2] = 0.7;
        grads.fc_bias[1] = -2.5;
        grads.b_s[0] = num_complex::Complex::new(0.3, -0.4);
        let cfg = AdamConfig::default();
        let mut state = AdamState::new_for(&params);
        state.step(&mut params, &grads, &cfg);
        let after = params.flatten();
        let g = grads.flatten();
        for i in 0..g.len() {
            // Bias-corrected first step: Δ = -lr g / (|g| + eps).
            let want = before[i] - cfg.lr * g[i] / (g[i].abs() + cfg.eps);
            // Phase entries may be wrapped; compare modulo 2π.
            let diff = (after[i] - want).rem_euclid(std::f64::consts::TAU);
            let diff = diff.min(std::f64::consts::TAU - diff);
            assert!(diff < 1e-12, "index {i}: {} vs {want}", after[i]);
        }
    }

    #[test]
    fn negated_gradient_negates_update() {
        let (_, mut params_a) = setup();
        let mut params_b = params_a.clone();
        let before = params_a.flatten();
        let mut grads = GradientSet::zeros_like(&params_a);
        grads.fc_weight.iter_mut().enumerate().for_each(|(i, g)| *g = ((i % 7) as f64 - 3.0) * 0.1);
        let mut neg = grads.clone();
        neg.scale(-1.0);
        let cfg = AdamConfig::default();
        AdamState::new_for(&params_a).step(&mut params_a, &grads, &cfg);
        AdamState::new_for(&params_b).step(&mut params_b, &neg, &cfg);
        let a = params_a.flatten();
        let b = params_b.flatten();
        for i in 0..a.len() {
            let da = a[i] - before[i];
            let db = b[i] - before[i];
            assert!((da + db).abs() < 1e-12, "asymmetric update at {i}");
        }
    }

    #[test]
    fn phases_wrap_after_step() {
        let (_, mut params) = setup();
        params.theta_t[0][0] = std::f64::consts::TAU + 0.1;
        let phase_before =
            num_complex::Complex::from_polar(1.0, params.theta_t[0][0]);
        let grads = GradientSet::zeros_like(&params);
        AdamState::new_for(&params).step(&mut params, &grads, &AdamConfig::default());
        assert!((params.theta_t[0][0] - 0.1).abs() < 1e-12);
        let phase_after = num_complex::Complex::from_polar(1.0, params.theta_t[0][0]);
        assert!((phase_before - phase_after).norm() < 1e-15);
    }
}
