//! Trainable parameters and the fixed propagation matrices.
//!
//! Phase matrices are stored as bare angles so materialized diagonals are
//! unit-modulus by construction. The flat real-vector view (`flatten` /
//! `set_from_flat`) is the canonical parameter ordering shared by the
//! optimizer, the gradient checker, and the checkpoint format.

use num_complex::Complex;

use crate::config::{ExperimentConfig, RxFading};
use crate::geometry::{build_layouts, diffraction_matrix, ArrayLayout, StackGeometry};
use crate::matrix::{ComplexMatrix, Cplx};
use crate::rng::SeededRng;
use crate::scalar::{fl, Scalar};

/// All trainable quantities of one model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<F> {
    /// Transmit-side phase angles, L x M, radians in [0, 2π).
    pub theta_t: Vec<Vec<F>>,
    /// Receive-side phase angles, L x M.
    pub theta_r: Vec<Vec<F>>,
    /// Transmit-side activation biases, L x M.
    pub b_t: Vec<Vec<Cplx<F>>>,
    /// Receive-side activation biases, L x M.
    pub b_r: Vec<Vec<Cplx<F>>>,
    /// Relay amplification matrix (absent for the no-relay schemes).
    pub z: Option<ComplexMatrix<F>>,
    /// Relay bias vector, length N_s (empty for the no-relay schemes).
    pub b_s: Vec<Cplx<F>>,
    /// Classifier weights, num_classes x feature_len, row-major.
    pub fc_weight: Vec<F>,
    /// Classifier bias, num_classes.
    pub fc_bias: Vec<F>,
}

impl<F: Scalar> ModelParams<F> {
    /// Seeded initialization: phases uniform on [0, 2π), biases zero, relay
    /// gains CN(0, 1/fan_in), classifier Glorot-uniform.
    pub fn init(cfg: &ExperimentConfig, rng: &mut SeededRng) -> Self {
        let tau = F::TAU();
        let mut angles = |count: usize| -> Vec<F> {
            (0..count).map(|_| rng.uniform(F::zero(), tau)).collect()
        };
        let theta_t: Vec<Vec<F>> = (0..cfg.l).map(|_| angles(cfg.m)).collect();
        let theta_r: Vec<Vec<F>> = (0..cfg.l).map(|_| angles(cfg.m)).collect();
        let zero_bias = |count: usize| vec![Complex::new(F::zero(), F::zero()); count];
        let b_t = (0..cfg.l).map(|_| zero_bias(cfg.m)).collect();
        let b_r = (0..cfg.l).map(|_| zero_bias(cfg.m)).collect();
        let (z, b_s) = match cfg.z_shape() {
            Some((rows, cols)) => {
                let var = F::one() / fl::<F>(cols as f64);
                (
                    Some(rng.complex_gaussian_matrix(rows, cols, var)),
                    zero_bias(cfg.n_s),
                )
            }
            None => (None, Vec::new()),
        };
        let fan_in = cfg.feature_len();
        let fan_out = cfg.num_classes;
        let limit = fl::<F>((6.0 / (fan_in + fan_out) as f64).sqrt());
        let fc_weight = (0..fan_out * fan_in).map(|_| rng.uniform(-limit, limit)).collect();
        let fc_bias = vec![F::zero(); fan_out];
        let params = Self { theta_t, theta_r, b_t, b_r, z, b_s, fc_weight, fc_bias };
        params.assert_matches(cfg);
        params
    }

    /// Real parameter count implied by a config (complex entries count twice).
    pub fn real_count_for(cfg: &ExperimentConfig) -> usize {
        let phases = 2 * cfg.l * cfg.m;
        let layer_biases = 2 * (2 * cfg.l * cfg.m);
        let relay = match cfg.z_shape() {
            Some((r, c)) => 2 * r * c + 2 * cfg.n_s,
            None => 0,
        };
        let head = cfg.num_classes * cfg.feature_len() + cfg.num_classes;
        phases + layer_biases + relay + head
    }

    /// Panics unless shapes match the config (checked at init and load).
    pub fn assert_matches(&self, cfg: &ExperimentConfig) {
        assert_eq!(self.theta_t.len(), cfg.l, "theta_t layer count");
        assert_eq!(self.theta_r.len(), cfg.l, "theta_r layer count");
        assert!(self.theta_t.iter().all(|l| l.len() == cfg.m), "theta_t width");
        assert!(self.theta_r.iter().all(|l| l.len() == cfg.m), "theta_r width");
        assert!(self.b_t.iter().all(|l| l.len() == cfg.m) && self.b_t.len() == cfg.l);
        assert!(self.b_r.iter().all(|l| l.len() == cfg.m) && self.b_r.len() == cfg.l);
        match (cfg.z_shape(), &self.z) {
            (Some(shape), Some(z)) => assert_eq!(z.shape(), shape, "relay matrix shape"),
            (None, None) => {}
            _ => panic!("relay parameters inconsistent with scheme {}", cfg.scheme),
        }
        assert_eq!(self.b_s.len(), if cfg.z_shape().is_some() { cfg.n_s } else { 0 });
        assert_eq!(self.fc_weight.len(), cfg.num_classes * cfg.feature_len(), "fc weight size");
        assert_eq!(self.fc_bias.len(), cfg.num_classes, "fc bias size");
        assert_eq!(self.flatten().len(), Self::real_count_for(cfg), "parameter count");
    }

    /// Unit-modulus diagonal e^{jθ} of one phase layer.
    pub fn phase_diag(theta: &[F]) -> Vec<Cplx<F>> {
        theta.iter().map(|&t| Complex::from_polar(F::one(), t)).collect()
    }

    /// Canonical flat real view: theta_t, theta_r, b_t, b_r, z, b_s,
    /// fc_weight, fc_bias; complex entries contribute (re, im) pairs.
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

    /// Overwrite every parameter from the canonical flat view.
    pub fn set_from_flat(&mut self, flat: &[F]) {
        let mut it = flat.iter().copied();
        let mut next = || it.next().expect("flat parameter vector too short");
        for row in &mut self.theta_t {
            for v in row.iter_mut() {
                *v = next();
            }
        }
        for row in &mut self.theta_r {
            for v in row.iter_mut() {
                *v = next();
            }
        }
        for row in &mut self.b_t {
            for c in row.iter_mut() {
                *c = Complex::new(next(), next());
            }
        }
        for row in &mut self.b_r {
            for c in row.iter_mut() {
                *c = Complex::new(next(), next());
            }
        }
        if let Some(z) = &mut self.z {
            for c in z.entries_mut() {
                *c = Complex::new(next(), next());
            }
        }
        for c in &mut self.b_s {
            *c = Complex::new(next(), next());
        }
        for v in &mut self.fc_weight {
            *v = next();
        }
        for v in &mut self.fc_bias {
            *v = next();
        }
        assert!(it.next().is_none(), "flat parameter vector too long");
    }

    /// Wrap all phase angles back into [0, 2π). The materialized phase
    /// factors are unchanged (2π periodicity); this is representation hygiene
    /// after optimizer steps.
    pub fn wrap_phases(&mut self) {
        let tau = F::TAU();
        for row in self.theta_t.iter_mut().chain(self.theta_r.iter_mut()) {
            for t in row.iter_mut() {
                let mut w = *t % tau;
                if w < F::zero() {
                    w = w + tau;
                }
                *t = w;
            }
        }
    }
}

/// Deterministic diffraction matrices for both stacks.
///
/// Transmit side: `tx[0]` maps the N_t antennas onto the first layer
/// (M x N_t); `tx[2l-1]`, `tx[2l]` connect the layer chain (M x M).
/// Receive side: `rx[0]` maps relay space onto the first layer (M x N_s for
/// split fading, identity for direct fading, and an M x M layer-gap hop for
/// the no-relay schemes); `rx[2L]` (last) maps the final layer onto the N_r
/// receive antennas.
#[derive(Debug, Clone)]
pub struct FixedPropagation<F> {
    pub tx: Vec<ComplexMatrix<F>>,
    pub rx: Vec<ComplexMatrix<F>>,
}

impl<F: Scalar> FixedPropagation<F> {
    pub fn build(cfg: &ExperimentConfig) -> Self {
        let geom = StackGeometry::<F>::from_config(cfg);
        let (tx_layouts, rx_layouts) = build_layouts(cfg, &geom);

        let tx: Vec<_> = (1..tx_layouts.len())
            .map(|k| diffraction_matrix(&tx_layouts[k - 1], &tx_layouts[k], &geom))
            .collect();

        let mut rx: Vec<ComplexMatrix<F>> = Vec::with_capacity(2 * cfg.l + 1);
        let first = match (cfg.scheme.uses_relay(), cfg.rx_fading) {
            (true, RxFading::Split) => {
                diffraction_matrix(&rx_layouts[0], &rx_layouts[1], &geom)
            }
            (true, RxFading::Direct) => ComplexMatrix::identity(cfg.m),
            (false, _) => {
                // Directly connected stacks: the last transmit layer feeds the
                // first receive layer across one layer gap.
                let src = ArrayLayout::upa(cfg.m, geom.wavelength, F::zero());
                let dst = ArrayLayout::upa(cfg.m, geom.wavelength, geom.layer_gap);
                diffraction_matrix(&src, &dst, &geom)
            }
        };
        rx.push(first);
        for k in 2..rx_layouts.len() {
            rx.push(diffraction_matrix(&rx_layouts[k - 1], &rx_layouts[k], &geom));
        }

        let fixed = Self { tx, rx };
        fixed.assert_shapes(cfg);
        fixed
    }

    fn assert_shapes(&self, cfg: &ExperimentConfig) {
        assert_eq!(self.tx.len(), 2 * cfg.l);
        assert_eq!(self.rx.len(), 2 * cfg.l + 1);
        assert_eq!(self.tx[0].shape(), (cfg.m, cfg.n_t), "tx W1 shape");
        for w in &self.tx[1..] {
            assert_eq!(w.shape(), (cfg.m, cfg.m), "tx interior shape");
        }
        let expect_first = if cfg.scheme.uses_relay() && cfg.rx_fading == RxFading::Split {
            (cfg.m, cfg.n_s)
        } else {
            (cfg.m, cfg.m)
        };
        assert_eq!(self.rx[0].shape(), expect_first, "rx W1 shape");
        for w in &self.rx[1..2 * cfg.l] {
            assert_eq!(w.shape(), (cfg.m, cfg.m), "rx interior shape");
        }
        assert_eq!(self.rx[2 * cfg.l].shape(), (cfg.n_r, cfg.m), "rx output shape");
    }
}
