//! Element placement and near-field propagation coefficients.
//!
//! Metasurface layers are closely stacked, so inter-layer propagation is
//! modeled with the Rayleigh-Sommerfeld diffraction coefficient
//!
//! `W[m,n] = (A cos φ / d) (1/(2π d) - j/λ) exp(j 2π d / λ)`
//!
//! where `d` is the element-to-element distance and `φ` the angle between the
//! propagation direction and the source layer normal.

use num_complex::Complex;

use crate::config::ExperimentConfig;
use crate::matrix::ComplexMatrix;
use crate::scalar::{fl, Scalar};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Element arrangement of one layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrayKind {
    /// Uniform planar array (metasurface layers).
    Upa,
    /// Uniform linear array (antenna arrays).
    Ula,
}

/// Positions of one layer's elements plus its broadside normal.
#[derive(Debug, Clone)]
pub struct ArrayLayout<F> {
    pub positions: Vec<[F; 3]>,
    pub normal: [F; 3],
    pub kind: ArrayKind,
}

impl<F: Scalar> ArrayLayout<F> {
    /// ULA along x with λ/2 spacing, centered, at axial offset `z`.
    pub fn ula(n: usize, wavelength: F, z: F) -> Self {
        let spacing = wavelength / fl::<F>(2.0);
        let positions = (0..n)
            .map(|i| {
                let k = fl::<F>(2.0 * i as f64 - (n as f64 - 1.0));
                [k * spacing / fl::<F>(2.0), F::zero(), z]
            })
            .collect();
        Self { positions, normal: [F::zero(), F::zero(), F::one()], kind: ArrayKind::Ula }
    }

    /// UPA on a λ/2 grid, ceil(sqrt(M)) columns, centered, at axial offset `z`.
    pub fn upa(m: usize, wavelength: F, z: F) -> Self {
        let cols = (m as f64).sqrt().ceil() as usize;
        let rows = m.div_ceil(cols);
        let spacing = wavelength / fl::<F>(2.0);
        let positions = (0..m)
            .map(|e| {
                let (r, c) = (e / cols, e % cols);
                let kx = fl::<F>(2.0 * c as f64 - (cols as f64 - 1.0));
                let ky = fl::<F>(2.0 * r as f64 - (rows as f64 - 1.0));
                [kx * spacing / fl::<F>(2.0), ky * spacing / fl::<F>(2.0), z]
            })
            .collect();
        Self { positions, normal: [F::zero(), F::zero(), F::one()], kind: ArrayKind::Upa }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Physical stack parameters shared by both AI-SIMs.
#[derive(Debug, Clone, Copy)]
pub struct StackGeometry<F> {
    pub carrier_hz: F,
    pub wavelength: F,
    /// Antenna array to first/last metasurface layer (default 10λ).
    pub antenna_gap: F,
    /// Adjacent metasurface layers (default 2λ).
    pub layer_gap: F,
    /// Meta-atom area (default λ²/4).
    pub element_area: F,
    pub layers_per_side: usize,
}

impl<F: Scalar> StackGeometry<F> {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        let carrier = fl::<F>(cfg.carrier_hz);
        let wavelength = fl::<F>(SPEED_OF_LIGHT) / carrier;
        let geom = Self {
            carrier_hz: carrier,
            wavelength,
            antenna_gap: fl::<F>(cfg.antenna_gap_wavelengths) * wavelength,
            layer_gap: fl::<F>(cfg.layer_gap_wavelengths) * wavelength,
            element_area: fl::<F>(cfg.element_area_wavelengths_sq) * wavelength * wavelength,
            layers_per_side: cfg.l,
        };
        geom.validate();
        geom
    }

    fn validate(&self) {
        assert!(
            self.wavelength > F::zero()
                && self.antenna_gap > F::zero()
                && self.layer_gap > F::zero()
                && self.element_area > F::zero(),
            "geometry distances must be strictly positive"
        );
        let expect = fl::<F>(SPEED_OF_LIGHT) / self.carrier_hz;
        let rel = ((self.wavelength - expect) / expect).abs();
        assert!(rel < fl::<F>(1e-9), "wavelength inconsistent with carrier frequency");
    }
}

/// Transmitter- and receiver-side layer layouts.
///
/// Each side starts with an antenna ULA, followed by L (passive, activation)
/// metasurface pairs; the receiver side ends with the receive ULA placed one
/// antenna gap beyond the last layer. The receiver-side source is the relay's
/// ULA.
pub fn build_layouts<F: Scalar>(
    cfg: &ExperimentConfig,
    geom: &StackGeometry<F>,
) -> (Vec<ArrayLayout<F>>, Vec<ArrayLayout<F>>) {
    let lam = geom.wavelength;
    let surface_z = |k: usize| geom.antenna_gap + fl::<F>(k as f64) * geom.layer_gap;

    let mut tx = Vec::with_capacity(2 * cfg.l + 1);
    tx.push(ArrayLayout::ula(cfg.n_t, lam, F::zero()));
    for l in 1..=cfg.l {
        tx.push(ArrayLayout::upa(cfg.m, lam, surface_z(2 * l - 2)));
        tx.push(ArrayLayout::upa(cfg.m, lam, surface_z(2 * l - 1)));
    }

    let mut rx = Vec::with_capacity(2 * cfg.l + 2);
    rx.push(ArrayLayout::ula(cfg.n_s, lam, F::zero()));
    for l in 1..=cfg.l {
        rx.push(ArrayLayout::upa(cfg.m, lam, surface_z(2 * l - 2)));
        rx.push(ArrayLayout::upa(cfg.m, lam, surface_z(2 * l - 1)));
    }
    rx.push(ArrayLayout::ula(cfg.n_r, lam, surface_z(2 * cfg.l - 1) + geom.antenna_gap));
    (tx, rx)
}

/// Rayleigh-Sommerfeld coefficient matrix from every `src` element to every
/// `dst` element, shape |dst| x |src|. Panics on coincident points.
pub fn diffraction_matrix<F: Scalar>(
    src: &ArrayLayout<F>,
    dst: &ArrayLayout<F>,
    geom: &StackGeometry<F>,
) -> ComplexMatrix<F> {
    let lam = geom.wavelength;
    let area = geom.element_area;
    let two_pi = F::TAU();
    ComplexMatrix::from_fn(dst.len(), src.len(), |m, n| {
        let s = src.positions[n];
        let t = dst.positions[m];
        let dx = t[0] - s[0];
        let dy = t[1] - s[1];
        let dz = t[2] - s[2];
        let d = (dx * dx + dy * dy + dz * dz).sqrt();
        assert!(d > F::zero(), "coincident elements: src {n} and dst {m} overlap");
        let cos_phi =
            (dx * src.normal[0] + dy * src.normal[1] + dz * src.normal[2]).abs() / d;
        let front = area * cos_phi / d;
        let lobe = Complex::new(F::one() / (two_pi * d), -F::one() / lam);
        let phase = Complex::from_polar(F::one(), two_pi * d / lam);
        lobe * phase * front
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ExperimentConfig, Scheme};

    fn geom(cfg: &ExperimentConfig) -> StackGeometry<f64> {
        StackGeometry::from_config(cfg)
    }

    fn single_element(z: f64) -> ArrayLayout<f64> {
        ArrayLayout { positions: vec![[0.0, 0.0, z]], normal: [0.0, 0.0, 1.0], kind: ArrayKind::Upa }
    }

    #[test]
    fn on_axis_two_wavelengths_closed_form() {
        // d = 2λ, A = λ²/4, cos φ = 1: W = 1/(32π) - j/8 (λ cancels, e^{j4π}=1).
        let cfg = ExperimentConfig::default_for(Scheme::RelayNonlinear);
        let g = geom(&cfg);
        let w = diffraction_matrix(&single_element(0.0), &single_element(2.0 * g.wavelength), &g);
        let got = w.get(0, 0);
        let want_re = 1.0 / (32.0 * std::f64::consts::PI);
        let want_im = -0.125;
        assert!(((got.re - want_re) / want_re).abs() < 1e-12, "re {} vs {want_re}", got.re);
        assert!(((got.im - want_im) / want_im).abs() < 1e-12, "im {} vs {want_im}", got.im);
        assert!((got.re - 0.0099472).abs() < 1e-7);
    }

    #[test]
    fn magnitude_decays_with_distance() {
        let cfg = ExperimentConfig::default_for(Scheme::RelayNonlinear);
        let g = geom(&cfg);
        let lam = g.wavelength;
        let at = |d: f64| {
            diffraction_matrix(&single_element(0.0), &single_element(d), &g).get(0, 0).norm()
        };
        assert!(at(4.0 * lam) < at(2.0 * lam));
        // Strictly decreasing beyond λ/(2π), and the phase factor stays unit-modulus.
        let mut prev = f64::INFINITY;
        let mut d = lam / std::f64::consts::TAU * 1.01;
        while d < 40.0 * lam {
            let mag = at(d);
            assert!(mag < prev, "|W| not decreasing at d={d}");
            let phase = Complex::from_polar(1.0, std::f64::consts::TAU * d / lam);
            assert!((phase.norm() - 1.0).abs() < 1e-12);
            prev = mag;
            d *= 1.3;
        }
    }

    // Independent re-evaluation through the polar form.
    fn oracle_entry(src: [f64; 3], dst: [f64; 3], normal: [f64; 3], lam: f64, area: f64) -> Complex<f64> {
        let delta = [dst[0] - src[0], dst[1] - src[1], dst[2] - src[2]];
        let d = (delta[0].powi(2) + delta[1].powi(2) + delta[2].powi(2)).sqrt();
        let cos_phi = (delta[0] * normal[0] + delta[1] * normal[1] + delta[2] * normal[2]).abs() / d;
        let mag = area * cos_phi / d * (1.0 / (std::f64::consts::TAU * d)).hypot(1.0 / lam);
        let ang = (-1.0 / lam).atan2(1.0 / (std::f64::consts::TAU * d)) + std::f64::consts::TAU * d / lam;
        Complex::from_polar(mag, ang)
    }

    #[test]
    fn entries_match_independent_oracle() {
        let cfg = ExperimentConfig::default_for(Scheme::RelayNonlinear);
        let g = geom(&cfg);
        let src = ArrayLayout::upa(16, g.wavelength, 0.0);
        let dst = ArrayLayout::upa(16, g.wavelength, g.layer_gap);
        let w = diffraction_matrix(&src, &dst, &g);
        for m in 0..16 {
            for n in 0..16 {
                let want = oracle_entry(src.positions[n], dst.positions[m], src.normal, g.wavelength, g.element_area);
                let got = w.get(m, n);
                assert!(
                    (got - want).norm() / want.norm() < 1e-12,
                    "entry ({m},{n}): {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn distance_matrix_is_reciprocal() {
        let cfg = ExperimentConfig::default_for(Scheme::RelayNonlinear);
        let g = geom(&cfg);
        let a = ArrayLayout::upa(9, g.wavelength, 0.0);
        let b = ArrayLayout::upa(12, g.wavelength, g.layer_gap);
        let dist = |x: &ArrayLayout<f64>, y: &ArrayLayout<f64>, i: usize, j: usize| {
            let (p, q) = (y.positions[i], x.positions[j]);
            ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
        };
        for m in 0..b.len() {
            for n in 0..a.len() {
                let fwd = dist(&a, &b, m, n);
                let back = dist(&b, &a, n, m);
                assert!((fwd - back).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn layout_offsets_single_layer() {
        let cfg = ExperimentConfig::default_for(Scheme::RelayNonlinear);
        let g = geom(&cfg);
        let (tx, rx) = build_layouts(&cfg, &g);
        assert_eq!(tx.len(), 3);
        let lam = g.wavelength;
        assert_eq!(tx[0].positions[0][2], 0.0);
        assert_eq!(tx[1].positions[0][2], 10.0 * lam);
        assert_eq!(tx[2].positions[0][2], 10.0 * lam + 2.0 * lam);
        // Receiver side mirrors and appends the receive ULA one antenna gap out.
        assert_eq!(rx.len(), 4);
        assert_eq!(rx[3].positions[0][2], 10.0 * lam + 2.0 * lam + 10.0 * lam);
        assert_eq!(rx[3].len(), cfg.n_r);
    }

    #[test]
    fn layout_offsets_two_layers() {
        let mut cfg = ExperimentConfig::default_for(Scheme::RelayNonlinear);
        cfg.l = 2;
        let g = geom(&cfg);
        let (tx, _) = build_layouts(&cfg, &g);
        assert_eq!(tx.len(), 5);
        let lam = g.wavelength;
        assert_eq!(tx[4].positions[0][2], 10.0 * lam + 3.0 * 2.0 * lam);
    }

    #[test]
    fn upa_grid_spacing_is_half_wavelength() {
        // λ chosen so λ/4 is a power of two: grid coordinates are exact.
        let upa = ArrayLayout::upa(16, 0.125, 0.0);
        assert_eq!(upa.len(), 16);
        for r in 0..4 {
            for c in 0..3 {
                let a = upa.positions[r * 4 + c];
                let b = upa.positions[r * 4 + c + 1];
                assert_eq!(b[0] - a[0], 0.0625);
                assert_eq!(b[1], a[1]);
            }
        }
        // 4x4: corner-to-corner spans 3 grid steps each way.
        let span = upa.positions[15][0] - upa.positions[0][0];
        assert_eq!(span, 3.0 * 0.0625);
    }

    #[test]
    #[should_panic(expected = "coincident elements")]
    fn coincident_points_panic() {
        let cfg = ExperimentConfig::default_for(Scheme::RelayNonlinear);
        let g = geom(&cfg);
        let a = single_element(1.0);
        let _ = diffraction_matrix(&a, &a, &g);
    }
}
