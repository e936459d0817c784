//! Hardware nonlinearities: the Rapp power-amplifier saturation and the
//! activation-metasurface operator, plus identity variants for the linear
//! baseline schemes.
//!
//! The Rapp map scales amplitude as `|x| / (1 + (|x|/x_sat)^(2p))^(1/(2p))`
//! and preserves phase. Exact partial derivatives (treating C as R^2) back
//! the training pass.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::matrix::ComplexMatrix;
use crate::scalar::{fl, Scalar};

/// Rapp saturation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RappParams {
    /// Smoothness exponent, > 0.
    pub p: f64,
    /// Saturation amplitude, > 0.
    pub x_sat: f64,
}

impl Default for RappParams {
    fn default() -> Self {
        Self { p: 2.0, x_sat: 1.0 }
    }
}

impl RappParams {
    pub fn validate(&self) -> bool {
        self.p > 0.0 && self.x_sat > 0.0
    }
}

/// Which nonlinearity an activation stage applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActivationMode {
    /// Amplitude-saturating Rapp map, phase preserved.
    RappAmplitude,
    /// Pass-through (linear baseline schemes).
    Identity,
}

/// Rapp saturation of one complex sample.
#[inline]
pub fn rapp<F: Scalar>(x: Complex<F>, params: &RappParams) -> Complex<F> {
    let p = fl::<F>(params.p);
    let xs = fl::<F>(params.x_sat);
    let r = x.norm();
    if r == F::zero() {
        return x;
    }
    let t = (r / xs).powf(p + p);
    if !t.is_finite() {
        // Deep saturation: |out| -> x_sat from below.
        return x * ((xs / r) * (F::one() - F::epsilon()));
    }
    x * (F::one() + t).powf((-F::one()) / (p + p))
}

/// Exact partials of [`rapp`] viewed as a map R^2 -> R^2. The first element
/// is d out / d Re x, the second d out / d Im x (each packed as d Re out +
/// j d Im out). At x = 0 the map has the identity Jacobian.
#[inline]
pub fn rapp_derivatives<F: Scalar>(
    x: Complex<F>,
    params: &RappParams,
) -> (Complex<F>, Complex<F>) {
    let p = fl::<F>(params.p);
    let xs = fl::<F>(params.x_sat);
    let r = x.norm();
    if r == F::zero() {
        return (
            Complex::new(F::one(), F::zero()),
            Complex::new(F::zero(), F::one()),
        );
    }
    let two_p = p + p;
    let t = (r / xs).powf(two_p);
    let (h, hp);
    if !t.is_finite() {
        h = xs / r;
        hp = -xs / (r * r);
    } else {
        // h(r) = (1 + t)^(-1/(2p)), h'(r) = -(1+t)^(-1/(2p)-1) (r/xs)^(2p-1) / xs.
        h = (F::one() + t).powf(-F::one() / two_p);
        hp = -(F::one() + t).powf(-F::one() / two_p - F::one()) * (r / xs).powf(two_p - F::one())
            / xs;
    }
    let radial = x * (hp / r);
    (
        Complex::new(h, F::zero()) + radial * x.re,
        Complex::new(F::zero(), h) + radial * x.im,
    )
}

/// Apply the selected nonlinearity element-wise.
pub fn activation_apply<F: Scalar>(
    x: &ComplexMatrix<F>,
    mode: ActivationMode,
    params: &RappParams,
) -> ComplexMatrix<F> {
    match mode {
        ActivationMode::Identity => x.clone(),
        ActivationMode::RappAmplitude => x.map(|v| rapp(v, params)),
    }
}

/// Pull a cost gradient back through the nonlinearity: `pre` is the cached
/// pre-activation input and `g_out` the gradient at its output, both with the
/// d/dRe + j d/dIm packing.
pub fn activation_backward<F: Scalar>(
    pre: &ComplexMatrix<F>,
    g_out: &ComplexMatrix<F>,
    mode: ActivationMode,
    params: &RappParams,
) -> ComplexMatrix<F> {
    match mode {
        ActivationMode::Identity => g_out.clone(),
        ActivationMode::RappAmplitude => {
            assert_eq!(pre.shape(), g_out.shape(), "activation_backward shape mismatch");
            let mut out = ComplexMatrix::zeros(pre.rows(), pre.cols());
            for (idx, (&x, &g)) in pre.entries().iter().zip(g_out.entries()).enumerate() {
                let (d_re, d_im) = rapp_derivatives(x, params);
                let gre = g.re * d_re.re + g.im * d_re.im;
                let gim = g.re * d_im.re + g.im * d_im.im;
                out.entries_mut()[idx] = Complex::new(gre, gim);
            }
            out
        }
    }
}
