//! Pseudoinversion via ridge-regularized normal equations.
//!
//! The least-squares stage only ever inverts small Gram matrices (relay
//! antenna counts), so an LU solve on the normal equations is preferred over
//! a general SVD. A tiny ridge keeps almost-surely-well-conditioned Gaussian
//! channels invertible; genuinely singular systems surface as errors so the
//! caller can resample the channel.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::matrix::ComplexMatrix;
use crate::scalar::{fl, Scalar};

/// Solve `A X = B` for square `A` by LU with partial pivoting.
pub fn solve<F: Scalar>(a: &ComplexMatrix<F>, b: &ComplexMatrix<F>) -> Result<ComplexMatrix<F>> {
    let n = a.rows();
    assert_eq!(a.rows(), a.cols(), "solve needs a square system, got {}x{}", a.rows(), a.cols());
    assert_eq!(
        b.rows(),
        n,
        "solve rhs rows {} do not match system size {n}",
        b.rows()
    );
    let k = b.cols();
    let mut lu: Vec<Complex<F>> = a.entries().to_vec();
    let mut x: Vec<Complex<F>> = b.entries().to_vec();

    let scale = a.max_abs();
    let tol = F::epsilon() * fl::<F>(n as f64) * scale;
    let mut max_piv = F::zero();
    let mut min_piv = F::infinity();

    for col in 0..n {
        // Partial pivot on the largest remaining entry in this column.
        let mut piv_row = col;
        let mut piv_mag = lu[col * n + col].norm();
        for r in col + 1..n {
            let mag = lu[r * n + col].norm();
            if mag > piv_mag {
                piv_mag = mag;
                piv_row = r;
            }
        }
        if piv_mag <= tol || !piv_mag.is_finite() {
            let cond = (max_piv / piv_mag.max(F::min_positive_value()))
                .to_f64()
                .unwrap_or(f64::INFINITY);
            return Err(Error::SingularSystem { cond_estimate: cond });
        }
        max_piv = max_piv.max(piv_mag);
        min_piv = min_piv.min(piv_mag);
        if piv_row != col {
            for j in 0..n {
                lu.swap(col * n + j, piv_row * n + j);
            }
            for j in 0..k {
                x.swap(col * k + j, piv_row * k + j);
            }
        }
        let piv = lu[col * n + col];
        for r in col + 1..n {
            let factor = lu[r * n + col] / piv;
            lu[r * n + col] = factor;
            for j in col + 1..n {
                let sub = factor * lu[col * n + j];
                lu[r * n + j] = lu[r * n + j] - sub;
            }
            for j in 0..k {
                let sub = factor * x[col * k + j];
                x[r * k + j] = x[r * k + j] - sub;
            }
        }
    }
    let _ = min_piv;

    // Back substitution.
    for col in (0..n).rev() {
        let piv = lu[col * n + col];
        for j in 0..k {
            let mut acc = x[col * k + j];
            for p in col + 1..n {
                acc = acc - lu[col * n + p] * x[p * k + j];
            }
            x[col * k + j] = acc / piv;
        }
    }
    Ok(ComplexMatrix::from_vec(n, k, x))
}

/// Moore-Penrose pseudoinverse `G†` of shape `cols x rows`, computed from the
/// ridge-regularized normal equations: `Gᴴ(GGᴴ + ridge·I)⁻¹` for wide `G`
/// (rows <= cols), `(GᴴG + ridge·I)⁻¹Gᴴ` for tall. At `ridge -> 0` on
/// full-rank input this is the exact pseudoinverse.
pub fn pseudoinverse<F: Scalar>(g: &ComplexMatrix<F>, ridge: F) -> Result<ComplexMatrix<F>> {
    assert!(ridge >= F::zero(), "ridge must be nonnegative");
    let gh = g.adjoint();
    if g.rows() <= g.cols() {
        // G† = Gᴴ B⁻¹ with B = GGᴴ + ridge·I Hermitian, so G† = (B⁻¹G)ᴴ.
        let mut b = g.matmul(&gh);
        add_ridge(&mut b, ridge);
        Ok(solve(&b, g)?.adjoint())
    } else {
        let mut b = gh.matmul(g);
        add_ridge(&mut b, ridge);
        solve(&b, &gh)
    }
}

fn add_ridge<F: Scalar>(b: &mut ComplexMatrix<F>, ridge: F) {
    let n = b.rows();
    for i in 0..n {
        let v = b.get(i, i);
        b.set(i, i, Complex::new(v.re + ridge, v.im));
    }
}
