//! Dense row-major complex matrices.
//!
//! The universal carrier for signals, features, channels, and propagation
//! coefficients. Dimensions are validated on construction; mismatched shapes
//! in arithmetic are treated as fatal configuration errors and panic with
//! both shapes in the message.

use num_complex::Complex;

use crate::scalar::Scalar;

/// Complex scalar over the active real type.
pub type Cplx<F> = Complex<F>;

/// Dense rectangular complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix<F> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<F>>,
}

impl<F: Scalar> ComplexMatrix<F> {
    /// All-zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive, got {rows}x{cols}");
        Self { rows, cols, data: vec![Complex::new(F::zero(), F::zero()); rows * cols] }
    }

    /// Identity matrix.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = Complex::new(F::one(), F::zero());
        }
        m
    }

    /// Build from a row-major entry vector. Panics on length mismatch or
    /// non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex<F>>) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive, got {rows}x{cols}");
        assert_eq!(
            data.len(),
            rows * cols,
            "entry count {} does not match shape {rows}x{cols}",
            data.len()
        );
        let m = Self { rows, cols, data };
        m.assert_finite("from_vec");
        m
    }

    /// Build entry-by-entry from a closure over (row, col).
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex<F>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::from_vec(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex<F> {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex<F>) {
        self.data[i * self.cols + j] = v;
    }

    /// Row-major entry slice.
    pub fn entries(&self) -> &[Complex<F>] {
        &self.data
    }

    pub fn entries_mut(&mut self) -> &mut [Complex<F>] {
        &mut self.data
    }

    /// One row as a slice.
    #[inline]
    pub fn row(&self, i: usize) -> &[Complex<F>] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Matrix product `self * rhs`. Panics on inner-dimension mismatch.
    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(
            self.cols, rhs.rows,
            "matmul dimension mismatch: {}x{} * {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = vec![Complex::new(F::zero(), F::zero()); self.rows * rhs.cols];
        let n = rhs.cols;
        for i in 0..self.rows {
            let arow = self.row(i);
            let crow = &mut out[i * n..(i + 1) * n];
            for (p, &a) in arow.iter().enumerate() {
                let brow = &rhs.data[p * n..(p + 1) * n];
                for (c, &b) in crow.iter_mut().zip(brow) {
                    *c += a * b;
                }
            }
        }
        let m = Self { rows: self.rows, cols: rhs.cols, data: out };
        m.debug_assert_finite("matmul");
        m
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let mut out = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                out.push(self.get(i, j).conj());
            }
        }
        Self { rows: self.cols, cols: self.rows, data: out }
    }

    /// Element-wise sum. Panics on shape mismatch.
    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!(
            self.shape(),
            rhs.shape(),
            "add shape mismatch: {}x{} + {}x{}",
            self.rows,
            self.cols,
            rhs.rows,
            rhs.cols
        );
        let data = self.data.iter().zip(&rhs.data).map(|(&a, &b)| a + b).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    /// Element-wise difference.
    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!(
            self.shape(),
            rhs.shape(),
            "sub shape mismatch: {}x{} - {}x{}",
            self.rows,
            self.cols,
            rhs.rows,
            rhs.cols
        );
        let data = self.data.iter().zip(&rhs.data).map(|(&a, &b)| a - b).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    /// Multiply every entry by a complex scalar.
    pub fn scale(&self, s: Complex<F>) -> Self {
        let data = self.data.iter().map(|&a| a * s).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    /// Multiply every entry by a real scalar.
    pub fn scale_re(&self, s: F) -> Self {
        let data = self.data.iter().map(|&a| Complex::new(a.re * s, a.im * s)).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    /// Apply a map to every entry.
    pub fn map(&self, mut f: impl FnMut(Complex<F>) -> Complex<F>) -> Self {
        let data = self.data.iter().map(|&a| f(a)).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    /// Mean squared modulus over all entries.
    pub fn mean_power(&self) -> F {
        let n = F::from_usize(self.data.len()).unwrap();
        self.data.iter().map(|c| c.norm_sqr()).fold(F::zero(), |a, b| a + b) / n
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> F {
        self.data.iter().map(|c| c.norm()).fold(F::zero(), F::max)
    }

    /// Frobenius norm.
    pub fn frobenius(&self) -> F {
        self.data.iter().map(|c| c.norm_sqr()).fold(F::zero(), |a, b| a + b).sqrt()
    }

    /// Largest entry modulus of `self - rhs`.
    pub fn max_abs_diff(&self, rhs: &Self) -> F {
        assert_eq!(self.shape(), rhs.shape(), "max_abs_diff shape mismatch");
        self.data
            .iter()
            .zip(&rhs.data)
            .map(|(&a, &b)| (a - b).norm())
            .fold(F::zero(), F::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    fn assert_finite(&self, op: &str) {
        assert!(self.is_finite(), "non-finite entry after {op}");
    }

    #[inline]
    fn debug_assert_finite(&self, op: &str) {
        debug_assert!(self.is_finite(), "non-finite entry after {op}");
    }
}
