//! Sparse and dense linear-algebra kernels.

mod csr;
mod dense;
mod eigen;
mod lu;

pub use csr::{csr_from_triplets, CsrMatrix};
pub use dense::{Cholesky, DenseLu, DenseMatrix};
pub use eigen::{general_eigenvalues, jacobi_eigensolver};
pub use lu::{dense_lu_factor, DenseFactorization, DEFAULT_SIZE_CAP};

use crate::math;

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm2(x: &[f64]) -> f64 {
    math::sqrt(dot(x, x))
}

/// y += alpha * x
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(alpha: f64, x: &mut [f64]) {
    for xi in x {
        *xi *= alpha;
    }
}

/// Energy inner product `x^T A y`.
pub fn energy_dot(a: &CsrMatrix, x: &[f64], y: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        let (cols, vals) = a.row(i);
        let mut s = 0.0;
        for (&j, &v) in cols.iter().zip(vals) {
            s += v * y[j];
        }
        acc += x[i] * s;
    }
    acc
}

pub fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}
