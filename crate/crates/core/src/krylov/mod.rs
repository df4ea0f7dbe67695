//! Krylov solvers and the Chebyshev semi-iteration.
//!
//! Preconditioners are passed as operators applying `P^{-1}`. All solvers
//! start from the zero vector.

mod cg;
mod chebyshev;
mod gmres;
mod minres;

use alloc::vec::Vec;

pub use cg::cg;
pub use chebyshev::chebyshev;
pub use gmres::gmres;
pub use minres::minres;

use crate::linalg::CsrMatrix;

pub trait LinearOperator {
    fn dim(&self) -> usize;

    /// `y = Op x`; `y` is overwritten.
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.spmv_into(x, y);
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply(x, y)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IdentityOperator(pub usize);

impl LinearOperator for IdentityOperator {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
    }
}

/// Wraps a closure as an operator.
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64])> FnOperator<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64], &mut [f64])> LinearOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (self.f)(x, y)
    }
}

/// Diagonal scaling `y = d .* x`.
#[derive(Debug, Clone)]
pub struct DiagonalOperator(pub Vec<f64>);

impl LinearOperator for DiagonalOperator {
    fn dim(&self) -> usize {
        self.0.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for ((yi, xi), di) in y.iter_mut().zip(x).zip(&self.0) {
            *yi = di * xi;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KrylovReport {
    pub iterations: usize,
    pub converged: bool,
    /// Final residual relative to the initial one, in the solver's own norm.
    pub relative_residual: f64,
    /// One entry per iteration plus the initial 1.0.
    pub history: Vec<f64>,
}

impl KrylovReport {
    fn trivial() -> Self {
        Self {
            iterations: 0,
            converged: true,
            relative_residual: 0.0,
            history: alloc::vec![0.0],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{csr_from_triplets, norm2};

    #[test]
    fn identity_converges_in_one_step() {
        let id = IdentityOperator(4);
        let b = [1.0, 2.0, -3.0, 0.5];
        for solver in [cg, minres, gmres] {
            let (x, rep) = solver(&id, &id, &b, 1e-12, 10).unwrap();
            assert_eq!(rep.iterations, 1);
            assert!(rep.converged);
            assert_eq!(rep.history.len(), 2);
            for (xi, bi) in x.iter().zip(&b) {
                assert!((xi - bi).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn finite_termination() {
        let a = CsrMatrix::from_diagonal(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let id = IdentityOperator(5);
        let b = [1.0; 5];
        let (_, rep) = cg(&a, &id, &b, 1e-12, 50).unwrap();
        assert!(rep.converged && rep.iterations <= 5);

        let a = CsrMatrix::from_diagonal(&[1.0, -1.0, 2.0]);
        let id = IdentityOperator(3);
        let (x, rep) = minres(&a, &id, &[0.3, -0.7, 1.1], 1e-13, 50).unwrap();
        assert!(rep.converged && rep.iterations <= 3);
        assert!((x[1] - 0.7).abs() < 1e-12);
        assert!(rep.history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-14)));
    }

    #[test]
    fn gmres_nilpotent_plus_identity() {
        let a = csr_from_triplets(
            3,
            3,
            &[(0, 0, 1.0), (1, 1, 1.0), (2, 2, 1.0), (1, 0, 2.0), (2, 1, -3.0), (2, 0, 5.0)],
        )
        .unwrap();
        let b = [1.0, 1.0, 1.0];
        let (x, rep) = gmres(&a, &IdentityOperator(3), &b, 1e-14, 10).unwrap();
        assert!(rep.converged && rep.iterations <= 3);
        let r = a.spmv(&x).unwrap();
        assert!(norm2(&[r[0] - 1.0, r[1] - 1.0, r[2] - 1.0]) < 1e-13);
    }

    #[test]
    fn cg_breaks_down_on_indefinite() {
        let a = CsrMatrix::from_diagonal(&[1.0, -1.0]);
        assert!(matches!(
            cg(&a, &IdentityOperator(2), &[0.0, 1.0], 1e-10, 10),
            Err(crate::Error::Breakdown(_))
        ));
    }

    #[test]
    fn chebyshev_first_step_is_midpoint_scaling() {
        let a = CsrMatrix::from_diagonal(&[1.0, 1.5]);
        let x = chebyshev(&a, &[1.0, 2.0], 1, 0.5, 2.0).unwrap();
        assert_eq!(x, [0.8, 1.6]);
        let x = chebyshev(&IdentityOperator(2), &[1.0, 2.0], 15, 0.5, 2.0).unwrap();
        assert!(norm2(&[x[0] - 1.0, x[1] - 2.0]) <= 1e-6 * norm2(&[1.0, 2.0]));
        assert!(chebyshev(&a, &[1.0, 2.0], 3, 0.0, 2.0).is_err());
    }
}
