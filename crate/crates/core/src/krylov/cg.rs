use alloc::vec;
use alloc::vec::Vec;

use super::{KrylovReport, LinearOperator};
use crate::error::{check_len, Error, Result};
use crate::linalg::{axpy, dot};
use crate::math;

/// Preconditioned conjugate gradients. Convergence is measured in the
/// `P^{-1}`-weighted residual norm `sqrt(r^T P^{-1} r)` relative to `b`.
pub fn cg(
    a: &dyn LinearOperator,
    p: &dyn LinearOperator,
    b: &[f64],
    tol: f64,
    maxit: usize,
) -> Result<(Vec<f64>, KrylovReport)> {
    let n = b.len();
    check_len(a.dim(), n)?;
    check_len(p.dim(), n)?;
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    p.apply(&r, &mut z);
    let mut rz = dot(&r, &z);
    if rz < 0.0 {
        return Err(Error::Breakdown("preconditioner is not positive definite"));
    }
    if rz == 0.0 {
        return Ok((x, KrylovReport::trivial()));
    }
    let norm0 = math::sqrt(rz);
    let mut d = z.clone();
    let mut ad = vec![0.0; n];
    let mut history = vec![1.0];
    let mut converged = false;
    let mut rel = 1.0;
    for _ in 0..maxit {
        a.apply(&d, &mut ad);
        let curv = dot(&d, &ad);
        if !(curv > 0.0) {
            return Err(Error::Breakdown("non-positive curvature in CG"));
        }
        let alpha = rz / curv;
        axpy(alpha, &d, &mut x);
        axpy(-alpha, &ad, &mut r);
        p.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        if rz_new < 0.0 {
            return Err(Error::Breakdown("preconditioner is not positive definite"));
        }
        rel = math::sqrt(rz_new) / norm0;
        history.push(rel);
        if rel <= tol {
            converged = true;
            break;
        }
        let beta = rz_new / rz;
        rz = rz_new;
        for (di, zi) in d.iter_mut().zip(&z) {
            *di = zi + beta * *di;
        }
    }
    let report = KrylovReport {
        iterations: history.len() - 1,
        converged,
        relative_residual: rel,
        history,
    };
    Ok((x, report))
}
