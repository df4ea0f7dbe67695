use alloc::vec;
use alloc::vec::Vec;

use super::{KrylovReport, LinearOperator};
use crate::error::{check_len, Error, Result};
use crate::linalg::dot;
use crate::math;

/// Preconditioned MINRES for symmetric, possibly indefinite operators with an
/// SPD preconditioner. The monitored quantity is the `P^{-1}`-norm of the
/// residual relative to that of `b`, which never increases.
pub fn minres(
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
    let mut r1 = b.to_vec();
    let mut y = vec![0.0; n];
    p.apply(&r1, &mut y);
    let beta1 = dot(&r1, &y);
    if beta1 < 0.0 {
        return Err(Error::Breakdown("indefinite preconditioner in MINRES"));
    }
    if beta1 == 0.0 {
        return Ok((x, KrylovReport::trivial()));
    }
    let beta1 = math::sqrt(beta1);
    let mut r2 = r1.clone();
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut w1 = vec![0.0; n];
    let mut w2 = vec![0.0; n];

    let (mut oldb, mut beta) = (0.0, beta1);
    let (mut dbar, mut epsln) = (0.0, 0.0);
    let mut phibar = beta1;
    let (mut cs, mut sn) = (-1.0, 0.0);
    let mut history = vec![1.0];
    let mut converged = false;
    let mut rel = 1.0;

    for itn in 1..=maxit {
        let s = 1.0 / beta;
        for (vi, yi) in v.iter_mut().zip(&y) {
            *vi = s * yi;
        }
        a.apply(&v, &mut y);
        if itn >= 2 {
            let f = beta / oldb;
            for (yi, ri) in y.iter_mut().zip(&r1) {
                *yi -= f * ri;
            }
        }
        let alfa = dot(&v, &y);
        let f = alfa / beta;
        for (yi, ri) in y.iter_mut().zip(&r2) {
            *yi -= f * ri;
        }
        core::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&y);
        p.apply(&r2, &mut y);
        oldb = beta;
        let bb = dot(&r2, &y);
        if bb < 0.0 {
            return Err(Error::Breakdown("indefinite preconditioner in MINRES"));
        }
        beta = math::sqrt(bb);

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = math::hypot(gbar, beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        let denom = 1.0 / gamma;
        core::mem::swap(&mut w1, &mut w2);
        core::mem::swap(&mut w2, &mut w);
        for i in 0..n {
            w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) * denom;
            x[i] += phi * w[i];
        }

        rel = phibar.abs() / beta1;
        history.push(rel);
        if rel <= tol || beta == 0.0 {
            converged = true;
            break;
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
