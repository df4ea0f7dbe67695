use alloc::vec;
use alloc::vec::Vec;

use super::{KrylovReport, LinearOperator};
use crate::error::{check_len, Result};
use crate::linalg::{axpy, dot, norm2};
use crate::math;

/// Left-preconditioned GMRES without restarts: modified Gram-Schmidt Arnoldi
/// and Givens rotations on the Hessenberg least-squares problem. The
/// residual monitored is `||P^{-1}(b - A x)|| / ||P^{-1} b||`.
pub fn gmres(
    a: &dyn LinearOperator,
    p: &dyn LinearOperator,
    b: &[f64],
    tol: f64,
    maxit: usize,
) -> Result<(Vec<f64>, KrylovReport)> {
    let n = b.len();
    check_len(a.dim(), n)?;
    check_len(p.dim(), n)?;
    let mut r0 = vec![0.0; n];
    p.apply(b, &mut r0);
    let beta = norm2(&r0);
    let mut x = vec![0.0; n];
    if beta == 0.0 {
        return Ok((x, super::KrylovReport::trivial()));
    }
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(maxit.min(n) + 1);
    basis.push(r0.iter().map(|v| v / beta).collect());
    // h[j] is column j of the Hessenberg matrix, rotated in place
    let mut h: Vec<Vec<f64>> = Vec::new();
    let mut cs: Vec<f64> = Vec::new();
    let mut sn: Vec<f64> = Vec::new();
    let mut g = vec![beta];
    let mut history = vec![1.0];
    let mut converged = false;
    let mut rel = 1.0;
    let mut tmp = vec![0.0; n];
    let mut w = vec![0.0; n];

    for j in 0..maxit {
        a.apply(&basis[j], &mut tmp);
        p.apply(&tmp, &mut w);
        let mut col = vec![0.0; j + 2];
        for (i, vi) in basis.iter().enumerate() {
            let hij = dot(&w, vi);
            col[i] = hij;
            axpy(-hij, vi, &mut w);
        }
        let hnext = norm2(&w);
        col[j + 1] = hnext;
        for i in 0..j {
            let t = cs[i] * col[i] + sn[i] * col[i + 1];
            col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
            col[i] = t;
        }
        let denom = math::hypot(col[j], col[j + 1]);
        let (c, s) = if denom == 0.0 {
            (1.0, 0.0)
        } else {
            (col[j] / denom, col[j + 1] / denom)
        };
        col[j] = c * col[j] + s * col[j + 1];
        col[j + 1] = 0.0;
        cs.push(c);
        sn.push(s);
        let gj = g[j];
        g[j] = c * gj;
        g.push(-s * gj);
        h.push(col);

        rel = g[j + 1].abs() / beta;
        history.push(rel);
        let happy = hnext <= 1e-14 * beta;
        if rel <= tol || happy {
            converged = true;
            break;
        }
        basis.push(w.iter().map(|v| v / hnext).collect());
    }

    // back substitution on the rotated triangle
    let k = h.len();
    let mut yk = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = g[i];
        for jj in i + 1..k {
            s -= h[jj][i] * yk[jj];
        }
        yk[i] = if h[i][i] != 0.0 { s / h[i][i] } else { 0.0 };
    }
    for (yi, vi) in yk.iter().zip(&basis) {
        axpy(*yi, vi, &mut x);
    }
    let report = KrylovReport {
        iterations: k,
        converged,
        relative_residual: rel,
        history,
    };
    Ok((x, report))
}
