use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::LinearOperator;
use crate::error::{check_len, Error, Result};

/// `k` steps of the Chebyshev semi-iteration for `A x = b` started at zero,
/// for an operator whose spectrum lies in `[lo, hi]`. The result is
/// `p(A) b` for a fixed polynomial `p`, so the map `b -> x` is linear.
pub fn chebyshev(a: &dyn LinearOperator, b: &[f64], k: usize, lo: f64, hi: f64) -> Result<Vec<f64>> {
    let n = b.len();
    check_len(a.dim(), n)?;
    if !(lo > 0.0) || !(hi > lo) {
        return Err(Error::InvalidArgument(format!(
            "Chebyshev bounds must satisfy 0 < lo < hi, got [{lo}, {hi}]"
        )));
    }
    let theta = 0.5 * (hi + lo);
    let delta = 0.5 * (hi - lo);
    let sigma = theta / delta;
    let mut x = vec![0.0; n];
    if k == 0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut d: Vec<f64> = r.iter().map(|v| v / theta).collect();
    let mut ad = vec![0.0; n];
    let mut rho = 1.0 / sigma;
    for (xi, di) in x.iter_mut().zip(&d) {
        *xi += di;
    }
    for _ in 1..k {
        a.apply(&d, &mut ad);
        for (ri, adi) in r.iter_mut().zip(&ad) {
            *ri -= adi;
        }
        let rho_new = 1.0 / (2.0 * sigma - rho);
        let c1 = rho_new * rho;
        let c2 = 2.0 * rho_new / delta;
        for i in 0..n {
            d[i] = c1 * d[i] + c2 * r[i];
            x[i] += d[i];
        }
        rho = rho_new;
    }
    Ok(x)
}
