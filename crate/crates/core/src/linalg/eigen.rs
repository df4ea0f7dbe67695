use alloc::vec;
use alloc::vec::Vec;

use super::DenseMatrix;
use crate::error::{Error, Result};
use crate::math;

const JACOBI_MAX_DIM: usize = 2000;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigenvalues of a dense symmetric matrix by cyclic Jacobi rotations, ascending.
///
/// Sweeps continue until the off-diagonal Frobenius norm drops to
/// `1e-13 * ||A||_F`.
pub fn jacobi_eigensolver(a: &DenseMatrix) -> Result<Vec<f64>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: a.ncols(),
        });
    }
    if n > JACOBI_MAX_DIM {
        return Err(Error::Capacity {
            size: n,
            cap: JACOBI_MAX_DIM,
        });
    }
    if !a.is_symmetric(1e-12) {
        return Err(Error::NotSymmetric);
    }
    let mut m = a.symmetrized();
    let fro = m.frobenius_norm();
    let target = 1e-13 * fro;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_diagonal_norm(&m) <= target {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let tau = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + math::sqrt(1.0 + tau * tau))
                } else {
                    -1.0 / (-tau + math::sqrt(1.0 + tau * tau))
                };
                let c = 1.0 / math::sqrt(1.0 + t * t);
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = c * akp - s * akq;
                    m[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = c * apk - s * aqk;
                    m[(q, k)] = s * apk + c * aqk;
                }
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(eig)
}

fn off_diagonal_norm(m: &DenseMatrix) -> f64 {
    let n = m.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += m[(i, j)] * m[(i, j)];
            }
        }
    }
    math::sqrt(s)
}

/// Eigenvalues `(re, im)` of a general real matrix: elimination to upper
/// Hessenberg form followed by the shifted double-step QR iteration.
pub fn general_eigenvalues(a: &DenseMatrix) -> Result<Vec<(f64, f64)>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: a.ncols(),
        });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    // one-based working copy keeps the classical index arithmetic readable
    let mut h = OneBased::new(n);
    for i in 0..n {
        for j in 0..n {
            *h.at(i + 1, j + 1) = a[(i, j)];
        }
    }
    elmhes(&mut h, n);
    for i in 1..=n {
        for j in 1..i.saturating_sub(1) {
            *h.at(i, j) = 0.0;
        }
    }
    hqr(&mut h, n)
}

struct OneBased {
    n: usize,
    data: Vec<f64>,
}

impl OneBased {
    fn new(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; (n + 1) * (n + 1)],
        }
    }

    #[inline]
    fn at(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.data[i * (self.n + 1) + j]
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * (self.n + 1) + j]
    }
}

fn elmhes(a: &mut OneBased, n: usize) {
    for m in 2..n {
        let mut x = 0.0_f64;
        let mut i = m;
        for j in m..=n {
            if a.get(j, m - 1).abs() > x.abs() {
                x = a.get(j, m - 1);
                i = j;
            }
        }
        if i != m {
            for j in m - 1..=n {
                let (u, v) = (a.get(i, j), a.get(m, j));
                *a.at(i, j) = v;
                *a.at(m, j) = u;
            }
            for j in 1..=n {
                let (u, v) = (a.get(j, i), a.get(j, m));
                *a.at(j, i) = v;
                *a.at(j, m) = u;
            }
        }
        if x != 0.0 {
            for i in m + 1..=n {
                let mut y = a.get(i, m - 1);
                if y != 0.0 {
                    y /= x;
                    *a.at(i, m - 1) = y;
                    for j in m..=n {
                        let v = a.get(m, j);
                        *a.at(i, j) -= y * v;
                    }
                    for j in 1..=n {
                        let v = a.get(j, i);
                        *a.at(j, m) += y * v;
                    }
                }
            }
        }
    }
}

fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

fn hqr(a: &mut OneBased, n: usize) -> Result<Vec<(f64, f64)>> {
    let mut wr = vec![0.0; n + 1];
    let mut wi = vec![0.0; n + 1];
    let mut anorm = 0.0;
    for i in 1..=n {
        for j in i.saturating_sub(1).max(1)..=n {
            anorm += a.get(i, j).abs();
        }
    }
    let mut nn = n as isize;
    let mut t = 0.0;
    while nn >= 1 {
        let mut its = 0;
        loop {
            let nu = nn as usize;
            let mut l = nu;
            while l >= 2 {
                let mut s = a.get(l - 1, l - 1).abs() + a.get(l, l).abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a.get(l, l - 1).abs() + s == s {
                    *a.at(l, l - 1) = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = a.get(nu, nu);
            if l == nu {
                wr[nu] = x + t;
                wi[nu] = 0.0;
                nn -= 1;
            } else {
                let mut y = a.get(nu - 1, nu - 1);
                let mut w = a.get(nu, nu - 1) * a.get(nu - 1, nu);
                if l == nu - 1 {
                    let p = 0.5 * (y - x);
                    let q = p * p + w;
                    let mut z = math::sqrt(q.abs());
                    x += t;
                    if q >= 0.0 {
                        z = p + sign(z, p);
                        wr[nu - 1] = x + z;
                        wr[nu] = x + z;
                        if z != 0.0 {
                            wr[nu] = x - w / z;
                        }
                        wi[nu - 1] = 0.0;
                        wi[nu] = 0.0;
                    } else {
                        wr[nu - 1] = x + p;
                        wr[nu] = x + p;
                        wi[nu - 1] = -z;
                        wi[nu] = z;
                    }
                    nn -= 2;
                } else {
                    if its == 60 {
                        return Err(Error::InvalidArgument(
                            "QR eigenvalue iteration did not converge".into(),
                        ));
                    }
                    if its == 10 || its == 20 {
                        t += x;
                        for i in 1..=nu {
                            *a.at(i, i) -= x;
                        }
                        let s = a.get(nu, nu - 1).abs() + a.get(nu - 1, nu - 2).abs();
                        x = 0.75 * s;
                        y = x;
                        w = -0.4375 * s * s;
                    }
                    its += 1;
                    let mut m = nu - 2;
                    let (mut p, mut q, mut r);
                    let mut z;
                    loop {
                        z = a.get(m, m);
                        let rr = x - z;
                        let ss = y - z;
                        p = (rr * ss - w) / a.get(m + 1, m) + a.get(m, m + 1);
                        q = a.get(m + 1, m + 1) - z - rr - ss;
                        r = a.get(m + 2, m + 1);
                        let s = p.abs() + q.abs() + r.abs();
                        p /= s;
                        q /= s;
                        r /= s;
                        if m == l {
                            break;
                        }
                        let u = a.get(m, m - 1).abs() * (q.abs() + r.abs());
                        let v = p.abs()
                            * (a.get(m - 1, m - 1).abs() + z.abs() + a.get(m + 1, m + 1).abs());
                        if u + v == v {
                            break;
                        }
                        m -= 1;
                    }
                    for i in m + 2..=nu {
                        *a.at(i, i - 2) = 0.0;
                        if i != m + 2 {
                            *a.at(i, i - 3) = 0.0;
                        }
                    }
                    let mut k = m;
                    while k + 1 <= nu {
                        if k != m {
                            p = a.get(k, k - 1);
                            q = a.get(k + 1, k - 1);
                            r = 0.0;
                            if k != nu - 1 {
                                r = a.get(k + 2, k - 1);
                            }
                            x = p.abs() + q.abs() + r.abs();
                            if x != 0.0 {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        let s = sign(math::sqrt(p * p + q * q + r * r), p);
                        if s != 0.0 {
                            if k == m {
                                if l != m {
                                    *a.at(k, k - 1) = -a.get(k, k - 1);
                                }
                            } else {
                                *a.at(k, k - 1) = -s * x;
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            z = r / s;
                            q /= p;
                            r /= p;
                            for j in k..=nu {
                                p = a.get(k, j) + q * a.get(k + 1, j);
                                if k != nu - 1 {
                                    p += r * a.get(k + 2, j);
                                    *a.at(k + 2, j) -= p * z;
                                }
                                *a.at(k + 1, j) -= p * y;
                                *a.at(k, j) -= p * x;
                            }
                            let mmin = if nu < k + 3 { nu } else { k + 3 };
                            for i in l..=mmin {
                                p = x * a.get(i, k) + y * a.get(i, k + 1);
                                if k != nu - 1 {
                                    p += z * a.get(i, k + 2);
                                    *a.at(i, k + 2) -= p * r;
                                }
                                *a.at(i, k + 1) -= p * q;
                                *a.at(i, k) -= p;
                            }
                        }
                        k += 1;
                    }
                }
            }
            if nn < 1 || l + 1 >= nn as usize {
                break;
            }
        }
    }
    Ok((1..=n).map(|i| (wr[i], wi[i])).collect())
}
