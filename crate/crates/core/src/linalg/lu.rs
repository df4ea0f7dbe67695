//! Exact solves for the assembled systems: reverse Cuthill-McKee ordering
//! followed by a banded LU factorization with partial pivoting.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use super::CsrMatrix;
use crate::error::{check_len, Error, Result};

pub const DEFAULT_SIZE_CAP: usize = 20_000;

/// `P A P^T = L U` with `P` the bandwidth-reducing permutation and row pivoting
/// inside the band.
#[derive(Debug, Clone)]
pub struct DenseFactorization {
    n: usize,
    size_cap: usize,
    // perm[new] = old
    perm: Vec<usize>,
    kl: usize,
    ku: usize,
    ldab: usize,
    // column-major band; entry (i, j) sits at (kl + ku + i - j) + j * ldab
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

pub fn dense_lu_factor(a: &CsrMatrix) -> Result<DenseFactorization> {
    DenseFactorization::factor(a, DEFAULT_SIZE_CAP)
}

impl DenseFactorization {
    pub fn factor(a: &CsrMatrix, size_cap: usize) -> Result<Self> {
        let n = a.nrows();
        check_len(n, a.ncols())?;
        if n > size_cap {
            return Err(Error::Capacity { size: n, cap: size_cap });
        }
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }

        let (mut kl, mut ku) = (0usize, 0usize);
        for i in 0..n {
            let (cols, _) = a.row(i);
            for &j in cols {
                let (r, c) = (inv[i], inv[j]);
                if r > c {
                    kl = kl.max(r - c);
                } else {
                    ku = ku.max(c - r);
                }
            }
        }
        let kv = kl + ku;
        let ldab = kv + kl + 1;
        let mut ab = vec![0.0; ldab * n];
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let (r, c) = (inv[i], inv[j]);
                ab[kv + r - c + c * ldab] = v;
            }
        }

        let scale = a.row_abs_sums().into_iter().fold(0.0_f64, f64::max);
        let threshold = 1e-14 * scale;
        let mut f = Self {
            n,
            size_cap,
            perm,
            kl,
            ku,
            ldab,
            ab,
            ipiv: vec![0; n],
        };
        f.eliminate(threshold)?;
        Ok(f)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        self.kl + self.ku + i - j + j * self.ldab
    }

    fn eliminate(&mut self, threshold: f64) -> Result<()> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let mut ju = 0;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut p = j;
            let mut best = self.ab[self.idx(j, j)].abs();
            for i in j + 1..=j + km {
                let v = self.ab[self.idx(i, j)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || best < threshold {
                return Err(Error::Singular { step: j });
            }
            self.ipiv[j] = p;
            ju = ju.max((j + ku + p - j).min(n - 1));
            if p != j {
                for c in j..=ju {
                    let (x, y) = (self.idx(p, c), self.idx(j, c));
                    self.ab.swap(x, y);
                }
            }
            if km > 0 {
                let pivot = self.ab[self.idx(j, j)];
                for i in j + 1..=j + km {
                    let k = self.idx(i, j);
                    self.ab[k] /= pivot;
                }
                for c in j + 1..=ju {
                    let ujc = self.ab[self.idx(j, c)];
                    if ujc == 0.0 {
                        continue;
                    }
                    let src = self.idx(j + 1, j);
                    let dst = self.idx(j + 1, c);
                    // both columns are contiguous in the band layout
                    for t in 0..km {
                        self.ab[dst + t] -= self.ab[src + t] * ujc;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn size_cap(&self) -> usize {
        self.size_cap
    }

    /// Lower and upper bandwidth after reordering.
    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    /// Solves `A z = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let kv = self.kl + self.ku;
        let mut w: Vec<f64> = self.perm.iter().map(|&o| b[o]).collect();
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                w.swap(p, j);
            }
            let wj = w[j];
            if wj != 0.0 {
                let km = self.kl.min(n - 1 - j);
                let base = self.idx(j + 1, j);
                for t in 0..km {
                    w[j + 1 + t] -= self.ab[base + t] * wj;
                }
            }
        }
        for j in (0..n).rev() {
            w[j] /= self.ab[self.idx(j, j)];
            let wj = w[j];
            if wj != 0.0 {
                for i in j.saturating_sub(kv)..j {
                    w[i] -= self.ab[self.idx(i, j)] * wj;
                }
            }
        }
        let mut z = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            z[old] = w[new];
        }
        z
    }

    /// Solves `A^T z = b`.
    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let kv = self.kl + self.ku;
        let mut w: Vec<f64> = self.perm.iter().map(|&o| b[o]).collect();
        for j in 0..n {
            let mut s = w[j];
            for i in j.saturating_sub(kv)..j {
                s -= self.ab[self.idx(i, j)] * w[i];
            }
            w[j] = s / self.ab[self.idx(j, j)];
        }
        for j in (0..n).rev() {
            let km = self.kl.min(n - 1 - j);
            if km > 0 {
                let base = self.idx(j + 1, j);
                let mut s = 0.0;
                for t in 0..km {
                    s += self.ab[base + t] * w[j + 1 + t];
                }
                w[j] -= s;
            }
            let p = self.ipiv[j];
            if p != j {
                w.swap(p, j);
            }
        }
        let mut z = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            z[old] = w[new];
        }
        z
    }
}

/// RCM ordering of the symmetrized sparsity pattern; returns `perm[new] = old`.
fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.nrows();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for &j in a.row(i).0 {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();

    let mut order = Vec::with_capacity(n);
    let mut visited = vec![false; n];
    let mut level = vec![usize::MAX; n];
    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        let start = pseudo_peripheral(seed, &adj, &degree, &mut level);
        let mut queue = VecDeque::new();
        visited[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&u| !visited[u]).collect();
            next.sort_by_key(|&u| (degree[u], u));
            for u in next {
                visited[u] = true;
                queue.push_back(u);
            }
        }
    }
    order.reverse();
    order
}

// Repeated BFS from the farthest minimum-degree node until eccentricity stops growing.
fn pseudo_peripheral(seed: usize, adj: &[Vec<usize>], degree: &[usize], dist: &mut [usize]) -> usize {
    let mut start = seed;
    let mut ecc = 0;
    for _ in 0..8 {
        let reached = bfs_levels(start, adj, dist);
        let far = reached.iter().map(|&v| dist[v]).max().unwrap_or(0);
        let candidate = reached
            .iter()
            .copied()
            .filter(|&v| dist[v] == far)
            .min_by_key(|&v| (degree[v], v))
            .unwrap_or(start);
        for &v in &reached {
            dist[v] = usize::MAX;
        }
        if far <= ecc {
            break;
        }
        ecc = far;
        start = candidate;
    }
    start
}

fn bfs_levels(start: usize, adj: &[Vec<usize>], dist: &mut [usize]) -> Vec<usize> {
    let mut reached = vec![start];
    dist[start] = 0;
    let mut head = 0;
    while head < reached.len() {
        let v = reached[head];
        head += 1;
        for &u in &adj[v] {
            if dist[u] == usize::MAX {
                dist[u] = dist[v] + 1;
                reached.push(u);
            }
        }
    }
    reached
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::csr_from_triplets;

    #[test]
    fn identity_and_diagonal() {
        let f = dense_lu_factor(&CsrMatrix::identity(5)).unwrap();
        let b = [1.0, -2.0, 3.0, 0.5, 7.0];
        assert_eq!(f.solve(&b), b);
        let d = CsrMatrix::from_diagonal(&[2.0, 4.0]);
        let f = dense_lu_factor(&d).unwrap();
        assert_eq!(f.solve(&[2.0, 4.0]), [1.0, 1.0]);
    }

    #[test]
    fn capacity_and_singularity() {
        let a = CsrMatrix::identity(4);
        assert_eq!(
            DenseFactorization::factor(&a, 3).unwrap_err(),
            Error::Capacity { size: 4, cap: 3 }
        );
        let s = csr_from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]).unwrap();
        assert!(matches!(dense_lu_factor(&s), Err(Error::Singular { .. })));
    }

    #[test]
    fn pivoting_needed() {
        // zero leading entry forces a row swap
        let a = csr_from_triplets(3, 3, &[(0, 1, 1.0), (1, 0, 2.0), (1, 2, 1.0), (2, 1, 3.0), (2, 2, 1.0)])
            .unwrap();
        let f = dense_lu_factor(&a).unwrap();
        let b = [1.0, 2.0, 3.0];
        let z = f.solve(&b);
        let r = a.spmv(&z).unwrap();
        for (ri, bi) in r.iter().zip(b) {
            assert!((ri - bi).abs() < 1e-14);
        }
        let zt = f.solve_transpose(&b);
        let rt = a.spmv_transpose(&zt).unwrap();
        for (ri, bi) in rt.iter().zip(b) {
            assert!((ri - bi).abs() < 1e-14);
        }
    }

    #[test]
    fn agrees_with_dense_lu_on_scrambled_pattern() {
        // 1D chain numbered out of order: RCM must recover a narrow band
        let n = 30;
        let label = |i: usize| (i * 7) % n;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((label(i), label(i), 4.0 + i as f64 * 0.1));
            if i + 1 < n {
                t.push((label(i), label(i + 1), -1.0));
                t.push((label(i + 1), label(i), -1.5));
            }
        }
        let a = csr_from_triplets(n, n, &t).unwrap();
        let f = dense_lu_factor(&a).unwrap();
        assert_eq!(f.bandwidths(), (1, 1));
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let z = f.solve(&b);
        let want = crate::linalg::DenseLu::factor(&a.to_dense()).unwrap().solve(&b);
        for (x, y) in z.iter().zip(&want) {
            assert!((x - y).abs() < 1e-13);
        }
    }
}
