//! Geometric multigrid on the nested structured meshes.
//!
//! Level operators are Galerkin products `P^T A P` of the finest matrix with
//! P1 interpolation, smoothing is damped Jacobi and the coarsest level is
//! solved exactly. A fixed number of cycles makes every application a fixed
//! linear map, so the hierarchy can serve as a preconditioner inside MINRES.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};
use crate::fem::{build_mesh, coarse_parents, MeshP1};
use crate::krylov::LinearOperator;
use crate::linalg::{CsrMatrix, DenseFactorization, DEFAULT_SIZE_CAP};

/// Coarsest levels above this many elements per side are rejected.
const MAX_COARSE_FACTOR: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MgSettings {
    pub cycles: usize,
    pub pre_sweeps: usize,
    pub post_sweeps: usize,
    /// Jacobi damping.
    pub omega: f64,
    /// Coarsening stops before the elements per side would drop below this.
    pub coarse_n: usize,
}

impl MgSettings {
    /// Two V(1,1) cycles.
    pub fn schur1() -> Self {
        Self {
            cycles: 2,
            pre_sweeps: 1,
            post_sweeps: 1,
            omega: 0.7,
            coarse_n: 4,
        }
    }

    /// Four V(2,2) cycles.
    pub fn matching() -> Self {
        Self {
            cycles: 4,
            pre_sweeps: 2,
            post_sweeps: 2,
            omega: 0.7,
            coarse_n: 4,
        }
    }
}

impl Default for MgSettings {
    fn default() -> Self {
        Self::schur1()
    }
}

/// Grid transfer operators of a mesh hierarchy, finest first.
#[derive(Debug, Clone)]
pub struct MgTransfers {
    dim: usize,
    level_n: Vec<usize>,
    // prolongations[l] maps level l + 1 to level l
    prolongations: Vec<CsrMatrix>,
    restrictions: Vec<CsrMatrix>,
}

impl MgTransfers {
    pub fn new(mesh: &MeshP1, coarse_n: usize) -> Result<Self> {
        let coarse_n = coarse_n.max(2);
        let mut level_n = vec![mesh.n()];
        let mut n = mesh.n();
        while n % 2 == 0 && n / 2 >= coarse_n {
            n /= 2;
            level_n.push(n);
        }
        if n > MAX_COARSE_FACTOR * coarse_n {
            return Err(Error::InvalidArgument(format!(
                "N = {} cannot be halved down to a coarse mesh of at most {} elements per side",
                mesh.n(),
                MAX_COARSE_FACTOR * coarse_n
            )));
        }
        let mut prolongations = Vec::new();
        let mut fine = mesh.clone();
        for &nc in &level_n[1..] {
            let coarse = build_mesh(mesh.dim(), nc)?;
            prolongations.push(prolongation(&coarse, &fine)?);
            fine = coarse;
        }
        let restrictions = prolongations.iter().map(CsrMatrix::transpose).collect();
        Ok(Self {
            dim: mesh.dim(),
            level_n,
            prolongations,
            restrictions,
        })
    }

    pub fn num_levels(&self) -> usize {
        self.level_n.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Elements per side on each level, finest first.
    pub fn level_n(&self) -> &[usize] {
        &self.level_n
    }

    pub fn prolongation(&self, level: usize) -> &CsrMatrix {
        &self.prolongations[level]
    }
}

/// Nodal P1 interpolation from `coarse` to its refinement `fine`.
pub fn prolongation(coarse: &MeshP1, fine: &MeshP1) -> Result<CsrMatrix> {
    if coarse.dim() != fine.dim() || fine.n() != 2 * coarse.n() {
        return Err(Error::InvalidArgument(format!(
            "mesh with N={} does not refine N={}",
            fine.n(),
            coarse.n()
        )));
    }
    let mut t = Vec::with_capacity(2 * fine.num_nodes());
    for f in 0..fine.num_nodes() {
        let (a, b) = coarse_parents(coarse, fine, f);
        if a == b {
            t.push((f, a, 1.0));
        } else {
            t.push((f, a, 0.5));
            t.push((f, b, 0.5));
        }
    }
    CsrMatrix::from_triplets(fine.num_nodes(), coarse.num_nodes(), &t)
}

#[derive(Debug, Clone)]
struct Level {
    a: CsrMatrix,
    at: CsrMatrix,
    inv_diag: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct MgHierarchy {
    transfers: Arc<MgTransfers>,
    levels: Vec<Level>,
    coarse: DenseFactorization,
    settings: MgSettings,
}

/// Builds transfers for `mesh` and the hierarchy for `a_fine` in one go.
pub fn build_hierarchy(mesh: &MeshP1, a_fine: &CsrMatrix, settings: MgSettings) -> Result<MgHierarchy> {
    let transfers = Arc::new(MgTransfers::new(mesh, settings.coarse_n)?);
    MgHierarchy::new(transfers, a_fine, settings)
}

impl MgHierarchy {
    pub fn new(transfers: Arc<MgTransfers>, a_fine: &CsrMatrix, settings: MgSettings) -> Result<Self> {
        let n0 = transfers
            .prolongations
            .first()
            .map(CsrMatrix::nrows)
            .unwrap_or_else(|| a_fine.nrows());
        check_len(n0, a_fine.nrows())?;
        check_len(n0, a_fine.ncols())?;
        let mut levels = Vec::with_capacity(transfers.num_levels());
        let mut a = a_fine.clone();
        for l in 0..transfers.num_levels() {
            let next = if l + 1 < transfers.num_levels() {
                let ap = a.matmul(&transfers.prolongations[l])?;
                Some(transfers.restrictions[l].matmul(&ap)?)
            } else {
                None
            };
            let inv_diag = a
                .diagonal()
                .iter()
                .enumerate()
                .map(|(i, &d)| {
                    if d == 0.0 {
                        Err(Error::InvalidArgument(format!(
                            "zero diagonal at row {i} of multigrid level {l}"
                        )))
                    } else {
                        Ok(1.0 / d)
                    }
                })
                .collect::<Result<Vec<f64>>>()?;
            let at = a.transpose();
            levels.push(Level { a, at, inv_diag });
            match next {
                Some(c) => a = c,
                None => break,
            }
        }
        let coarse = DenseFactorization::factor(&levels.last().unwrap().a, DEFAULT_SIZE_CAP)?;
        Ok(Self {
            transfers,
            levels,
            coarse,
            settings,
        })
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn settings(&self) -> &MgSettings {
        &self.settings
    }

    pub fn level_matrix(&self, l: usize) -> &CsrMatrix {
        &self.levels[l].a
    }

    pub fn transfers(&self) -> &Arc<MgTransfers> {
        &self.transfers
    }

    pub fn dim(&self) -> usize {
        self.levels[0].a.nrows()
    }

    /// Fixed number of V-cycles for `A x = b` starting from zero.
    pub fn apply(&self, b: &[f64]) -> Vec<f64> {
        self.cycle_all(b, false)
    }

    /// Exact transpose of [`Self::apply`].
    pub fn apply_transpose(&self, b: &[f64]) -> Vec<f64> {
        self.cycle_all(b, true)
    }

    fn cycle_all(&self, b: &[f64], transpose: bool) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let fine = &self.levels[0];
        let a = if transpose { &fine.at } else { &fine.a };
        let mut x = vec![0.0; n];
        let mut r = b.to_vec();
        for c in 0..self.settings.cycles {
            if c > 0 {
                r.copy_from_slice(b);
                a.spmv_add(-1.0, &x, &mut r);
            }
            let e = self.vcycle(0, &r, transpose);
            for (xi, ei) in x.iter_mut().zip(&e) {
                *xi += ei;
            }
        }
        x
    }

    // one cycle from a zero initial guess on level `l`
    fn vcycle(&self, l: usize, b: &[f64], transpose: bool) -> Vec<f64> {
        if l + 1 == self.levels.len() {
            return if transpose {
                self.coarse.solve_transpose(b)
            } else {
                self.coarse.solve(b)
            };
        }
        let lev = &self.levels[l];
        let a = if transpose { &lev.at } else { &lev.a };
        let (pre, post) = if transpose {
            (self.settings.post_sweeps, self.settings.pre_sweeps)
        } else {
            (self.settings.pre_sweeps, self.settings.post_sweeps)
        };
        let n = b.len();
        let mut x = vec![0.0; n];
        let mut r = vec![0.0; n];
        self.smooth(lev, a, b, &mut x, &mut r, pre);
        r.copy_from_slice(b);
        a.spmv_add(-1.0, &x, &mut r);
        let rc = self.transfers.restrictions[l].spmv(&r).expect("restriction shape");
        let ec = self.vcycle(l + 1, &rc, transpose);
        self.transfers.prolongations[l].spmv_add(1.0, &ec, &mut x);
        self.smooth(lev, a, b, &mut x, &mut r, post);
        x
    }

    fn smooth(&self, lev: &Level, a: &CsrMatrix, b: &[f64], x: &mut [f64], r: &mut [f64], sweeps: usize) {
        let w = self.settings.omega;
        for _ in 0..sweeps {
            r.copy_from_slice(b);
            a.spmv_add(-1.0, x, r);
            for ((xi, ri), di) in x.iter_mut().zip(r.iter()).zip(&lev.inv_diag) {
                *xi += w * di * ri;
            }
        }
    }
}

pub fn vcycle_apply(h: &MgHierarchy, b: &[f64]) -> Vec<f64> {
    h.apply(b)
}

pub fn vcycle_apply_transpose(h: &MgHierarchy, b: &[f64]) -> Vec<f64> {
    h.apply_transpose(b)
}

impl LinearOperator for MgHierarchy {
    fn dim(&self) -> usize {
        MgHierarchy::dim(self)
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(&MgHierarchy::apply(self, x));
    }
}

/// The transposed cycle as an operator.
pub struct TransposedCycle<'a>(pub &'a MgHierarchy);

impl LinearOperator for TransposedCycle<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(&self.0.apply_transpose(x));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble_laplacian, assemble_stiffness};

    #[test]
    fn level_counts() {
        let m16 = build_mesh(2, 16).unwrap();
        assert_eq!(MgTransfers::new(&m16, 4).unwrap().num_levels(), 3);
        let m40 = build_mesh(2, 40).unwrap();
        assert_eq!(MgTransfers::new(&m40, 4).unwrap().level_n(), &[40, 20, 10, 5]);
        let m34 = build_mesh(2, 34).unwrap();
        assert!(MgTransfers::new(&m34, 4).is_err());
    }

    #[test]
    fn prolongated_ones() {
        let c = build_mesh(2, 4).unwrap();
        let f = build_mesh(2, 8).unwrap();
        let p = prolongation(&c, &f).unwrap();
        let v = p.spmv(&vec![1.0; c.num_nodes()]).unwrap();
        assert!(v.iter().all(|&x| (x - 1.0).abs() < 1e-15));
    }

    #[test]
    fn galerkin_matches_rediscretization() {
        for d in [2, 3] {
            let f = build_mesh(d, 8).unwrap();
            let c = build_mesh(d, 4).unwrap();
            let h = build_hierarchy(&f, &assemble_stiffness(&f).unwrap(), MgSettings::schur1()).unwrap();
            let direct = assemble_laplacian(&c).unwrap();
            let g = h.level_matrix(1);
            for i in 0..c.num_nodes() {
                if c.is_boundary(i) {
                    continue;
                }
                for j in (0..c.num_nodes()).filter(|&j| !c.is_boundary(j)) {
                    let want = direct.get(i, j);
                    assert!((g.get(i, j) - want).abs() < 1e-12, "d={d} ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn zero_in_zero_out() {
        let f = build_mesh(2, 8).unwrap();
        let h = build_hierarchy(&f, &assemble_stiffness(&f).unwrap(), MgSettings::schur1()).unwrap();
        assert!(h.apply(&vec![0.0; f.num_nodes()]).iter().all(|&v| v == 0.0));
    }
}
