//! The reduced double saddle-point system of one Newton step and its
//! block preconditioners.
//!
//! After the trivial rows of active controls are eliminated, the unknowns
//! are ordered `(q_inactive, y_scaled, u)` and the matrix reads
//!
//! ```text
//! | A1  B1^T  0   |
//! | B1  -A2   B2^T|
//! | 0   B2    A3  |
//! ```
//!
//! with `A1 = (lambda M_Q + gamma M_FE)` restricted to inactive controls,
//! `A2 = lambda / (1 + rho lambda) M_Y`, `A3 = lambda M_U + M_FE + N_U`,
//! `B1` the inactive columns of `c_q` and `B2 = c_u^T`.

mod precond;

use alloc::vec;
use alloc::vec::Vec;

pub use precond::{
    matching_factor, precond_apply, shat1, shat2_basic_apply, solve_reduced, KrylovKind,
    PrecondSettings, PreconditionerVariant, SaddlePreconditioner, SchurApprox,
};

use crate::error::{check_len, Error, Result};
use crate::fem::ProblemInstance;
use crate::krylov::LinearOperator;
use crate::linalg::CsrMatrix;

/// Derivative blocks of the Lagrangian at the reference point that do not
/// depend on `lambda` or the active set.
#[derive(Debug, Clone)]
pub struct HessianBlocks {
    /// `c_u`, the state Jacobian.
    pub c_u: CsrMatrix,
    /// `c_u^T`.
    pub c_u_t: CsrMatrix,
    /// `M_FE + N_U`.
    pub h_u: CsrMatrix,
}

impl HessianBlocks {
    /// Blocks at state `u` with adjoint weight `w` (the shifted multiplier `y + rho r`).
    pub fn assemble(inst: &ProblemInstance, u: &[f64], w: &[f64]) -> Result<Self> {
        let c_u = crate::fem::state_jacobian(inst, u)?;
        let n_u = crate::fem::adjoint_hessian(inst, u, w)?;
        let h_u = inst.mass.add_scaled(1.0, &n_u, 1.0)?;
        let c_u_t = c_u.transpose();
        Ok(Self { c_u, c_u_t, h_u })
    }
}

#[derive(Debug, Clone)]
pub struct DoubleSaddleBlocks {
    pub a1: CsrMatrix,
    pub a2: CsrMatrix,
    pub a3: CsrMatrix,
    pub b1: CsrMatrix,
    pub b1_t: CsrMatrix,
    pub b2: CsrMatrix,
    pub b2_t: CsrMatrix,
    pub inactive: Vec<usize>,
    pub active: Vec<usize>,
    pub lambda: f64,
    pub rho: f64,
    pub gamma: f64,
    /// Lumped control mass on all nodes.
    pub mass_lumped: Vec<f64>,
    pub mass: CsrMatrix,
    /// `M_U = M_Y`.
    pub stiffness: CsrMatrix,
    /// Spatial dimension of the underlying mesh.
    pub spatial_dim: usize,
}

impl DoubleSaddleBlocks {
    /// Sizes of the three block rows.
    pub fn block_sizes(&self) -> [usize; 3] {
        [self.a1.nrows(), self.a2.nrows(), self.a3.nrows()]
    }

    pub fn dim(&self) -> usize {
        self.block_sizes().iter().sum()
    }

    /// The whole reduced matrix as one sparse matrix.
    pub fn assemble(&self) -> Result<CsrMatrix> {
        let sizes = self.block_sizes();
        let neg_a2 = self.a2.scaled(-1.0);
        CsrMatrix::from_blocks(
            &sizes,
            &sizes,
            &[
                (0, 0, &self.a1),
                (0, 1, &self.b1_t),
                (1, 0, &self.b1),
                (1, 1, &neg_a2),
                (1, 2, &self.b2_t),
                (2, 1, &self.b2),
                (2, 2, &self.a3),
            ],
        )
    }
}

impl LinearOperator for DoubleSaddleBlocks {
    fn dim(&self) -> usize {
        DoubleSaddleBlocks::dim(self)
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let [n1, n2, _] = self.block_sizes();
        let (x1, rest) = x.split_at(n1);
        let (x2, x3) = rest.split_at(n2);
        let (y1, rest) = y.split_at_mut(n1);
        let (y2, y3) = rest.split_at_mut(n2);
        self.a1.spmv_into(x1, y1);
        self.b1_t.spmv_add(1.0, x2, y1);
        self.a2.spmv_into(x2, y2);
        for v in y2.iter_mut() {
            *v = -*v;
        }
        self.b1.spmv_add(1.0, x1, y2);
        self.b2_t.spmv_add(1.0, x3, y2);
        self.a3.spmv_into(x3, y3);
        self.b2.spmv_add(1.0, x2, y3);
    }
}

/// Right-hand side of a Newton step in the scaled variables.
#[derive(Debug, Clone)]
pub struct NewtonRhs {
    /// Control part of `b~1` (active entries already `q_i - bound_i`).
    pub b1_q: Vec<f64>,
    /// State part of `b~1`.
    pub b1_u: Vec<f64>,
    /// `b~2 = b2 / (1 + rho lambda)`.
    pub b2: Vec<f64>,
}

/// Reduced system for the active set `active` (one flag per control node).
///
/// Returns the blocks, the reduced right-hand side and the fixed active
/// increments `dq_A = -b~1_A`.
pub fn reduce_system(
    inst: &ProblemInstance,
    hess: &HessianBlocks,
    active: &[bool],
    lambda: f64,
    rhs: &NewtonRhs,
) -> Result<(DoubleSaddleBlocks, Vec<f64>, Vec<f64>)> {
    let n = inst.num_nodes();
    check_len(n, active.len())?;
    check_len(n, rhs.b1_q.len())?;
    check_len(n, rhs.b1_u.len())?;
    check_len(n, rhs.b2.len())?;
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(alloc::format!("lambda must be >= 0, got {lambda}")));
    }
    let p = inst.params;
    let inactive: Vec<usize> = (0..n).filter(|&i| !active[i]).collect();
    let act: Vec<usize> = (0..n).filter(|&i| active[i]).collect();
    let all: Vec<usize> = (0..n).collect();

    let lumped = CsrMatrix::from_diagonal(&inst.mass_lumped);
    let a1_full = CsrMatrix::linear_combination(&[(lambda, &lumped), (p.gamma, &inst.mass)])?;
    let a1 = a1_full.submatrix(&inactive, &inactive);
    let a2 = inst.stiffness.scaled(lambda / (1.0 + p.rho * lambda));
    let a3 = inst.stiffness.add_scaled(lambda, &hess.h_u, 1.0)?;
    let b1 = inst.control_jacobian.submatrix(&all, &inactive);
    let b1_t = b1.transpose();

    let dq_active: Vec<f64> = act.iter().map(|&i| -rhs.b1_q[i]).collect();
    let mut dq_full = vec![0.0; n];
    for (&i, &v) in act.iter().zip(&dq_active) {
        dq_full[i] = v;
    }
    let mut coupling = vec![0.0; n];
    inst.mass.spmv_add(p.gamma, &dq_full, &mut coupling);
    let mut f = Vec::with_capacity(inactive.len() + 2 * n);
    f.extend(inactive.iter().map(|&i| -rhs.b1_q[i] - coupling[i]));
    let mut f2: Vec<f64> = rhs.b2.iter().map(|v| -v).collect();
    inst.control_jacobian.spmv_add(-1.0, &dq_full, &mut f2);
    f.extend_from_slice(&f2);
    f.extend(rhs.b1_u.iter().map(|v| -v));

    let blocks = DoubleSaddleBlocks {
        a1,
        a2,
        a3,
        b1,
        b1_t,
        b2: hess.c_u_t.clone(),
        b2_t: hess.c_u.clone(),
        inactive,
        active: act,
        lambda,
        rho: p.rho,
        gamma: p.gamma,
        mass_lumped: inst.mass_lumped.clone(),
        mass: inst.mass.clone(),
        stiffness: inst.stiffness.clone(),
        spatial_dim: inst.mesh.dim(),
    };
    Ok((blocks, f, dq_active))
}

/// Scatters a reduced solution back to `(dq, du, dy~)` on all nodes.
pub fn expand_solution(
    blocks: &DoubleSaddleBlocks,
    z: &[f64],
    dq_active: &[f64],
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    check_len(blocks.dim(), z.len())?;
    check_len(blocks.active.len(), dq_active.len())?;
    let [n1, n2, _] = blocks.block_sizes();
    let n = n2;
    let mut dq = vec![0.0; n];
    for (&i, &v) in blocks.inactive.iter().zip(&z[..n1]) {
        dq[i] = v;
    }
    for (&i, &v) in blocks.active.iter().zip(dq_active) {
        dq[i] = v;
    }
    let dy = z[n1..n1 + n2].to_vec();
    let du = z[n1 + n2..].to_vec();
    Ok((dq, du, dy))
}

/// `dy = (dy~ + rho r) / (1 + rho lambda)` with the Riesz representative `r = M_Y^{-1} b2`.
pub fn recover_multiplier(dy_scaled: &[f64], r: &[f64], rho: f64, lambda: f64) -> Result<Vec<f64>> {
    check_len(dy_scaled.len(), r.len())?;
    let s = 1.0 / (1.0 + rho * lambda);
    Ok(dy_scaled.iter().zip(r).map(|(d, ri)| s * (d + rho * ri)).collect())
}
