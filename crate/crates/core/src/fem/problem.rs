use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::assembly::{
    apply_dirichlet, assemble_elementwise, assemble_mass, assemble_stiffness, grad_dot, mass_weight,
    zero_boundary_rows,
};
use super::mesh::{element_geometry, MeshP1};
use crate::error::{check_len, Error, Result};
use crate::linalg::CsrMatrix;

/// Coefficients of the control problem
///
/// ```text
/// min 1/2 |u - u_d|^2 + gamma/2 |q|^2   s.t.  -div((a + b u^2) grad u) = q,  u = 0 on the boundary,
///                                             q_l <= q <= q_u
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemParams {
    pub a: f64,
    pub b: f64,
    pub gamma: f64,
    /// Augmentation weight of the constraint penalty.
    pub rho: f64,
}

impl Default for ProblemParams {
    fn default() -> Self {
        Self {
            a: 1e-2,
            b: 1e2,
            gamma: 1e-6,
            rho: 1e-1,
        }
    }
}

/// A discretized problem: mesh, data vectors and the constant matrices.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub params: ProblemParams,
    pub mesh: MeshP1,
    pub q_lower: Vec<f64>,
    pub q_upper: Vec<f64>,
    pub u_target: Vec<f64>,
    /// Consistent mass matrix `M_FE`.
    pub mass: CsrMatrix,
    /// Lumped control mass, the diagonal of `M_FE`.
    pub mass_lumped: Vec<f64>,
    /// Dirichlet-modified stiffness matrix, used for both `M_U` and `M_Y`.
    pub stiffness: CsrMatrix,
    /// Derivative of the residual w.r.t. the control: `M_FE` with boundary rows zeroed.
    pub control_jacobian: CsrMatrix,
}

impl ProblemInstance {
    pub fn new(
        mesh: MeshP1,
        params: ProblemParams,
        q_lower: Vec<f64>,
        q_upper: Vec<f64>,
        u_target: Vec<f64>,
    ) -> Result<Self> {
        let n = mesh.num_nodes();
        check_len(n, q_lower.len())?;
        check_len(n, q_upper.len())?;
        check_len(n, u_target.len())?;
        if !(params.a > 0.0) || !(params.b >= 0.0) || !(params.gamma > 0.0) || !(params.rho >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "need a > 0, b >= 0, gamma > 0, rho >= 0 (got {params:?})"
            )));
        }
        if let Some(i) = (0..n).find(|&i| !(q_lower[i] < q_upper[i])) {
            return Err(Error::InvalidArgument(format!(
                "lower bound {} not below upper bound {} at node {i}",
                q_lower[i], q_upper[i]
            )));
        }
        let mass = assemble_mass(&mesh)?;
        let mass_lumped = mass.diagonal();
        let stiffness = assemble_stiffness(&mesh)?;
        let mut control_jacobian = mass.clone();
        zero_boundary_rows(&mesh, &mut control_jacobian);
        Ok(Self {
            params,
            mesh,
            q_lower,
            q_upper,
            u_target,
            mass,
            mass_lumped,
            stiffness,
            control_jacobian,
        })
    }

    /// Constant bounds and target.
    pub fn with_constant_data(
        mesh: MeshP1,
        params: ProblemParams,
        q_lower: f64,
        q_upper: f64,
        u_target: f64,
    ) -> Result<Self> {
        let n = mesh.num_nodes();
        Self::new(mesh, params, vec![q_lower; n], vec![q_upper; n], vec![u_target; n])
    }

    pub fn num_nodes(&self) -> usize {
        self.mesh.num_nodes()
    }

    /// Copy of `v` with boundary entries set to zero.
    pub fn mask_boundary(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .enumerate()
            .map(|(i, &x)| if self.mesh.is_boundary(i) { 0.0 } else { x })
            .collect()
    }
}

// Per-element state: volume, gradients, local u, M^ u / |T|, u^T M^ u / |T|, grad u_h.
struct ElementState {
    vol: f64,
    grads: [[f64; 3]; 4],
    mu: [f64; 4],
    umu: f64,
    gu: [f64; 3],
}

fn element_state(inst: &ProblemInstance, e: usize, u_masked: &[f64]) -> ElementState {
    let mesh = &inst.mesh;
    let d = mesh.dim();
    let nodes = mesh.element(e);
    let (vol, grads) = element_geometry(mesh, e);
    let mut ul = [0.0; 4];
    for (k, &v) in nodes.iter().enumerate() {
        ul[k] = u_masked[v];
    }
    let mut mu = [0.0; 4];
    let mut gu = [0.0; 3];
    for i in 0..=d {
        for j in 0..=d {
            mu[i] += mass_weight(d, i, j) * ul[j];
        }
        for r in 0..3 {
            gu[r] += ul[i] * grads[i][r];
        }
    }
    let umu = (0..=d).map(|i| ul[i] * mu[i]).sum();
    ElementState {
        vol,
        grads,
        mu,
        umu,
        gu,
    }
}

/// State-equation residual `c(u, q)`.
///
/// Interior rows hold the weak form `int (a + b u^2) grad u . grad phi_i + int q phi_i`,
/// boundary rows hold `u_i`. Boundary values of `u` do not enter interior rows.
pub fn nonlinear_residual(inst: &ProblemInstance, u: &[f64], q: &[f64]) -> Result<Vec<f64>> {
    let n = inst.num_nodes();
    check_len(n, u.len())?;
    check_len(n, q.len())?;
    let (a, b) = (inst.params.a, inst.params.b);
    let um = inst.mask_boundary(u);
    let mut c = vec![0.0; n];
    inst.control_jacobian.spmv_into(q, &mut c);
    let mesh = &inst.mesh;
    for e in 0..mesh.num_elements() {
        let s = element_state(inst, e, &um);
        let coeff = s.vol * (a + b * s.umu);
        for (k, &i) in mesh.element(e).iter().enumerate() {
            if !mesh.is_boundary(i) {
                c[i] += coeff * grad_dot(&s.gu, &s.grads[k]);
            }
        }
    }
    for (i, ci) in c.iter_mut().enumerate() {
        if mesh.is_boundary(i) {
            *ci = u[i];
        }
    }
    Ok(c)
}

/// Jacobian `c_u` of the residual with respect to the state (nonsymmetric).
pub fn state_jacobian(inst: &ProblemInstance, u: &[f64]) -> Result<CsrMatrix> {
    check_len(inst.num_nodes(), u.len())?;
    let (a, b) = (inst.params.a, inst.params.b);
    let um = inst.mask_boundary(u);
    let k = inst.mesh.nodes_per_element();
    let mut jac = assemble_elementwise(&inst.mesh, |e, _, _, local| {
        let s = element_state(inst, e, &um);
        let coeff = s.vol * (a + b * s.umu);
        for i in 0..k {
            let gi = grad_dot(&s.gu, &s.grads[i]);
            for j in 0..k {
                local[i * k + j] = coeff * grad_dot(&s.grads[i], &s.grads[j])
                    + 2.0 * b * s.vol * s.mu[j] * gi;
            }
        }
    })?;
    apply_dirichlet(&inst.mesh, &mut jac, true);
    Ok(jac)
}

/// Second derivative of `w^T c(u, q)` with respect to `u` (symmetric).
pub fn adjoint_hessian(inst: &ProblemInstance, u: &[f64], w: &[f64]) -> Result<CsrMatrix> {
    let n = inst.num_nodes();
    check_len(n, u.len())?;
    check_len(n, w.len())?;
    let b = inst.params.b;
    let um = inst.mask_boundary(u);
    let wm = inst.mask_boundary(w);
    let d = inst.mesh.dim();
    let k = d + 1;
    let mut hess = assemble_elementwise(&inst.mesh, |e, _, _, local| {
        if b == 0.0 {
            return;
        }
        let s = element_state(inst, e, &um);
        let mut gw = [0.0; 3];
        for (i, &v) in inst.mesh.element(e).iter().enumerate() {
            for r in 0..3 {
                gw[r] += wm[v] * s.grads[i][r];
            }
        }
        let scale = 2.0 * b * s.vol;
        let guw = grad_dot(&s.gu, &gw);
        for i in 0..k {
            let giw = grad_dot(&s.grads[i], &gw);
            for j in 0..k {
                let gjw = grad_dot(&s.grads[j], &gw);
                local[i * k + j] =
                    scale * (s.mu[j] * giw + s.mu[i] * gjw + mass_weight(d, i, j) * guw);
            }
        }
    })?;
    apply_dirichlet(&inst.mesh, &mut hess, true);
    // boundary diagonal must vanish as well
    let offsets = hess.row_offsets().to_vec();
    let cols = hess.col_indices().to_vec();
    let values = hess.values_mut();
    for i in 0..n {
        if inst.mesh.is_boundary(i) {
            for p in offsets[i]..offsets[i + 1] {
                if cols[p] == i {
                    values[p] = 0.0;
                }
            }
        }
    }
    Ok(hess)
}

/// Tracking-type objective `1/2 (u-u_d)^T M (u-u_d) + gamma/2 q^T M q`.
pub fn objective(inst: &ProblemInstance, q: &[f64], u: &[f64]) -> f64 {
    let du: Vec<f64> = u.iter().zip(&inst.u_target).map(|(a, b)| a - b).collect();
    0.5 * crate::linalg::energy_dot(&inst.mass, &du, &du)
        + 0.5 * inst.params.gamma * crate::linalg::energy_dot(&inst.mass, q, q)
}

/// Gradient of [`objective`] split into control and state parts.
pub fn objective_gradient(inst: &ProblemInstance, q: &[f64], u: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut gq = vec![0.0; q.len()];
    inst.mass.spmv_add(inst.params.gamma, q, &mut gq);
    let du: Vec<f64> = u.iter().zip(&inst.u_target).map(|(a, b)| a - b).collect();
    let mut gu = vec![0.0; u.len()];
    inst.mass.spmv_into(&du, &mut gu);
    (gq, gu)
}
