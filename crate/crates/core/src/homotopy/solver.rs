use alloc::sync::Arc;
use alloc::vec::Vec;

use super::{
    active_sets, contraction, distance_sq, kappa, project, stepsize_update, ActiveSets, Clock, HomotopyState,
    IterationRecord, Iterate, NoClock, SolverConfig,
};
use crate::error::{check_len, Error, Result};
use crate::fem::{nonlinear_residual, objective_gradient, prolongate_nodal, state_jacobian, ProblemInstance};
use crate::krylov::{cg, DiagonalOperator, KrylovReport, LinearOperator};
use crate::linalg::{dot, CsrMatrix};
use crate::math;
use crate::multigrid::{MgHierarchy, MgSettings, MgTransfers};
use crate::saddle::{
    expand_solution, recover_multiplier, reduce_system, solve_reduced, HessianBlocks, NewtonRhs, SchurApprox,
};

/// Tolerance of the simplified step solve, whose length is fixed by the
/// iteration count of the preceding Newton solve.
const SIMPLIFIED_TOL: f64 = 1e-14;

enum RieszPrecond {
    Mg(MgHierarchy),
    Jacobi(DiagonalOperator),
}

/// Instance-level data shared by all iterations: the mesh hierarchy and the
/// Riesz solver for `M_Y`.
pub struct HomotopyContext<'a> {
    pub inst: &'a ProblemInstance,
    pub config: &'a SolverConfig,
    transfers: Option<Arc<MgTransfers>>,
    riesz: RieszPrecond,
}

impl<'a> HomotopyContext<'a> {
    pub fn new(inst: &'a ProblemInstance, config: &'a SolverConfig) -> Result<Self> {
        let transfers = match MgTransfers::new(&inst.mesh, config.precond.s1_mg.coarse_n) {
            Ok(t) => Some(Arc::new(t)),
            Err(e) if config.variant.needs_multigrid() => return Err(e),
            Err(_) => None,
        };
        let riesz = match &transfers {
            Some(t) => {
                let settings = MgSettings {
                    cycles: 1,
                    pre_sweeps: 2,
                    post_sweeps: 2,
                    omega: 0.7,
                    coarse_n: config.precond.s1_mg.coarse_n,
                };
                RieszPrecond::Mg(MgHierarchy::new(t.clone(), &inst.stiffness, settings)?)
            }
            None => RieszPrecond::Jacobi(DiagonalOperator(
                inst.stiffness.diagonal().iter().map(|d| 1.0 / d).collect(),
            )),
        };
        Ok(Self {
            inst,
            config,
            transfers,
            riesz,
        })
    }

    pub fn transfers(&self) -> Option<&Arc<MgTransfers>> {
        self.transfers.as_ref()
    }

    /// `M_Y^{-1} b` by preconditioned CG.
    pub fn riesz(&self, b: &[f64]) -> Result<(Vec<f64>, KrylovReport)> {
        let p: &dyn LinearOperator = match &self.riesz {
            RieszPrecond::Mg(h) => h,
            RieszPrecond::Jacobi(d) => d,
        };
        let (x, rep) = cg(&self.inst.stiffness, p, b, self.config.riesz_tol, self.config.riesz_maxit)?;
        if !rep.converged {
            return Err(Error::RieszNotConverged);
        }
        Ok((x, rep))
    }
}

/// Residual data at a point: `b2`, its Riesz representative `r`, the
/// shifted multiplier `w = y + rho r` and `b1 = grad_x L^0(x, w)`.
#[derive(Debug, Clone)]
pub struct Residuals {
    pub b1_q: Vec<f64>,
    pub b1_u: Vec<f64>,
    pub b2: Vec<f64>,
    pub r: Vec<f64>,
    pub w: Vec<f64>,
}

fn lagrangian_gradient(inst: &ProblemInstance, c_u: &CsrMatrix, z: &Iterate, w: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (mut gq, mut gu) = objective_gradient(inst, &z.q, &z.u);
    inst.control_jacobian.spmv_transpose_add(1.0, w, &mut gq);
    c_u.spmv_transpose_add(1.0, w, &mut gu);
    (gq, gu)
}

fn residuals_from(ctx: &HomotopyContext<'_>, z: &Iterate, b2: Vec<f64>) -> Result<Residuals> {
    let inst = ctx.inst;
    let (r, _) = ctx.riesz(&b2)?;
    let rho = inst.params.rho;
    let w: Vec<f64> = z.y.iter().zip(&r).map(|(y, r)| y + rho * r).collect();
    let c_u = state_jacobian(inst, &z.u)?;
    let (b1_q, b1_u) = lagrangian_gradient(inst, &c_u, z, &w);
    Ok(Residuals { b1_q, b1_u, b2, r, w })
}

/// Residuals at `z` with `b2 = c(x)`.
pub fn eval_residuals(ctx: &HomotopyContext<'_>, z: &Iterate) -> Result<Residuals> {
    let n = ctx.inst.num_nodes();
    for v in [&z.q, &z.u, &z.y] {
        check_len(n, v.len())?;
    }
    let b2 = nonlinear_residual(ctx.inst, &z.u, &z.q)?;
    residuals_from(ctx, z, b2)
}

fn tilde_b1_q(inst: &ProblemInstance, sets: &ActiveSets, q: &[f64], inactive: impl Fn(usize) -> f64) -> Vec<f64> {
    (0..q.len())
        .map(|i| {
            if sets.lower[i] {
                q[i] - inst.q_lower[i]
            } else if sets.upper[i] {
                q[i] - inst.q_upper[i]
            } else {
                inactive(i)
            }
        })
        .collect()
}

/// Result of one trial: Newton step, simplified step and their ratio.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub z_plus: Option<Iterate>,
    pub z_plus2: Option<Iterate>,
    /// `None` if the Newton solve failed.
    pub theta: Option<f64>,
    pub active_count: usize,
    pub krylov_iters_step: usize,
    pub krylov_iters_simplified: usize,
    pub step_norm: f64,
}

impl TrialOutcome {
    fn failed(active_count: usize, iters: usize) -> Self {
        Self {
            z_plus: None,
            z_plus2: None,
            theta: None,
            active_count,
            krylov_iters_step: iters,
            krylov_iters_simplified: 0,
            step_norm: f64::NAN,
        }
    }
}

// Linear-algebra failures that signal an unsuitable lambda rather than a bug.
fn recoverable(e: &Error) -> bool {
    matches!(e, Error::Breakdown(_) | Error::Singular { .. } | Error::NotPositiveDefinite)
}

struct Step {
    z: Iterate,
    report: KrylovReport,
}

#[allow(clippy::too_many_arguments)]
fn corrector(
    ctx: &HomotopyContext<'_>,
    hess: &HessianBlocks,
    schur: &mut Option<SchurApprox>,
    sets: &ActiveSets,
    z: &Iterate,
    rhs: &NewtonRhs,
    r: &[f64],
    lambda: f64,
    tol: f64,
    maxit: usize,
) -> Result<Step> {
    let inst = ctx.inst;
    let cfg = ctx.config;
    let (blocks, f, dq_active) = reduce_system(inst, hess, &sets.flags(), lambda, rhs)?;
    if schur.is_none() {
        *schur = Some(SchurApprox::new(&blocks, cfg.variant, &cfg.precond, ctx.transfers())?);
    }
    let (sol, report) = solve_reduced(&blocks, schur.as_ref().unwrap(), &cfg.precond, &f, cfg.krylov, tol, maxit)?;
    let (dq, du, dy_scaled) = expand_solution(&blocks, &sol, &dq_active)?;
    let dy = recover_multiplier(&dy_scaled, r, inst.params.rho, lambda)?;
    let mut q: Vec<f64> = z.q.iter().zip(&dq).map(|(a, b)| a + b).collect();
    project(&mut q, &inst.q_lower, &inst.q_upper);
    let u = z.u.iter().zip(&du).map(|(a, b)| a + b).collect();
    let y = z.y.iter().zip(&dy).map(|(a, b)| a + b).collect();
    Ok(Step {
        z: Iterate { q, u, y },
        report,
    })
}

/// One trial at the reference point `z` (which is also the current
/// iterate): a semismooth Newton step to tolerance `kappa`, then a
/// simplified step with the same matrix and the same number of Krylov
/// iterations.
pub fn newton_trial(
    ctx: &HomotopyContext<'_>,
    z: &Iterate,
    res: &Residuals,
    hess: &HessianBlocks,
    lambda: f64,
    kappa: f64,
) -> Result<TrialOutcome> {
    let inst = ctx.inst;
    let rho = inst.params.rho;
    let d = &inst.mass_lumped;
    let scale = 1.0 / (1.0 + rho * lambda);

    let sets = active_sets(&res.b1_q, lambda, &z.q, &inst.q_lower, &inst.q_upper, d)?;
    let active_count = sets.count();
    let rhs = NewtonRhs {
        b1_q: tilde_b1_q(inst, &sets, &z.q, |i| res.b1_q[i]),
        b1_u: res.b1_u.clone(),
        b2: res.b2.iter().map(|v| scale * v).collect(),
    };
    let mut schur = None;
    let step = match corrector(ctx, hess, &mut schur, &sets, z, &rhs, &res.r, lambda, kappa, ctx.config.krylov_maxit) {
        Ok(s) => s,
        Err(e) if recoverable(&e) => return Ok(TrialOutcome::failed(active_count, 0)),
        Err(e) => return Err(e),
    };
    let iters = step.report.iterations;
    if !step.report.converged {
        return Ok(TrialOutcome::failed(active_count, iters));
    }
    let z1 = step.z;
    let step_norm = math::sqrt(distance_sq(inst, &z1, z));

    // simplified step: b2+ = lambda M_Y (y^ - y+) + c(x+). The gradient
    // weight only sees c(x+), the multiplier recovery needs M_Y^{-1} b2+.
    let c1 = nonlinear_residual(inst, &z1.u, &z1.q)?;
    let mut res1 = residuals_from(ctx, &z1, c1)?;
    let dy: Vec<f64> = z.y.iter().zip(&z1.y).map(|(a, b)| a - b).collect();
    inst.stiffness.spmv_add(lambda, &dy, &mut res1.b2);
    for (ri, di) in res1.r.iter_mut().zip(&dy) {
        *ri += lambda * di;
    }
    let sets1 = active_sets(&res1.b1_q, lambda, &z.q, &inst.q_lower, &inst.q_upper, d)?;
    let du: Vec<f64> = z1.u.iter().zip(&z.u).map(|(a, b)| a - b).collect();
    let mut b1_u = res1.b1_u.clone();
    inst.stiffness.spmv_add(lambda, &du, &mut b1_u);
    let rhs1 = NewtonRhs {
        b1_q: tilde_b1_q(inst, &sets1, &z1.q, |i| lambda * d[i] * (z1.q[i] - z.q[i]) + res1.b1_q[i]),
        b1_u,
        b2: res1.b2.iter().map(|v| scale * v).collect(),
    };
    let step2 = match corrector(ctx, hess, &mut schur, &sets1, &z1, &rhs1, &res1.r, lambda, SIMPLIFIED_TOL, iters) {
        Ok(s) => s,
        Err(e) if recoverable(&e) => return Ok(TrialOutcome::failed(active_count, iters)),
        Err(e) => return Err(e),
    };
    let theta = contraction(inst, z, &z1, &step2.z);
    Ok(TrialOutcome {
        z_plus: Some(z1),
        z_plus2: Some(step2.z),
        theta: Some(theta),
        active_count,
        krylov_iters_step: iters,
        krylov_iters_simplified: step2.report.iterations,
        step_norm,
    })
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub z: Iterate,
    pub records: Vec<IterationRecord>,
    pub converged: bool,
    /// Accepted outer iterations.
    pub outer_iterations: usize,
    pub total_krylov_iterations: usize,
    pub lambda: f64,
}

pub fn solve(inst: &ProblemInstance, config: &SolverConfig, z0: Iterate) -> Result<SolveOutcome> {
    solve_with_clock(inst, config, z0, &NoClock)
}

/// Runs the outer loop from `z0` (its control is projected first).
pub fn solve_with_clock(
    inst: &ProblemInstance,
    config: &SolverConfig,
    z0: Iterate,
    clock: &dyn Clock,
) -> Result<SolveOutcome> {
    config.validate()?;
    let n = inst.num_nodes();
    for v in [&z0.q, &z0.u, &z0.y] {
        check_len(n, v.len())?;
    }
    let ctx = HomotopyContext::new(inst, config)?;
    let mut state = HomotopyState {
        z: z0,
        lambda: config.lambda_init,
        integral: 0.0,
        k: 0,
    };
    project(&mut state.z.q, &inst.q_lower, &inst.q_upper);
    let mut records = Vec::new();
    let mut trials = 0;
    let tol_sq = config.tol * config.tol;

    let finish = |state: HomotopyState, records: Vec<IterationRecord>, converged: bool| {
        let total = records
            .iter()
            .map(|r: &IterationRecord| r.krylov_iters_step + r.krylov_iters_simplified)
            .sum();
        SolveOutcome {
            z: state.z,
            converged,
            outer_iterations: records.iter().filter(|r| r.accepted).count(),
            total_krylov_iterations: total,
            lambda: state.lambda,
            records,
        }
    };

    while state.k < config.max_outer {
        let res = eval_residuals(&ctx, &state.z)?;
        let hess = HessianBlocks::assemble(inst, &state.z.u, &res.w)?;
        loop {
            if trials >= config.max_trials || !state.lambda.is_finite() {
                return Ok(finish(state, records, false));
            }
            trials += 1;
            let lambda = state.lambda;
            let kap = kappa(lambda, config);
            let t = newton_trial(&ctx, &state.z, &res, &hess, lambda, kap)?;
            let accepted = matches!(t.theta, Some(th) if th <= config.theta_max)
                && t.z_plus2.as_ref().is_some_and(|z| z.q.iter().chain(&z.u).chain(&z.y).all(|v| v.is_finite()));
            records.push(IterationRecord {
                k: state.k,
                lambda,
                kappa: kap,
                active_count: t.active_count,
                krylov_iters_step: t.krylov_iters_step,
                krylov_iters_simplified: t.krylov_iters_simplified,
                theta: t.theta,
                accepted,
                step_norm: t.step_norm,
                wall_ms: clock.elapsed_ms(),
            });
            if accepted {
                let theta = t.theta.unwrap_or(0.0);
                let z_new = t.z_plus2.unwrap();
                let moved = distance_sq(inst, &z_new, &state.z);
                state.z = z_new;
                state.k += 1;
                if moved <= tol_sq && lambda <= config.lambda_term {
                    return Ok(finish(state, records, true));
                }
                let (l, i) = stepsize_update(theta, true, config, lambda, state.integral);
                state.lambda = l;
                state.integral = i;
                break;
            }
            let (l, i) = stepsize_update(0.0, false, config, lambda, state.integral);
            state.lambda = l;
            state.integral = i;
        }
    }
    Ok(finish(state, records, false))
}

/// First-order optimality residual of `z`:
/// `sqrt(|q - P(q - M_Q^{-1} g_q)|_Q^2 + |g_u|_{M_U^{-1}}^2 + |c|_{M_Y^{-1}}^2)`
/// with `g = grad_x L^0(x, y)`.
pub fn kkt_residual(ctx: &HomotopyContext<'_>, z: &Iterate) -> Result<f64> {
    let inst = ctx.inst;
    let c_u = state_jacobian(inst, &z.u)?;
    let (gq, gu) = lagrangian_gradient(inst, &c_u, z, &z.y);
    let d = &inst.mass_lumped;
    let mut pq: Vec<f64> = z.q.iter().zip(&gq).zip(d).map(|((q, g), d)| q - g / d).collect();
    project(&mut pq, &inst.q_lower, &inst.q_upper);
    let rq: f64 = z.q.iter().zip(&pq).zip(d).map(|((q, p), d)| d * (q - p) * (q - p)).sum();
    let (su, _) = ctx.riesz(&gu)?;
    let c = nonlinear_residual(inst, &z.u, &z.q)?;
    let (sc, _) = ctx.riesz(&c)?;
    Ok(math::sqrt(rq + dot(&gu, &su).max(0.0) + dot(&c, &sc).max(0.0)))
}

/// Nodal interpolation of an iterate onto the next finer mesh, with the
/// control projected onto the fine bounds.
pub fn prolongate_iterate(coarse: &ProblemInstance, fine: &ProblemInstance, z: &Iterate) -> Result<Iterate> {
    let p = |v: &[f64]| prolongate_nodal(&coarse.mesh, &fine.mesh, v);
    let mut q = p(&z.q)?;
    project(&mut q, &fine.q_lower, &fine.q_upper);
    Ok(Iterate {
        q,
        u: p(&z.u)?,
        y: p(&z.y)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{build_mesh, ProblemParams};

    fn easy(n: usize) -> ProblemInstance {
        let params = ProblemParams {
            a: 1.0,
            b: 0.0,
            gamma: 1e-2,
            rho: 0.1,
        };
        ProblemInstance::with_constant_data(build_mesh(2, n).unwrap(), params, -50.0, 50.0, 1.0).unwrap()
    }

    #[test]
    fn residuals_at_origin() {
        let inst = easy(4);
        let cfg = SolverConfig::default();
        let ctx = HomotopyContext::new(&inst, &cfg).unwrap();
        let res = eval_residuals(&ctx, &Iterate::zeros(inst.num_nodes())).unwrap();
        assert!(res.b2.iter().all(|v| *v == 0.0));
        assert!(res.b1_q.iter().all(|v| *v == 0.0));
        let m1 = inst.mass.spmv(&alloc::vec![1.0; inst.num_nodes()]).unwrap();
        for (a, b) in res.b1_u.iter().zip(&m1) {
            assert!((a + b).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_residual_gives_zero_steps() {
        let mut inst = easy(4);
        inst.u_target.iter_mut().for_each(|v| *v = 0.0);
        let cfg = SolverConfig {
            variant: crate::saddle::PreconditionerVariant::Direct,
            ..SolverConfig::default()
        };
        let ctx = HomotopyContext::new(&inst, &cfg).unwrap();
        let z = Iterate::zeros(inst.num_nodes());
        let res = eval_residuals(&ctx, &z).unwrap();
        let hess = HessianBlocks::assemble(&inst, &z.u, &res.w).unwrap();
        let t = newton_trial(&ctx, &z, &res, &hess, 1.0, 1e-3).unwrap();
        assert_eq!(t.theta, Some(0.0));
        assert!(t.step_norm.abs() < 1e-14);
    }
}
