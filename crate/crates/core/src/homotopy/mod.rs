//! Outer driver: a semismooth Newton step plus a simplified step per trial,
//! a monotonicity test on their ratio and a PI controller for the proximity
//! parameter `lambda = 1 / dt`.

mod solver;

use alloc::format;
use alloc::vec::Vec;

pub use solver::{
    eval_residuals, kkt_residual, newton_trial, prolongate_iterate, solve, solve_with_clock,
    HomotopyContext, Residuals, SolveOutcome, TrialOutcome,
};

use crate::error::{check_len, Error, Result};
use crate::fem::ProblemInstance;
use crate::linalg::energy_dot;
use crate::math;
use crate::saddle::{KrylovKind, PrecondSettings, PreconditionerVariant};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub theta_ref: f64,
    pub theta_max: f64,
    pub lambda_red: f64,
    pub lambda_inc: f64,
    pub k_p: f64,
    pub k_i: f64,
    pub lambda_term: f64,
    pub lambda_min: f64,
    pub lambda_init: f64,
    pub tol: f64,
    pub kappa_min: f64,
    pub kappa_max: f64,
    pub lambda_r0: f64,
    pub lambda_r1: f64,
    pub krylov_maxit: usize,
    /// Cap on accepted outer iterations.
    pub max_outer: usize,
    /// Cap on trials, accepted or not.
    pub max_trials: usize,
    pub riesz_tol: f64,
    pub riesz_maxit: usize,
    pub variant: PreconditionerVariant,
    pub krylov: KrylovKind,
    pub precond: PrecondSettings,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            theta_ref: 0.5,
            theta_max: 0.75,
            lambda_red: 0.5,
            lambda_inc: 2.0,
            k_p: 0.2,
            k_i: 0.01,
            lambda_term: 1e-5,
            lambda_min: 1e-7,
            lambda_init: 1.0,
            tol: 1e-5,
            kappa_min: 1e-7,
            kappa_max: 1e-3,
            lambda_r0: 1.0,
            lambda_r1: 1e-7,
            krylov_maxit: 200,
            max_outer: 500,
            max_trials: 2000,
            riesz_tol: 1e-10,
            riesz_maxit: 1000,
            variant: PreconditionerVariant::DecompositionFree,
            krylov: KrylovKind::Minres,
            precond: PrecondSettings::default(),
        }
    }
}

impl SolverConfig {
    /// Checks the ordering constraints between the parameters.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidArgument(format!("invalid solver settings: {msg}")));
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !(0.0 < self.theta_ref && self.theta_ref < self.theta_max && self.theta_max < 1.0) {
            return fail("need 0 < theta_ref < theta_max < 1");
        }
        if !(pos(self.lambda_min) && self.lambda_min <= self.lambda_term) {
            return fail("need 0 < lambda_min <= lambda_term");
        }
        if !(0.0 < self.lambda_red && self.lambda_red < 1.0 && 1.0 < self.lambda_inc && self.lambda_inc.is_finite()) {
            return fail("need 0 < lambda_red < 1 < lambda_inc");
        }
        if !(self.k_p >= 0.0 && self.k_i >= 0.0 && self.k_p.is_finite() && self.k_i.is_finite()) {
            return fail("need K_P >= 0 and K_I >= 0");
        }
        if !pos(self.lambda_init) {
            return fail("need lambda_init > 0");
        }
        if !pos(self.tol) {
            return fail("need tol > 0");
        }
        if !(pos(self.kappa_min) && self.kappa_min <= self.kappa_max && self.kappa_max < 1.0) {
            return fail("need 0 < kappa_min <= kappa_max < 1");
        }
        if !(pos(self.lambda_r0) && pos(self.lambda_r1)) || self.lambda_r0 == self.lambda_r1 {
            return fail("need distinct positive lambda_r0 and lambda_r1");
        }
        if self.krylov_maxit == 0 || self.max_outer == 0 || self.max_trials == 0 || self.riesz_maxit == 0 {
            return fail("iteration caps must be positive");
        }
        if !pos(self.riesz_tol) {
            return fail("need riesz_tol > 0");
        }
        if self.variant == PreconditionerVariant::BlockTriangularFree && self.krylov == KrylovKind::Minres {
            return fail("the block-triangular preconditioner needs GMRES");
        }
        if self.precond.chebyshev_steps == 0 {
            return fail("need at least one Chebyshev step");
        }
        if let Some((lo, hi)) = self.precond.chebyshev_bounds {
            if !(pos(lo) && lo < hi && hi.is_finite()) {
                return fail("need 0 < chebyshev lower bound < upper bound");
            }
        }
        Ok(())
    }
}

/// Relative Krylov tolerance: affine in `lambda` between the reference
/// points `(lambda_r0, kappa_max)` and `(lambda_r1, kappa_min)`, clipped.
pub fn kappa(lambda: f64, config: &SolverConfig) -> f64 {
    let t = (lambda - config.lambda_r0) / (config.lambda_r1 - config.lambda_r0);
    let k = config.kappa_max + (config.kappa_min - config.kappa_max) * t;
    k.clamp(config.kappa_min, config.kappa_max)
}

/// PI controller on `ln lambda`. Returns the new `(lambda, I_PI)`.
pub fn stepsize_update(theta: f64, accepted: bool, config: &SolverConfig, lambda: f64, integral: f64) -> (f64, f64) {
    if !accepted {
        return (lambda * config.lambda_inc, integral.min(0.0));
    }
    if theta > 0.0 {
        let e = math::ln(config.theta_ref) - math::ln(theta);
        let l = (lambda * math::exp(-config.k_p * e - config.k_i * integral)).max(config.lambda_min);
        (l, integral + e)
    } else {
        ((lambda * config.lambda_red).max(config.lambda_min), integral)
    }
}

/// Lower and upper active sets, one flag per control node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveSets {
    pub lower: Vec<bool>,
    pub upper: Vec<bool>,
}

impl ActiveSets {
    pub fn count(&self) -> usize {
        self.lower.iter().zip(&self.upper).filter(|(l, u)| **l || **u).count()
    }

    pub fn flags(&self) -> Vec<bool> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| *l || *u).collect()
    }
}

/// Indices where the projected gradient argument leaves the box. A node
/// meeting both thresholds is assigned to the lower set.
pub fn active_sets(
    b1: &[f64],
    lambda: f64,
    x_ref: &[f64],
    lower: &[f64],
    upper: &[f64],
    d: &[f64],
) -> Result<ActiveSets> {
    let n = b1.len();
    for v in [x_ref, lower, upper, d] {
        check_len(n, v.len())?;
    }
    let mut lo = alloc::vec![false; n];
    let mut up = alloc::vec![false; n];
    for i in 0..n {
        let s = lambda * d[i];
        if b1[i] >= s * (x_ref[i] - lower[i]) {
            lo[i] = true;
        } else if b1[i] <= s * (x_ref[i] - upper[i]) {
            up[i] = true;
        }
    }
    Ok(ActiveSets { lower: lo, upper: up })
}

/// Entrywise clipping onto `[lower, upper]`.
pub fn project(q: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, l), u) in q.iter_mut().zip(lower).zip(upper) {
        *v = v.min(*u).max(*l);
    }
}

/// Primal-dual point `x = (q, u)`, `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    pub q: Vec<f64>,
    pub u: Vec<f64>,
    pub y: Vec<f64>,
}

impl Iterate {
    pub fn zeros(n: usize) -> Self {
        Self {
            q: alloc::vec![0.0; n],
            u: alloc::vec![0.0; n],
            y: alloc::vec![0.0; n],
        }
    }
}

/// `|x|_X^2 + |y|_Y^2` with `M_X = diag(M_Q, M_U)` of the instance.
pub fn norm_sq(inst: &ProblemInstance, q: &[f64], u: &[f64], y: &[f64]) -> f64 {
    let qq: f64 = q.iter().zip(&inst.mass_lumped).map(|(v, d)| d * v * v).sum();
    qq + energy_dot(&inst.stiffness, u, u) + energy_dot(&inst.stiffness, y, y)
}

/// Squared distance of two iterates in the `X x Y` norm.
pub fn distance_sq(inst: &ProblemInstance, a: &Iterate, b: &Iterate) -> f64 {
    let diff = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(p, q)| p - q).collect() };
    norm_sq(inst, &diff(&a.q, &b.q), &diff(&a.u, &b.u), &diff(&a.y, &b.y))
}

/// Ratio of the simplified step to the Newton step; zero when the Newton
/// step vanishes.
pub fn contraction(inst: &ProblemInstance, z: &Iterate, z_plus: &Iterate, z_plus2: &Iterate) -> f64 {
    let den = distance_sq(inst, z_plus, z);
    if den == 0.0 {
        return 0.0;
    }
    math::sqrt(distance_sq(inst, z_plus2, z_plus) / den)
}

/// One line of the iteration log; one per trial.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// Outer iteration index.
    pub k: usize,
    pub lambda: f64,
    pub kappa: f64,
    pub active_count: usize,
    pub krylov_iters_step: usize,
    pub krylov_iters_simplified: usize,
    /// `None` when the Newton solve failed before the simplified step.
    pub theta: Option<f64>,
    pub accepted: bool,
    /// `X x Y` norm of the Newton step.
    pub step_norm: f64,
    pub wall_ms: f64,
}

/// Milliseconds source for the log; the core library has no clock of its own.
pub trait Clock {
    fn elapsed_ms(&self) -> f64;
}

/// Reports zero, which keeps logs reproducible.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn elapsed_ms(&self) -> f64 {
        0.0
    }
}

/// Mutable state of the outer loop.
#[derive(Debug, Clone, PartialEq)]
pub struct HomotopyState {
    pub z: Iterate,
    pub lambda: f64,
    pub integral: f64,
    pub k: usize,
}
