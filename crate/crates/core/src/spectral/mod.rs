//! Dense experiments on random double saddle-point matrices
//!
//! ```text
//! | A1  B1^T  0   |
//! | B1  -A2   B2^T|
//! | 0   B2    A3  |
//! ```
//!
//! with exact Schur complements `S1 = A2 + B1 A1^{-1} B1^T` and
//! `S2 = A3 + B2 S1^{-1} B2^T`, checking the eigenvalue inclusions of the
//! block-diagonal and block-triangular preconditioners.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::krylov::{gmres, minres, IdentityOperator, KrylovReport, LinearOperator};
use crate::linalg::{general_eigenvalues, jacobi_eigensolver, norm2, Cholesky, DenseLu, DenseMatrix};
use crate::math;

/// Largest admissible block dimension.
pub const MAX_BLOCK_DIM: usize = 200;

const A1_SHIFT: f64 = 1e-3;
const MIN_SINGULAR_VALUE: f64 = 1e-8;
const MAX_REDRAWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomSaddleSpec {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    pub rank_a2: usize,
    pub rank_a3: usize,
    pub seed: u64,
    /// Ratio between the largest and smallest column scaling of the factor of `A1`.
    pub spread: f64,
}

/// Dense blocks; `b1` is `n2 x n1` and `b2` is `n3 x n2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SaddleBlocksDense {
    pub a1: DenseMatrix,
    pub a2: DenseMatrix,
    pub a3: DenseMatrix,
    pub b1: DenseMatrix,
    pub b2: DenseMatrix,
}

struct Gaussian {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl Gaussian {
    fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    fn sample(&mut self) -> f64 {
        if let Some(v) = self.spare.take() {
            return v;
        }
        // Box-Muller
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = math::sqrt(-2.0 * math::ln(u1));
        let t = 2.0 * core::f64::consts::PI * u2;
        self.spare = Some(r * math::sin(t));
        r * math::cos(t)
    }

    fn matrix(&mut self, nrows: usize, ncols: usize) -> DenseMatrix {
        DenseMatrix::from_fn(nrows, ncols, |_, _| self.sample())
    }

    fn below(&mut self, n: usize) -> usize {
        (self.rng.next_u64() % n as u64) as usize
    }
}

fn gram(v: &DenseMatrix) -> DenseMatrix {
    v.matmul(&v.transpose()).symmetrized()
}

/// Random blocks meeting the hypotheses of the block-diagonal theorems:
/// `A1 = L L^T + 1e-3 I`, `A2 = V V^T`, `A3 = W W^T` with the requested
/// ranks and `B2` of full row rank. Deterministic per seed.
pub fn generate(spec: &RandomSaddleSpec) -> Result<SaddleBlocksDense> {
    let &RandomSaddleSpec {
        n1,
        n2,
        n3,
        rank_a2,
        rank_a3,
        seed,
        spread,
    } = spec;
    if n1 == 0 || n2 == 0 || n1 > MAX_BLOCK_DIM || n2 > MAX_BLOCK_DIM || n3 > MAX_BLOCK_DIM {
        return Err(Error::InvalidArgument(format!(
            "block dimensions must lie in 1..={MAX_BLOCK_DIM} (n3 may be 0), got ({n1}, {n2}, {n3})"
        )));
    }
    if n3 > n2 {
        return Err(Error::InvalidArgument(format!("B2 needs n3 <= n2, got {n3} > {n2}")));
    }
    if rank_a2 > n2 || rank_a3 > n3 {
        return Err(Error::InvalidArgument(format!(
            "impossible ranks ({rank_a2}, {rank_a3}) for dimensions ({n2}, {n3})"
        )));
    }
    if !(spread >= 1.0 && spread.is_finite()) {
        return Err(Error::InvalidArgument(format!("spread must be >= 1, got {spread}")));
    }
    let mut g = Gaussian::new(seed);
    let mut l = g.matrix(n1, n1);
    for j in 0..n1 {
        let s = if n1 > 1 {
            math::exp(math::ln(spread) * j as f64 / (n1 - 1) as f64)
        } else {
            1.0
        };
        for i in 0..n1 {
            l[(i, j)] *= s / math::sqrt(n1 as f64);
        }
    }
    let a1 = gram(&l).add_scaled(A1_SHIFT, &DenseMatrix::identity(n1));
    let a2 = gram(&g.matrix(n2, rank_a2).scaled(1.0 / math::sqrt(n2 as f64)));
    let a3 = gram(&g.matrix(n3, rank_a3).scaled(1.0 / math::sqrt(n3.max(1) as f64)));
    let b1 = g.matrix(n2, n1);
    let mut b2 = g.matrix(n3, n2);
    let mut draws = 0;
    while n3 > 0 && smallest_singular_value(&b2)? <= MIN_SINGULAR_VALUE {
        draws += 1;
        if draws > MAX_REDRAWS {
            return Err(Error::InvalidArgument("could not draw a full-rank B2".into()));
        }
        b2 = g.matrix(n3, n2);
    }
    Ok(SaddleBlocksDense { a1, a2, a3, b1, b2 })
}

fn smallest_singular_value(b: &DenseMatrix) -> Result<f64> {
    let eig = jacobi_eigensolver(&gram(b))?;
    Ok(math::sqrt(eig[0].max(0.0)))
}

/// A random instance for `regime` whose dimensions are bounded by `max_dims`.
///
/// The rank of `A2` is drawn large enough for `S1` to be definite.
pub fn sample_spec(regime: Regime, max_dims: (usize, usize, usize), seed: u64) -> Result<RandomSaddleSpec> {
    let (m1, m2, m3) = max_dims;
    if m1 == 0 || m2 == 0 || m3 == 0 || m3 > m2 {
        return Err(Error::InvalidArgument(format!(
            "maximal dimensions must be positive with n3 <= n2, got ({m1}, {m2}, {m3})"
        )));
    }
    let mut g = Gaussian::new(seed ^ 0x9e37_79b9_7f4a_7c15);
    let n3 = 1 + g.below(m3);
    let n2 = n3 + g.below(m2 - n3 + 1);
    let n1 = 1 + g.below(m1);
    let mut min_rank = n2.saturating_sub(n1);
    if regime == Regime::BlockTriangular {
        // the 1e-12 GMRES check sits close to the rounding floor, which
        // grows with the conditioning of S1 and A1
        min_rank = n2.min(min_rank + n2 / 2);
    }
    let rank_a2 = min_rank + g.below(n2 - min_rank + 1);
    let rank_a3 = match regime {
        Regime::ThreeByThreeZeroA3 | Regime::TwoByTwo => 0,
        Regime::ThreeByThree | Regime::BlockTriangular => match seed % 3 {
            0 => 0,
            1 => 1 + g.below(n3),
            _ => n3,
        },
    };
    let spread = match regime {
        Regime::BlockTriangular => 1.0,
        _ => math::exp(math::ln(100.0) * g.uniform()),
    };
    Ok(RandomSaddleSpec {
        n1,
        n2,
        n3: if regime == Regime::TwoByTwo { 0 } else { n3 },
        rank_a2,
        rank_a3,
        seed,
        spread,
    })
}

impl SaddleBlocksDense {
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.a1.nrows(), self.a2.nrows(), self.a3.nrows())
    }

    /// `S1 = A2 + B1 A1^{-1} B1^T`.
    pub fn schur1(&self) -> Result<DenseMatrix> {
        let c = Cholesky::factor(&self.a1)?;
        // B1 A1^{-1} B1^T = (L^{-1} B1^T)^T (L^{-1} B1^T)
        let n2 = self.b1.nrows();
        let mut t = DenseMatrix::zeros(self.a1.nrows(), n2);
        for j in 0..n2 {
            t.set_column(j, &c.solve_lower(self.b1.row(j)));
        }
        Ok(self.a2.add_scaled(1.0, &t.transpose().matmul(&t)).symmetrized())
    }

    /// `S2 = A3 + B2 S1^{-1} B2^T` (without `A3` when `zero_a3`).
    pub fn schur2(&self, s1: &DenseMatrix, zero_a3: bool) -> Result<DenseMatrix> {
        let c = Cholesky::factor(s1)?;
        let n3 = self.b2.nrows();
        let mut t = DenseMatrix::zeros(s1.nrows(), n3);
        for j in 0..n3 {
            t.set_column(j, &c.solve_lower(self.b2.row(j)));
        }
        let core = t.transpose().matmul(&t);
        Ok(if zero_a3 { core } else { self.a3.add_scaled(1.0, &core) }.symmetrized())
    }

    /// The full matrix, with `A3` replaced by zero when `zero_a3`.
    pub fn assemble(&self, zero_a3: bool) -> DenseMatrix {
        let (n1, n2, n3) = self.dims();
        let mut a = DenseMatrix::zeros(n1 + n2 + n3, n1 + n2 + n3);
        a.set_block(0, 0, &self.a1);
        a.set_block(0, n1, &self.b1.transpose());
        a.set_block(n1, 0, &self.b1);
        a.set_block(n1, n1, &self.a2.scaled(-1.0));
        a.set_block(n1, n1 + n2, &self.b2.transpose());
        a.set_block(n1 + n2, n1, &self.b2);
        if !zero_a3 {
            a.set_block(n1 + n2, n1 + n2, &self.a3);
        }
        a
    }

    /// Upper-left two-by-two block `[[A1, B1^T], [B1, -A2]]`.
    pub fn assemble_2by2(&self) -> DenseMatrix {
        let (n1, n2, _) = self.dims();
        let mut a = DenseMatrix::zeros(n1 + n2, n1 + n2);
        a.set_block(0, 0, &self.a1);
        a.set_block(0, n1, &self.b1.transpose());
        a.set_block(n1, 0, &self.b1);
        a.set_block(n1, n1, &self.a2.scaled(-1.0));
        a
    }

    /// Exact block-diagonal preconditioner `diag(A1, S1, S2)`.
    pub fn p_diag(&self, zero_a3: bool) -> Result<DenseMatrix> {
        let (n1, n2, n3) = self.dims();
        let s1 = self.schur1()?;
        let s2 = self.schur2(&s1, zero_a3)?;
        let mut p = DenseMatrix::zeros(n1 + n2 + n3, n1 + n2 + n3);
        p.set_block(0, 0, &self.a1);
        p.set_block(n1, n1, &s1);
        p.set_block(n1 + n2, n1 + n2, &s2);
        Ok(p)
    }

    /// Exact block lower-triangular preconditioner `[[A1,0,0],[B1,-S1,0],[0,B2,S2]]`.
    pub fn p_lower(&self) -> Result<DenseMatrix> {
        let (n1, n2, _) = self.dims();
        let s1 = self.schur1()?;
        let s2 = self.schur2(&s1, false)?;
        let mut p = DenseMatrix::zeros(n1 + n2 + s2.nrows(), n1 + n2 + s2.nrows());
        p.set_block(0, 0, &self.a1);
        p.set_block(n1, 0, &self.b1);
        p.set_block(n1, n1, &s1.scaled(-1.0));
        p.set_block(n1 + n2, n1, &self.b2);
        p.set_block(n1 + n2, n1 + n2, &s2);
        Ok(p)
    }

    /// Exact block upper-triangular preconditioner `[[A1,B1^T,0],[0,-S1,B2^T],[0,0,S2]]`.
    pub fn p_upper(&self) -> Result<DenseMatrix> {
        let (n1, n2, _) = self.dims();
        let s1 = self.schur1()?;
        let s2 = self.schur2(&s1, false)?;
        let mut p = DenseMatrix::zeros(n1 + n2 + s2.nrows(), n1 + n2 + s2.nrows());
        p.set_block(0, 0, &self.a1);
        p.set_block(0, n1, &self.b1.transpose());
        p.set_block(n1, n1, &s1.scaled(-1.0));
        p.set_block(n1, n1 + n2, &self.b2.transpose());
        p.set_block(n1 + n2, n1 + n2, &s2);
        Ok(p)
    }
}

/// Eigenvalues of `P^{-1} A` for symmetric `A` and SPD `P`, via the
/// congruence `L^{-1} A L^{-T}` with `P = L L^T`.
pub fn generalized_symmetric_eigenvalues(a: &DenseMatrix, p: &DenseMatrix) -> Result<Vec<f64>> {
    if !a.is_symmetric(1e-12 * a.max_abs().max(1.0)) || !p.is_symmetric(1e-12 * p.max_abs().max(1.0)) {
        return Err(Error::NotSymmetric);
    }
    let c = Cholesky::factor(p)?;
    jacobi_eigensolver(&c.congruence(a))
}

/// Spectrum of `P_D^{-1} A` with exact Schur complements.
pub fn spectrum_pd(blocks: &SaddleBlocksDense, zero_a3: bool) -> Result<Vec<f64>> {
    generalized_symmetric_eigenvalues(&blocks.assemble(zero_a3), &blocks.p_diag(zero_a3)?)
}

/// Spectrum of `diag(A1, S1)^{-1} [[A1, B1^T], [B1, -A2]]`.
pub fn spectrum_2by2(blocks: &SaddleBlocksDense) -> Result<Vec<f64>> {
    let (n1, n2, _) = blocks.dims();
    let mut p = DenseMatrix::zeros(n1 + n2, n1 + n2);
    p.set_block(0, 0, &blocks.a1);
    p.set_block(n1, n1, &blocks.schur1()?);
    generalized_symmetric_eigenvalues(&blocks.assemble_2by2(), &p)
}

/// Triangular-preconditioner diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangularSpectrum {
    /// `max |mu - 1|` over the eigenvalues of `P_L^{-1} A`.
    pub max_deviation_lower: f64,
    /// Same for `P_U^{-1} A`.
    pub max_deviation_upper: f64,
    /// Largest entry below the block diagonal of `P_L^{-1} A`, relative to its norm.
    pub off_triangle_lower: f64,
    /// Largest entry above the block diagonal of `A P_U^{-1}`, relative to its norm.
    pub off_triangle_upper: f64,
    /// `||(P_L^{-1} A - I)^3||_F / ||A||_F`.
    pub nilpotency_residual: f64,
}

impl TriangularSpectrum {
    pub fn max_deviation(&self) -> f64 {
        self.max_deviation_lower.max(self.max_deviation_upper)
    }
}

fn block_bounds(dims: (usize, usize, usize)) -> [(usize, usize); 3] {
    let (n1, n2, n3) = dims;
    [(0, n1), (n1, n1 + n2), (n1 + n2, n1 + n2 + n3)]
}

// max |mu - 1| over the diagonal blocks, and the largest entry outside the
// block triangle (`upper` keeps the upper block triangle)
fn block_triangular_check(m: &DenseMatrix, dims: (usize, usize, usize), upper: bool) -> Result<(f64, f64)> {
    let bounds = block_bounds(dims);
    let mut dev = 0.0_f64;
    let mut off = 0.0_f64;
    for (bi, &(r0, r1)) in bounds.iter().enumerate() {
        for (bj, &(c0, c1)) in bounds.iter().enumerate() {
            let outside = if upper { bi > bj } else { bi < bj };
            if outside {
                for i in r0..r1 {
                    for j in c0..c1 {
                        off = off.max(m[(i, j)].abs());
                    }
                }
            }
        }
        let eig = general_eigenvalues(&m.block(r0, r0, r1 - r0, r1 - r0))?;
        for (re, im) in eig {
            dev = dev.max(math::hypot(re - 1.0, im));
        }
    }
    Ok((dev, off / m.frobenius_norm().max(f64::MIN_POSITIVE)))
}

/// Eigenvalues of the block-triangularly preconditioned matrices. Both
/// products are block triangular with identity diagonal blocks in exact
/// arithmetic, so the spectrum is read off the computed diagonal blocks
/// after checking that the remaining triangle vanishes.
pub fn spectrum_pl(blocks: &SaddleBlocksDense) -> Result<TriangularSpectrum> {
    let a = blocks.assemble(false);
    let n = a.nrows();
    let dims = blocks.dims();
    let lu_l = DenseLu::factor(&blocks.p_lower()?)?;
    let mut ml = DenseMatrix::zeros(n, n);
    for j in 0..n {
        ml.set_column(j, &lu_l.solve(&a.column(j)));
    }
    let (dev_l, off_l) = block_triangular_check(&ml, dims, true)?;

    // A P_U^{-1} = (P_U^{-T} A^T)^T = (P_U^{-T} A)^T since A is symmetric
    let lu_u = DenseLu::factor(&blocks.p_upper()?)?;
    let mut t = DenseMatrix::zeros(n, n);
    for j in 0..n {
        t.set_column(j, &lu_u.solve_transpose(&a.column(j)));
    }
    let mu = t.transpose();
    let (dev_u, off_u) = block_triangular_check(&mu, dims, false)?;

    let e = ml.add_scaled(-1.0, &DenseMatrix::identity(n));
    let cube = e.matmul(&e).matmul(&e);
    Ok(TriangularSpectrum {
        max_deviation_lower: dev_l,
        max_deviation_upper: dev_u,
        off_triangle_lower: off_l,
        off_triangle_upper: off_u,
        nilpotency_residual: cube.frobenius_norm() / a.frobenius_norm(),
    })
}

/// Inclusion intervals of the theorems, from their closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// Two-by-two block system with the block-diagonal preconditioner.
    TwoByTwo,
    /// Three-by-three system with `A3 = 0`.
    ThreeByThreeZeroA3,
    /// Three-by-three system with semidefinite `A3`.
    ThreeByThree,
    /// Block-triangular preconditioners; every eigenvalue equals one.
    BlockTriangular,
}

impl Regime {
    pub const ALL: [Regime; 4] = [
        Regime::ThreeByThreeZeroA3,
        Regime::ThreeByThree,
        Regime::BlockTriangular,
        Regime::TwoByTwo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Regime::TwoByTwo => "2x2",
            Regime::ThreeByThreeZeroA3 => "3x3-zero-a3",
            Regime::ThreeByThree => "3x3",
            Regime::BlockTriangular => "block-triangular",
        }
    }

    pub fn intervals(self) -> Vec<(f64, f64)> {
        let s5 = math::sqrt(5.0);
        let pi = core::f64::consts::PI;
        let c = |k: f64| 2.0 * math::cos(k * pi / 7.0);
        let golden = 0.5 * (1.0 + s5);
        let minor = 0.5 * (1.0 - s5);
        match self {
            Regime::TwoByTwo => vec![(-1.0, minor), (1.0, golden)],
            Regime::ThreeByThreeZeroA3 => vec![(-golden, c(5.0)), (-1.0, minor), (c(3.0), -minor), (1.0, c(1.0))],
            Regime::ThreeByThree => vec![(-golden, minor), (c(3.0), c(1.0))],
            Regime::BlockTriangular => vec![(1.0, 1.0)],
        }
    }
}

/// Distance of `mu` from the union of `intervals` (zero inside).
pub fn interval_excess(intervals: &[(f64, f64)], mu: f64) -> f64 {
    intervals
        .iter()
        .map(|&(lo, hi)| {
            if mu < lo {
                lo - mu
            } else if mu > hi {
                mu - hi
            } else {
                0.0
            }
        })
        .fold(f64::INFINITY, f64::min)
}

/// Outcome of one random trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialReport {
    pub regime: Regime,
    pub spec: RandomSaddleSpec,
    pub min_eig: f64,
    pub max_eig: f64,
    /// Number of eigenvalues farther than the slack from the intervals.
    pub violations: usize,
    /// Largest distance from the intervals.
    pub max_excess: f64,
}

/// Draws an instance for `regime` and measures its preconditioned spectrum.
pub fn run_trial(regime: Regime, max_dims: (usize, usize, usize), seed: u64, slack: f64) -> Result<TrialReport> {
    let spec = sample_spec(regime, max_dims, seed)?;
    let blocks = generate(&spec)?;
    let intervals = regime.intervals();
    let eigs: Vec<f64> = match regime {
        Regime::TwoByTwo => spectrum_2by2(&blocks)?,
        Regime::ThreeByThreeZeroA3 => spectrum_pd(&blocks, true)?,
        Regime::ThreeByThree => spectrum_pd(&blocks, false)?,
        Regime::BlockTriangular => {
            let t = spectrum_pl(&blocks)?;
            let dev = t.max_deviation();
            let excess = dev.max(t.off_triangle_lower).max(t.off_triangle_upper);
            return Ok(TrialReport {
                regime,
                spec,
                min_eig: 1.0 - dev,
                max_eig: 1.0 + dev,
                violations: usize::from(excess > slack),
                max_excess: excess,
            });
        }
    };
    let mut min_eig = f64::INFINITY;
    let mut max_eig = f64::NEG_INFINITY;
    let mut violations = 0;
    let mut max_excess = 0.0_f64;
    for &mu in &eigs {
        min_eig = min_eig.min(mu);
        max_eig = max_eig.max(mu);
        let e = interval_excess(&intervals, mu);
        max_excess = max_excess.max(e);
        if e > slack {
            violations += 1;
        }
    }
    Ok(TrialReport {
        regime,
        spec,
        min_eig,
        max_eig,
        violations,
        max_excess,
    })
}

impl LinearOperator for DenseMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(&self.mul_vec(x));
    }
}

struct CholeskyInverse(Cholesky, usize);

impl LinearOperator for CholeskyInverse {
    fn dim(&self) -> usize {
        self.1
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(&self.0.solve(x));
    }
}

/// `P_L^{-1}` by block forward substitution.
struct LowerTriangularInverse<'a> {
    blocks: &'a SaddleBlocksDense,
    a1: Cholesky,
    s1: Cholesky,
    s2: Cholesky,
}

impl<'a> LowerTriangularInverse<'a> {
    fn new(blocks: &'a SaddleBlocksDense) -> Result<Self> {
        let s1 = blocks.schur1()?;
        let s2 = blocks.schur2(&s1, false)?;
        Ok(Self {
            blocks,
            a1: Cholesky::factor(&blocks.a1)?,
            s1: Cholesky::factor(&s1)?,
            s2: Cholesky::factor(&s2)?,
        })
    }
}

impl LinearOperator for LowerTriangularInverse<'_> {
    fn dim(&self) -> usize {
        let (n1, n2, n3) = self.blocks.dims();
        n1 + n2 + n3
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let (n1, n2, _) = self.blocks.dims();
        let z1 = self.a1.solve(&x[..n1]);
        let b1z1 = self.blocks.b1.mul_vec(&z1);
        let t2: Vec<f64> = x[n1..n1 + n2].iter().zip(&b1z1).map(|(r, b)| b - r).collect();
        let z2 = self.s1.solve(&t2);
        let b2z2 = self.blocks.b2.mul_vec(&z2);
        let t3: Vec<f64> = x[n1 + n2..].iter().zip(&b2z2).map(|(r, b)| r - b).collect();
        let z3 = self.s2.solve(&t3);
        y[..n1].copy_from_slice(&z1);
        y[n1..n1 + n2].copy_from_slice(&z2);
        y[n1 + n2..].copy_from_slice(&z3);
    }
}

/// Krylov iteration counts on one instance with a random right-hand side.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationStudy {
    pub minres_pd: KrylovReport,
    pub minres_identity: KrylovReport,
    pub gmres_pl: KrylovReport,
    /// `||b - A x|| / ||b||` of the GMRES solution.
    pub gmres_pl_true_residual: f64,
}

/// MINRES with exact `P_D`, MINRES without preconditioner and GMRES with
/// exact `P_L`, all to relative tolerance `tol`.
pub fn iteration_study(blocks: &SaddleBlocksDense, seed: u64, tol: f64, maxit: usize) -> Result<IterationStudy> {
    let a = blocks.assemble(false);
    let n = a.nrows();
    let mut g = Gaussian::new(seed);
    let b: Vec<f64> = (0..n).map(|_| g.sample()).collect();
    let pd = CholeskyInverse(Cholesky::factor(&blocks.p_diag(false)?)?, n);
    let (_, minres_pd) = minres(&a, &pd, &b, tol, maxit)?;
    let (_, minres_identity) = minres(&a, &IdentityOperator(n), &b, tol, maxit)?;
    let pl = LowerTriangularInverse::new(blocks)?;
    let (x, gmres_pl) = gmres(&a, &pl, &b, tol, maxit)?;
    let ax = a.mul_vec(&x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
    Ok(IterationStudy {
        minres_pd,
        minres_identity,
        gmres_pl,
        gmres_pl_true_residual: norm2(&r) / norm2(&b),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n1: usize, n2: usize, n3: usize, rank_a3: usize) -> RandomSaddleSpec {
        RandomSaddleSpec {
            n1,
            n2,
            n3,
            rank_a2: n2 / 2,
            rank_a3,
            seed: 7,
            spread: 10.0,
        }
    }

    #[test]
    fn generation_is_deterministic_and_respects_ranks() {
        let s = spec(8, 5, 3, 0);
        let a = generate(&s).unwrap();
        assert_eq!(a, generate(&s).unwrap());
        assert!(a.a3.max_abs() == 0.0);
        let eig = jacobi_eigensolver(&a.a2).unwrap();
        assert_eq!(eig.iter().filter(|v| v.abs() > 1e-10).count(), 2);
        let s1 = a.schur1().unwrap();
        assert!(jacobi_eigensolver(&s1).unwrap()[0] > 0.0);
        assert!(jacobi_eigensolver(&a.schur2(&s1, true).unwrap()).unwrap()[0] > 0.0);
    }

    #[test]
    fn bad_specs_are_rejected() {
        assert!(generate(&spec(4, 3, 5, 0)).is_err());
        assert!(generate(&spec(4, 3, 2, 3)).is_err());
        assert!(generate(&spec(0, 3, 2, 0)).is_err());
    }

    #[test]
    fn interval_endpoints() {
        let iv = Regime::ThreeByThreeZeroA3.intervals();
        let want = [(-1.618, -1.247), (-1.0, -0.618), (0.445, 0.618), (1.0, 1.802)];
        for ((lo, hi), (wl, wh)) in iv.iter().zip(want) {
            assert!((lo - wl).abs() < 5e-4 && (hi - wh).abs() < 5e-4);
        }
        assert_eq!(interval_excess(&iv, 0.5), 0.0);
        assert!((interval_excess(&iv, 0.0) - 0.445).abs() < 1e-3);
    }

    #[test]
    fn small_instances_obey_the_intervals() {
        for seed in 0..5 {
            for regime in Regime::ALL {
                let r = run_trial(regime, (10, 8, 5), seed, 1e-9).unwrap();
                assert_eq!(r.violations, 0, "{regime:?} seed {seed}: {r:?}");
            }
        }
    }

    #[test]
    fn decoupled_triangular_product_is_identity() {
        let mut b = generate(&spec(4, 3, 2, 2)).unwrap();
        b.b1 = DenseMatrix::zeros(3, 4);
        b.b2 = DenseMatrix::zeros(2, 3);
        b.a2 = DenseMatrix::identity(3);
        let t = spectrum_pl(&b).unwrap();
        assert!(t.max_deviation() < 1e-14);
        assert!(t.nilpotency_residual < 1e-14);
    }
}
