use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use super::DoubleSaddleBlocks;
use crate::error::{check_len, Error, Result};
use crate::krylov::{chebyshev, gmres, minres, FnOperator, KrylovReport, LinearOperator};
use crate::linalg::{norm2, CsrMatrix, DenseFactorization, DEFAULT_SIZE_CAP};
use crate::math;
use crate::multigrid::{MgHierarchy, MgSettings, MgTransfers};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PreconditionerVariant {
    /// No Krylov method: the reduced matrix is factorized and solved exactly.
    Direct,
    /// Block diagonal with exact `A1`, `S^1` and the unrolled `S^2 = A3 + B2 S^1^{-1} B2^T`.
    BasicSchur,
    /// Block diagonal with exact `A1`, `S^1` and `S^2^{-1} = D^{-T} S^1 D^{-1}`.
    MatchingSchur,
    /// As `MatchingSchur` but `S^1^{-1}` by multigrid.
    MgS1Matching,
    /// Chebyshev for `A1`, multigrid for `S^1` and for `D`, `D^T`.
    DecompositionFree,
    /// Lower block-triangular version of `DecompositionFree`; GMRES only.
    BlockTriangularFree,
}

impl PreconditionerVariant {
    pub const ALL: [PreconditionerVariant; 6] = [
        PreconditionerVariant::Direct,
        PreconditionerVariant::BasicSchur,
        PreconditionerVariant::MatchingSchur,
        PreconditionerVariant::MgS1Matching,
        PreconditionerVariant::DecompositionFree,
        PreconditionerVariant::BlockTriangularFree,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PreconditionerVariant::Direct => "direct",
            PreconditionerVariant::BasicSchur => "basic-schur",
            PreconditionerVariant::MatchingSchur => "matching-schur",
            PreconditionerVariant::MgS1Matching => "mg-s1-matching",
            PreconditionerVariant::DecompositionFree => "decomposition-free",
            PreconditionerVariant::BlockTriangularFree => "block-triangular-free",
        }
    }

    /// Whether the variant uses the geometric multigrid hierarchy.
    pub fn needs_multigrid(self) -> bool {
        matches!(
            self,
            PreconditionerVariant::MgS1Matching
                | PreconditionerVariant::DecompositionFree
                | PreconditionerVariant::BlockTriangularFree
        )
    }
}

impl fmt::Display for PreconditionerVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PreconditionerVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: alloc::string::String = s
            .trim()
            .chars()
            .filter(|c| *c != '-' && *c != '_')
            .flat_map(char::to_lowercase)
            .collect();
        Self::ALL
            .into_iter()
            .find(|v| v.name().replace('-', "") == key)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown preconditioner variant '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KrylovKind {
    Minres,
    Gmres,
}

impl FromStr for KrylovKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "minres" => Ok(KrylovKind::Minres),
            "gmres" => Ok(KrylovKind::Gmres),
            _ => Err(Error::InvalidArgument(format!("unknown Krylov method '{s}'"))),
        }
    }
}

impl fmt::Display for KrylovKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KrylovKind::Minres => "minres",
            KrylovKind::Gmres => "gmres",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecondSettings {
    pub chebyshev_steps: usize,
    /// Spectral bounds of the diagonally scaled `A1`; `None` picks
    /// `[1/2, 2]` in 2D and `[1/2, 5/2]` in 3D.
    pub chebyshev_bounds: Option<(f64, f64)>,
    pub s1_mg: MgSettings,
    pub d_mg: MgSettings,
    pub size_cap: usize,
}

impl Default for PrecondSettings {
    fn default() -> Self {
        Self {
            chebyshev_steps: 15,
            chebyshev_bounds: None,
            s1_mg: MgSettings::schur1(),
            d_mg: MgSettings::matching(),
            size_cap: DEFAULT_SIZE_CAP,
        }
    }
}

impl PrecondSettings {
    fn bounds(&self, spatial_dim: usize) -> (f64, f64) {
        self.chebyshev_bounds
            .unwrap_or(if spatial_dim == 3 { (0.5, 2.5) } else { (0.5, 2.0) })
    }
}

/// `S^1 = lambda / (1 + rho lambda) M_Y + 1 / (lambda + gamma) M_Q`.
pub fn shat1(blocks: &DoubleSaddleBlocks) -> Result<CsrMatrix> {
    let (l, r, g) = (blocks.lambda, blocks.rho, blocks.gamma);
    if l + g == 0.0 {
        return Err(Error::InvalidArgument("lambda + gamma must be nonzero".into()));
    }
    let lumped = CsrMatrix::from_diagonal(&blocks.mass_lumped);
    CsrMatrix::linear_combination(&[(l / (1.0 + r * l), &blocks.stiffness), (1.0 / (l + g), &lumped)])
}

/// Matching factor `D = alpha1 M_U + alpha2 M_FE + B2` and its weights.
pub fn matching_factor(blocks: &DoubleSaddleBlocks) -> Result<(CsrMatrix, f64, f64)> {
    let (l, r, g) = (blocks.lambda, blocks.rho, blocks.gamma);
    let alpha1 = l / math::sqrt(1.0 + r * l);
    let alpha2 = 1.0 / math::sqrt(l + g);
    let d = CsrMatrix::linear_combination(&[
        (alpha1, &blocks.stiffness),
        (alpha2, &blocks.mass),
        (1.0, &blocks.b2),
    ])?;
    Ok((d, alpha1, alpha2))
}

fn unrolled_s2(blocks: &DoubleSaddleBlocks, s1: &CsrMatrix, cap: usize) -> Result<DenseFactorization> {
    let n3 = blocks.a3.nrows();
    let n2 = s1.nrows();
    let neg_s1 = s1.scaled(-1.0);
    let m = CsrMatrix::from_blocks(
        &[n3, n2],
        &[n3, n2],
        &[(0, 0, &blocks.a3), (0, 1, &blocks.b2), (1, 0, &blocks.b2_t), (1, 1, &neg_s1)],
    )?;
    DenseFactorization::factor(&m, cap)
}

/// `S^2^{-1} v` for `S^2 = A3 + B2 S^1^{-1} B2^T`, by unrolling the Schur complement.
pub fn shat2_basic_apply(blocks: &DoubleSaddleBlocks, s1: &CsrMatrix, v: &[f64]) -> Result<Vec<f64>> {
    check_len(blocks.a3.nrows(), v.len())?;
    let f = unrolled_s2(blocks, s1, DEFAULT_SIZE_CAP)?;
    let mut rhs = v.to_vec();
    rhs.resize(v.len() + s1.nrows(), 0.0);
    let mut z = f.solve(&rhs);
    z.truncate(v.len());
    Ok(z)
}

#[derive(Debug, Clone)]
enum S1Inverse {
    Lu(DenseFactorization),
    Mg(MgHierarchy),
}

#[derive(Debug, Clone)]
enum S2Inverse {
    Unrolled(DenseFactorization),
    MatchingLu(DenseFactorization),
    MatchingMg(MgHierarchy),
}

/// Schur complement approximations. They depend on `lambda` and the Hessian
/// blocks but not on the active set, so one instance serves both Newton
/// solves of a trial.
#[derive(Debug, Clone)]
pub struct SchurApprox {
    variant: PreconditionerVariant,
    s1: CsrMatrix,
    s1_inv: Option<S1Inverse>,
    s2_inv: Option<S2Inverse>,
}

impl SchurApprox {
    pub fn new(
        blocks: &DoubleSaddleBlocks,
        variant: PreconditionerVariant,
        settings: &PrecondSettings,
        transfers: Option<&Arc<MgTransfers>>,
    ) -> Result<Self> {
        let s1 = shat1(blocks)?;
        let cap = settings.size_cap;
        let transfers = if variant.needs_multigrid() {
            Some(transfers.ok_or_else(|| {
                Error::InvalidArgument(format!("variant {variant} needs a mesh hierarchy"))
            })?)
        } else {
            None
        };
        let (s1_inv, s2_inv) = match variant {
            PreconditionerVariant::Direct => (None, None),
            PreconditionerVariant::BasicSchur => (
                Some(S1Inverse::Lu(DenseFactorization::factor(&s1, cap)?)),
                Some(S2Inverse::Unrolled(unrolled_s2(blocks, &s1, cap)?)),
            ),
            PreconditionerVariant::MatchingSchur => {
                let (d, _, _) = matching_factor(blocks)?;
                (
                    Some(S1Inverse::Lu(DenseFactorization::factor(&s1, cap)?)),
                    Some(S2Inverse::MatchingLu(DenseFactorization::factor(&d, cap)?)),
                )
            }
            PreconditionerVariant::MgS1Matching => {
                let (d, _, _) = matching_factor(blocks)?;
                let t = transfers.unwrap().clone();
                (
                    Some(S1Inverse::Mg(MgHierarchy::new(t, &s1, settings.s1_mg)?)),
                    Some(S2Inverse::MatchingLu(DenseFactorization::factor(&d, cap)?)),
                )
            }
            PreconditionerVariant::DecompositionFree | PreconditionerVariant::BlockTriangularFree => {
                let (d, _, _) = matching_factor(blocks)?;
                let t = transfers.unwrap();
                (
                    Some(S1Inverse::Mg(MgHierarchy::new(t.clone(), &s1, settings.s1_mg)?)),
                    Some(S2Inverse::MatchingMg(MgHierarchy::new(t.clone(), &d, settings.d_mg)?)),
                )
            }
        };
        Ok(Self {
            variant,
            s1,
            s1_inv,
            s2_inv,
        })
    }

    pub fn variant(&self) -> PreconditionerVariant {
        self.variant
    }

    pub fn s1(&self) -> &CsrMatrix {
        &self.s1
    }

    pub fn apply_s1_inv(&self, r: &[f64]) -> Vec<f64> {
        match self.s1_inv.as_ref().expect("no S1 approximation for the direct variant") {
            S1Inverse::Lu(f) => f.solve(r),
            S1Inverse::Mg(h) => h.apply(r),
        }
    }

    pub fn apply_s2_inv(&self, r: &[f64]) -> Vec<f64> {
        match self.s2_inv.as_ref().expect("no S2 approximation for the direct variant") {
            S2Inverse::Unrolled(f) => {
                let mut rhs = r.to_vec();
                rhs.resize(r.len() + self.s1.nrows(), 0.0);
                let mut z = f.solve(&rhs);
                z.truncate(r.len());
                z
            }
            S2Inverse::MatchingLu(f) => {
                let t = f.solve(r);
                let s = self.s1.spmv(&t).expect("shape");
                f.solve_transpose(&s)
            }
            S2Inverse::MatchingMg(h) => {
                let t = h.apply(r);
                let s = self.s1.spmv(&t).expect("shape");
                h.apply_transpose(&s)
            }
        }
    }
}

#[derive(Debug, Clone)]
enum A1Inverse {
    Empty,
    Lu(DenseFactorization),
    Chebyshev {
        inv_diag: Vec<f64>,
        steps: usize,
        lo: f64,
        hi: f64,
    },
}

/// Block-diagonal (or, for the triangular variant, block lower-triangular)
/// preconditioner; `apply` computes `P^{-1} r`.
pub struct SaddlePreconditioner<'a> {
    blocks: &'a DoubleSaddleBlocks,
    schur: &'a SchurApprox,
    a1: A1Inverse,
    triangular: bool,
}

impl<'a> SaddlePreconditioner<'a> {
    pub fn new(
        blocks: &'a DoubleSaddleBlocks,
        schur: &'a SchurApprox,
        settings: &PrecondSettings,
    ) -> Result<Self> {
        let variant = schur.variant();
        if variant == PreconditionerVariant::Direct {
            return Err(Error::InvalidArgument(
                "the direct variant has no preconditioner; use solve_reduced".into(),
            ));
        }
        let a1 = if blocks.a1.nrows() == 0 {
            A1Inverse::Empty
        } else if matches!(
            variant,
            PreconditionerVariant::DecompositionFree | PreconditionerVariant::BlockTriangularFree
        ) {
            let (lo, hi) = settings.bounds(blocks.spatial_dim);
            let inv_diag = blocks
                .a1
                .diagonal()
                .iter()
                .map(|&d| {
                    if d > 0.0 {
                        Ok(1.0 / d)
                    } else {
                        Err(Error::NotPositiveDefinite)
                    }
                })
                .collect::<Result<Vec<f64>>>()?;
            A1Inverse::Chebyshev {
                inv_diag,
                steps: settings.chebyshev_steps,
                lo,
                hi,
            }
        } else {
            A1Inverse::Lu(DenseFactorization::factor(&blocks.a1, settings.size_cap)?)
        };
        Ok(Self {
            blocks,
            schur,
            a1,
            triangular: variant == PreconditionerVariant::BlockTriangularFree,
        })
    }

    fn apply_a1_inv(&self, r: &[f64]) -> Vec<f64> {
        match &self.a1 {
            A1Inverse::Empty => Vec::new(),
            A1Inverse::Lu(f) => f.solve(r),
            A1Inverse::Chebyshev {
                inv_diag,
                steps,
                lo,
                hi,
            } => {
                let a1 = &self.blocks.a1;
                let scaled = FnOperator::new(a1.nrows(), |x: &[f64], y: &mut [f64]| {
                    a1.spmv_into(x, y);
                    for (yi, di) in y.iter_mut().zip(inv_diag) {
                        *yi *= di;
                    }
                });
                let b: Vec<f64> = r.iter().zip(inv_diag).map(|(ri, di)| ri * di).collect();
                chebyshev(&scaled, &b, *steps, *lo, *hi).expect("bounds validated")
            }
        }
    }
}

impl LinearOperator for SaddlePreconditioner<'_> {
    fn dim(&self) -> usize {
        self.blocks.dim()
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let [n1, n2, _] = self.blocks.block_sizes();
        let (r1, rest) = r.split_at(n1);
        let (r2, r3) = rest.split_at(n2);
        let z1 = self.apply_a1_inv(r1);
        let (z2, z3) = if self.triangular {
            // forward substitution with [[A1, 0, 0], [B1, -S1, 0], [0, B2, S2]]
            let mut t2 = r2.to_vec();
            self.blocks.b1.spmv_add(-1.0, &z1, &mut t2);
            let mut z2 = self.schur.apply_s1_inv(&t2);
            z2.iter_mut().for_each(|v| *v = -*v);
            let mut t3 = r3.to_vec();
            self.blocks.b2.spmv_add(-1.0, &z2, &mut t3);
            let z3 = self.schur.apply_s2_inv(&t3);
            (z2, z3)
        } else {
            (self.schur.apply_s1_inv(r2), self.schur.apply_s2_inv(r3))
        };
        z[..n1].copy_from_slice(&z1);
        z[n1..n1 + n2].copy_from_slice(&z2);
        z[n1 + n2..].copy_from_slice(&z3);
    }
}

/// Solves the reduced system with the requested variant and Krylov method.
pub fn solve_reduced(
    blocks: &DoubleSaddleBlocks,
    schur: &SchurApprox,
    settings: &PrecondSettings,
    rhs: &[f64],
    kind: KrylovKind,
    tol: f64,
    maxit: usize,
) -> Result<(Vec<f64>, KrylovReport)> {
    check_len(blocks.dim(), rhs.len())?;
    let variant = schur.variant();
    if variant == PreconditionerVariant::BlockTriangularFree && kind == KrylovKind::Minres {
        return Err(Error::InvalidArgument(
            "the block-triangular preconditioner is nonsymmetric and needs GMRES".into(),
        ));
    }
    if variant == PreconditionerVariant::Direct {
        let a = blocks.assemble()?;
        let f = DenseFactorization::factor(&a, settings.size_cap)?;
        let x = f.solve(rhs);
        let mut res = rhs.to_vec();
        a.spmv_add(-1.0, &x, &mut res);
        let bnorm = norm2(rhs);
        let rel = if bnorm > 0.0 { norm2(&res) / bnorm } else { 0.0 };
        let report = KrylovReport {
            iterations: 1,
            converged: true,
            relative_residual: rel,
            history: vec![1.0, rel],
        };
        return Ok((x, report));
    }
    let p = SaddlePreconditioner::new(blocks, schur, settings)?;
    match kind {
        KrylovKind::Minres => minres(blocks, &p, rhs, tol, maxit),
        KrylovKind::Gmres => gmres(blocks, &p, rhs, tol, maxit),
    }
}

/// One application `z = P^{-1} r` of the chosen variant (the direct variant
/// returns the exact solution).
pub fn precond_apply(
    variant: PreconditionerVariant,
    blocks: &DoubleSaddleBlocks,
    r: &[f64],
    settings: &PrecondSettings,
    transfers: Option<&Arc<MgTransfers>>,
) -> Result<Vec<f64>> {
    check_len(blocks.dim(), r.len())?;
    let schur = SchurApprox::new(blocks, variant, settings, transfers)?;
    if variant == PreconditionerVariant::Direct {
        let f = DenseFactorization::factor(&blocks.assemble()?, settings.size_cap)?;
        return Ok(f.solve(r));
    }
    let p = SaddlePreconditioner::new(blocks, &schur, settings)?;
    let mut z = vec![0.0; r.len()];
    p.apply(r, &mut z);
    Ok(z)
}
