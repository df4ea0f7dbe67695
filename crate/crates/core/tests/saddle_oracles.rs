use std::sync::Arc;

use seqhom_core::fem::{
    adjoint_hessian, build_mesh, nonlinear_residual, state_jacobian, ProblemInstance, ProblemParams,
};
use seqhom_core::linalg::{CsrMatrix, DenseLu, DenseMatrix};
use seqhom_core::multigrid::MgTransfers;
use seqhom_core::saddle::{
    expand_solution, matching_factor, recover_multiplier, reduce_system, shat1, shat2_basic_apply,
    solve_reduced, DoubleSaddleBlocks, HessianBlocks, KrylovKind, NewtonRhs, PrecondSettings,
    PreconditionerVariant, SchurApprox,
};
use seqhom_core::spectral::{interval_excess, spectrum_pd, spectrum_pl, Regime, SaddleBlocksDense};

fn lcg(seed: u64) -> impl FnMut() -> f64 {
    let mut s = seed;
    move || {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        2.0 * ((s >> 11) as f64 / (1u64 << 53) as f64) - 1.0
    }
}

fn instance(n: usize, rho: f64) -> ProblemInstance {
    let params = ProblemParams {
        a: 1e-2,
        b: 1e2,
        gamma: 1e-3,
        rho,
    };
    ProblemInstance::with_constant_data(build_mesh(2, n).unwrap(), params, -1.0, 1.0, 0.5).unwrap()
}

struct Case {
    u: Vec<f64>,
    w: Vec<f64>,
    active: Vec<bool>,
    lambda: f64,
    b1_q: Vec<f64>,
    b1_u: Vec<f64>,
    b2: Vec<f64>,
}

fn random_case(inst: &ProblemInstance, seed: u64) -> Case {
    let n = inst.num_nodes();
    let mut r = lcg(seed);
    let u: Vec<f64> = (0..n).map(|_| 0.3 * r()).collect();
    let q: Vec<f64> = (0..n).map(|_| r()).collect();
    let y: Vec<f64> = (0..n).map(|_| 0.1 * r()).collect();
    let active: Vec<bool> = (0..n).map(|_| r() > 0.3).collect();
    let lambda = 10f64.powf(-3.0 * (r() + 1.0) / 2.0);
    let b2 = nonlinear_residual(inst, &u, &q).unwrap();
    // adjoint weight y + rho M_Y^{-1} b2
    let my = DenseLu::factor(&inst.stiffness.to_dense()).unwrap();
    let riesz = my.solve(&b2);
    let w: Vec<f64> = y.iter().zip(&riesz).map(|(a, b)| a + inst.params.rho * b).collect();
    let b1_q: Vec<f64> = (0..n).map(|_| r()).collect();
    let b1_u: Vec<f64> = (0..n).map(|_| r()).collect();
    Case {
        u,
        w,
        active,
        lambda,
        b1_q,
        b1_u,
        b2,
    }
}

// Dense solve of the augmented Newton system with the active rows replaced
// by identity rows, in the original multiplier: unknowns (dq, du, dy).
fn dense_augmented_solve(inst: &ProblemInstance, c: &Case) -> Vec<f64> {
    let n = inst.num_nodes();
    let p = inst.params;
    let g_q = inst.control_jacobian.to_dense();
    let g_u = state_jacobian(inst, &c.u).unwrap().to_dense();
    let mut g = DenseMatrix::zeros(n, 2 * n);
    g.set_block(0, 0, &g_q);
    g.set_block(0, n, &g_u);
    let m_y = inst.stiffness.to_dense();
    let my_inv = DenseLu::factor(&m_y).unwrap().inverse();
    let gt_my_g = g.transpose().matmul(&my_inv).matmul(&g);
    let mut h = DenseMatrix::zeros(2 * n, 2 * n);
    h.set_block(0, 0, &inst.mass.to_dense().scaled(p.gamma));
    let n_u = adjoint_hessian(inst, &c.u, &c.w).unwrap().to_dense();
    h.set_block(n, n, &inst.mass.to_dense().add_scaled(1.0, &n_u));
    let mut m_x = DenseMatrix::zeros(2 * n, 2 * n);
    m_x.set_block(0, 0, &DenseMatrix::from_diagonal(&inst.mass_lumped));
    m_x.set_block(n, n, &m_y);
    let top = m_x.scaled(c.lambda).add_scaled(1.0, &h).add_scaled(p.rho, &gt_my_g);

    let mut k = DenseMatrix::zeros(3 * n, 3 * n);
    k.set_block(0, 0, &top);
    k.set_block(0, 2 * n, &g.transpose());
    k.set_block(2 * n, 0, &g);
    k.set_block(2 * n, 2 * n, &m_y.scaled(-c.lambda));
    let mut rhs: Vec<f64> = c.b1_q.iter().chain(&c.b1_u).chain(&c.b2).map(|v| -v).collect();
    for i in 0..n {
        if c.active[i] {
            for j in 0..3 * n {
                k[(i, j)] = 0.0;
            }
            k[(i, i)] = 1.0;
            rhs[i] = -c.b1_q[i];
        }
    }
    DenseLu::factor(&k).unwrap().solve(&rhs)
}

fn reduced_pipeline(inst: &ProblemInstance, c: &Case, variant: PreconditionerVariant, kind: KrylovKind, tol: f64) -> Vec<f64> {
    let p = inst.params;
    let hess = HessianBlocks::assemble(inst, &c.u, &c.w).unwrap();
    let s = 1.0 / (1.0 + p.rho * c.lambda);
    let rhs = NewtonRhs {
        b1_q: c.b1_q.clone(),
        b1_u: c.b1_u.clone(),
        b2: c.b2.iter().map(|v| s * v).collect(),
    };
    let (blocks, f, dq_a) = reduce_system(inst, &hess, &c.active, c.lambda, &rhs).unwrap();
    let settings = PrecondSettings::default();
    let transfers = Arc::new(MgTransfers::new(&inst.mesh, 2).unwrap());
    let schur = SchurApprox::new(&blocks, variant, &settings, Some(&transfers)).unwrap();
    let (z, rep) = solve_reduced(&blocks, &schur, &settings, &f, kind, tol, 500).unwrap();
    assert!(rep.converged, "{variant:?}: {rep:?}");
    let (dq, du, dy_s) = expand_solution(&blocks, &z, &dq_a).unwrap();
    let riesz = DenseLu::factor(&inst.stiffness.to_dense()).unwrap().solve(&c.b2);
    let dy = recover_multiplier(&dy_s, &riesz, p.rho, c.lambda).unwrap();
    dq.into_iter().chain(du).chain(dy).collect()
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

#[test]
fn reduced_system_reproduces_dense_augmented_solve() {
    for (seed, rho) in (0..10).map(|s| (s, [0.0, 0.1, 1.0][s as usize % 3])) {
        let inst = instance(4, rho);
        let case = random_case(&inst, 1000 + seed);
        let want = dense_augmented_solve(&inst, &case);
        let got = reduced_pipeline(&inst, &case, PreconditionerVariant::Direct, KrylovKind::Minres, 1e-12);
        let d = rel_diff(&got, &want);
        assert!(d <= 1e-9, "seed {seed}: {d}");
    }
}

#[test]
fn every_variant_agrees_with_the_direct_solve() {
    let inst = instance(8, 0.1);
    for seed in 0..3 {
        let mut case = random_case(&inst, 77 + seed);
        // a mild adjoint weight keeps A3 positive definite
        case.w.iter_mut().for_each(|v| *v *= 1e-3);
        let want = reduced_pipeline(&inst, &case, PreconditionerVariant::Direct, KrylovKind::Minres, 1e-12);
        for v in PreconditionerVariant::ALL {
            let kinds: &[KrylovKind] = if v == PreconditionerVariant::BlockTriangularFree {
                &[KrylovKind::Gmres]
            } else {
                &[KrylovKind::Minres, KrylovKind::Gmres]
            };
            for &kind in kinds {
                let got = reduced_pipeline(&inst, &case, v, kind, 1e-11);
                let d = rel_diff(&got, &want);
                assert!(d <= 1e-6, "{v:?} {kind:?} seed {seed}: {d}");
            }
        }
    }
}

#[test]
fn indefinite_schur_is_reported() {
    let inst = instance(8, 0.1);
    let case = random_case(&inst, 77);
    let hess = HessianBlocks::assemble(&inst, &case.u, &case.w).unwrap();
    let rhs = NewtonRhs {
        b1_q: case.b1_q.clone(),
        b1_u: case.b1_u.clone(),
        b2: case.b2.clone(),
    };
    let (blocks, f, _) = reduce_system(&inst, &hess, &case.active, case.lambda, &rhs).unwrap();
    let settings = PrecondSettings::default();
    let schur = SchurApprox::new(&blocks, PreconditionerVariant::BasicSchur, &settings, None).unwrap();
    let err = solve_reduced(&blocks, &schur, &settings, &f, KrylovKind::Minres, 1e-10, 200).unwrap_err();
    assert!(matches!(err, seqhom_core::Error::Breakdown(_)), "{err:?}");
}

fn blocks_at(inst: &ProblemInstance, lambda: f64, active: &[bool]) -> DoubleSaddleBlocks {
    let n = inst.num_nodes();
    let hess = HessianBlocks::assemble(inst, &vec![0.0; n], &vec![0.0; n]).unwrap();
    let rhs = NewtonRhs {
        b1_q: vec![0.0; n],
        b1_u: vec![0.0; n],
        b2: vec![0.0; n],
    };
    reduce_system(inst, &hess, active, lambda, &rhs).unwrap().0
}

#[test]
fn shat1_and_matching_coefficients() {
    let inst = instance(4, 0.1);
    let n = inst.num_nodes();
    let b = blocks_at(&inst, 0.0, &vec![false; n]);
    let s1 = shat1(&b).unwrap();
    let want = CsrMatrix::from_diagonal(&inst.mass_lumped).scaled(1.0 / inst.params.gamma);
    assert!(s1.add_scaled(1.0, &want, -1.0).unwrap().to_dense().max_abs() <= 1e-12 * want.to_dense().max_abs());
    let (_, a1, a2) = matching_factor(&b).unwrap();
    assert_eq!(a1, 0.0);
    assert!((a2 - inst.params.gamma.powf(-0.5)).abs() <= 1e-12 * a2);

    let params = ProblemParams {
        gamma: 1e-6,
        ..inst.params
    };
    let inst = ProblemInstance::with_constant_data(build_mesh(2, 4).unwrap(), params, -1.0, 1.0, 0.0).unwrap();
    let b = blocks_at(&inst, 1e-3, &vec![false; n]);
    let (_, a1, a2) = matching_factor(&b).unwrap();
    assert!((a1 - 1e-3 / 1.0001f64.sqrt()).abs() <= 1e-15);
    assert!((a2 - 1.0 / 1.001e-3f64.sqrt()).abs() <= 1e-12 * a2);
}

#[test]
fn unrolled_shat2_matches_dense_inverse() {
    let inst = instance(2, 0.1);
    let n = inst.num_nodes();
    let b = blocks_at(&inst, 0.3, &vec![false; n]);
    let s1 = shat1(&b).unwrap();
    let s1_inv = DenseLu::factor(&s1.to_dense()).unwrap().inverse();
    let b2 = b.b2.to_dense();
    let s2 = b.a3.to_dense().add_scaled(1.0, &b2.matmul(&s1_inv).matmul(&b2.transpose()));
    let s2_lu = DenseLu::factor(&s2).unwrap();
    let mut r = lcg(5);
    let v: Vec<f64> = (0..n).map(|_| r()).collect();
    let w: Vec<f64> = (0..n).map(|_| r()).collect();
    let got = shat2_basic_apply(&b, &s1, &v).unwrap();
    let want = s2_lu.solve(&v);
    assert!(rel_diff(&got, &want) <= 1e-10);
    let gw = shat2_basic_apply(&b, &s1, &w).unwrap();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    assert!((dot(&w, &got) - dot(&v, &gw)).abs() <= 1e-12 * dot(&v, &got).abs().max(1.0));
}

fn dense_blocks(b: &DoubleSaddleBlocks) -> SaddleBlocksDense {
    SaddleBlocksDense {
        a1: b.a1.to_dense(),
        a2: b.a2.to_dense(),
        a3: b.a3.to_dense(),
        b1: b.b1.to_dense(),
        b2: b.b2.to_dense(),
    }
}

#[test]
fn exact_schur_spectra_of_the_pde_blocks() {
    let inst = instance(4, 0.1);
    let n = inst.num_nodes();
    let mut r = lcg(9);
    for lambda in [1e-5, 1e-2, 1.0] {
        let active: Vec<bool> = (0..n).map(|_| r() > 0.5).collect();
        let d = dense_blocks(&blocks_at(&inst, lambda, &active));
        let eig = spectrum_pd(&d, false).unwrap();
        let iv = Regime::ThreeByThree.intervals();
        for mu in eig {
            assert!(interval_excess(&iv, mu) <= 1e-9, "lambda {lambda}: {mu}");
        }
        let tri = spectrum_pl(&d).unwrap();
        assert!(tri.max_deviation() <= 1e-8, "lambda {lambda}: {}", tri.max_deviation());
    }
}

#[test]
fn direct_variant_rejects_nothing_and_triangular_needs_gmres() {
    let inst = instance(4, 0.1);
    let n = inst.num_nodes();
    let b = blocks_at(&inst, 0.1, &vec![true; n]);
    assert_eq!(b.a1.nrows(), 0);
    let settings = PrecondSettings::default();
    let transfers = Arc::new(MgTransfers::new(&inst.mesh, 2).unwrap());
    let schur = SchurApprox::new(&b, PreconditionerVariant::BlockTriangularFree, &settings, Some(&transfers)).unwrap();
    let rhs = vec![1.0; b.dim()];
    assert!(solve_reduced(&b, &schur, &settings, &rhs, KrylovKind::Minres, 1e-8, 50).is_err());
    let (_, rep) = solve_reduced(&b, &schur, &settings, &rhs, KrylovKind::Gmres, 1e-8, 100).unwrap();
    assert!(rep.converged);
}
