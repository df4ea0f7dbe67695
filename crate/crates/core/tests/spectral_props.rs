use proptest::prelude::*;
use seqhom_core::linalg::{jacobi_eigensolver, DenseMatrix};
use seqhom_core::spectral::{
    generalized_symmetric_eigenvalues, generate, iteration_study, run_trial, sample_spec, spectrum_pl,
    RandomSaddleSpec, Regime, SaddleBlocksDense,
};

#[test]
fn intervals_hold_with_tight_slack() {
    for regime in Regime::ALL {
        for seed in 0..60 {
            let r = run_trial(regime, (40, 25, 15), seed, 1e-9).unwrap();
            assert_eq!(r.violations, 0, "{regime:?} seed {seed}: {r:?}");
        }
    }
}

#[test]
fn schur_complements_are_definite() {
    let spec = RandomSaddleSpec {
        n1: 8,
        n2: 5,
        n3: 3,
        rank_a2: 2,
        rank_a3: 1,
        seed: 42,
        spread: 10.0,
    };
    let b = generate(&spec).unwrap();
    let s1 = b.schur1().unwrap();
    let s2 = b.schur2(&s1, false).unwrap();
    for s in [s1, s2] {
        assert!(jacobi_eigensolver(&s.symmetrized()).unwrap()[0] > 0.0);
    }
}

#[test]
fn triangular_product_is_unipotent() {
    for seed in 0..20 {
        let b = generate(&sample_spec(Regime::BlockTriangular, (30, 20, 12), seed).unwrap()).unwrap();
        let t = spectrum_pl(&b).unwrap();
        assert!(t.max_deviation() <= 1e-8, "seed {seed}: {t:?}");
        assert!(t.nilpotency_residual <= 1e-8, "seed {seed}: {t:?}");
    }
}

#[test]
fn gmres_with_exact_triangular_preconditioner_takes_three_steps() {
    for seed in 0..50 {
        let b = generate(&sample_spec(Regime::BlockTriangular, (40, 25, 15), seed).unwrap()).unwrap();
        let s = iteration_study(&b, seed, 1e-12, 50).unwrap();
        assert!(s.gmres_pl.converged && s.gmres_pl.iterations <= 3, "seed {seed}: {:?}", s.gmres_pl);
        // the unpreconditioned residual carries the conditioning of P_L
        assert!(s.gmres_pl_true_residual <= 1e-8);
    }
}

fn mean_minres_iterations(dims: (usize, usize, usize), spread: f64, seeds: std::ops::Range<u64>) -> (f64, f64) {
    let (mut pd, mut id) = (0.0, 0.0);
    let count = seeds.clone().count() as f64;
    for seed in seeds {
        let spec = RandomSaddleSpec {
            n1: dims.0,
            n2: dims.1,
            n3: dims.2,
            rank_a2: dims.1 / 2,
            rank_a3: dims.2 / 2,
            seed,
            spread,
        };
        let s = iteration_study(&generate(&spec).unwrap(), seed, 1e-10, 2000).unwrap();
        assert!(s.minres_pd.converged);
        pd += s.minres_pd.iterations as f64;
        id += s.minres_identity.iterations as f64;
    }
    (pd / count, id / count)
}

#[test]
fn block_diagonal_minres_counts_do_not_grow_with_size() {
    // below these sizes MINRES terminates by exhausting the dimension
    for spread in [1.0, 100.0] {
        let mut prev: Option<f64> = None;
        for scale in [1, 2, 4] {
            let dims = (24 * scale, 16 * scale, 8 * scale);
            let (pd, id) = mean_minres_iterations(dims, spread, 0..3);
            assert!(id > pd, "{dims:?}: identity {id} vs P_D {pd}");
            if let Some(p) = prev {
                assert!(pd <= 1.5 * p, "{dims:?}: {pd} after {p}");
            }
            prev = Some(pd);
        }
    }
}

fn scaled(b: &SaddleBlocksDense, c: f64) -> SaddleBlocksDense {
    SaddleBlocksDense {
        a1: b.a1.scaled(c),
        a2: b.a2.scaled(c),
        a3: b.a3.scaled(c),
        b1: b.b1.scaled(c),
        b2: b.b2.scaled(c),
    }
}

fn pd_spectrum(b: &SaddleBlocksDense) -> Vec<f64> {
    let a: DenseMatrix = b.assemble(false);
    generalized_symmetric_eigenvalues(&a, &b.p_diag(false).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 24,
        max_global_rejects: 1 << 16,
        ..ProptestConfig::default()
    })]

    #[test]
    fn spectrum_is_scale_invariant(seed in 0u64..10_000, c in 0.01f64..100.0) {
        // rounding c A perturbs the spectrum by about cond(P) eps, so the
        // comparison is only meaningful for moderately conditioned P
        let b = generate(&sample_spec(Regime::BlockTriangular, (12, 8, 5), seed).unwrap()).unwrap();
        let p = jacobi_eigensolver(&b.p_diag(false).unwrap().symmetrized()).unwrap();
        prop_assume!(p.last().unwrap() / p[0] <= 1e4);
        let e0 = pd_spectrum(&b);
        let e1 = pd_spectrum(&scaled(&b, c));
        prop_assert_eq!(e0.len(), e1.len());
        for (x, y) in e0.iter().zip(&e1) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0), "{} vs {}", x, y);
        }
    }

    #[test]
    fn same_seed_same_blocks(seed in 0u64..10_000) {
        let s = sample_spec(Regime::ThreeByThree, (20, 12, 6), seed).unwrap();
        prop_assert_eq!(generate(&s).unwrap(), generate(&s).unwrap());
    }
}
