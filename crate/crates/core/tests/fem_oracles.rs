use seqhom_core::fem::{
    adjoint_hessian, assemble_mass, build_mesh, nonlinear_residual, objective, objective_gradient, state_jacobian,
    MeshP1, ProblemInstance, ProblemParams,
};
use seqhom_core::linalg::{jacobi_eigensolver, DenseMatrix, DenseFactorization};

fn lcg(seed: u64) -> impl FnMut() -> f64 {
    let mut s = seed;
    move || {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        2.0 * ((s >> 11) as f64 / (1u64 << 53) as f64) - 1.0
    }
}

fn instance(dim: usize, n: usize, a: f64, b: f64) -> ProblemInstance {
    let params = ProblemParams {
        a,
        b,
        gamma: 1e-3,
        rho: 0.1,
    };
    ProblemInstance::with_constant_data(build_mesh(dim, n).unwrap(), params, -50.0, 50.0, 1.0).unwrap()
}

// Affine geometry of a simplex from its vertex coordinates: volume and the
// constant gradients of the barycentric coordinates.
fn simplex(mesh: &MeshP1, e: usize) -> (f64, Vec<Vec<f64>>) {
    let d = mesh.dim();
    let nodes = mesh.element(e);
    let p: Vec<&[f64]> = nodes.iter().map(|&v| mesh.coord(v)).collect();
    // J[r][c] = p[c+1][r] - p[0][r]
    let jac = DenseMatrix::from_fn(d, d, |r, c| p[c + 1][r] - p[0][r]);
    let lu = seqhom_core::linalg::DenseLu::factor(&jac).unwrap();
    let inv = lu.inverse();
    let mut det = 1.0;
    // determinant from elimination on a copy
    let mut m: Vec<Vec<f64>> = (0..d).map(|r| (0..d).map(|c| jac[(r, c)]).collect()).collect();
    for k in 0..d {
        let piv = (k..d).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs())).unwrap();
        if piv != k {
            m.swap(piv, k);
            det = -det;
        }
        det *= m[k][k];
        for i in k + 1..d {
            let f = m[i][k] / m[k][k];
            for j in k..d {
                m[i][j] -= f * m[k][j];
            }
        }
    }
    let fact: f64 = (1..=d).map(|k| k as f64).product();
    let vol = det.abs() / fact;
    // grad lambda_{k} = row k-1 of J^{-1} for k >= 1, lambda_0 = 1 - sum
    let mut grads = vec![vec![0.0; d]; d + 1];
    for k in 1..=d {
        for r in 0..d {
            grads[k][r] = inv[(k - 1, r)];
            grads[0][r] -= inv[(k - 1, r)];
        }
    }
    (vol, grads)
}

// Symmetric quadrature rules on the reference simplex in barycentric
// coordinates; weights sum to one.
fn rule(dim: usize) -> Vec<(Vec<f64>, f64)> {
    if dim == 2 {
        // degree 4
        let (a1, b1, w1) = (0.445948490915965, 0.108103018168070, 0.223381589678011);
        let (a2, b2, w2) = (0.091576213509771, 0.816847572980459, 0.109951743655322);
        let mut pts = Vec::new();
        for (a, b, w) in [(a1, b1, w1), (a2, b2, w2)] {
            pts.push((vec![b, a, a], w));
            pts.push((vec![a, b, a], w));
            pts.push((vec![a, a, b], w));
        }
        pts
    } else {
        // degree 2
        let a = 0.5854101966249685;
        let b = 0.1381966011250105;
        (0..4)
            .map(|k| ((0..4).map(|i| if i == k { a } else { b }).collect(), 0.25))
            .collect()
    }
}

fn residual_by_quadrature(inst: &ProblemInstance, u: &[f64], q: &[f64]) -> Vec<f64> {
    let mesh = &inst.mesh;
    let d = mesh.dim();
    let (a, b) = (inst.params.a, inst.params.b);
    let um: Vec<f64> = (0..u.len()).map(|i| if mesh.is_boundary(i) { 0.0 } else { u[i] }).collect();
    let mut c = vec![0.0; u.len()];
    let quad = rule(d);
    for e in 0..mesh.num_elements() {
        let nodes = mesh.element(e);
        let (vol, grads) = simplex(mesh, e);
        let mut gu = vec![0.0; d];
        for (k, &v) in nodes.iter().enumerate() {
            for r in 0..d {
                gu[r] += um[v] * grads[k][r];
            }
        }
        for (bary, w) in &quad {
            let uh: f64 = nodes.iter().zip(bary).map(|(&v, l)| um[v] * l).sum();
            let qh: f64 = nodes.iter().zip(bary).map(|(&v, l)| q[v] * l).sum();
            let coeff = a + b * uh * uh;
            for (k, &i) in nodes.iter().enumerate() {
                let flux: f64 = (0..d).map(|r| gu[r] * grads[k][r]).sum();
                c[i] += vol * w * (coeff * flux + qh * bary[k]);
            }
        }
    }
    for i in 0..u.len() {
        if mesh.is_boundary(i) {
            c[i] = u[i];
        }
    }
    c
}

#[test]
fn residual_matches_quadrature() {
    for (dim, n) in [(2, 5), (3, 3)] {
        let inst = instance(dim, n, 0.3, 7.0);
        let mut rnd = lcg(11 + dim as u64);
        let nn = inst.num_nodes();
        let u: Vec<f64> = (0..nn).map(|_| rnd()).collect();
        let q: Vec<f64> = (0..nn).map(|_| 3.0 * rnd()).collect();
        let got = nonlinear_residual(&inst, &u, &q).unwrap();
        let want = residual_by_quadrature(&inst, &u, &q);
        let scale = want.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-12 * scale, "{g} vs {w}");
        }
    }
}

fn frobenius_diff(a: &DenseMatrix, b: &DenseMatrix) -> (f64, f64) {
    let diff = a.add_scaled(-1.0, b).frobenius_norm();
    (diff, a.frobenius_norm())
}

#[test]
fn jacobian_matches_central_differences() {
    let eps = 1e-5;
    for dim in [2, 3] {
        let inst = instance(dim, 4, 1e-2, 1e2);
        let nn = inst.num_nodes();
        let mut rnd = lcg(5 * dim as u64);
        for _ in 0..20 {
            let u: Vec<f64> = (0..nn).map(|_| rnd()).collect();
            let q: Vec<f64> = (0..nn).map(|_| rnd()).collect();
            let jac = state_jacobian(&inst, &u).unwrap().to_dense();
            let mut fd = DenseMatrix::zeros(nn, nn);
            let mut up = u.clone();
            for j in 0..nn {
                up[j] = u[j] + eps;
                let cp = nonlinear_residual(&inst, &up, &q).unwrap();
                up[j] = u[j] - eps;
                let cm = nonlinear_residual(&inst, &up, &q).unwrap();
                up[j] = u[j];
                let col: Vec<f64> = cp.iter().zip(&cm).map(|(p, m)| (p - m) / (2.0 * eps)).collect();
                fd.set_column(j, &col);
            }
            let (diff, norm) = frobenius_diff(&jac, &fd);
            assert!(diff <= 1e-5 * norm, "dim {dim}: relative error {}", diff / norm);
        }
    }
}

#[test]
fn adjoint_hessian_matches_central_differences() {
    let eps = 1e-5;
    for dim in [2, 3] {
        let inst = instance(dim, 4, 1e-2, 1e2);
        let nn = inst.num_nodes();
        let mut rnd = lcg(17 + dim as u64);
        for _ in 0..20 {
            let u: Vec<f64> = (0..nn).map(|_| rnd()).collect();
            let w: Vec<f64> = (0..nn).map(|_| rnd()).collect();
            let hess = adjoint_hessian(&inst, &u, &w).unwrap().to_dense();
            // derivative of c_u(u)^T w
            let mut fd = DenseMatrix::zeros(nn, nn);
            let mut up = u.clone();
            for j in 0..nn {
                up[j] = u[j] + eps;
                let gp = state_jacobian(&inst, &up).unwrap().spmv_transpose(&w).unwrap();
                up[j] = u[j] - eps;
                let gm = state_jacobian(&inst, &up).unwrap().spmv_transpose(&w).unwrap();
                up[j] = u[j];
                let col: Vec<f64> = gp.iter().zip(&gm).map(|(p, m)| (p - m) / (2.0 * eps)).collect();
                fd.set_column(j, &col);
            }
            let (diff, norm) = frobenius_diff(&hess, &fd);
            assert!(diff <= 1e-5 * norm, "dim {dim}: relative error {}", diff / norm);
        }
    }
}

#[test]
fn scaled_mass_spectrum_bounds() {
    for (dim, ns, hi) in [(2, &[4usize, 8, 16][..], 2.0), (3, &[2usize, 4][..], 2.5)] {
        for &n in ns {
            let m = assemble_mass(&build_mesh(dim, n).unwrap()).unwrap();
            let d: Vec<f64> = m.diagonal().iter().map(|v| 1.0 / v.sqrt()).collect();
            let dense = m.to_dense();
            let scaled = DenseMatrix::from_fn(dense.nrows(), dense.ncols(), |i, j| d[i] * dense[(i, j)] * d[j]);
            let eig = jacobi_eigensolver(&scaled).unwrap();
            assert!(eig[0] >= 0.5 - 1e-10, "dim {dim} N {n}: {}", eig[0]);
            assert!(*eig.last().unwrap() <= hi + 1e-10, "dim {dim} N {n}: {}", eig.last().unwrap());
        }
    }
}

#[test]
fn scaled_mass_bounds_survive_restriction() {
    let m = assemble_mass(&build_mesh(2, 8).unwrap()).unwrap();
    let n = m.nrows();
    let d: Vec<f64> = m.diagonal().iter().map(|v| 1.0 / v.sqrt()).collect();
    let mut rnd = lcg(99);
    for _ in 0..5 {
        let keep: Vec<usize> = (0..n).filter(|_| rnd() > 0.0).collect();
        let sub = DenseMatrix::from_fn(keep.len(), keep.len(), |i, j| {
            d[keep[i]] * m.get(keep[i], keep[j]) * d[keep[j]]
        });
        let eig = jacobi_eigensolver(&sub).unwrap();
        assert!(eig[0] >= 0.5 - 1e-10 && *eig.last().unwrap() <= 2.0 + 1e-10);
    }
}

#[test]
fn objective_gradient_matches_central_differences() {
    let inst = instance(2, 4, 1e-2, 1e2);
    let nn = inst.num_nodes();
    let mut rnd = lcg(3);
    for _ in 0..5 {
        let q: Vec<f64> = (0..nn).map(|_| 10.0 * rnd()).collect();
        let u: Vec<f64> = (0..nn).map(|_| rnd()).collect();
        let (gq, gu) = objective_gradient(&inst, &q, &u);
        let eps = 1e-5;
        let mut fd_q = vec![0.0; nn];
        let mut fd_u = vec![0.0; nn];
        for j in 0..nn {
            let (mut qp, mut qm) = (q.clone(), q.clone());
            qp[j] += eps;
            qm[j] -= eps;
            fd_q[j] = (objective(&inst, &qp, &u) - objective(&inst, &qm, &u)) / (2.0 * eps);
            let (mut up, mut um) = (u.clone(), u.clone());
            up[j] += eps;
            um[j] -= eps;
            fd_u[j] = (objective(&inst, &q, &up) - objective(&inst, &q, &um)) / (2.0 * eps);
        }
        for (g, fd) in [(&gq, &fd_q), (&gu, &fd_u)] {
            let norm: f64 = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            let diff: f64 = g.iter().zip(fd.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(diff <= 1e-6 * norm, "{}", diff / norm);
        }
    }
}

fn poisson_l2_error(n: usize) -> f64 {
    use std::f64::consts::PI;
    let inst = instance(2, n, 1.0, 0.0);
    let mesh = &inst.mesh;
    let exact = |x: &[f64]| (PI * x[0]).sin() * (PI * x[1]).sin();
    let nn = inst.num_nodes();
    // c(u, q) = K u + M q = 0 with q = -f
    let q: Vec<f64> = (0..nn)
        .map(|v| {
            let x = mesh.coord(v);
            -2.0 * PI * PI * exact(x)
        })
        .collect();
    let rhs: Vec<f64> = nonlinear_residual(&inst, &vec![0.0; nn], &q).unwrap().iter().map(|v| -v).collect();
    let jac = state_jacobian(&inst, &vec![0.0; nn]).unwrap();
    let u = DenseFactorization::factor(&jac, 100_000).unwrap().solve(&rhs);
    let quad = rule(2);
    let mut err = 0.0;
    for e in 0..mesh.num_elements() {
        let nodes = mesh.element(e);
        let (vol, _) = simplex(mesh, e);
        for (bary, w) in &quad {
            let mut x = [0.0; 2];
            let mut uh = 0.0;
            for (k, &v) in nodes.iter().enumerate() {
                let c = mesh.coord(v);
                x[0] += bary[k] * c[0];
                x[1] += bary[k] * c[1];
                uh += bary[k] * u[v];
            }
            err += vol * w * (uh - exact(&x)).powi(2);
        }
    }
    err.sqrt()
}

#[test]
fn p1_converges_at_second_order() {
    let errs: Vec<f64> = [8, 16, 32, 64].iter().map(|&n| poisson_l2_error(n)).collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio} from {errs:?}");
    }
}
