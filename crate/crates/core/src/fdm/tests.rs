use super::*;
use crate::problems::{exact_ex1, problem, ProblemName, Trace};
use proptest::prelude::*;

fn max_error_1d(sol: &GridSolution<f64>, exact: impl Fn(f64) -> f64) -> f64 {
    sol.axes[0].iter().zip(&sol.values).map(|(&x, &u)| (u - exact(x)).abs()).fold(0.0, f64::max)
}

#[test]
fn shishkin_mesh_shape() {
    let m = ShishkinMesh::new(64, 1e-3, 1.0, 1.0).unwrap();
    assert_eq!(m.nodes.len(), 65);
    assert_eq!((m.nodes[0], m.nodes[64]), (0.0, 1.0));
    assert!(m.nodes.windows(2).all(|w| w[0] < w[1]));
    let tau = 2.0 * 1e-3 * (64f64).ln();
    assert!((m.tau - tau).abs() < 1e-15);
    assert!((m.nodes[32] - (1.0 - tau)).abs() < 1e-14);
    let m0 = ShishkinMesh::new(64, 1e-3, 1.0, 0.0).unwrap();
    assert!((m0.nodes[32] - tau).abs() < 1e-14);
    assert!(m0.nodes.windows(2).all(|w| w[0] < w[1]));
    // wide layers fall back to a uniform mesh
    let u = ShishkinMesh::new(16, 0.5, 1.0, 1.0).unwrap();
    assert_eq!(u.tau, 0.5);
    assert!(u.nodes.windows(2).all(|w| ((w[1] - w[0]) - 1.0_f64 / 16.0).abs() < 1e-15));
    assert!(ShishkinMesh::new(63, 1e-3, 1.0, 1.0).is_err());
    assert!(ShishkinMesh::<f64>::new(64, 1e-3, 1.0, 0.5).is_err());
}

proptest! {
    #[test]
    fn shishkin_invariants(half in 1usize..300, log_eps in -8.0..0.0f64, at in prop::sample::select(vec![0.0, 1.0])) {
        let m = ShishkinMesh::new(2 * half, 10f64.powf(log_eps), 1.0, at).unwrap();
        prop_assert!(m.tau > 0.0 && m.tau <= 0.5);
        prop_assert_eq!(m.nodes[0], 0.0);
        prop_assert_eq!(*m.nodes.last().unwrap(), 1.0);
        prop_assert!(m.nodes.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn thomas_matches_dense_elimination(n in 1usize..12, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let lower: Vec<f64> = (0..n).map(|i| if i == 0 { 0.0 } else { rng.gen_range(-1.0..1.0) }).collect();
        let upper: Vec<f64> = (0..n).map(|i| if i + 1 == n { 0.0 } else { rng.gen_range(-1.0..1.0) }).collect();
        let diag: Vec<f64> = (0..n).map(|_| rng.gen_range(2.5..4.0)).collect();
        let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = solve_tridiagonal(&lower, &diag, &upper, &rhs).unwrap();
        // Gaussian elimination on the dense matrix
        let mut a = vec![vec![0.0; n + 1]; n];
        for i in 0..n {
            a[i][i] = diag[i];
            if i > 0 { a[i][i - 1] = lower[i]; }
            if i + 1 < n { a[i][i + 1] = upper[i]; }
            a[i][n] = rhs[i];
        }
        for col in 0..n {
            for row in col + 1..n {
                let f = a[row][col] / a[col][col];
                for k in col..=n { a[row][k] -= f * a[col][k]; }
            }
        }
        let mut y = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|k| a[i][k] * y[k]).sum();
            y[i] = (a[i][n] - s) / a[i][i];
        }
        for (u, v) in x.iter().zip(&y) {
            prop_assert!((u - v).abs() < 1e-12);
        }
    }
}

#[test]
fn singular_tridiagonal_is_reported() {
    assert!(matches!(solve_tridiagonal(&[0.0, 1.0], &[0.0, 1.0], &[1.0, 0.0], &[1.0, 1.0]), Err(Error::Solve(_))));
}

#[test]
fn ex1_accuracy_and_boundary_nodes() {
    let p = problem::<f64>(ProblemName::Ex1, 0.1);
    let sol = solve_steady_1d(&p, 1024).unwrap();
    assert!(max_error_1d(&sol, |x| exact_ex1(x, 0.1)) < 1e-2);
    assert_eq!(sol.values[0], 0.0);
    assert_eq!(*sol.values.last().unwrap(), 1.0);
}

#[test]
fn ode_uniform_convergence() {
    for name in [ProblemName::Intro, ProblemName::Ex1, ProblemName::Ex2] {
        for eps in [0.1, 1e-3, 1e-6] {
            let p = problem::<f64>(name, eps);
            let exact = p.exact.unwrap();
            let errs: Vec<f64> = [64, 128, 256, 512, 1024]
                .iter()
                .map(|&n| max_error_1d(&solve_steady_1d(&p, n).unwrap(), |x| exact.eval(x, eps)))
                .collect();
            for w in errs.windows(2) {
                assert!(w[0] / w[1] >= 1.5, "{name} eps {eps}: {errs:?}");
            }
        }
    }
}

/// Solution of `a w″ + b w′ + c w = 0`, `w(0) = w0`, `w(1) = w1`, from the
/// characteristic roots, each exponential anchored where it is largest.
fn two_point_exponential(a: f64, b: f64, c: f64, w0: f64, w1: f64) -> impl Fn(f64) -> f64 {
    let disc = (b * b - 4.0 * a * c).sqrt();
    let roots = [(-b + disc) / (2.0 * a), (-b - disc) / (2.0 * a)];
    let anchor = roots.map(|r| if r > 0.0 { 1.0 } else { 0.0 });
    let basis = move |k: usize, x: f64| (roots[k] * (x - anchor[k])).exp();
    let det = basis(0, 0.0) * basis(1, 1.0) - basis(1, 0.0) * basis(0, 1.0);
    let ca = (w0 * basis(1, 1.0) - w1 * basis(1, 0.0)) / det;
    let cb = (w1 * basis(0, 0.0) - w0 * basis(0, 1.0)) / det;
    move |x| ca * basis(0, x) + cb * basis(1, x)
}

/// Separable exact solution `sin(π s) · w(x_normal)` of ex3 and ex4.
fn separable_exact(p: &ProblemSpec<f64>) -> impl Fn(&[f64]) -> f64 {
    let nd = p.priors[0].normal_dim;
    let td = 1 - nd;
    let amp = |face: Face| match p.trace_on(face).unwrap() {
        Trace::Sin { amplitude, .. } => *amplitude,
        other => panic!("{other:?}"),
    };
    let op = &p.operator;
    let w = two_point_exponential(
        op.second[nd],
        op.first[nd],
        op.reaction - op.second[td] * std::f64::consts::PI.powi(2),
        amp(Face::low(nd)),
        amp(Face::high(nd)),
    );
    move |x: &[f64]| (std::f64::consts::PI * x[td]).sin() * w(x[nd])
}

fn grid_max_error(sol: &GridSolution<f64>, f: impl Fn(&[f64]) -> f64) -> f64 {
    (0..sol.len()).map(|i| (sol.values[i] - f(&sol.point(i))).abs()).fold(0.0, f64::max)
}

#[test]
fn elliptic_against_separable_solutions() {
    for name in [ProblemName::Ex3, ProblemName::Ex4] {
        for eps in [1e-2, 1e-3] {
            let p = problem::<f64>(name, eps);
            let exact = separable_exact(&p);
            let errs: Vec<f64> = [32, 64, 128, 256].iter().map(|&n| grid_max_error(&solve_steady_2d(&p, n).unwrap(), &exact)).collect();
            assert!(errs[3] < 2e-2, "{name} eps {eps}: {errs:?}");
            for w in errs.windows(2) {
                assert!(w[0] / w[1] >= 1.4, "{name} eps {eps}: {errs:?}");
            }
        }
    }
}

#[test]
fn ex3_layer_face_and_discrete_residual() {
    let n = 64;
    let p = problem::<f64>(ProblemName::Ex3, 1e-3);
    let sol = solve_steady_2d(&p, n).unwrap();
    for (m, &y) in sol.axes[1].iter().enumerate() {
        assert_eq!(sol.at(&[n, m]), 2.0 * (std::f64::consts::PI * y).sin());
    }
    // 5-point upwind residual evaluated directly on the grid
    let eps = 1e-3;
    let (x, y) = (&sol.axes[0], &sol.axes[1]);
    let u = |i: usize, j: usize| sol.at(&[i, j]);
    let scale = sol.values.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let mut worst = 0.0_f64;
    for i in 1..n {
        for j in 1..n {
            let (hl, hr) = (x[i] - x[i - 1], x[i + 1] - x[i]);
            let (kl, kr) = (y[j] - y[j - 1], y[j + 1] - y[j]);
            let uxx = 2.0 / (hl + hr) * ((u(i + 1, j) - u(i, j)) / hr - (u(i, j) - u(i - 1, j)) / hl);
            let uyy = 2.0 / (kl + kr) * ((u(i, j + 1) - u(i, j)) / kr - (u(i, j) - u(i, j - 1)) / kl);
            let ux = (u(i, j) - u(i - 1, j)) / hl;
            let diag = 2.0 * eps / (hl * hr) + 2.0 * eps / (kl * kr) + 1.0 / hl;
            worst = worst.max((-eps * (uxx + uyy) + ux).abs() / (diag * scale));
        }
    }
    assert!(worst < 1e-10, "scaled residual {worst}");
}

#[test]
fn elliptic_self_convergence() {
    for name in [ProblemName::Ex3, ProblemName::Ex4] {
        let p = problem::<f64>(name, 1e-3);
        let coarse = solve_steady_2d(&p, 64).unwrap();
        let fine = solve_steady_2d(&p, 128).unwrap();
        let diff = (0..coarse.len()).map(|i| (coarse.values[i] - fine.interpolate(&coarse.point(i))).abs()).fold(0.0, f64::max);
        assert!(diff < 5e-2, "{name}: {diff}");
    }
}

#[test]
fn parabolic_slices() {
    let p = problem::<f64>(ProblemName::Ex5, 1e-3);
    let sol = solve_parabolic(&p, 64, 32).unwrap();
    let (x, t) = (&sol.axes[0], &sol.axes[1]);
    for (i, &xi) in x.iter().enumerate() {
        assert_eq!(sol.at(&[i, 0]), (2.0 * std::f64::consts::PI * xi).cos());
    }
    for k in 1..t.len() {
        assert_eq!(sol.at(&[0, k]), 0.0);
        assert_eq!(sol.at(&[64, k]), 1.0);
    }
    assert!(sol.values.iter().all(|v| v.is_finite()));
}

#[test]
fn parabolic_temporal_convergence() {
    for name in [ProblemName::Ex5, ProblemName::Ex6] {
        let p = problem::<f64>(name, 1e-3);
        let sols: Vec<_> = [16, 32, 64, 128].iter().map(|&m| solve_parabolic(&p, 128, m).unwrap()).collect();
        // compare at the common time nodes t = k/16
        let diff = |a: &GridSolution<f64>, b: &GridSolution<f64>| {
            let (ma, mb) = (a.axes[1].len() - 1, b.axes[1].len() - 1);
            let mut d = 0.0_f64;
            for i in 0..a.axes[0].len() {
                for k in 0..=16 {
                    d = d.max((a.at(&[i, k * ma / 16]) - b.at(&[i, k * mb / 16])).abs());
                }
            }
            d
        };
        let d: Vec<f64> = sols.windows(2).map(|w| diff(&w[0], &w[1])).collect();
        for w in d.windows(2) {
            assert!(w[0] / w[1] >= 1.5, "{name}: {d:?}");
        }
    }
}

fn line_is_m_matrix(m: &LineMatrix<f64>) -> bool {
    (0..m.diag.len()).all(|i| m.lower[i] <= 0.0 && m.upper[i] <= 0.0 && m.diag[i] + m.lower[i] + m.upper[i] >= -1e-9 * m.diag[i])
}

#[test]
fn discrete_maximum_principle() {
    let mesh = ShishkinMesh::new(128, 1e-3, 1.0, 1.0).unwrap();
    // convection in both directions, nonnegative reaction
    for (b, c) in [(1.0, 0.0), (-1.0, 0.0), (1.0, 5.0), (1.0, 1.001)] {
        assert!(line_is_m_matrix(&LineOperator { diffusion: 1e-3, convection: b, reaction: c }.assemble(&mesh.nodes)));
    }
    // homogeneous problems with c >= 0 stay within their data
    for (name, lo, hi) in [(ProblemName::Intro, 0.0, 1.0 + (-1.0_f64).exp()), (ProblemName::Ex3, 0.0, 2.0), (ProblemName::Ex4, 0.0, 2.0), (ProblemName::Ex6, -1.0, 1.0)] {
        let p = problem::<f64>(name, 1e-3);
        let sol = solve(&p, 128, 64).unwrap();
        let tol = 1e-12;
        assert!(sol.values.iter().all(|&v| v >= lo - tol && v <= hi + tol), "{name}");
    }
    // ex1: a nonnegative discrete source with nonnegative data gives a nonnegative solution
    let op = LineOperator { diffusion: 1e-3, convection: 1.0, reaction: 0.0 };
    let u = op.assemble(&mesh.nodes).solve(0.0, 0.5, &vec![1.0; 127]).unwrap();
    assert!(u.iter().all(|&v| v >= 0.0));
}

#[test]
fn rejects_mismatched_problems() {
    assert!(solve_steady_1d(&problem::<f64>(ProblemName::Ex3, 1e-3), 64).is_err());
    assert!(solve_steady_2d(&problem::<f64>(ProblemName::Ex5, 1e-3), 64).is_err());
    assert!(solve_parabolic(&problem::<f64>(ProblemName::Ex1, 1e-3), 64, 10).is_err());
}

#[test]
fn grid_round_trip_and_checksum() {
    let dir = tempfile::tempdir().unwrap();
    let p = problem::<f64>(ProblemName::Ex6, 1e-3);
    let sol = solve_parabolic(&p, 32, 16).unwrap();
    let csv = dir.path().join("reference.csv");
    let side = sol.write(&csv).unwrap();
    assert_eq!(side.shape, vec![33, 17]);
    assert_eq!(side.columns, vec!["x", "t", "u"]);
    let back = GridSolution::<f64>::read(&csv).unwrap();
    assert_eq!(back, sol);
    let again = solve_parabolic(&p, 32, 16).unwrap().write(&dir.path().join("again.csv")).unwrap();
    assert_eq!(again.sha256, side.sha256);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 1 + 33 * 17);
    std::fs::write(&csv, text.replacen("0,", "1,", 1)).unwrap();
    assert!(GridSolution::<f64>::read(&csv).is_err());
    assert!(matches!(GridSolution::<f64>::read(&dir.path().join("none.csv")), Err(Error::MissingTestSet(_))));
}

#[test]
fn interpolation_reproduces_bilinear_functions() {
    let p = problem::<f64>(ProblemName::Ex3, 1e-2);
    let mut sol = solve_steady_2d(&p, 16).unwrap();
    let f = |x: &[f64]| 1.0 + 2.0 * x[0] - 3.0 * x[1] + 0.5 * x[0] * x[1];
    sol.values = (0..sol.len()).map(|i| f(&sol.point(i))).collect();
    for x in [[0.13, 0.77], [0.999, 0.5], [0.0, 1.0], [0.5, 0.031]] {
        assert!((sol.interpolate(&x) - f(&x)).abs() < 1e-13);
    }
}
