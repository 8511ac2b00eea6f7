use super::*;
use crate::fdm::solve;
use crate::problems::{exact_ex1, problem};
use proptest::prelude::*;

fn ex1_set(eps: f64) -> TestSet<f64> {
    TestSet::analytic(&problem(ProblemName::Ex1, eps)).unwrap()
}

fn history(n: usize) -> Vec<LossRecord> {
    (0..n)
        .map(|i| {
            let l = 10f64.powf(-(i as f64) / 10.0);
            LossRecord { iteration: i * 10, loss_ic: 0.0, loss_bc: l / 10.0, loss_r: l, loss_total: 1.1 * l, seconds_elapsed: i as f64 }
        })
        .collect()
}

#[test]
fn relative_l2_examples() {
    let u = [1.0, -2.0, 0.5];
    assert_eq!(relative_l2(&u, &u).unwrap(), 0.0);
    assert_eq!(relative_l2(&u.map(|v| 2.0 * v), &u).unwrap(), 1.0);
    assert_eq!(relative_l2(&[1.0, 0.0], &[1.0, 1.0]).unwrap(), std::f64::consts::FRAC_1_SQRT_2);
}

#[test]
fn relative_l2_errors() {
    assert!(matches!(relative_l2(&[1.0, 2.0], &[0.0, 0.0]), Err(Error::UndefinedMetric)));
    assert!(matches!(relative_l2::<f64>(&[1.0], &[1.0, 2.0]), Err(Error::Config(_))));
    assert!(matches!(relative_l2::<f64>(&[], &[]), Err(Error::Config(_))));
}

proptest! {
    #[test]
    fn relative_l2_scale_consistent(
        pairs in prop::collection::vec((-1e3..1e3f64, -1e3..1e3f64), 1..50),
        k in -20i32..20,
        c in prop::num::f64::NORMAL.prop_filter("moderate", |c| (1e-6..1e6).contains(&c.abs())),
    ) {
        let (p, u): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        prop_assume!(u.iter().any(|&v| v != 0.0));
        let base = relative_l2(&p, &u).unwrap();
        prop_assert!(base >= 0.0);
        // powers of two scale without rounding
        let two = 2f64.powi(k);
        let scaled = |s: f64, v: &[f64]| v.iter().map(|x| s * x).collect::<Vec<_>>();
        prop_assert_eq!(relative_l2(&scaled(two, &p), &scaled(two, &u)).unwrap(), base);
        let general = relative_l2(&scaled(c, &p), &scaled(c, &u)).unwrap();
        prop_assert!((general - base).abs() <= 1e-13 * base.max(1e-300), "{} vs {}", general, base);
    }
}

#[test]
fn analytic_test_set_layout() {
    let eps = 1e-3;
    let set = ex1_set(eps);
    let xs: Vec<f64> = set.points.iter().map(|p| p[0]).collect();
    assert!(xs.windows(2).all(|w| w[0] < w[1]));
    assert_eq!((xs[0], *xs.last().unwrap()), (0.0, 1.0));
    assert!(set.len() > ODE_UNIFORM_POINTS + ODE_LAYER_POINTS - 5 && set.len() <= ODE_UNIFORM_POINTS + ODE_LAYER_POINTS);
    // layer of ex1 at x = 1: the closest clustered point sits ε/100 inside
    let closest = xs.iter().filter(|&&x| x < 1.0).fold(0.0_f64, |a, &x| a.max(x));
    assert!((1.0 - closest - eps / 100.0).abs() < 1e-15);
    assert!(xs.iter().filter(|&&x| x > 1.0 - 10.0 * eps).count() > 400);
    for (x, u) in xs.iter().zip(&set.truth) {
        assert_eq!(*u, exact_ex1(*x, eps));
    }
    // ex2 clusters at x = 0
    let ex2 = TestSet::<f64>::analytic(&problem(ProblemName::Ex2, eps)).unwrap();
    assert!(ex2.points.iter().filter(|p| p[0] < 10.0 * eps).count() > 400);
    assert!(matches!(TestSet::<f64>::analytic(&problem(ProblemName::Ex3, eps)), Err(Error::MissingTestSet(_))));
}

#[test]
fn exact_and_zero_predictors() {
    let eps = 1e-3;
    let set = ex1_set(eps);
    let exact: Vec<f64> = set.points.iter().map(|p| exact_ex1(p[0], eps)).collect();
    assert!(ErrorField::from_predictions(&set, exact).unwrap().relative_l2().unwrap() < 1e-12);
    let zero = ErrorField::from_predictions(&set, vec![0.0; set.len()]).unwrap();
    assert_eq!(zero.relative_l2().unwrap(), 1.0);
    assert!(ErrorField::from_predictions(&set, vec![0.0; 3]).is_err());
    assert!(matches!(ErrorField::from_predictions(&set, vec![f64::NAN; set.len()]), Err(Error::NonFinite { .. })));
}

#[test]
fn zero_network_scores_one() {
    let spec = problem(ProblemName::Ex1, 1e-3);
    let model = Model::for_problem(ModelKind::Pinn, BackboneKind::Mlp, &spec).unwrap();
    let params = vec![0.0; model.param_len()];
    let field = error_field(&model, &params, &ex1_set(1e-3)).unwrap();
    assert_eq!(field.relative_l2().unwrap(), 1.0);
}

#[test]
fn evaluate_fills_report() {
    let cfg = TrainConfig { problem: ProblemName::Ex1, kind: ModelKind::Aspinn, seed: 4, ..TrainConfig::default() };
    let spec = cfg.problem_spec::<f64>();
    let model = cfg.build_model(&spec).unwrap();
    let params = model.init_params(4).values;
    let set = TestSet::analytic(&spec).unwrap();
    let timing = Timing::from_history(&history(5)).unwrap();
    assert_eq!(timing, Timing { wall_seconds: 4.0, iterations: 41 });
    let (report, field) = evaluate(&cfg, &model, &params, &set, timing).unwrap();
    assert_eq!(report.relative_l2, field.relative_l2().unwrap());
    assert!(report.relative_l2 >= 0.0);
    assert_eq!((report.iterations, report.seed, report.test_points), (41, 4, set.len()));
    let json: serde_json::Value = serde_json::to_value(&report).unwrap();
    for key in ["problem", "model", "backbone", "relative_l2", "wall_seconds", "iterations", "seed", "files"] {
        assert!(json.get(key).is_some(), "{key}");
    }
    assert_eq!(json["problem"], "ex1");
    assert_eq!(json["model"], "aspinn");
    let other = TrainConfig { problem: ProblemName::Ex2, ..cfg.clone() };
    assert!(evaluate(&other, &model, &params, &set, timing).is_err());
    assert!(Timing::from_history(&[]).is_err());
}

#[test]
fn export_1d_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = TrainConfig { iterations: 50, ..TrainConfig::default() };
    let spec = cfg.problem_spec::<f64>();
    let model = cfg.build_model(&spec).unwrap();
    let params = model.init_params(1).values;
    let set = TestSet::analytic(&spec).unwrap();
    let (mut report, field) = evaluate(&cfg, &model, &params, &set, Timing { wall_seconds: 1.0, iterations: 50 }).unwrap();
    let files = export_plots(&mut report, &field, &history(6), dir.path()).unwrap();
    assert_eq!(files.len(), 3);
    assert_eq!(report.files, vec![ERROR_FIELD_FILE, SOLUTION_PLOT_FILE, LOSS_PLOT_FILE]);
    let back = ErrorField::<f64>::read_csv(&files[0]).unwrap();
    assert_eq!(back.points, field.points);
    assert_eq!(back.truth, field.truth);
    assert_eq!(back.prediction, field.prediction);
    assert_eq!(back.columns, vec!["x"]);
    let text = std::fs::read_to_string(&files[0]).unwrap();
    let xs: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert!(xs.windows(2).all(|w| w[0] < w[1]));
    for l in text.lines().skip(1) {
        let v: Vec<f64> = l.split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(v[3], v[2] - v[1]);
    }
    let line = std::fs::read_to_string(&files[1]).unwrap();
    assert!(line.starts_with("<svg") && line.trim_end().ends_with("</svg>"));
    for class in ["truth", "prediction", "error"] {
        assert!(line.contains(&format!(r#"<polyline class="{class}""#)));
    }
    let loss = std::fs::read_to_string(&files[2]).unwrap();
    assert!(loss.contains(r#"data-xmin="0" data-xmax="50""#));
    assert!(loss.contains(r#"class="xmax""#) && loss.contains(">50</text>"));
    assert!(loss.contains(r#"<polyline class="total""#));
    // the initial loss is identically zero and has no curve on a log axis
    assert!(!loss.contains(r#"class="initial""#));
}

#[test]
fn export_2d_heatmap_matches_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = TrainConfig { problem: ProblemName::Ex3, iterations: 10, ..TrainConfig::default() };
    let spec = cfg.problem_spec::<f64>();
    let set = TestSet::generate(&spec, 16, 8).unwrap();
    assert_eq!(set.len(), 17 * 17);
    let model = cfg.build_model(&spec).unwrap();
    let params = model.init_params(0).values;
    let (mut report, field) = evaluate(&cfg, &model, &params, &set, Timing { wall_seconds: 0.1, iterations: 10 }).unwrap();
    assert_eq!(field.shape, Some(vec![17, 17]));
    let files = export_plots(&mut report, &field, &history(2), dir.path()).unwrap();
    let svg = std::fs::read_to_string(&files[1]).unwrap();
    assert!(svg.contains(r#"data-grid="17x17" data-cells="17x17""#));
    assert_eq!(svg.matches(r#"class="cell""#).count(), 2 * 17 * 17);
    let back = ErrorField::<f64>::read_csv(&files[0]).unwrap();
    assert_eq!(back.columns, vec!["x", "y"]);
    assert_eq!((back.points, back.prediction), (field.points.clone(), field.prediction.clone()));

    // fine grids are aggregated
    let mut big = field.clone();
    let shape = vec![300, 3];
    big.points = (0..900).map(|i| vec![(i / 3) as f64 / 299.0, (i % 3) as f64 / 2.0]).collect();
    big.truth = vec![1.0; 900];
    big.prediction = (0..900).map(|i| i as f64).collect();
    let svg = heatmap_svg(&big, &shape, "t").unwrap();
    assert!(svg.contains(r#"data-grid="300x3" data-cells="200x3""#));
    assert_eq!(svg.matches(r#"class="cell""#).count(), 2 * 200 * 3);
    assert!(heatmap_svg(&big, &[10, 10], "t").is_err());
}

#[test]
fn reference_loading() {
    let dir = tempfile::tempdir().unwrap();
    let ex4 = problem::<f64>(ProblemName::Ex4, 1e-2);
    let path = reference_path(dir.path(), ProblemName::Ex4, 1e-2);
    assert!(path.ends_with("references/ex4_eps1e-2.csv"));
    assert!(matches!(TestSet::load(&ex4, &path), Err(Error::MissingTestSet(_))));
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    let grid = solve(&ex4, 8, 4).unwrap();
    grid.write(&path).unwrap();
    let set = TestSet::load(&ex4, &path).unwrap();
    assert_eq!(set, TestSet::from_grid(&grid));
    assert!(set.describe().contains("9x9"));
    assert!(TestSet::load(&problem::<f64>(ProblemName::Ex3, 1e-2), &path).is_err());
    // ODEs ignore the path
    assert_eq!(TestSet::load(&problem::<f64>(ProblemName::Ex1, 1e-2), &path).unwrap(), ex1_set(1e-2));
}
