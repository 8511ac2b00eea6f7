//! Command implementations.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use log::{info, warn};
use spinn_core::eval::{
    evaluate as score, export_plots, reference_path, EvalReport, TestSet, Timing,
};
use spinn_core::fdm;
use spinn_core::models::{BackboneKind, ModelKind};
use spinn_core::networks::NetworkParams;
use spinn_core::problems::{problem, ProblemName, ProblemSpec};
use spinn_core::sampling::SampleCounts;
use spinn_core::training::{read_loss_history, train as run_training, write_loss_history, LossRecord, TrainConfig};

use crate::manifest::{RunManifest, MANIFEST_FILE};
use crate::OutArgs;

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const LOSS_FILE: &str = "loss.csv";
pub const REPORT_FILE: &str = "report.json";

#[derive(clap::Args, Clone, Debug)]
pub struct TrainArgs {
    /// Problem name; see `list-problems`
    pub problem: Option<ProblemName>,

    /// pinn, gkpinn or aspinn
    pub model: Option<ModelKind>,

    /// mlp or kan
    pub backbone: Option<BackboneKind>,

    /// JSON file with training config fields; flags override it
    #[arg(long)]
    pub config: Option<PathBuf>,

    #[arg(long)]
    pub iterations: Option<usize>,

    /// Adam learning rate
    #[arg(long)]
    pub lr: Option<f64>,

    #[arg(long)]
    pub seed: Option<u64>,

    #[arg(long)]
    pub epsilon: Option<f64>,

    /// Interior collocation points
    #[arg(long)]
    pub points: Option<usize>,

    /// Iterations between loss-history lines
    #[arg(long)]
    pub log_every: Option<usize>,

    /// Reference grid CSV for PDE problems
    #[arg(long)]
    pub reference: Option<PathBuf>,

    #[command(flatten)]
    pub out: OutArgs,
}

impl TrainArgs {
    /// Config file (or defaults) with positionals and flags applied.
    pub fn config(&self) -> Result<TrainConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                TrainConfig::from_json_file(path).with_context(|| format!("loading config {}", path.display()))?
            }
            None if self.problem.is_none() => bail!("give a problem name or --config"),
            None => TrainConfig::default(),
        };
        if let Some(p) = self.problem {
            if p != cfg.problem {
                cfg.network = cfg.network.filter(|n| n.input_dim() == p.input_dim());
            }
            cfg.problem = p;
        }
        cfg.kind = self.model.unwrap_or(cfg.kind);
        cfg.backbone = self.backbone.unwrap_or(cfg.backbone);
        cfg.iterations = self.iterations.unwrap_or(cfg.iterations);
        cfg.learning_rate = self.lr.unwrap_or(cfg.learning_rate);
        cfg.seed = self.seed.unwrap_or(cfg.seed);
        cfg.epsilon = self.epsilon.unwrap_or(cfg.epsilon);
        cfg.log_every = self.log_every.unwrap_or(cfg.log_every);
        if let Some(n) = self.points {
            let spec = cfg.problem_spec::<f64>();
            cfg.samples = Some(SampleCounts { interior: n, ..cfg.sample_counts(&spec) });
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn run_dir_name(cfg: &TrainConfig) -> String {
    format!("{}_{}_{}_eps{:e}_seed{}", cfg.problem, cfg.kind, cfg.backbone, cfg.epsilon, cfg.seed)
}

/// Creates `dir`, refusing a non-empty one unless `force`. A forced reuse
/// drops the old manifest first so the directory never looks complete
/// while it is being rewritten.
fn claim_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() && std::fs::read_dir(dir)?.next().is_some() {
        if !force {
            bail!("{} is not empty; pass --force to overwrite", dir.display());
        }
        let manifest = dir.join(MANIFEST_FILE);
        if manifest.exists() {
            std::fs::remove_file(manifest)?;
        }
    }
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(())
}

/// Test set of `spec`: analytic for ODEs, a reference grid otherwise.
/// Without a frozen grid, `generate` solves one in memory.
fn test_set(spec: &ProblemSpec<f64>, reference: Option<&Path>, root: &Path, generate: bool) -> Result<TestSet<f64>> {
    if spec.exact.is_some() {
        return Ok(TestSet::analytic(spec)?);
    }
    let eps = spec.epsilon;
    let path = reference.map(Path::to_path_buf).unwrap_or_else(|| reference_path(root, spec.name, eps));
    if reference.is_none() && !path.exists() && generate {
        warn!("no frozen reference at {}; solving one in memory", path.display());
        return Ok(TestSet::generate(spec, fdm::DEFAULT_N, fdm::DEFAULT_M)?);
    }
    TestSet::load(spec, &path).map_err(|e| match e {
        spinn_core::Error::MissingTestSet(_) => anyhow!(e).context(format!(
            "generate it with `spinn reference {} --epsilon {eps:e}`",
            spec.name
        )),
        e => anyhow!(e),
    })
}

pub fn train(args: &TrainArgs, argv: &[String]) -> Result<()> {
    let cfg = args.config()?;
    let dir = args.out.out.clone().unwrap_or_else(|| args.out.root.join(run_dir_name(&cfg)));
    claim_dir(&dir, args.out.force)?;
    let spec = cfg.problem_spec::<f64>();
    let test = test_set(&spec, args.reference.as_deref(), &args.out.root, true)?;

    let outcome = match run_training::<f64>(&cfg) {
        Ok(o) => o,
        Err(failure) => {
            if let Some(last) = failure.last_good {
                last.params.save(&dir.join(CHECKPOINT_FILE))?;
                write_loss_history(&dir.join(LOSS_FILE), &last.history)?;
                warn!("last finite parameters saved in {}", dir.display());
            }
            return Err(anyhow!(failure.error).context("training failed"));
        }
    };
    outcome.params.save(&dir.join(CHECKPOINT_FILE))?;
    write_loss_history(&dir.join(LOSS_FILE), &outcome.history)?;
    let timing = timing_of(&outcome.history, outcome.wall_time_s, cfg.iterations);
    let (mut report, field) = score(&cfg, &outcome.model, &outcome.params.values, &test, timing)?;
    report.files = vec![CHECKPOINT_FILE.into(), LOSS_FILE.into(), REPORT_FILE.into()];
    export_plots(&mut report, &field, &outcome.history, &dir)?;
    report.write(&dir.join(REPORT_FILE))?;

    let mut manifest = RunManifest::new("train", argv, args.config.clone(), &dir);
    for f in &report.files {
        manifest.add(f)?;
    }
    manifest.write(&dir.join(MANIFEST_FILE))?;
    println!(
        "{} {}/{}: relative L2 {:.4e}, {:.1} s -> {}",
        report.problem,
        report.model,
        report.backbone,
        report.relative_l2,
        report.wall_seconds,
        dir.display()
    );
    Ok(())
}

/// Timing from the loss log, as `evaluate` reads it back later.
fn timing_of(history: &[LossRecord], wall: f64, iterations: usize) -> Timing {
    Timing::from_history(history).unwrap_or(Timing { wall_seconds: wall, iterations })
}

pub fn reference(name: ProblemName, n: usize, m: usize, epsilon: f64, out: &OutArgs, argv: &[String]) -> Result<()> {
    let spec = problem::<f64>(name, epsilon);
    if spec.exact.is_some() {
        bail!("{name} has a closed-form solution; its test set is analytic and needs no reference grid");
    }
    let default = reference_path(&out.root, name, epsilon);
    let path = match &out.out {
        Some(dir) => dir.join(default.file_name().expect("reference file name")),
        None => default,
    };
    let dir = path.parent().expect("reference directory").to_path_buf();
    let manifest_path = path.with_extension("manifest.json");
    if path.exists() && !out.force {
        bail!("{} exists; pass --force to overwrite", path.display());
    }
    std::fs::create_dir_all(&dir)?;
    if manifest_path.exists() {
        std::fs::remove_file(&manifest_path)?;
    }
    info!("solving {name} at eps {epsilon:e} with N = {n}, M = {m}");
    let grid = fdm::solve(&spec, n, m)?;
    let sidecar = grid.write(&path)?;

    let mut manifest = RunManifest::new("reference", argv, None, &dir);
    for p in [&path, &fdm::sidecar_path(&path)] {
        manifest.add(&p.file_name().expect("file name").to_string_lossy())?;
    }
    manifest.write(&manifest_path)?;
    let shape: Vec<String> = sidecar.shape.iter().map(|s| s.to_string()).collect();
    println!("{name}: {} grid, sha256 {} -> {}", shape.join("x"), sidecar.sha256, path.display());
    Ok(())
}

/// A finished run directory.
struct Run {
    dir: PathBuf,
    report: EvalReport,
}

fn load_run(dir: &Path) -> Result<Run> {
    let manifest = dir.join(MANIFEST_FILE);
    if !manifest.exists() {
        bail!("{} has no {MANIFEST_FILE}; the run did not finish", dir.display());
    }
    RunManifest::read(&manifest)?.verify(dir)?;
    let report_path = dir.join(REPORT_FILE);
    if !report_path.exists() {
        bail!("{} has no {REPORT_FILE}; rerun `spinn train` for it", dir.display());
    }
    let report = EvalReport::read(&report_path).with_context(|| format!("reading {}", report_path.display()))?;
    Ok(Run { dir: dir.to_path_buf(), report })
}

pub fn evaluate(run: &Path, reference: Option<&Path>, out: &OutArgs, argv: &[String]) -> Result<()> {
    let Run { report: original, .. } = load_run(run)?;
    let cfg = original.config.clone();
    let spec = cfg.problem_spec::<f64>();
    let model = cfg.build_model(&spec)?;
    let params = NetworkParams::<f64>::load(&run.join(CHECKPOINT_FILE))
        .with_context(|| format!("loading {}", run.join(CHECKPOINT_FILE).display()))?;
    model.check_params(&params.values)?;
    let history = read_loss_history(&run.join(LOSS_FILE))?;
    let test = test_set(&spec, reference, &out.root, false)?;

    let dir = out.out.clone().unwrap_or_else(|| run.join("evaluation"));
    claim_dir(&dir, out.force)?;
    let timing = timing_of(&history, original.wall_seconds, cfg.iterations);
    let (mut report, field) = score(&cfg, &model, &params.values, &test, timing)?;
    report.files = vec![REPORT_FILE.into()];
    export_plots(&mut report, &field, &history, &dir)?;
    report.write(&dir.join(REPORT_FILE))?;
    let mut manifest = RunManifest::new("evaluate", argv, None, &dir);
    for f in &report.files {
        manifest.add(f)?;
    }
    manifest.write(&dir.join(MANIFEST_FILE))?;
    println!(
        "{} {}/{}: relative L2 {:.4e} on {} -> {}",
        report.problem,
        report.model,
        report.backbone,
        report.relative_l2,
        report.test_set,
        dir.display()
    );
    Ok(())
}

pub const COMPARISON_CSV: &str = "comparison.csv";
pub const COMPARISON_TXT: &str = "comparison.txt";

/// Rows of a comparison: accuracy and time, with ratios to `baseline`.
pub fn comparison_rows(reports: &[(String, EvalReport)], baseline: usize) -> Vec<Vec<String>> {
    let base = &reports[baseline].1;
    let mut rows = vec![["run", "model", "backbone", "seed", "iterations", "relative_l2", "wall_seconds", "l2_ratio", "time_ratio"]
        .map(String::from)
        .to_vec()];
    for (name, r) in reports {
        rows.push(vec![
            name.clone(),
            r.model.to_string(),
            r.backbone.to_string(),
            r.seed.to_string(),
            r.iterations.to_string(),
            format!("{:.6e}", r.relative_l2),
            format!("{:.3}", r.wall_seconds),
            format!("{:.4}", r.relative_l2 / base.relative_l2),
            format!("{:.4}", r.wall_seconds / base.wall_seconds),
        ]);
    }
    rows
}

fn render_table(rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..rows[0].len()).map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
    let mut s = String::new();
    for (i, row) in rows.iter().enumerate() {
        let cells: Vec<String> = row.iter().zip(&widths).map(|(v, w)| format!("{v:<w$}")).collect();
        writeln!(s, "{}", cells.join("  ").trim_end()).unwrap();
        if i == 0 {
            writeln!(s, "{}", widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  ")).unwrap();
        }
    }
    s
}

pub fn compare(name: ProblemName, runs: &[PathBuf], baseline: Option<usize>, out: &OutArgs, argv: &[String]) -> Result<()> {
    if runs.len() < 2 {
        bail!("compare needs at least two runs");
    }
    let mut reports = Vec::with_capacity(runs.len());
    for dir in runs {
        let run = load_run(dir)?;
        if run.report.problem != name {
            bail!("{} is a {} run, not {name}", run.dir.display(), run.report.problem);
        }
        let label = run.dir.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_else(|| run.dir.display().to_string());
        reports.push((label, run.report));
    }
    let baseline = match baseline {
        Some(b) if b >= reports.len() => bail!("baseline {b} is out of range for {} runs", reports.len()),
        Some(b) => b,
        None => reports.iter().position(|(_, r)| r.model == ModelKind::Gkpinn).unwrap_or(0),
    };
    let rows = comparison_rows(&reports, baseline);
    let table = format!("{name}: ratios relative to {}\n{}", reports[baseline].0, render_table(&rows));
    print!("{table}");

    let dir = out.out.clone().unwrap_or_else(|| out.root.join(format!("compare_{name}")));
    claim_dir(&dir, out.force)?;
    let csv: String = rows.iter().map(|r| r.join(",") + "\n").collect();
    std::fs::write(dir.join(COMPARISON_CSV), csv)?;
    std::fs::write(dir.join(COMPARISON_TXT), &table)?;
    let mut manifest = RunManifest::new("compare", argv, None, &dir);
    manifest.add(COMPARISON_CSV)?;
    manifest.add(COMPARISON_TXT)?;
    manifest.write(&dir.join(MANIFEST_FILE))?;
    Ok(())
}

pub fn list_problems() {
    let rows: Vec<Vec<String>> = std::iter::once(["name", "dims", "reference", "equation"].map(String::from).to_vec())
        .chain(ProblemName::ALL.iter().map(|&p| {
            let reference = if p.input_dim() == 1 { "analytic" } else { "fdm" };
            vec![p.to_string(), p.input_dim().to_string(), reference.into(), p.description().into()]
        }))
        .collect();
    print!("{}", render_table(&rows));
}

