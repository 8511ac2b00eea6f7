//! Relative L2 error, test sets, reports and exported artifacts.

mod svg;

pub use svg::{heatmap_svg, line_plot_svg, loss_plot_svg, HEATMAP_MAX_CELLS};

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::fdm::{self, coordinate_names, GridSolution};
use crate::models::{BackboneKind, Model, ModelKind};
use crate::problems::{ProblemName, ProblemSpec};
use crate::real::Real;
use crate::training::{LossRecord, TrainConfig, TrainOutcome};

/// Uniform points of an analytic test set.
pub const ODE_UNIFORM_POINTS: usize = 1001;
/// Points clustered geometrically toward the layer.
pub const ODE_LAYER_POINTS: usize = 1000;
/// Points per model evaluation call.
const EVAL_CHUNK: usize = 1 << 15;

pub const ERROR_FIELD_FILE: &str = "error_field.csv";
pub const SOLUTION_PLOT_FILE: &str = "solution.svg";
pub const LOSS_PLOT_FILE: &str = "loss.svg";

/// `‖pred − truth‖₂ / ‖truth‖₂`.
pub fn relative_l2<T: Real>(predicted: &[T], truth: &[T]) -> Result<T> {
    if predicted.len() != truth.len() || truth.is_empty() {
        return Err(config(format!(
            "relative L2 needs equal non-empty vectors, got {} and {}",
            predicted.len(),
            truth.len()
        )));
    }
    let mut num = T::zero();
    let mut den = T::zero();
    for (&p, &u) in predicted.iter().zip(truth) {
        num += (p - u) * (p - u);
        den += u * u;
    }
    if den == T::zero() {
        return Err(Error::UndefinedMetric);
    }
    Ok((num / den).sqrt())
}

/// Where the reference values of a test set come from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestSource {
    Analytic,
    Fdm { scheme: String },
}

/// Points with reference values. Grid test sets keep their axes.
#[derive(Clone, Debug, PartialEq)]
pub struct TestSet<T> {
    pub problem: ProblemName,
    pub points: Vec<Vec<T>>,
    pub truth: Vec<T>,
    pub axes: Option<Vec<Vec<T>>>,
    pub source: TestSource,
}

impl<T: Real> TestSet<T> {
    /// 1001 uniform points plus 1000 points at geometrically spaced
    /// distances in `[ε/100, 1/2]` from the layer, sorted.
    pub fn analytic(problem: &ProblemSpec<T>) -> Result<Self> {
        let exact = problem.exact.ok_or_else(|| {
            Error::MissingTestSet(format!("{} has no closed-form solution; use an FDM reference", problem.name))
        })?;
        let eps = problem.epsilon;
        let mut xs: Vec<T> = fdm::uniform_nodes(ODE_UNIFORM_POINTS - 1);
        if let Some(prior) = problem.priors.first() {
            let lo = eps / T::lit(100.0);
            let hi = T::lit(0.5);
            let ratio = (hi / lo).ln() / T::from_count(ODE_LAYER_POINTS - 1);
            let inward = if prior.position >= T::lit(0.5) { -T::one() } else { T::one() };
            for k in 0..ODE_LAYER_POINTS {
                let d = if lo >= hi { hi } else { lo * (ratio * T::from_count(k)).exp() };
                xs.push(prior.position + inward * d.min(hi));
            }
        }
        xs.sort_by(|a, b| a.partial_cmp(b).expect("finite test points"));
        xs.dedup();
        let truth = xs.iter().map(|&x| exact.eval(x, eps)).collect();
        Ok(Self { problem: problem.name, points: xs.into_iter().map(|x| vec![x]).collect(), truth, axes: None, source: TestSource::Analytic })
    }

    pub fn from_grid(grid: &GridSolution<T>) -> Self {
        Self {
            problem: grid.problem,
            points: grid.points(),
            truth: grid.values.clone(),
            axes: Some(grid.axes.clone()),
            source: TestSource::Fdm { scheme: grid.meta.scheme.clone() },
        }
    }

    /// Analytic set for ODEs, the reference grid at `reference` otherwise.
    pub fn load(problem: &ProblemSpec<T>, reference: &Path) -> Result<Self> {
        if problem.exact.is_some() {
            return Self::analytic(problem);
        }
        let grid = GridSolution::read(reference)?;
        if grid.problem != problem.name {
            return Err(config(format!("{} holds {}, not {}", reference.display(), grid.problem, problem.name)));
        }
        Ok(Self::from_grid(&grid))
    }

    /// Analytic set for ODEs, a freshly solved grid otherwise.
    pub fn generate(problem: &ProblemSpec<T>, n: usize, m: usize) -> Result<Self> {
        if problem.exact.is_some() {
            return Self::analytic(problem);
        }
        Ok(Self::from_grid(&fdm::solve(problem, n, m)?))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn describe(&self) -> String {
        match &self.source {
            TestSource::Analytic => format!("analytic, {} points", self.len()),
            TestSource::Fdm { scheme } => {
                let shape: Vec<String> = self.axes.iter().flatten().map(|a| a.len().to_string()).collect();
                format!("{scheme}, {} grid", shape.join("x"))
            }
        }
    }
}

/// Default location of a frozen reference grid below `root`.
pub fn reference_path(root: &Path, problem: ProblemName, epsilon: f64) -> PathBuf {
    root.join("references").join(format!("{problem}_eps{epsilon:e}.csv"))
}

/// Pointwise prediction and reference on a test set.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorField<T> {
    pub columns: Vec<String>,
    pub points: Vec<Vec<T>>,
    pub truth: Vec<T>,
    pub prediction: Vec<T>,
    /// Grid shape when the points form a tensor grid, last axis fastest.
    pub shape: Option<Vec<usize>>,
}

impl<T: Real> ErrorField<T> {
    /// Pairs `prediction`, given in test-point order, with the reference.
    pub fn from_predictions(test: &TestSet<T>, prediction: Vec<T>) -> Result<Self> {
        if prediction.len() != test.len() {
            return Err(config(format!("{} predictions for {} test points", prediction.len(), test.len())));
        }
        if let Some(i) = prediction.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { op: "prediction".into(), index: i });
        }
        Ok(Self {
            columns: coordinate_names(test.problem).iter().map(|s| s.to_string()).collect(),
            points: test.points.clone(),
            truth: test.truth.clone(),
            prediction,
            shape: test.axes.as_ref().map(|a| a.iter().map(Vec::len).collect()),
        })
    }

    pub fn error(&self) -> Vec<T> {
        self.prediction.iter().zip(&self.truth).map(|(&p, &u)| p - u).collect()
    }

    pub fn relative_l2(&self) -> Result<T> {
        relative_l2(&self.prediction, &self.truth)
    }

    fn csv_text(&self) -> String {
        let mut s = self.columns.join(",");
        s.push_str(",truth,prediction,error\n");
        for (i, x) in self.points.iter().enumerate() {
            for c in x {
                write!(s, "{c},").unwrap();
            }
            let (u, p) = (self.truth[i], self.prediction[i]);
            writeln!(s, "{u},{p},{}", p - u).unwrap();
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.csv_text())?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().ok_or_else(|| Error::Parse(format!("{} is empty", path.display())))?.split(',').collect();
        if header.len() < 4 || header[header.len() - 3..] != ["truth", "prediction", "error"] {
            return Err(Error::Parse(format!("{}: unexpected header", path.display())));
        }
        let d = header.len() - 3;
        let mut field = Self {
            columns: header[..d].iter().map(|s| s.to_string()).collect(),
            points: Vec::new(),
            truth: Vec::new(),
            prediction: Vec::new(),
            shape: None,
        };
        for (row, line) in lines.enumerate() {
            let v: Vec<f64> = line
                .split(',')
                .map(|s| s.parse::<f64>().map_err(|e| Error::Parse(format!("line {}: {e}", row + 2))))
                .collect::<Result<_>>()?;
            if v.len() != d + 3 {
                return Err(Error::Parse(format!("line {}: expected {} fields", row + 2, d + 3)));
            }
            field.points.push(v[..d].iter().map(|&c| T::lit(c)).collect());
            field.truth.push(T::lit(v[d]));
            field.prediction.push(T::lit(v[d + 1]));
        }
        Ok(field)
    }
}

/// Evaluates `model` at every test point.
pub fn error_field<T: Real>(model: &Model<T>, params: &[T], test: &TestSet<T>) -> Result<ErrorField<T>> {
    let mut prediction = Vec::with_capacity(test.len());
    for chunk in test.points.chunks(EVAL_CHUNK) {
        prediction.extend(model.predict_many(params, chunk)?);
    }
    ErrorField::from_predictions(test, prediction)
}

/// Machine-readable summary of a trained run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub problem: ProblemName,
    pub model: ModelKind,
    pub backbone: BackboneKind,
    pub epsilon: f64,
    pub relative_l2: f64,
    pub wall_seconds: f64,
    pub iterations: usize,
    pub seed: u64,
    pub test_set: String,
    pub test_points: usize,
    pub error_field: String,
    pub files: Vec<String>,
    pub config: TrainConfig,
}

impl EvalReport {
    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

/// Wall time and iteration count of a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Timing {
    pub wall_seconds: f64,
    pub iterations: usize,
}

impl Timing {
    /// Reads both from the last line of a loss history.
    pub fn from_history(history: &[LossRecord]) -> Result<Self> {
        let last = history.last().ok_or_else(|| config("empty loss history"))?;
        Ok(Self { wall_seconds: last.seconds_elapsed, iterations: last.iteration + 1 })
    }
}

/// Scores `params` on `test` and fills a report. `files` starts empty.
pub fn evaluate<T: Real>(
    cfg: &TrainConfig,
    model: &Model<T>,
    params: &[T],
    test: &TestSet<T>,
    timing: Timing,
) -> Result<(EvalReport, ErrorField<T>)> {
    if test.problem != cfg.problem {
        return Err(config(format!("test set is for {}, run is {}", test.problem, cfg.problem)));
    }
    let field = error_field(model, params, test)?;
    let report = EvalReport {
        problem: cfg.problem,
        model: cfg.kind,
        backbone: cfg.backbone,
        epsilon: cfg.epsilon,
        relative_l2: field.relative_l2()?.to_f64_lossy(),
        wall_seconds: timing.wall_seconds,
        iterations: timing.iterations,
        seed: cfg.seed,
        test_set: test.describe(),
        test_points: test.len(),
        error_field: ERROR_FIELD_FILE.into(),
        files: Vec::new(),
        config: cfg.clone(),
    };
    Ok((report, field))
}

/// [`evaluate`] on a finished run.
pub fn evaluate_outcome<T: Real>(outcome: &TrainOutcome<T>, test: &TestSet<T>) -> Result<(EvalReport, ErrorField<T>)> {
    let timing = Timing { wall_seconds: outcome.wall_time_s, iterations: outcome.config.iterations };
    evaluate(&outcome.config, &outcome.model, &outcome.params.values, test, timing)
}

/// Writes the error field CSV, a solution plot and a loss plot into `dir`
/// and records their names in `report.files`.
pub fn export_plots<T: Real>(
    report: &mut EvalReport,
    field: &ErrorField<T>,
    history: &[LossRecord],
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    let csv = dir.join(ERROR_FIELD_FILE);
    field.write_csv(&csv)?;
    let title = format!("{} {} {} (eps = {:e})", report.problem, report.model, report.backbone, report.epsilon);
    let plot = match &field.shape {
        Some(shape) if shape.len() == 2 => heatmap_svg(field, shape, &title)?,
        _ => line_plot_svg(field, &title)?,
    };
    let solution = dir.join(SOLUTION_PLOT_FILE);
    std::fs::write(&solution, plot)?;
    let loss = dir.join(LOSS_PLOT_FILE);
    std::fs::write(&loss, loss_plot_svg(history, report.iterations, &title))?;
    let paths = vec![csv, solution, loss];
    for p in &paths {
        let name = p.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
        if !report.files.contains(&name) {
            report.files.push(name);
        }
    }
    Ok(paths)
}

#[cfg(test)]
mod tests;
