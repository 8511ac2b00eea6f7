//! Full-batch Adam training with residual-based attention.

mod adam;
mod loss;
mod rba;

pub use adam::AdamState;
pub use loss::{
    assemble_loss, residual_layout, ForwardPass, LossEvaluator, LossGraph, LossParts, LossWeights, RbaMode, RbaSet,
};
pub use rba::RbaState;

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use log::{debug, info};
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::models::{BackboneKind, Model, ModelKind};
use crate::networks::{NetworkConfig, NetworkParams};
use crate::problems::{problem, ProblemName, ProblemSpec, DEFAULT_EPSILON};
use crate::real::Real;
use crate::sampling::{sample_problem_with, SampleCounts, SampleSet};

/// A training run. Every field has a default, so a JSON file may set any
/// subset of them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub problem: ProblemName,
    pub epsilon: f64,
    pub kind: ModelKind,
    pub backbone: BackboneKind,
    /// Overrides the standard backbone of `backbone`.
    pub network: Option<NetworkConfig>,
    pub iterations: usize,
    pub learning_rate: f64,
    pub loss_weights: LossWeights,
    pub rba_learning_rate: f64,
    pub rba_mode: RbaMode,
    pub seed: u64,
    /// Standard counts of the problem when absent.
    pub samples: Option<SampleCounts>,
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            problem: ProblemName::Ex1,
            epsilon: DEFAULT_EPSILON,
            kind: ModelKind::Aspinn,
            backbone: BackboneKind::Mlp,
            network: None,
            iterations: 100_000,
            learning_rate: 1e-3,
            loss_weights: LossWeights::default(),
            rba_learning_rate: 1e-4,
            rba_mode: RbaMode::Residual,
            seed: 0,
            samples: None,
            log_every: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(config("epsilon must be positive"));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(config("learning rate must be positive"));
        }
        if !(0.0..=1.0).contains(&self.rba_learning_rate) {
            return Err(config("attention learning rate must lie in [0, 1]"));
        }
        let w = self.loss_weights;
        if [w.ic, w.bc, w.r].iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(config("loss weights must be non-negative"));
        }
        if self.log_every == 0 {
            return Err(config("log_every must be at least 1"));
        }
        if let Some(net) = &self.network {
            net.validate()?;
            if net.input_dim() != self.problem.input_dim() {
                return Err(config(format!(
                    "network input dimension {} does not match {} ({})",
                    net.input_dim(),
                    self.problem,
                    self.problem.input_dim()
                )));
            }
        }
        Ok(())
    }

    pub fn problem_spec<T: Real>(&self) -> ProblemSpec<T> {
        problem(self.problem, T::lit(self.epsilon))
    }

    pub fn sample_counts<T: Real>(&self, spec: &ProblemSpec<T>) -> SampleCounts {
        self.samples.unwrap_or_else(|| SampleCounts::standard(spec))
    }

    pub fn build_model<T: Real>(&self, spec: &ProblemSpec<T>) -> Result<Model<T>> {
        let net = self.network.clone().unwrap_or_else(|| self.backbone.standard_network(spec.input_dim));
        Model::new(self.kind, net, spec.priors.clone(), spec.epsilon)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let cfg: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One line of the loss history.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub iteration: usize,
    pub loss_ic: f64,
    pub loss_bc: f64,
    pub loss_r: f64,
    pub loss_total: f64,
    pub seconds_elapsed: f64,
}

pub const LOSS_HISTORY_HEADER: &str = "iteration,loss_ic,loss_bc,loss_r,loss_total,seconds_elapsed";

pub fn write_loss_history(path: &Path, history: &[LossRecord]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{LOSS_HISTORY_HEADER}")?;
    for r in history {
        writeln!(
            out,
            "{},{:e},{:e},{:e},{:e},{:.6}",
            r.iteration, r.loss_ic, r.loss_bc, r.loss_r, r.loss_total, r.seconds_elapsed
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_loss_history(path: &Path) -> Result<Vec<LossRecord>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(LOSS_HISTORY_HEADER) {
        return Err(Error::Parse(format!("{} is not a loss history", path.display())));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            let num = |i: usize| -> Result<f64> {
                f.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| Error::Parse(format!("bad loss history line `{l}`")))
            };
            Ok(LossRecord {
                iteration: num(0)? as usize,
                loss_ic: num(1)?,
                loss_bc: num(2)?,
                loss_r: num(3)?,
                loss_total: num(4)?,
                seconds_elapsed: num(5)?,
            })
        })
        .collect()
}

/// Optimizer state of a run.
#[derive(Clone, Debug)]
pub struct TrainState<T> {
    pub params: Vec<T>,
    pub adam: AdamState<T>,
    pub rba: RbaSet<T>,
    pub iteration: usize,
    pub history: Vec<LossRecord>,
}

/// Result of a completed run.
#[derive(Clone, Debug)]
pub struct TrainOutcome<T> {
    pub config: TrainConfig,
    pub model: Model<T>,
    pub params: NetworkParams<T>,
    pub samples: SampleSet<T>,
    pub history: Vec<LossRecord>,
    pub final_loss: LossParts<T>,
    pub wall_time_s: f64,
    pub state: TrainState<T>,
}

/// A run that stopped on a non-finite loss or gradient. `last_good` holds
/// the parameters before the failing iteration.
#[derive(Debug)]
pub struct TrainFailure<T> {
    pub error: Error,
    pub last_good: Option<Box<TrainOutcome<T>>>,
}

impl<T> fmt::Display for TrainFailure<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.error.fmt(f)
    }
}

impl<T: fmt::Debug> std::error::Error for TrainFailure<T> {}

impl<T> From<Error> for TrainFailure<T> {
    fn from(error: Error) -> Self {
        Self { error, last_good: None }
    }
}

fn to_f64<T: Real>(l: LossParts<T>) -> [f64; 4] {
    [l.ic, l.bc, l.r, l.total].map(Real::to_f64_lossy)
}

/// Samples, builds and trains the configured model. Per iteration: forward
/// pass, residuals, attention update, loss, gradient, Adam step.
pub fn train<T: Real>(cfg: &TrainConfig) -> std::result::Result<TrainOutcome<T>, TrainFailure<T>> {
    cfg.validate()?;
    let spec = cfg.problem_spec::<T>();
    let samples = sample_problem_with(&spec, cfg.sample_counts(&spec), cfg.seed);
    let model = cfg.build_model(&spec)?;
    train_on(cfg, &spec, model, samples)
}

/// Trains `model` on fixed samples.
pub fn train_on<T: Real>(
    cfg: &TrainConfig,
    spec: &ProblemSpec<T>,
    model: Model<T>,
    samples: SampleSet<T>,
) -> std::result::Result<TrainOutcome<T>, TrainFailure<T>> {
    cfg.validate()?;
    let evaluator = LossEvaluator::new(&model, spec, &samples, cfg.loss_weights)?;
    let init = model.init_params(cfg.seed);
    let shapes = init.shapes.clone();
    let n = init.len();
    let mut state = TrainState {
        params: init.values,
        adam: AdamState::new(n),
        rba: RbaSet::new(cfg.rba_mode, &samples),
        iteration: 0,
        history: Vec::new(),
    };
    let lr = T::lit(cfg.learning_rate);
    let eta = T::lit(cfg.rba_learning_rate);
    let start = Instant::now();
    let mut grad = vec![T::zero(); n];
    info!(
        "training {} {}/{} on {} (eps {:e}): {} parameters, {} iterations",
        cfg.kind, cfg.backbone, model.network_count(), cfg.problem, cfg.epsilon, n, cfg.iterations
    );

    let outcome = |state: TrainState<T>, final_loss: LossParts<T>, wall: f64| TrainOutcome {
        config: cfg.clone(),
        model: model.clone(),
        params: NetworkParams { values: state.params.clone(), shapes: shapes.clone() },
        samples: samples.clone(),
        history: state.history.clone(),
        final_loss,
        wall_time_s: wall,
        state,
    };

    let mut last_loss = LossParts::default();
    for it in 0..cfg.iterations {
        let pass = evaluator.forward(&model, &state.params);
        let rba_step = (|| -> Result<()> {
            if let Some(r) = &mut state.rba.residual {
                r.update(&pass.residuals, eta)?;
            }
            if let Some(r) = &mut state.rba.boundary {
                r.update(&pass.boundary_errors, eta)?;
            }
            if let Some(r) = &mut state.rba.initial {
                r.update(&pass.initial_errors, eta)?;
            }
            Ok(())
        })();
        rba_step?;
        let loss = evaluator.loss(&pass, &state.rba);
        if !loss.total.is_finite() {
            let error = Error::Diverged { what: "loss".into(), iteration: it };
            let wall = start.elapsed().as_secs_f64();
            return Err(TrainFailure { error, last_good: Some(Box::new(outcome(state, last_loss, wall))) });
        }
        if it % cfg.log_every == 0 || it + 1 == cfg.iterations {
            let [ic, bc, r, total] = to_f64(loss);
            let seconds = start.elapsed().as_secs_f64();
            state.history.push(LossRecord {
                iteration: it,
                loss_ic: ic,
                loss_bc: bc,
                loss_r: r,
                loss_total: total,
                seconds_elapsed: seconds,
            });
            debug!("iteration {it}: loss {total:e} (ic {ic:e}, bc {bc:e}, r {r:e})");
        }
        grad.iter_mut().for_each(|g| *g = T::zero());
        evaluator.gradient(&model, &state.params, &pass, &state.rba, &mut grad);
        if let Err(error) = state.adam.step(&mut state.params, &grad, lr, it) {
            let wall = start.elapsed().as_secs_f64();
            return Err(TrainFailure { error, last_good: Some(Box::new(outcome(state, loss, wall))) });
        }
        state.iteration = it + 1;
        last_loss = loss;
    }
    let wall = start.elapsed().as_secs_f64();
    let final_loss = if cfg.iterations == 0 {
        evaluator.loss(&evaluator.forward(&model, &state.params), &state.rba)
    } else {
        last_loss
    };
    info!("finished in {wall:.1} s, final loss {:e}", final_loss.total.to_f64_lossy());
    Ok(outcome(state, final_loss, wall))
}
