//! The weighted loss
//!
//! ```text
//! L = w_ic/N_ic Σ (β_j (u − g_0))² + w_bc/N_bc Σ (γ_j (u − g))² + w_r/N_r Σ (α_i R_i)²
//! ```
//!
//! with attention multipliers `α` on the residuals and, when enabled,
//! `β`, `γ` on the initial and boundary terms (otherwise 1).

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::rba::RbaState;
use crate::autodiff::batch::{JetBatch, JetLayout};
use crate::autodiff::{Jet, Scalar, ScalarPredictor, Tape, Var};
use crate::error::{config, Error, Result};
use crate::models::{Model, ModelCache, PreparedBatch};
use crate::problems::ProblemSpec;
use crate::real::Real;
use crate::sampling::SampleSet;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub ic: f64,
    pub bc: f64,
    pub r: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { ic: 1.0, bc: 1.0, r: 1.0 }
    }
}

/// Which loss terms carry attention multipliers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RbaMode {
    Off,
    #[default]
    Residual,
    All,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts<T> {
    pub ic: T,
    pub bc: T,
    pub r: T,
    pub total: T,
}

/// Attention multipliers per loss term; `None` means a constant 1.
#[derive(Clone, Debug, PartialEq)]
pub struct RbaSet<T> {
    pub residual: Option<RbaState<T>>,
    pub boundary: Option<RbaState<T>>,
    pub initial: Option<RbaState<T>>,
}

impl<T: Real> RbaSet<T> {
    pub fn new<S>(mode: RbaMode, samples: &SampleSet<S>) -> Self {
        let on = |enabled: bool, n: usize| enabled.then(|| RbaState::new(n));
        Self {
            residual: on(mode != RbaMode::Off, samples.interior.len()),
            boundary: on(mode == RbaMode::All, samples.boundary.len()),
            initial: on(mode == RbaMode::All, samples.initial.len()),
        }
    }

    pub fn off() -> Self {
        Self { residual: None, boundary: None, initial: None }
    }
}

fn multiplier<T: Real>(rba: &Option<RbaState<T>>, i: usize) -> T {
    rba.as_ref().map_or(T::one(), |s| s.alpha[i])
}

/// Channel layout needed by the residual of `problem`.
pub fn residual_layout<T: Real>(problem: &ProblemSpec<T>) -> JetLayout {
    let d = problem.input_dim;
    JetLayout::new(d, (0..d).filter(|&k| problem.needs_first(k)).collect(), (0..d).filter(|&k| problem.needs_second(k)).collect())
        .expect("residual layout")
}

#[derive(Clone, Debug)]
struct Term<T> {
    batch: PreparedBatch<T>,
    target: Vec<T>,
    weight: T,
}

/// Prepared training batches and the fused loss and gradient.
#[derive(Clone, Debug)]
pub struct LossEvaluator<T> {
    interior: Option<Term<T>>,
    boundary: Option<Term<T>>,
    initial: Option<Term<T>>,
    /// `(channel, coefficient)` of every residual term.
    coefficients: Vec<(usize, T)>,
}

/// Forward results of one evaluation.
pub struct ForwardPass<T> {
    pub residuals: Vec<T>,
    pub boundary_errors: Vec<T>,
    pub initial_errors: Vec<T>,
    caches: [Option<ModelCache<T>>; 3],
}

fn check_category(name: &str, n: usize, weight: f64) -> Result<bool> {
    if n == 0 && weight != 0.0 {
        return Err(config(format!("no {name} points but the {name} loss weight is {weight}")));
    }
    Ok(n > 0 && weight != 0.0)
}

impl<T: Real> LossEvaluator<T> {
    pub fn new(model: &Model<T>, problem: &ProblemSpec<T>, samples: &SampleSet<T>, weights: LossWeights) -> Result<Self> {
        let interior = if check_category("interior", samples.interior.len(), weights.r)? {
            let coords = samples.interior_array();
            let batch = model.prepare(coords.view(), residual_layout(problem))?;
            let target = samples.interior.iter().map(|x| problem.forcing_at(x)).collect();
            Some(Term { batch, target, weight: T::lit(weights.r) })
        } else {
            None
        };
        let boundary = if check_category("boundary", samples.boundary.len(), weights.bc)? {
            let coords = samples.boundary_array();
            let batch = model.prepare(coords.view(), JetLayout::values(problem.input_dim))?;
            let target = samples
                .boundary
                .iter()
                .map(|(x, face)| {
                    problem.trace_on(*face).map(|t| t.eval(x)).ok_or_else(|| config(format!("no data on face {face:?}")))
                })
                .collect::<Result<_>>()?;
            Some(Term { batch, target, weight: T::lit(weights.bc) })
        } else {
            None
        };
        let initial = match &problem.initial {
            Some(trace) if check_category("initial", samples.initial.len(), weights.ic)? => {
                let coords = samples.initial_array();
                let batch = model.prepare(coords.view(), JetLayout::values(problem.input_dim))?;
                let target = samples.initial.iter().map(|x| trace.eval(x)).collect();
                Some(Term { batch, target, weight: T::lit(weights.ic) })
            }
            _ => None,
        };
        let layout = residual_layout(problem);
        let op = &problem.operator;
        let mut coefficients = vec![(0, op.reaction)];
        for &k in layout.first_dims() {
            coefficients.push((layout.first_channel(k).unwrap(), op.first[k]));
        }
        for &k in layout.second_dims() {
            coefficients.push((layout.second_channel(k).unwrap(), op.second[k]));
        }
        coefficients.retain(|&(_, c)| c != T::zero());
        Ok(Self { interior, boundary, initial, coefficients })
    }

    /// Model evaluation on every batch: signed residuals and data misfits.
    pub fn forward(&self, model: &Model<T>, params: &[T]) -> ForwardPass<T> {
        let mut caches = [None, None, None];
        let mut residuals = Vec::new();
        if let Some(term) = &self.interior {
            let (out, cache) = model.forward(params, &term.batch);
            residuals = self.residuals(&out, &term.target);
            caches[0] = Some(cache);
        }
        let mut misfit = |term: &Option<Term<T>>, slot: usize| -> Vec<T> {
            term.as_ref().map_or_else(Vec::new, |term| {
                let (out, cache) = model.forward(params, &term.batch);
                caches[slot] = Some(cache);
                out.data.row(0).iter().zip(&term.target).map(|(&u, &g)| u - g).collect()
            })
        };
        let boundary_errors = misfit(&self.boundary, 1);
        let initial_errors = misfit(&self.initial, 2);
        ForwardPass { residuals, boundary_errors, initial_errors, caches }
    }

    fn residuals(&self, out: &JetBatch<T>, forcing: &[T]) -> Vec<T> {
        let p = out.points;
        let row = out.data.row(0);
        let mut r: Vec<T> = forcing.iter().map(|&f| -f).collect();
        for &(c, coef) in &self.coefficients {
            for (q, rq) in r.iter_mut().enumerate() {
                *rq += coef * row[c * p + q];
            }
        }
        r
    }

    /// Loss terms of a forward pass under the given multipliers.
    pub fn loss(&self, pass: &ForwardPass<T>, rba: &RbaSet<T>) -> LossParts<T> {
        let term = |t: &Option<Term<T>>, errors: &[T], rba: &Option<RbaState<T>>| -> T {
            t.as_ref().map_or(T::zero(), |t| {
                let sum = errors.iter().enumerate().fold(T::zero(), |acc, (i, &e)| {
                    let a = multiplier(rba, i) * e;
                    acc + a * a
                });
                t.weight * sum / T::from_count(errors.len())
            })
        };
        let r = term(&self.interior, &pass.residuals, &rba.residual);
        let bc = term(&self.boundary, &pass.boundary_errors, &rba.boundary);
        let ic = term(&self.initial, &pass.initial_errors, &rba.initial);
        LossParts { ic, bc, r, total: ic + bc + r }
    }

    /// Accumulates `∂L/∂params` into `grad`, with the multipliers held fixed.
    pub fn gradient(&self, model: &Model<T>, params: &[T], pass: &ForwardPass<T>, rba: &RbaSet<T>, grad: &mut [T]) {
        let two = T::lit(2.0);
        let scaled = |t: &Term<T>, errors: &[T], rba: &Option<RbaState<T>>| -> Vec<T> {
            let s = two * t.weight / T::from_count(errors.len());
            errors
                .iter()
                .enumerate()
                .map(|(i, &e)| {
                    let a = multiplier(rba, i);
                    s * a * a * e
                })
                .collect()
        };
        if let (Some(t), Some(cache)) = (&self.interior, &pass.caches[0]) {
            let d = scaled(t, &pass.residuals, &rba.residual);
            let p = d.len();
            let mut adj = Array2::zeros((1, t.batch.layout.channels() * p));
            for &(c, coef) in &self.coefficients {
                for (q, &dq) in d.iter().enumerate() {
                    adj[[0, c * p + q]] = coef * dq;
                }
            }
            model.backward(params, &t.batch, cache, adj, grad);
        }
        for (term, errors, mult, slot) in [
            (&self.boundary, &pass.boundary_errors, &rba.boundary, 1),
            (&self.initial, &pass.initial_errors, &rba.initial, 2),
        ] {
            if let (Some(t), Some(cache)) = (term, &pass.caches[slot]) {
                let d = scaled(t, errors, mult);
                let adj = Array2::from_shape_vec((1, d.len()), d).expect("adjoint shape");
                model.backward(params, &t.batch, cache, adj, grad);
            }
        }
    }
}

/// The loss as a graph on a reverse-mode tape, built point by point from
/// jets of tape variables. It is the reference for the fused evaluator.
pub struct LossGraph<'t, T: Real> {
    pub ic: Var<'t, T>,
    pub bc: Var<'t, T>,
    pub r: Var<'t, T>,
    pub total: Var<'t, T>,
}

pub fn assemble_loss<'t, T: Real, P: ScalarPredictor<T>>(
    tape: &'t Tape<T>,
    model: &P,
    params: &[Var<'t, T>],
    samples: &SampleSet<T>,
    problem: &ProblemSpec<T>,
    weights: LossWeights,
    rba: &RbaSet<T>,
) -> Result<LossGraph<'t, T>> {
    if params.len() != model.param_len() {
        return Err(config(format!("model expects {} parameters, got {}", model.param_len(), params.len())));
    }
    let dims = problem.input_dim;
    let zero = tape.constant(T::zero());
    let mut r = zero;
    if check_category("interior", samples.interior.len(), weights.r)? {
        let pj: Vec<Jet<Var<'t, T>>> = params.iter().map(|&v| Jet::constant(v, dims)).collect();
        for (i, x) in samples.interior.iter().enumerate() {
            let xj: Vec<Jet<Var<'t, T>>> = (0..dims).map(|k| Jet::coordinate(tape.constant(x[k]), k, dims)).collect();
            let u = model.predict(&pj, &xj);
            let res = problem.residual_jet(x, &u).scale(multiplier(&rba.residual, i));
            r = r + res * res;
        }
        r = r.scale(T::lit(weights.r) / T::from_count(samples.interior.len()));
    }
    let mut bc = zero;
    if check_category("boundary", samples.boundary.len(), weights.bc)? {
        for (i, (x, face)) in samples.boundary.iter().enumerate() {
            let g = problem.trace_on(*face).ok_or_else(|| config(format!("no data on face {face:?}")))?.eval(x);
            let xv: Vec<Var<'t, T>> = x.iter().map(|&v| tape.constant(v)).collect();
            let e = model.predict(params, &xv).add_const(-g).scale(multiplier(&rba.boundary, i));
            bc = bc + e * e;
        }
        bc = bc.scale(T::lit(weights.bc) / T::from_count(samples.boundary.len()));
    }
    let mut ic = zero;
    if let Some(trace) = &problem.initial {
        if check_category("initial", samples.initial.len(), weights.ic)? {
            for (i, x) in samples.initial.iter().enumerate() {
                let xv: Vec<Var<'t, T>> = x.iter().map(|&v| tape.constant(v)).collect();
                let e = model.predict(params, &xv).add_const(-trace.eval(x)).scale(multiplier(&rba.initial, i));
                ic = ic + e * e;
            }
            ic = ic.scale(T::lit(weights.ic) / T::from_count(samples.initial.len()));
        }
    }
    let total = ic + bc + r;
    if !total.value().is_finite() {
        return Err(Error::Diverged { what: "loss".into(), iteration: 0 });
    }
    Ok(LossGraph { ic, bc, r, total })
}
