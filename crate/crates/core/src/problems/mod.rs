//! The seven singularly perturbed test problems.
//!
//! Every problem is a constant-coefficient linear operator
//!
//! ```text
//! R[u] = Σ_k a_k ∂²u/∂x_k² + Σ_k b_k ∂u/∂x_k + c·u − f(x)
//! ```
//!
//! on the unit interval, the unit square, or the space-time slab
//! `(0,1) × (0,1]`, with Dirichlet data on every spatial face, an initial
//! trace for time-dependent problems, and one exponential boundary layer.
//!
//! | name  | equation                                   | layer      |
//! |-------|--------------------------------------------|------------|
//! | intro | −εu″ + u′ + (1+ε)u = 0                     | x = 1      |
//! | ex1   | −εu″ + u′ = επ² sin πx + π cos πx          | x = 1      |
//! | ex2   | εu″ + (1+ε)u′ + u = 0                      | x = 0      |
//! | ex3   | −εΔu + u_x = 0                             | x = 1      |
//! | ex4   | εΔu + u_y = 0                              | y = 0      |
//! | ex5   | u_t − εu_xx − u_x − u = 0                  | x = 0      |
//! | ex6   | u_t − εu_xx + u_x + 5u = 0                 | x = 1      |

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autodiff::{DerivativeBundle, Jet, Scalar, ScalarPredictor};
use crate::error::{Error, Result};
use crate::models::AsymptoticPrior;
use crate::real::Real;

/// Default perturbation parameter.
pub const DEFAULT_EPSILON: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemName {
    Intro,
    Ex1,
    Ex2,
    Ex3,
    Ex4,
    Ex5,
    Ex6,
}

impl ProblemName {
    pub const ALL: [ProblemName; 7] = [
        ProblemName::Intro,
        ProblemName::Ex1,
        ProblemName::Ex2,
        ProblemName::Ex3,
        ProblemName::Ex4,
        ProblemName::Ex5,
        ProblemName::Ex6,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProblemName::Intro => "intro",
            ProblemName::Ex1 => "ex1",
            ProblemName::Ex2 => "ex2",
            ProblemName::Ex3 => "ex3",
            ProblemName::Ex4 => "ex4",
            ProblemName::Ex5 => "ex5",
            ProblemName::Ex6 => "ex6",
        }
    }

    pub fn input_dim(self) -> usize {
        match self {
            ProblemName::Intro | ProblemName::Ex1 | ProblemName::Ex2 => 1,
            _ => 2,
        }
    }

    pub fn is_time_dependent(self) -> bool {
        matches!(self, ProblemName::Ex5 | ProblemName::Ex6)
    }

    pub fn description(self) -> &'static str {
        match self {
            ProblemName::Intro => "-eps u'' + u' + (1+eps) u = 0, layer at x = 1",
            ProblemName::Ex1 => "-eps u'' + u' = eps pi^2 sin(pi x) + pi cos(pi x), layer at x = 1",
            ProblemName::Ex2 => "eps u'' + (1+eps) u' + u = 0, layer at x = 0",
            ProblemName::Ex3 => "-eps (u_xx + u_yy) + u_x = 0 on the unit square, layer at x = 1",
            ProblemName::Ex4 => "eps (u_xx + u_yy) + u_y = 0 on the unit square, layer at y = 0",
            ProblemName::Ex5 => "u_t - eps u_xx - u_x - u = 0, layer at x = 0",
            ProblemName::Ex6 => "u_t - eps u_xx + u_x + 5u = 0, layer at x = 1",
        }
    }

    fn valid_names() -> String {
        Self::ALL.iter().map(|n| n.as_str()).collect::<Vec<_>>().join(", ")
    }
}

impl fmt::Display for ProblemName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::UnknownProblem { name: s.to_string(), valid: Self::valid_names() })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Low,
    High,
}

/// The face `x[dim] = 0` (low) or `x[dim] = 1` (high).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Face {
    pub dim: usize,
    pub side: Side,
}

impl Face {
    pub fn low(dim: usize) -> Self {
        Face { dim, side: Side::Low }
    }

    pub fn high(dim: usize) -> Self {
        Face { dim, side: Side::High }
    }

    pub fn coordinate<T: Real>(&self) -> T {
        match self.side {
            Side::Low => T::zero(),
            Side::High => T::one(),
        }
    }
}

/// Boundary or initial data: a constant, or `A·sin(kπ x_d)` / `A·cos(kπ x_d)`.
#[derive(Clone, Debug, PartialEq)]
pub enum Trace<T> {
    Constant(T),
    Sin { amplitude: T, frequency: T, dim: usize },
    Cos { amplitude: T, frequency: T, dim: usize },
}

impl<T: Real> Trace<T> {
    pub fn eval(&self, x: &[T]) -> T {
        self.derivative(x, 0, 0)
    }

    /// `∂^order/∂x_k^order` of the trace at `x`, for order ≤ 2.
    pub fn derivative(&self, x: &[T], k: usize, order: u8) -> T {
        match *self {
            Trace::Constant(c) => {
                if order == 0 {
                    c
                } else {
                    T::zero()
                }
            }
            Trace::Sin { amplitude, frequency, dim } | Trace::Cos { amplitude, frequency, dim } => {
                if order > 0 && k != dim {
                    return T::zero();
                }
                let w = frequency * T::PI();
                let (s, c) = (w * x[dim]).sin_cos();
                let is_sin = matches!(self, Trace::Sin { .. });
                match (is_sin, order) {
                    (true, 0) => amplitude * s,
                    (true, 1) => amplitude * w * c,
                    (true, _) => -amplitude * w * w * s,
                    (false, 0) => amplitude * c,
                    (false, 1) => -amplitude * w * s,
                    (false, _) => -amplitude * w * w * c,
                }
            }
        }
    }

    pub fn eval_scalar<S: Scalar<T>>(&self, x: &[S]) -> S {
        match *self {
            Trace::Constant(c) => x[0].lift(c),
            Trace::Sin { amplitude, frequency, dim } => x[dim].scale(frequency * T::PI()).sin().scale(amplitude),
            Trace::Cos { amplitude, frequency, dim } => x[dim].scale(frequency * T::PI()).cos().scale(amplitude),
        }
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            Trace::Constant(c) => c == T::zero(),
            Trace::Sin { amplitude, .. } | Trace::Cos { amplitude, .. } => amplitude == T::zero(),
        }
    }
}

/// Forcing term `f(x; ε)`.
pub type Forcing<T> = fn(&[T], T) -> T;

/// Constant coefficients `a_k`, `b_k`, `c` and forcing `f` of the residual.
#[derive(Clone, Debug)]
pub struct LinearOperator<T> {
    pub second: Vec<T>,
    pub first: Vec<T>,
    pub reaction: T,
    pub forcing: Option<Forcing<T>>,
}

/// Problems with a closed-form solution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExactSolution {
    Intro,
    Ex1,
    Ex2,
}

impl ExactSolution {
    /// Evaluates in any scalar mode. The forms never exponentiate a
    /// positive argument, so they are safe for any `ε > 0`.
    pub fn eval_scalar<T: Real, S: Scalar<T>>(self, x: &S, eps: T) -> S {
        let one = T::one();
        match self {
            ExactSolution::Intro => {
                let r = (one + eps) / eps;
                (-x.clone()).exp() + x.add_const(-one).scale(r).exp()
            }
            ExactSolution::Ex1 => {
                let tail = (-one / eps).exp();
                let layer = (x.add_const(-one).scale(one / eps).exp().add_const(-tail)).scale(one / (one - tail));
                x.scale(T::PI()).sin() + layer
            }
            ExactSolution::Ex2 => {
                let tail = (-one / eps).exp();
                let denom = (-one).exp() - tail;
                ((-x.clone()).exp() - x.scale(-one / eps).exp()).scale(one / denom)
            }
        }
    }

    pub fn eval<T: Real>(self, x: T, eps: T) -> T {
        self.eval_scalar(&x, eps)
    }
}

pub fn exact_ex1<T: Real>(x: T, eps: T) -> T {
    ExactSolution::Ex1.eval(x, eps)
}

/// Closed form of example 2, normalized so that `u(0) = 0` and `u(1) = 1`.
pub fn exact_ex2<T: Real>(x: T, eps: T) -> T {
    ExactSolution::Ex2.eval(x, eps)
}

pub fn exact_intro<T: Real>(x: T, eps: T) -> T {
    ExactSolution::Intro.eval(x, eps)
}

#[derive(Clone, Debug)]
pub struct ProblemSpec<T> {
    pub name: ProblemName,
    pub epsilon: T,
    pub input_dim: usize,
    /// Index of the time coordinate for parabolic problems.
    pub time_dim: Option<usize>,
    pub operator: LinearOperator<T>,
    /// One trace per spatial face.
    pub dirichlet: Vec<(Face, Trace<T>)>,
    /// Trace on `t = 0`.
    pub initial: Option<Trace<T>>,
    pub priors: Vec<AsymptoticPrior<T>>,
    pub exact: Option<ExactSolution>,
}

impl<T: Real> ProblemSpec<T> {
    pub fn forcing_at(&self, x: &[T]) -> T {
        self.operator.forcing.map_or(T::zero(), |f| f(x, self.epsilon))
    }

    /// Signed residual `R[u](x)` from a derivative bundle at `x`.
    pub fn residual(&self, point: &[T], bundle: &DerivativeBundle<T>) -> T {
        let op = &self.operator;
        let mut r = op.reaction * bundle.u;
        for k in 0..self.input_dim {
            r += op.first[k] * bundle.du[k];
            r += op.second[k] * bundle.d2u[k];
        }
        r - self.forcing_at(point)
    }

    /// Residual in any scalar mode, from a jet at `point`.
    pub fn residual_jet<S: Scalar<T>>(&self, point: &[T], jet: &Jet<S>) -> S {
        let op = &self.operator;
        let mut r = jet.v.scale(op.reaction);
        for k in 0..self.input_dim {
            if op.first[k] != T::zero() {
                r = r + jet.d[k].scale(op.first[k]);
            }
            if op.second[k] != T::zero() {
                r = r + jet.dd[k].scale(op.second[k]);
            }
        }
        r.add_const(-self.forcing_at(point))
    }

    /// Whether the residual needs `∂²u/∂x_k²`.
    pub fn needs_second(&self, k: usize) -> bool {
        self.operator.second[k] != T::zero()
    }

    pub fn needs_first(&self, k: usize) -> bool {
        self.operator.first[k] != T::zero() || self.needs_second(k)
    }

    pub fn exact_at(&self, x: &[T]) -> Option<T> {
        self.exact.map(|e| e.eval(x[0], self.epsilon))
    }

    /// Strict interior of the domain.
    pub fn in_open_domain(&self, x: &[T]) -> bool {
        x.len() == self.input_dim && x.iter().all(|&v| v > T::zero() && v < T::one())
    }

    pub fn trace_on(&self, face: Face) -> Option<&Trace<T>> {
        self.dirichlet.iter().find(|(f, _)| *f == face).map(|(_, t)| t)
    }

    pub fn faces(&self) -> Vec<Face> {
        self.dirichlet.iter().map(|(f, _)| *f).collect()
    }

    pub fn priors(&self) -> &[AsymptoticPrior<T>] {
        &self.priors
    }
}

/// Predictor returning the closed-form solution, for oracle checks.
pub struct ExactPredictor<T> {
    pub solution: ExactSolution,
    pub epsilon: T,
}

impl<T: Real> ScalarPredictor<T> for ExactPredictor<T> {
    fn input_dim(&self) -> usize {
        1
    }
    fn param_len(&self) -> usize {
        0
    }
    fn predict<S: Scalar<T>>(&self, _params: &[S], x: &[S]) -> S {
        self.solution.eval_scalar(&x[0], self.epsilon)
    }
}

fn ex1_forcing<T: Real>(x: &[T], eps: T) -> T {
    let w = T::PI();
    eps * w * w * (w * x[0]).sin() + w * (w * x[0]).cos()
}

fn sin_trace<T: Real>(amplitude: f64, frequency: f64, dim: usize) -> Trace<T> {
    Trace::Sin { amplitude: T::lit(amplitude), frequency: T::lit(frequency), dim }
}

fn cos_trace<T: Real>(amplitude: f64, frequency: f64, dim: usize) -> Trace<T> {
    Trace::Cos { amplitude: T::lit(amplitude), frequency: T::lit(frequency), dim }
}

fn prior<T: Real>(normal_dim: usize, position: f64, decay: T, trace: Trace<T>) -> AsymptoticPrior<T> {
    AsymptoticPrior { normal_dim, position: T::lit(position), decay, trace }
}

/// Builds a registered problem at perturbation `epsilon`.
pub fn problem<T: Real>(name: ProblemName, epsilon: T) -> ProblemSpec<T> {
    let eps = epsilon;
    let zero = T::zero();
    let one = T::one();
    let c = Trace::Constant;
    let spec = |input_dim, time_dim, operator, dirichlet, initial, priors, exact| ProblemSpec {
        name,
        epsilon,
        input_dim,
        time_dim,
        operator,
        dirichlet,
        initial,
        priors,
        exact,
    };
    match name {
        ProblemName::Intro => spec(
            1,
            None,
            LinearOperator { second: vec![-eps], first: vec![one], reaction: one + eps, forcing: None },
            vec![
                (Face::low(0), c(one + (-(one + eps) / eps).exp())),
                (Face::high(0), c(one + (-one).exp())),
            ],
            None,
            vec![prior(0, 1.0, one + eps, c(one + (-one).exp()))],
            Some(ExactSolution::Intro),
        ),
        ProblemName::Ex1 => spec(
            1,
            None,
            LinearOperator { second: vec![-eps], first: vec![one], reaction: zero, forcing: Some(ex1_forcing::<T>) },
            vec![(Face::low(0), c(zero)), (Face::high(0), c(one))],
            None,
            vec![prior(0, 1.0, one, c(one))],
            Some(ExactSolution::Ex1),
        ),
        ProblemName::Ex2 => spec(
            1,
            None,
            LinearOperator { second: vec![eps], first: vec![one + eps], reaction: one, forcing: None },
            vec![(Face::low(0), c(zero)), (Face::high(0), c(one))],
            None,
            vec![prior(0, 0.0, one, c(zero))],
            Some(ExactSolution::Ex2),
        ),
        ProblemName::Ex3 => spec(
            2,
            None,
            LinearOperator { second: vec![-eps, -eps], first: vec![one, zero], reaction: zero, forcing: None },
            vec![
                (Face::low(0), sin_trace(1.0, 1.0, 1)),
                (Face::high(0), sin_trace(2.0, 1.0, 1)),
                (Face::low(1), c(zero)),
                (Face::high(1), c(zero)),
            ],
            None,
            vec![prior(0, 1.0, one, sin_trace(2.0, 1.0, 1))],
            None,
        ),
        ProblemName::Ex4 => spec(
            2,
            None,
            LinearOperator { second: vec![eps, eps], first: vec![zero, one], reaction: zero, forcing: None },
            vec![
                (Face::low(0), c(zero)),
                (Face::high(0), c(zero)),
                (Face::low(1), sin_trace(2.0, 1.0, 0)),
                (Face::high(1), sin_trace(1.0, 1.0, 0)),
            ],
            None,
            vec![prior(1, 0.0, one, sin_trace(2.0, 1.0, 0))],
            None,
        ),
        ProblemName::Ex5 => spec(
            2,
            Some(1),
            LinearOperator { second: vec![-eps, zero], first: vec![-one, one], reaction: -one, forcing: None },
            vec![(Face::low(0), c(zero)), (Face::high(0), c(one))],
            Some(cos_trace(1.0, 2.0, 0)),
            vec![prior(0, 0.0, one, c(zero))],
            None,
        ),
        ProblemName::Ex6 => spec(
            2,
            Some(1),
            LinearOperator { second: vec![-eps, zero], first: vec![one, one], reaction: T::lit(5.0), forcing: None },
            vec![(Face::low(0), c(zero)), (Face::high(0), c(one))],
            Some(sin_trace(1.0, 2.0, 0)),
            vec![prior(0, 1.0, one, c(one))],
            None,
        ),
    }
}

/// [`problem`] by name.
pub fn lookup<T: Real>(name: &str, epsilon: T) -> Result<ProblemSpec<T>> {
    Ok(problem(name.parse()?, epsilon))
}

/// The boundary-layer priors of a problem.
pub fn prior_for<T: Real>(problem: &ProblemSpec<T>) -> &[AsymptoticPrior<T>] {
    &problem.priors
}
