//! Backbone networks composed with boundary-layer priors.
//!
//! * PINN: `u(x) = N(x)`.
//! * GKPINN: `u(x) = N_0(x) + Σ_i N_i(x) · E_i(x)`.
//! * ASPINN: `u(x) = N(x) + Σ_i (g_i(P_i x) − N(P_i x)) · E_i(x)`.
//!
//! `E_i(x) = exp(−|b_i| · |a_i − x_{n_i}| / ε)` is the exponential layer of
//! prior `i`, `P_i` pins coordinate `n_i` to the layer position `a_i` and
//! `g_i` is the boundary trace on that face.

mod batch;

pub use batch::{ModelCache, PreparedBatch};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Scalar, ScalarPredictor};
use crate::error::{config, Result};
use crate::networks::{
    shape_table, Activation, KanConfig, MlpConfig, NetworkConfig, NetworkParams, TensorShape,
};
use crate::problems::{ProblemSpec, Trace};
use crate::real::Real;

/// One boundary layer.
#[derive(Clone, Debug, PartialEq)]
pub struct AsymptoticPrior<T> {
    /// Coordinate across the layer.
    pub normal_dim: usize,
    /// Layer position `a` along `normal_dim`.
    pub position: T,
    /// Decay magnitude `|b(a)|`.
    pub decay: T,
    /// Boundary data on the face `x_{normal_dim} = a`.
    pub trace: Trace<T>,
}

impl<T: Real> AsymptoticPrior<T> {
    pub fn validate(&self, input_dim: usize) -> Result<()> {
        if self.normal_dim >= input_dim {
            return Err(config(format!("prior normal dimension {} out of range", self.normal_dim)));
        }
        if !(self.position >= T::zero() && self.position <= T::one()) {
            return Err(config("prior layer position must lie in [0, 1]"));
        }
        if !(self.decay > T::zero()) || !self.decay.is_finite() {
            return Err(config("prior decay magnitude must be positive"));
        }
        Ok(())
    }

    /// Distance `|a − x_n|` to the layer face.
    pub fn distance(&self, x: &[T]) -> T {
        (self.position - x[self.normal_dim]).abs()
    }

    /// Sign of `∂d/∂x_n`. On the face itself the one-sided derivative
    /// pointing into the unit domain is taken.
    pub fn distance_slope(&self, xn: T) -> T {
        let below = xn < self.position || (xn == self.position && self.position >= T::lit(0.5));
        if below {
            -T::one()
        } else {
            T::one()
        }
    }

    /// `x` with the normal coordinate pinned to the layer position.
    pub fn project(&self, x: &[T]) -> Vec<T> {
        let mut p = x.to_vec();
        p[self.normal_dim] = self.position;
        p
    }

    /// `−|b| / ε`, the exponent per unit distance.
    pub fn rate(&self, epsilon: T) -> T {
        -self.decay / epsilon
    }
}

/// `exp(−|b| · |a − x_n| / ε)`; exponents at or below the underflow floor
/// give exactly zero.
pub fn exp_layer<T: Real>(x: &[T], prior: &AsymptoticPrior<T>, epsilon: T) -> T {
    let z = prior.rate(epsilon) * prior.distance(x);
    if z <= T::exp_floor() {
        T::zero()
    } else {
        z.exp()
    }
}

/// [`exp_layer`] in any scalar mode.
pub fn exp_layer_scalar<T: Real, S: Scalar<T>>(x: &[S], prior: &AsymptoticPrior<T>, epsilon: T) -> S {
    let xn = &x[prior.normal_dim];
    let slope = prior.distance_slope(xn.value());
    let z = xn.add_const(-prior.position).scale(slope * prior.rate(epsilon));
    if z.value() <= T::exp_floor() {
        xn.lift(T::zero())
    } else {
        z.exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Pinn,
    Gkpinn,
    Aspinn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Pinn, ModelKind::Gkpinn, ModelKind::Aspinn];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Pinn => "pinn",
            ModelKind::Gkpinn => "gkpinn",
            ModelKind::Aspinn => "aspinn",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| crate::Error::Parse(format!("unknown model kind '{s}' (pinn, gkpinn, aspinn)")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackboneKind {
    Mlp,
    Kan,
}

impl BackboneKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BackboneKind::Mlp => "mlp",
            BackboneKind::Kan => "kan",
        }
    }

    /// Standard backbone: a 100-100 MLP (sigmoid in one dimension, tanh
    /// otherwise) or an 8-wide two-layer Chebyshev-KAN of degree 5.
    pub fn standard_network(self, input_dim: usize) -> NetworkConfig {
        match self {
            BackboneKind::Mlp => {
                let act = if input_dim == 1 { Activation::Sigmoid } else { Activation::Tanh };
                NetworkConfig::Mlp(MlpConfig::standard(input_dim, act))
            }
            BackboneKind::Kan => NetworkConfig::Kan(KanConfig::standard(input_dim)),
        }
    }
}

impl std::fmt::Display for BackboneKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for BackboneKind {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mlp" => Ok(BackboneKind::Mlp),
            "kan" | "chebyshev-kan" | "chebyshevkan" => Ok(BackboneKind::Kan),
            _ => Err(crate::Error::Parse(format!("unknown backbone '{s}' (mlp, kan)"))),
        }
    }
}

/// A composed predictor. Parameters of all backbones live in one flat
/// vector, backbone `i` at offset `i · network.param_len()`.
#[derive(Clone, Debug)]
pub struct Model<T> {
    pub kind: ModelKind,
    pub network: NetworkConfig,
    pub priors: Vec<AsymptoticPrior<T>>,
    pub epsilon: T,
}

impl<T: Real> Model<T> {
    pub fn new(kind: ModelKind, network: NetworkConfig, priors: Vec<AsymptoticPrior<T>>, epsilon: T) -> Result<Self> {
        network.validate()?;
        if network.output_dim() != 1 {
            return Err(config("composed models need a scalar backbone output"));
        }
        if !(epsilon > T::zero()) {
            return Err(config("epsilon must be positive"));
        }
        for p in &priors {
            p.validate(network.input_dim())?;
        }
        if kind != ModelKind::Pinn && priors.is_empty() {
            warn!("{kind} without priors reduces to a plain PINN");
        }
        Ok(Self { kind, network, priors, epsilon })
    }

    /// Model for `problem` with the standard backbone.
    pub fn for_problem(kind: ModelKind, backbone: BackboneKind, problem: &ProblemSpec<T>) -> Result<Self> {
        Self::new(kind, backbone.standard_network(problem.input_dim), problem.priors.clone(), problem.epsilon)
    }

    pub fn input_dim(&self) -> usize {
        self.network.input_dim()
    }

    /// Number of backbone parameter sets: `1 + N` for GKPINN, 1 otherwise.
    pub fn network_count(&self) -> usize {
        match self.kind {
            ModelKind::Gkpinn => 1 + self.priors.len(),
            _ => 1,
        }
    }

    pub fn param_len(&self) -> usize {
        self.network_count() * self.network.param_len()
    }

    /// Shape table with tensors of backbone `i` prefixed `net{i}.`.
    pub fn shapes(&self) -> Vec<TensorShape> {
        let base = self.network.shapes();
        shape_table((0..self.network_count()).flat_map(|i| {
            base.iter().map(move |s| (format!("net{i}.{}", s.name), s.shape.clone()))
        }))
    }

    /// Backbone `i` is initialized from seed `seed + i`.
    pub fn init_params(&self, seed: u64) -> NetworkParams<T> {
        let mut values = Vec::with_capacity(self.param_len());
        for i in 0..self.network_count() {
            values.extend(self.network.init_params::<T>(seed.wrapping_add(i as u64)).values);
        }
        NetworkParams { values, shapes: self.shapes() }
    }

    pub fn check_params(&self, params: &[T]) -> Result<()> {
        if params.len() != self.param_len() {
            return Err(config(format!(
                "model expects {} parameters, got {}",
                self.param_len(),
                params.len()
            )));
        }
        Ok(())
    }

    pub fn net_params<'a, S>(&self, params: &'a [S], i: usize) -> &'a [S] {
        let n = self.network.param_len();
        &params[i * n..(i + 1) * n]
    }

    /// Prediction at one point.
    pub fn predict(&self, params: &[T], x: &[T]) -> Result<T> {
        self.check_params(params)?;
        if x.len() != self.input_dim() {
            return Err(config(format!("point has {} coordinates, model expects {}", x.len(), self.input_dim())));
        }
        Ok(self.predict_scalar(params, x))
    }

    /// Prediction in any scalar mode.
    pub fn predict_scalar<S: Scalar<T>>(&self, params: &[S], x: &[S]) -> S {
        let net = |i: usize, at: &[S]| -> S {
            self.network.forward_scalar::<T, S>(self.net_params(params, i), at).swap_remove(0)
        };
        let mut u = net(0, x);
        match self.kind {
            ModelKind::Pinn => {}
            ModelKind::Gkpinn => {
                for (i, prior) in self.priors.iter().enumerate() {
                    u = u + net(i + 1, x) * exp_layer_scalar(x, prior, self.epsilon);
                }
            }
            ModelKind::Aspinn => {
                for prior in &self.priors {
                    let mut px = x.to_vec();
                    px[prior.normal_dim] = x[0].lift(prior.position);
                    let jump = prior.trace.eval_scalar(&px) - net(0, &px);
                    u = u + jump * exp_layer_scalar(x, prior, self.epsilon);
                }
            }
        }
        u
    }

    /// Predictions at many points.
    pub fn predict_many(&self, params: &[T], points: &[Vec<T>]) -> Result<Vec<T>> {
        self.check_params(params)?;
        let dims = self.input_dim();
        if points.iter().any(|p| p.len() != dims) {
            return Err(config(format!("every point needs {dims} coordinates")));
        }
        if points.is_empty() {
            return Ok(Vec::new());
        }
        let coords = ndarray::Array2::from_shape_fn((points.len(), dims), |(p, k)| points[p][k]);
        let batch = self.prepare(coords.view(), crate::autodiff::batch::JetLayout::values(dims))?;
        let (out, _) = self.forward(params, &batch);
        Ok(out.data.row(0).to_vec())
    }
}

impl<T: Real> ScalarPredictor<T> for Model<T> {
    fn input_dim(&self) -> usize {
        Model::input_dim(self)
    }
    fn param_len(&self) -> usize {
        Model::param_len(self)
    }
    fn predict<S: Scalar<T>>(&self, params: &[S], x: &[S]) -> S {
        self.predict_scalar(params, x)
    }
}
