//! Trainable backbones: an MLP and a Chebyshev-KAN head.

mod kan;
mod mlp;
mod params;

pub use kan::{chebyshev_basis, kan_forward, kan_forward_scalar, KanCache, KanConfig};
pub use mlp::{mlp_forward, mlp_forward_scalar, Activation, MlpCache, MlpConfig};
pub use params::{shape_table, NetworkParams, TensorShape, CHECKPOINT_FORMAT};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::batch::JetBatch;
use crate::autodiff::Scalar;
use crate::error::Result;
use crate::real::Real;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum NetworkConfig {
    Mlp(MlpConfig),
    Kan(KanConfig),
}

/// Per-backbone state kept between the batched forward and reverse passes.
#[derive(Clone, Debug)]
pub enum BatchCache<T> {
    Mlp(MlpCache<T>),
    Kan(KanCache<T>),
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            NetworkConfig::Mlp(c) => c.validate(),
            NetworkConfig::Kan(c) => c.validate(),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            NetworkConfig::Mlp(c) => c.input_dim,
            NetworkConfig::Kan(c) => c.input_dim,
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            NetworkConfig::Mlp(c) => c.output_dim,
            NetworkConfig::Kan(c) => c.output_dim,
        }
    }

    pub fn param_len(&self) -> usize {
        match self {
            NetworkConfig::Mlp(c) => c.param_len(),
            NetworkConfig::Kan(c) => c.param_len(),
        }
    }

    pub fn shapes(&self) -> Vec<TensorShape> {
        match self {
            NetworkConfig::Mlp(c) => c.shapes(),
            NetworkConfig::Kan(c) => c.shapes(),
        }
    }

    pub fn forward_scalar<T: Real, S: Scalar<T>>(&self, params: &[S], x: &[S]) -> Vec<S> {
        match self {
            NetworkConfig::Mlp(c) => mlp_forward_scalar(c, params, x),
            NetworkConfig::Kan(c) => kan_forward_scalar(c, params, x),
        }
    }

    /// Propagates a jet batch through the network.
    pub fn forward_batch<T: Real>(&self, params: &[T], input: JetBatch<T>) -> (JetBatch<T>, BatchCache<T>) {
        match self {
            NetworkConfig::Mlp(c) => {
                let (out, cache) = mlp::mlp_forward_batch(c, params, input);
                (out, BatchCache::Mlp(cache))
            }
            NetworkConfig::Kan(c) => {
                let (out, cache) = kan::kan_forward_batch(c, params, input);
                (out, BatchCache::Kan(cache))
            }
        }
    }

    /// Accumulates `∂L/∂params` into `grad` given `∂L/∂output` for every
    /// channel of the output batch.
    pub fn backward_batch<T: Real>(
        &self,
        params: &[T],
        cache: &BatchCache<T>,
        adj_out: Array2<T>,
        points: usize,
        grad: &mut [T],
    ) {
        match (self, cache) {
            (NetworkConfig::Mlp(c), BatchCache::Mlp(cache)) => {
                mlp::mlp_backward_batch(c, params, cache, adj_out, points, grad)
            }
            (NetworkConfig::Kan(c), BatchCache::Kan(cache)) => kan::kan_backward_batch(c, cache, adj_out, grad),
            _ => panic!("cache does not belong to this network"),
        }
    }

    /// Seeded initialization: Glorot-uniform weights and zero biases for the
    /// MLP; `Θ ~ U[-s, s]` with `s = 1 / (d_in · (n + 1))` per KAN layer.
    pub fn init_params<T: Real>(&self, seed: u64) -> NetworkParams<T> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = NetworkParams::zeros(self.shapes());
        match self {
            NetworkConfig::Mlp(c) => {
                for (l, (fan_in, fan_out)) in c.layer_dims().into_iter().enumerate() {
                    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    let w = params.tensor_mut(&format!("W{l}")).expect("weight tensor");
                    for v in w.iter_mut() {
                        *v = T::lit(rng.gen_range(-limit..limit));
                    }
                }
            }
            NetworkConfig::Kan(c) => {
                for (l, (d_in, _)) in c.layer_dims().into_iter().enumerate() {
                    let s = 1.0 / (d_in * (c.degree + 1)) as f64;
                    let theta = params.tensor_mut(&format!("theta{l}")).expect("theta tensor");
                    for v in theta.iter_mut() {
                        *v = T::lit(rng.gen_range(-s..=s));
                    }
                }
            }
        }
        params
    }
}
