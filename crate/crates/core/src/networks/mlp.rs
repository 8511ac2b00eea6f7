//! Fully connected network: affine layers with a smooth activation between
//! them and an affine output layer.

use ndarray::{linalg::general_mat_mul, s, Array2, ArrayView2, ArrayViewMut2};
use serde::{Deserialize, Serialize};

use super::params::{shape_table, TensorShape};
use crate::autodiff::batch::{expand_backward, expand_forward, Derivs, JetBatch, MapCache};
use crate::autodiff::Scalar;
use crate::error::{config, Result};
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Sigmoid,
}

impl Activation {
    /// Value and first three derivatives at `z`.
    pub fn derivs<T: Real>(self, z: T) -> Derivs<T> {
        let one = T::one();
        let two = T::lit(2.0);
        match self {
            Activation::Tanh => {
                // one exponential instead of libm tanh
                let e = (-two * z.abs()).exp();
                let t = ((one - e) / (one + e)).copysign(z);
                let t1 = one - t * t;
                [t, t1, -two * t * t1, -two * t1 * (one - T::lit(3.0) * t * t)]
            }
            Activation::Sigmoid => {
                let s = crate::autodiff::Scalar::sigmoid(&z);
                let s1 = s * (one - s);
                let six = T::lit(6.0);
                [s, s1, s1 * (one - two * s), s1 * (one - six * s + six * s * s)]
            }
        }
    }

    pub fn apply<T: Real, S: Scalar<T>>(self, z: &S) -> S {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => z.sigmoid(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden_widths: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
}

impl MlpConfig {
    /// Two hidden layers of 100 units.
    pub fn standard(input_dim: usize, activation: Activation) -> Self {
        Self { input_dim, hidden_widths: vec![100, 100], output_dim: 1, activation }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_widths.is_empty() {
            return Err(config("MLP needs at least one hidden layer"));
        }
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_widths.contains(&0) {
            return Err(config("MLP layer widths must be at least 1"));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` of each affine layer.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut widths = vec![self.input_dim];
        widths.extend(&self.hidden_widths);
        widths.push(self.output_dim);
        widths.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn shapes(&self) -> Vec<TensorShape> {
        shape_table(self.layer_dims().into_iter().enumerate().flat_map(|(l, (fi, fo))| {
            [(format!("W{l}"), vec![fo, fi]), (format!("b{l}"), vec![fo])]
        }))
    }

    pub fn param_len(&self) -> usize {
        self.layer_dims().iter().map(|(fi, fo)| fo * fi + fo).sum()
    }
}

/// Forward pass in any scalar mode.
pub fn mlp_forward_scalar<T: Real, S: Scalar<T>>(cfg: &MlpConfig, params: &[S], x: &[S]) -> Vec<S> {
    let dims = cfg.layer_dims();
    let last = dims.len() - 1;
    let mut a = x.to_vec();
    let mut off = 0;
    for (l, &(fan_in, fan_out)) in dims.iter().enumerate() {
        let w = &params[off..off + fan_in * fan_out];
        off += fan_in * fan_out;
        let b = &params[off..off + fan_out];
        off += fan_out;
        let z = (0..fan_out).map(|r| {
            let mut acc = b[r].clone();
            for (c, ac) in a.iter().enumerate() {
                acc = acc + w[r * fan_in + c].clone() * ac.clone();
            }
            acc
        });
        a = if l < last { z.map(|zr| cfg.activation.apply(&zr)).collect() } else { z.collect() };
    }
    a
}

/// Forward pass on plain values, checking shapes.
pub fn mlp_forward<T: Real>(params: &[T], x: &[T], cfg: &MlpConfig) -> Result<Vec<T>> {
    cfg.validate()?;
    if params.len() != cfg.param_len() {
        return Err(config(format!("MLP expects {} parameters, got {}", cfg.param_len(), params.len())));
    }
    if x.len() != cfg.input_dim {
        return Err(config(format!("MLP expects {} inputs, got {}", cfg.input_dim, x.len())));
    }
    Ok(mlp_forward_scalar(cfg, params, x))
}

#[derive(Clone, Debug)]
struct LayerCache<T> {
    input: Array2<T>,
    act: Option<MapCache<T>>,
}

#[derive(Clone, Debug)]
pub struct MlpCache<T> {
    layers: Vec<LayerCache<T>>,
}

fn weight_view<'a, T>(params: &'a [T], off: usize, fan_in: usize, fan_out: usize) -> ArrayView2<'a, T> {
    ArrayView2::from_shape((fan_out, fan_in), &params[off..off + fan_in * fan_out]).expect("weight shape")
}

pub(crate) fn mlp_forward_batch<T: Real>(cfg: &MlpConfig, params: &[T], input: JetBatch<T>) -> (JetBatch<T>, MlpCache<T>) {
    let dims = cfg.layer_dims();
    let last = dims.len() - 1;
    let layout = input.layout.clone();
    let p = input.points;
    let mut a = input.data;
    let mut layers = Vec::with_capacity(dims.len());
    let mut off = 0;
    for (l, &(fan_in, fan_out)) in dims.iter().enumerate() {
        let w = weight_view(params, off, fan_in, fan_out);
        off += fan_in * fan_out;
        let b = &params[off..off + fan_out];
        off += fan_out;
        let mut z = w.dot(&a);
        for (r, &br) in b.iter().enumerate() {
            z.slice_mut(s![r, 0..p]).mapv_inplace(|v| v + br);
        }
        let zb = JetBatch { layout: layout.clone(), points: p, data: z };
        if l < last {
            let act = cfg.activation;
            let (out, cache) = expand_forward(zb, 1, |v, o| o[0] = act.derivs(v));
            layers.push(LayerCache { input: a, act: Some(cache) });
            a = out.data;
        } else {
            layers.push(LayerCache { input: a, act: None });
            a = zb.data;
        }
    }
    (JetBatch { layout, points: p, data: a }, MlpCache { layers })
}

pub(crate) fn mlp_backward_batch<T: Real>(
    cfg: &MlpConfig,
    params: &[T],
    cache: &MlpCache<T>,
    adj_out: Array2<T>,
    points: usize,
    grad: &mut [T],
) {
    let dims = cfg.layer_dims();
    let mut offsets = Vec::with_capacity(dims.len());
    let mut off = 0;
    for &(fan_in, fan_out) in &dims {
        offsets.push(off);
        off += fan_in * fan_out + fan_out;
    }
    let mut adj = adj_out;
    for l in (0..dims.len()).rev() {
        let (fan_in, fan_out) = dims[l];
        let layer = &cache.layers[l];
        if let Some(act) = &layer.act {
            adj = expand_backward(act, &adj);
        }
        let woff = offsets[l];
        {
            let (gw, gb) = grad[woff..woff + fan_in * fan_out + fan_out].split_at_mut(fan_in * fan_out);
            let mut gw = ArrayViewMut2::from_shape((fan_out, fan_in), gw).expect("weight shape");
            general_mat_mul(T::one(), &adj, &layer.input.t(), T::one(), &mut gw);
            for (r, g) in gb.iter_mut().enumerate() {
                *g += adj.slice(s![r, 0..points]).iter().fold(T::zero(), |acc, &v| acc + v);
            }
        }
        if l > 0 {
            let w = weight_view(params, woff, fan_in, fan_out);
            adj = w.t().dot(&adj);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> MlpConfig {
        MlpConfig { input_dim: 1, hidden_widths: vec![4], output_dim: 1, activation: Activation::Tanh }
    }

    #[test]
    fn zero_network_outputs_zero() {
        let cfg = tiny();
        let params = vec![0.0_f64; cfg.param_len()];
        assert_eq!(mlp_forward(&params, &[0.7], &cfg).unwrap(), vec![0.0]);
    }

    #[test]
    fn constant_head() {
        let cfg = tiny();
        let mut params = vec![0.0_f64; cfg.param_len()];
        *params.last_mut().unwrap() = 2.5;
        for x in [-3.0, 0.0, 0.4, 10.0] {
            assert_eq!(mlp_forward(&params, &[x], &cfg).unwrap(), vec![2.5]);
        }
    }

    #[test]
    fn hand_evaluated_one_four_one() {
        let cfg = tiny();
        // W0 = [0.5, -1, 2, 0.25]^T, b0 = [0.1, 0, -0.3, 0.2], W1 = [1, -0.5, 0.25, 2], b1 = 0.05
        let params = vec![0.5, -1.0, 2.0, 0.25, 0.1, 0.0, -0.3, 0.2, 1.0, -0.5, 0.25, 2.0, 0.05];
        let x = 0.8_f64;
        let expected = 0.05
            + 1.0 * (0.5 * x + 0.1).tanh()
            - 0.5 * (-1.0 * x).tanh()
            + 0.25 * (2.0 * x - 0.3).tanh()
            + 2.0 * (0.25 * x + 0.2).tanh();
        let got = mlp_forward(&params, &[x], &cfg).unwrap()[0];
        assert!((got - expected).abs() < 1e-15);
    }

    #[test]
    fn shape_errors() {
        let cfg = tiny();
        assert!(mlp_forward(&[0.0_f64; 3], &[0.0], &cfg).is_err());
        assert!(mlp_forward(&vec![0.0_f64; cfg.param_len()], &[0.0, 1.0], &cfg).is_err());
        let bad = MlpConfig { hidden_widths: vec![], ..tiny() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn shape_table_layout() {
        let cfg = MlpConfig::standard(2, Activation::Tanh);
        let shapes = cfg.shapes();
        assert_eq!(shapes[0].shape, vec![100, 2]);
        assert_eq!(shapes[5].name, "b2");
        assert_eq!(cfg.param_len(), 100 * 2 + 100 + 100 * 100 + 100 + 100 + 1);
    }

    #[test]
    fn activation_derivatives_match_finite_differences() {
        for act in [Activation::Tanh, Activation::Sigmoid] {
            for &z in &[-2.3_f64, -0.4, 0.0, 0.9, 3.1] {
                let d = act.derivs(z);
                let h = 1e-5;
                let (p, m) = (act.derivs(z + h), act.derivs(z - h));
                for k in 0..3 {
                    let fd = (p[k] - m[k]) / (2.0 * h);
                    assert!((fd - d[k + 1]).abs() < 1e-8, "{act:?} order {} at {z}", k + 1);
                }
            }
        }
    }
}
