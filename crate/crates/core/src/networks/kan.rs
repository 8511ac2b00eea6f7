//! Chebyshev Kolmogorov-Arnold layers.
//!
//! Each layer squashes its inputs with `tanh` into `[-1, 1]` and forms
//!
//! ```text
//! y_j = Σ_i Σ_k Θ[i, j, k] · T_k(tanh(x_i))
//! ```
//!
//! where `T_k` are Chebyshev polynomials of the first kind, generated by the
//! three-term recurrence. Layers are stacked input → hidden → ... → output;
//! the final output is not squashed.

use ndarray::{linalg::general_mat_mul, Array2};
use serde::{Deserialize, Serialize};

use super::params::{shape_table, TensorShape};
use crate::autodiff::batch::{expand_backward, expand_forward, Derivs, JetBatch, MapCache};
use crate::autodiff::Scalar;
use crate::error::{config, Error, Result};
use crate::real::Real;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KanConfig {
    pub input_dim: usize,
    pub output_dim: usize,
    pub degree: usize,
    pub hidden_width: usize,
    /// Number of stacked Chebyshev layers (1 maps input straight to output).
    pub layer_count: usize,
}

impl KanConfig {
    /// input → 8 → output, degree 5.
    pub fn standard(input_dim: usize) -> Self {
        Self { input_dim, output_dim: 1, degree: 5, hidden_width: 8, layer_count: 2 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.degree == 0 {
            return Err(config("Chebyshev degree must be at least 1"));
        }
        if self.input_dim == 0 || self.output_dim == 0 || self.layer_count == 0 {
            return Err(config("KAN dimensions and layer count must be at least 1"));
        }
        if self.layer_count > 1 && self.hidden_width == 0 {
            return Err(config("KAN hidden width must be at least 1"));
        }
        Ok(())
    }

    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut widths = vec![self.input_dim];
        widths.extend(std::iter::repeat_n(self.hidden_width, self.layer_count - 1));
        widths.push(self.output_dim);
        widths.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn shapes(&self) -> Vec<TensorShape> {
        let n1 = self.degree + 1;
        shape_table(
            self.layer_dims().into_iter().enumerate().map(|(l, (di, dout))| (format!("theta{l}"), vec![di, dout, n1])),
        )
    }

    pub fn param_len(&self) -> usize {
        self.layer_dims().iter().map(|(di, dout)| di * dout * (self.degree + 1)).sum()
    }
}

/// `[T_0(x), ..., T_n(x)]` by the three-term recurrence.
pub fn chebyshev_basis<T: Real>(x: T, n: usize) -> Result<Vec<T>> {
    if !(x.abs() <= T::one()) {
        return Err(Error::Domain { function: "chebyshev_basis", value: x.to_f64_lossy() });
    }
    let mut t = Vec::with_capacity(n + 1);
    t.push(T::one());
    if n >= 1 {
        t.push(x);
    }
    let two = T::lit(2.0);
    for k in 2..=n {
        let next = two * x * t[k - 1] - t[k - 2];
        t.push(next);
    }
    Ok(t)
}

/// Forward pass in any scalar mode.
pub fn kan_forward_scalar<T: Real, S: Scalar<T>>(cfg: &KanConfig, params: &[S], x: &[S]) -> Vec<S> {
    let n1 = cfg.degree + 1;
    let mut a = x.to_vec();
    let mut off = 0;
    for (d_in, d_out) in cfg.layer_dims() {
        let theta = &params[off..off + d_in * d_out * n1];
        off += d_in * d_out * n1;
        let bases: Vec<Vec<S>> = a
            .iter()
            .map(|ai| {
                let s = ai.tanh();
                let mut t = vec![s.lift(T::one()), s.clone()];
                for k in 2..n1 {
                    let next = (s.clone() * t[k - 1].clone()).scale(T::lit(2.0)) - t[k - 2].clone();
                    t.push(next);
                }
                t.truncate(n1);
                t
            })
            .collect();
        a = (0..d_out)
            .map(|j| {
                let mut acc = a[0].lift(T::zero());
                for (i, basis) in bases.iter().enumerate() {
                    for (k, tk) in basis.iter().enumerate() {
                        acc = acc + theta[(i * d_out + j) * n1 + k].clone() * tk.clone();
                    }
                }
                acc
            })
            .collect();
    }
    a
}

pub fn kan_forward<T: Real>(params: &[T], x: &[T], cfg: &KanConfig) -> Result<Vec<T>> {
    cfg.validate()?;
    if params.len() != cfg.param_len() {
        return Err(config(format!("KAN expects {} parameters, got {}", cfg.param_len(), params.len())));
    }
    if x.len() != cfg.input_dim {
        return Err(config(format!("KAN expects {} inputs, got {}", cfg.input_dim, x.len())));
    }
    Ok(kan_forward_scalar(cfg, params, x))
}

/// Derivatives up to third order of `z ↦ T_k(tanh z)` for `k = 0..=n`,
/// via truncated Taylor arithmetic.
pub(crate) fn chebyshev_of_tanh<T: Real>(z: T, out: &mut [Derivs<T>]) {
    let one = T::one();
    let two = T::lit(2.0);
    let t = z.tanh();
    let t1 = one - t * t;
    let t2 = -two * t * t1;
    let t3 = -two * t1 * (one - T::lit(3.0) * t * t);
    let s = [t, t1, t2 / two, t3 / T::lit(6.0)];
    let mul = |a: &[T; 4], b: &[T; 4]| {
        [
            a[0] * b[0],
            a[0] * b[1] + a[1] * b[0],
            a[0] * b[2] + a[1] * b[1] + a[2] * b[0],
            a[0] * b[3] + a[1] * b[2] + a[2] * b[1] + a[3] * b[0],
        ]
    };
    let mut prev = [one, T::zero(), T::zero(), T::zero()];
    let mut cur = s;
    let emit = |c: &[T; 4]| [c[0], c[1], two * c[2], T::lit(6.0) * c[3]];
    out[0] = emit(&prev);
    if out.len() > 1 {
        out[1] = emit(&cur);
    }
    for slot in out.iter_mut().skip(2) {
        let p = mul(&s, &cur);
        let next = [two * p[0] - prev[0], two * p[1] - prev[1], two * p[2] - prev[2], two * p[3] - prev[3]];
        prev = cur;
        cur = next;
        *slot = emit(&cur);
    }
}

#[derive(Clone, Debug)]
struct KanLayerCache<T> {
    basis: Array2<T>,
    map: MapCache<T>,
    theta: Array2<T>,
}

#[derive(Clone, Debug)]
pub struct KanCache<T> {
    layers: Vec<KanLayerCache<T>>,
}

/// `theta[i, j, k]` rearranged as a `d_out × (d_in · (n+1))` matrix.
fn theta_matrix<T: Real>(theta: &[T], d_in: usize, d_out: usize, n1: usize) -> Array2<T> {
    Array2::from_shape_fn((d_out, d_in * n1), |(j, col)| {
        let (i, k) = (col / n1, col % n1);
        theta[(i * d_out + j) * n1 + k]
    })
}

pub(crate) fn kan_forward_batch<T: Real>(cfg: &KanConfig, params: &[T], input: JetBatch<T>) -> (JetBatch<T>, KanCache<T>) {
    let n1 = cfg.degree + 1;
    let layout = input.layout.clone();
    let p = input.points;
    let mut a = input;
    let mut layers = Vec::new();
    let mut off = 0;
    for (d_in, d_out) in cfg.layer_dims() {
        let theta = theta_matrix(&params[off..off + d_in * d_out * n1], d_in, d_out, n1);
        off += d_in * d_out * n1;
        let (basis, map) = expand_forward(a, n1, chebyshev_of_tanh);
        let y = theta.dot(&basis.data);
        layers.push(KanLayerCache { basis: basis.data, map, theta });
        a = JetBatch { layout: layout.clone(), points: p, data: y };
    }
    (a, KanCache { layers })
}

pub(crate) fn kan_backward_batch<T: Real>(cfg: &KanConfig, cache: &KanCache<T>, adj_out: Array2<T>, grad: &mut [T]) {
    let n1 = cfg.degree + 1;
    let dims = cfg.layer_dims();
    let mut offsets = Vec::new();
    let mut off = 0;
    for &(d_in, d_out) in &dims {
        offsets.push(off);
        off += d_in * d_out * n1;
    }
    let mut adj = adj_out;
    for l in (0..dims.len()).rev() {
        let (d_in, d_out) = dims[l];
        let layer = &cache.layers[l];
        let mut gmat = Array2::zeros((d_out, d_in * n1));
        general_mat_mul(T::one(), &adj, &layer.basis.t(), T::zero(), &mut gmat);
        let g = &mut grad[offsets[l]..offsets[l] + d_in * d_out * n1];
        for j in 0..d_out {
            for i in 0..d_in {
                for k in 0..n1 {
                    g[(i * d_out + j) * n1 + k] += gmat[[j, i * n1 + k]];
                }
            }
        }
        let adj_basis = layer.theta.t().dot(&adj);
        adj = expand_backward(&layer.map, &adj_basis);
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn basis_values() {
        assert_eq!(chebyshev_basis(0.5_f64, 3).unwrap(), vec![1.0, 0.5, -0.5, -1.0]);
        assert_eq!(chebyshev_basis(1.0_f64, 4).unwrap(), vec![1.0; 5]);
        assert_eq!(chebyshev_basis(-1.0_f64, 3).unwrap(), vec![1.0, -1.0, 1.0, -1.0]);
        assert!(matches!(chebyshev_basis(1.5_f64, 3), Err(Error::Domain { .. })));
        assert!(chebyshev_basis(f64::NAN, 3).is_err());
    }

    #[test]
    fn basis_matches_trigonometric_identity() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let x: f64 = rng.gen_range(-0.999999..0.999999);
            let t = chebyshev_basis(x, 8).unwrap();
            for (k, tk) in t.iter().enumerate() {
                assert!((tk - (k as f64 * x.acos()).cos()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_coefficients_give_zero() {
        let cfg = KanConfig::standard(2);
        let params = vec![0.0_f64; cfg.param_len()];
        assert_eq!(kan_forward(&params, &[0.3, -0.8], &cfg).unwrap(), vec![0.0]);
    }

    #[test]
    fn degree_one_identity_head_is_tanh() {
        let cfg = KanConfig { input_dim: 1, output_dim: 1, degree: 1, hidden_width: 0, layer_count: 1 };
        for x in [-2.0_f64, 0.1, 0.9] {
            assert_eq!(kan_forward(&[0.0, 1.0], &[x], &cfg).unwrap()[0], x.tanh());
        }
    }

    #[test]
    fn value_at_origin_uses_closed_form_chebyshev() {
        // T_k(0) = cos(kπ/2)
        let cfg = KanConfig { input_dim: 3, output_dim: 2, degree: 5, hidden_width: 0, layer_count: 1 };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let theta: Vec<f64> = (0..cfg.param_len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y = kan_forward(&theta, &[0.0, 0.0, 0.0], &cfg).unwrap();
        for j in 0..2 {
            let mut expected = 0.0;
            for i in 0..3 {
                for k in 0..6 {
                    expected += theta[(i * 2 + j) * 6 + k] * (k as f64 * std::f64::consts::FRAC_PI_2).cos();
                }
            }
            assert!((y[j] - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn chebyshev_of_tanh_derivatives() {
        let mut out = vec![[0.0; 4]; 6];
        let mut op = vec![[0.0; 4]; 6];
        let mut om = vec![[0.0; 4]; 6];
        let h = 1e-5;
        for &z in &[-1.7_f64, -0.2, 0.0, 0.6, 2.4] {
            chebyshev_of_tanh(z, &mut out);
            chebyshev_of_tanh(z + h, &mut op);
            chebyshev_of_tanh(z - h, &mut om);
            let direct = chebyshev_basis(z.tanh(), 5).unwrap();
            for k in 0..6 {
                assert!((out[k][0] - direct[k]).abs() < 1e-14);
                for o in 0..3 {
                    let fd = (op[k][o] - om[k][o]) / (2.0 * h);
                    assert!((fd - out[k][o + 1]).abs() < 1e-7, "k={k} order {} at {z}", o + 1);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn single_layer_head_is_linear_in_theta(
            a in -3.0f64..3.0, b in -3.0f64..3.0,
            x in prop::collection::vec(-2.0f64..2.0, 2),
            seed in 0u64..1000,
        ) {
            let cfg = KanConfig { input_dim: 2, output_dim: 1, degree: 4, hidden_width: 0, layer_count: 1 };
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let t1: Vec<f64> = (0..cfg.param_len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let t2: Vec<f64> = (0..cfg.param_len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mix: Vec<f64> = t1.iter().zip(&t2).map(|(p, q)| a * p + b * q).collect();
            let lhs = kan_forward(&mix, &x, &cfg).unwrap()[0];
            let rhs = a * kan_forward(&t1, &x, &cfg).unwrap()[0] + b * kan_forward(&t2, &x, &cfg).unwrap()[0];
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
        }
    }
}
