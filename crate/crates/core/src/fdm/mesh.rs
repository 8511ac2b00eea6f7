use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::real::Real;

/// Transition constant of the Shishkin mesh.
pub const SHISHKIN_SIGMA: f64 = 2.0;

/// Piecewise-uniform mesh on `[0, 1]` with half of its `n` intervals inside
/// a layer of width `τ = min(½, σ ε/β · ln n)` at `layer_at`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShishkinMesh<T> {
    pub intervals: usize,
    pub tau: T,
    pub layer_at: T,
    pub nodes: Vec<T>,
}

impl<T: Real> ShishkinMesh<T> {
    pub fn new(intervals: usize, epsilon: T, beta: T, layer_at: T) -> Result<Self> {
        if intervals < 2 || !intervals.is_multiple_of(2) {
            return Err(config(format!("Shishkin meshes need an even interval count >= 2, got {intervals}")));
        }
        if !(epsilon > T::zero()) || !(beta > T::zero()) {
            return Err(config("Shishkin mesh needs positive epsilon and decay"));
        }
        if layer_at != T::zero() && layer_at != T::one() {
            return Err(config("Shishkin layers sit at 0 or 1"));
        }
        let half = T::lit(0.5);
        let n = T::from_count(intervals);
        let tau = half.min(T::lit(SHISHKIN_SIGMA) * epsilon / beta * n.ln());
        let m = intervals / 2;
        let coarse = (T::one() - tau) / T::from_count(m);
        let fine = tau / T::from_count(m);
        // nodes measured from the layer, then mirrored when the layer is at 1
        let mut from_layer: Vec<T> = (0..=m).map(|i| fine * T::from_count(i)).collect();
        from_layer.extend((1..=m).map(|i| tau + coarse * T::from_count(i)));
        *from_layer.last_mut().unwrap() = T::one();
        let nodes = if layer_at == T::zero() {
            from_layer
        } else {
            from_layer.iter().rev().map(|&d| T::one() - d).collect()
        };
        Ok(Self { intervals, tau, layer_at, nodes })
    }
}

/// `n + 1` equispaced nodes on `[0, 1]`.
pub fn uniform_nodes<T: Real>(n: usize) -> Vec<T> {
    (0..=n).map(|i| T::from_count(i) / T::from_count(n)).collect()
}
