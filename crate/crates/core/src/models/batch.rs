//! Fused forward and reverse passes of a composed model over a point batch.
//!
//! Everything that does not depend on the parameters is computed once in
//! [`Model::prepare`]: the input seed, the exponential gates and boundary
//! traces as jets, and the deduplicated projected points `P_i x` of ASPINN.
//! Projected points carry no derivative channel along the normal coordinate,
//! since their pinned coordinate is constant.

use std::collections::HashMap;

use ndarray::{Array2, ArrayView2};

use super::{Model, ModelKind};
use crate::autodiff::batch::{mul_rows, mul_rows_backward, JetBatch, JetLayout};
use crate::error::Result;
use crate::networks::BatchCache;
use crate::real::Real;

#[derive(Clone, Debug)]
struct Projection<T> {
    seed: JetBatch<T>,
    /// Unique projected point of every batch point.
    index: Vec<usize>,
    /// Channel of the projected layout carrying each channel of the batch.
    channel_map: Vec<Option<usize>>,
}

/// A point batch prepared for one model.
#[derive(Clone, Debug)]
pub struct PreparedBatch<T> {
    pub layout: JetLayout,
    pub coords: Array2<T>,
    seed: JetBatch<T>,
    gates: Vec<JetBatch<T>>,
    traces: Vec<JetBatch<T>>,
    projections: Vec<Projection<T>>,
}

impl<T: Real> PreparedBatch<T> {
    pub fn points(&self) -> usize {
        self.coords.nrows()
    }

    /// Number of distinct projected points per prior.
    pub fn projected_points(&self) -> Vec<usize> {
        self.projections.iter().map(|p| p.seed.points).collect()
    }
}

/// State saved by [`Model::forward`] for [`Model::backward`].
#[derive(Clone, Debug)]
pub struct ModelCache<T> {
    nets: Vec<BatchCache<T>>,
    projected: Vec<BatchCache<T>>,
}

fn trace_jet<T: Real>(trace: &crate::problems::Trace<T>, coords: ArrayView2<'_, T>, layout: &JetLayout) -> JetBatch<T> {
    let p = coords.nrows();
    let mut out = JetBatch::zeros(layout.clone(), 1, p);
    for (q, x) in coords.rows().into_iter().enumerate() {
        let x = x.to_vec();
        out.data[[0, q]] = trace.eval(&x);
        for &k in layout.first_dims() {
            let c = layout.first_channel(k).unwrap();
            out.data[[0, c * p + q]] = trace.derivative(&x, k, 1);
        }
        for &k in layout.second_dims() {
            let c = layout.second_channel(k).unwrap();
            out.data[[0, c * p + q]] = trace.derivative(&x, k, 2);
        }
    }
    out
}

fn gate_jet<T: Real>(prior: &super::AsymptoticPrior<T>, epsilon: T, coords: ArrayView2<'_, T>, layout: &JetLayout) -> JetBatch<T> {
    let p = coords.nrows();
    let n = prior.normal_dim;
    let rate = prior.rate(epsilon);
    let first = layout.first_channel(n);
    let second = layout.second_channel(n);
    // Gates below ε_mach² are flushed to zero: their contribution is far
    // below rounding, and subnormal operands would slow every product they
    // reach in the reverse pass.
    let floor = (T::epsilon() * T::epsilon()).ln();
    let mut out = JetBatch::zeros(layout.clone(), 1, p);
    for q in 0..p {
        let offset = coords[[q, n]] - prior.position;
        let z = rate * offset.abs();
        if z <= floor {
            continue;
        }
        let e = z.exp();
        let sign = prior.distance_slope(coords[[q, n]]);
        out.data[[0, q]] = e;
        if let Some(c) = first {
            out.data[[0, c * p + q]] = rate * sign * e;
        }
        if let Some(c) = second {
            out.data[[0, c * p + q]] = rate * rate * e;
        }
    }
    out
}

fn projection<T: Real>(prior: &super::AsymptoticPrior<T>, coords: ArrayView2<'_, T>, layout: &JetLayout) -> Result<Projection<T>> {
    let dims = coords.ncols();
    let mut unique: Vec<Vec<T>> = Vec::new();
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut index = Vec::with_capacity(coords.nrows());
    for x in coords.rows() {
        let px = prior.project(&x.to_vec());
        let key: Vec<u64> = px.iter().map(|v| v.to_f64_lossy().to_bits()).collect();
        let next = unique.len();
        let id = *seen.entry(key).or_insert_with(|| {
            unique.push(px);
            next
        });
        index.push(id);
    }
    let proj_layout = layout.without(prior.normal_dim);
    let pts = Array2::from_shape_fn((unique.len(), dims), |(i, k)| unique[i][k]);
    let seed = JetBatch::seed(pts.view(), proj_layout.clone())?;
    Ok(Projection { seed, index, channel_map: layout.channel_map_into(&proj_layout) })
}

impl<T: Real> Model<T> {
    /// Precomputes the parameter-independent parts of a batch. `coords` is
    /// `points × input_dim`; `layout` selects the derivative channels.
    pub fn prepare(&self, coords: ArrayView2<'_, T>, layout: JetLayout) -> Result<PreparedBatch<T>> {
        let seed = JetBatch::seed(coords, layout.clone())?;
        let mut gates = Vec::new();
        let mut traces = Vec::new();
        let mut projections = Vec::new();
        if self.kind != ModelKind::Pinn {
            for prior in &self.priors {
                gates.push(gate_jet(prior, self.epsilon, coords, &layout));
                if self.kind == ModelKind::Aspinn {
                    traces.push(trace_jet(&prior.trace, coords, &layout));
                    projections.push(projection(prior, coords, &layout)?);
                }
            }
        }
        Ok(PreparedBatch { layout, coords: coords.to_owned(), seed, gates, traces, projections })
    }

    /// Model output jets (one row) and the cache for the reverse pass.
    pub fn forward(&self, params: &[T], batch: &PreparedBatch<T>) -> (JetBatch<T>, ModelCache<T>) {
        let (mut out, c0) = self.network.forward_batch(self.net_params(params, 0), batch.seed.clone());
        let mut nets = vec![c0];
        let mut projected = Vec::new();
        match self.kind {
            ModelKind::Pinn => {}
            ModelKind::Gkpinn => {
                for (i, gate) in batch.gates.iter().enumerate() {
                    let (ui, ci) = self.network.forward_batch(self.net_params(params, i + 1), batch.seed.clone());
                    out.data += &mul_rows(&ui, gate).data;
                    nets.push(ci);
                }
            }
            ModelKind::Aspinn => {
                let p = batch.points();
                for ((gate, trace), proj) in batch.gates.iter().zip(&batch.traces).zip(&batch.projections) {
                    let (up, cp) = self.network.forward_batch(self.net_params(params, 0), proj.seed.clone());
                    let m = proj.seed.points;
                    let mut jump = trace.clone();
                    for (c, target) in proj.channel_map.iter().enumerate() {
                        if let Some(tc) = target {
                            for (q, &id) in proj.index.iter().enumerate() {
                                jump.data[[0, c * p + q]] -= up.data[[0, tc * m + id]];
                            }
                        }
                    }
                    out.data += &mul_rows(&jump, gate).data;
                    projected.push(cp);
                }
            }
        }
        (out, ModelCache { nets, projected })
    }

    /// Accumulates `∂L/∂params` into `grad` given the adjoint of every output
    /// channel.
    pub fn backward(&self, params: &[T], batch: &PreparedBatch<T>, cache: &ModelCache<T>, adj_out: Array2<T>, grad: &mut [T]) {
        let n = self.network.param_len();
        let p = batch.points();
        match self.kind {
            ModelKind::Pinn => {}
            ModelKind::Gkpinn => {
                for (i, gate) in batch.gates.iter().enumerate() {
                    let adj_u = mul_rows_backward(gate, &adj_out);
                    let g = &mut grad[(i + 1) * n..(i + 2) * n];
                    self.network.backward_batch(self.net_params(params, i + 1), &cache.nets[i + 1], adj_u, p, g);
                }
            }
            ModelKind::Aspinn => {
                for ((gate, proj), cp) in batch.gates.iter().zip(&batch.projections).zip(&cache.projected) {
                    let adj_jump = mul_rows_backward(gate, &adj_out);
                    let m = proj.seed.points;
                    let mut adj_up = Array2::zeros((1, proj.seed.layout.channels() * m));
                    for (c, target) in proj.channel_map.iter().enumerate() {
                        if let Some(tc) = target {
                            for (q, &id) in proj.index.iter().enumerate() {
                                adj_up[[0, tc * m + id]] -= adj_jump[[0, c * p + q]];
                            }
                        }
                    }
                    self.network.backward_batch(self.net_params(params, 0), cp, adj_up, m, &mut grad[..n]);
                }
            }
        }
        self.network.backward_batch(self.net_params(params, 0), &cache.nets[0], adj_out, p, &mut grad[..n]);
    }
}
