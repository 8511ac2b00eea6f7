//! Batched second-order jets with hand-derived reverse passes.
//!
//! A [`JetBatch`] stores `rows × (channels · points)` values. Channel 0 is the
//! value; then one channel per first derivative listed in the layout; then
//! one per pure second derivative. Channel `c` of point `p` lives in column
//! `c · points + p`, so every channel is a contiguous column block and a
//! linear layer is a single matrix product over all channels at once.
//!
//! Only the channels a caller asks for are propagated: a boundary batch
//! carries values alone, a residual batch for `u_t - ε u_xx` carries
//! `u, u_x, u_t, u_xx`.

use ndarray::{s, Array2, ArrayView2, ArrayViewMut2};

use crate::error::{config, Result};
use crate::real::Real;

/// Which derivative channels a batch carries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JetLayout {
    dims: usize,
    first: Vec<usize>,
    second: Vec<usize>,
}

impl JetLayout {
    /// Values only.
    pub fn values(dims: usize) -> Self {
        Self { dims, first: Vec::new(), second: Vec::new() }
    }

    /// First and second derivatives along every coordinate.
    pub fn full(dims: usize) -> Self {
        Self { dims, first: (0..dims).collect(), second: (0..dims).collect() }
    }

    pub fn new(dims: usize, mut first: Vec<usize>, mut second: Vec<usize>) -> Result<Self> {
        first.sort_unstable();
        first.dedup();
        second.sort_unstable();
        second.dedup();
        if first.iter().chain(&second).any(|&k| k >= dims) {
            return Err(config(format!("jet layout references a dimension >= {dims}")));
        }
        if second.iter().any(|k| !first.contains(k)) {
            return Err(config("second-derivative channel without its first-derivative channel"));
        }
        Ok(Self { dims, first, second })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn channels(&self) -> usize {
        1 + self.first.len() + self.second.len()
    }

    pub fn first_dims(&self) -> &[usize] {
        &self.first
    }

    pub fn second_dims(&self) -> &[usize] {
        &self.second
    }

    pub fn first_channel(&self, dim: usize) -> Option<usize> {
        self.first.iter().position(|&k| k == dim).map(|i| 1 + i)
    }

    pub fn second_channel(&self, dim: usize) -> Option<usize> {
        self.second.iter().position(|&k| k == dim).map(|i| 1 + self.first.len() + i)
    }

    /// `(second channel, matching first channel)` pairs.
    pub fn second_sources(&self) -> Vec<(usize, usize)> {
        self.second
            .iter()
            .enumerate()
            .map(|(i, &k)| (1 + self.first.len() + i, self.first_channel(k).unwrap()))
            .collect()
    }

    /// The same layout with every channel along `dim` removed.
    pub fn without(&self, dim: usize) -> Self {
        Self {
            dims: self.dims,
            first: self.first.iter().copied().filter(|&k| k != dim).collect(),
            second: self.second.iter().copied().filter(|&k| k != dim).collect(),
        }
    }

    /// Maps each channel of `self` to the channel carrying the same quantity
    /// in `other`, if present.
    pub fn channel_map_into(&self, other: &JetLayout) -> Vec<Option<usize>> {
        let mut map = vec![Some(0)];
        map.extend(self.first.iter().map(|&k| other.first_channel(k)));
        map.extend(self.second.iter().map(|&k| other.second_channel(k)));
        map
    }
}

/// A batch of jets, see the module docs for the storage order.
#[derive(Clone, Debug)]
pub struct JetBatch<T> {
    pub layout: JetLayout,
    pub points: usize,
    pub data: Array2<T>,
}

impl<T: Real> JetBatch<T> {
    pub fn zeros(layout: JetLayout, rows: usize, points: usize) -> Self {
        let cols = layout.channels() * points;
        Self { layout, points, data: Array2::zeros((rows, cols)) }
    }

    /// Input batch for `coords` (`points × dims`): each coordinate is an
    /// independent variable along the derivative channels of the layout.
    pub fn seed(coords: ArrayView2<'_, T>, layout: JetLayout) -> Result<Self> {
        let (points, dims) = coords.dim();
        if dims != layout.dims() {
            return Err(config(format!("points have {dims} coordinates, layout expects {}", layout.dims())));
        }
        let mut batch = Self::zeros(layout, dims, points);
        batch.block_mut(0).assign(&coords.t());
        for k in 0..dims {
            if let Some(c) = batch.layout.first_channel(k) {
                batch.block_mut(c).row_mut(k).fill(T::one());
            }
        }
        Ok(batch)
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn block(&self, channel: usize) -> ArrayView2<'_, T> {
        let p = self.points;
        self.data.slice(s![.., channel * p..(channel + 1) * p])
    }

    pub fn block_mut(&mut self, channel: usize) -> ArrayViewMut2<'_, T> {
        let p = self.points;
        self.data.slice_mut(s![.., channel * p..(channel + 1) * p])
    }

    /// Channel values of row `r` at point `p`.
    pub fn at(&self, r: usize, channel: usize, p: usize) -> T {
        self.data[[r, channel * self.points + p]]
    }
}

/// Derivatives `f, f', f'', f'''` of a univariate function at a point.
pub type Derivs<T> = [T; 4];

/// Saved state of an elementwise map for the reverse pass.
#[derive(Clone, Debug)]
pub struct MapCache<T> {
    input: JetBatch<T>,
    fanout: usize,
    f1: Array2<T>,
    f2: Array2<T>,
    f3: Array2<T>,
}

/// Applies univariate functions elementwise. Every input row `r` produces
/// `fanout` output rows `r · fanout + m`; `f(z, out)` fills `out[m]` with the
/// derivatives of the `m`-th function at `z`.
pub fn expand_forward<T, F>(input: JetBatch<T>, fanout: usize, f: F) -> (JetBatch<T>, MapCache<T>)
where
    T: Real,
    F: Fn(T, &mut [Derivs<T>]),
{
    let rows = input.rows();
    let p = input.points;
    let layout = input.layout.clone();
    let firsts: Vec<usize> = (1..=layout.first_dims().len()).collect();
    let seconds = layout.second_sources();
    let cols = layout.channels() * p;
    let mut out = vec![T::zero(); rows * fanout * cols];
    let mut f1 = vec![T::zero(); rows * fanout * p];
    let mut f2 = vec![T::zero(); rows * fanout * p];
    let mut f3 = vec![T::zero(); rows * fanout * p];
    let mut buf = vec![[T::zero(); 4]; fanout];
    let zs = input.data.as_slice().expect("standard layout");
    for r in 0..rows {
        let z = &zs[r * cols..(r + 1) * cols];
        for (q, &zq) in z[..p].iter().enumerate() {
            f(zq, &mut buf);
            for (m, d) in buf.iter().enumerate() {
                let i = (r * fanout + m) * p + q;
                out[(r * fanout + m) * cols + q] = d[0];
                f1[i] = d[1];
                f2[i] = d[2];
                f3[i] = d[3];
            }
        }
        for m in 0..fanout {
            let o = r * fanout + m;
            let d1 = &f1[o * p..(o + 1) * p];
            let d2 = &f2[o * p..(o + 1) * p];
            let row = &mut out[o * cols..(o + 1) * cols];
            for &c in &firsts {
                let zc = &z[c * p..(c + 1) * p];
                for ((v, &a), &x) in row[c * p..(c + 1) * p].iter_mut().zip(d1).zip(zc) {
                    *v = a * x;
                }
            }
            for &(s2, c) in &seconds {
                let zc = &z[c * p..(c + 1) * p];
                let zz = &z[s2 * p..(s2 + 1) * p];
                for ((((v, &a), &b), &x), &y) in row[s2 * p..(s2 + 1) * p].iter_mut().zip(d1).zip(d2).zip(zc).zip(zz) {
                    *v = b * x * x + a * y;
                }
            }
        }
    }
    let shape = (rows * fanout, p);
    let arr = |v: Vec<T>| Array2::from_shape_vec(shape, v).expect("map shape");
    let out = JetBatch { layout, points: p, data: Array2::from_shape_vec((rows * fanout, cols), out).expect("map shape") };
    let (f1, f2, f3) = (arr(f1), arr(f2), arr(f3));
    (out, MapCache { input, fanout, f1, f2, f3 })
}

/// Reverse pass of [`expand_forward`]: adjoint of the input batch given the
/// adjoint of the output batch.
pub fn expand_backward<T: Real>(cache: &MapCache<T>, adj_out: &Array2<T>) -> Array2<T> {
    let input = &cache.input;
    let rows = input.rows();
    let p = input.points;
    let firsts: Vec<usize> = (1..=input.layout.first_dims().len()).collect();
    let seconds = input.layout.second_sources();
    let two = T::lit(2.0);
    let cols = input.layout.channels() * p;
    let mut adj_in = Array2::zeros(input.data.dim());
    let zs = input.data.as_slice().expect("standard layout");
    let aos = adj_out.as_slice().expect("standard layout");
    let (f1, f2, f3) = (cache.f1.as_slice().expect("standard layout"), cache.f2.as_slice().expect("standard layout"), cache.f3.as_slice().expect("standard layout"));
    let ais = adj_in.as_slice_mut().expect("standard layout");
    for r in 0..rows {
        let z = &zs[r * cols..(r + 1) * cols];
        let ai = &mut ais[r * cols..(r + 1) * cols];
        for m in 0..cache.fanout {
            let o = r * cache.fanout + m;
            let ao = &aos[o * cols..(o + 1) * cols];
            let (d1, d2, d3) = (&f1[o * p..(o + 1) * p], &f2[o * p..(o + 1) * p], &f3[o * p..(o + 1) * p]);
            for q in 0..p {
                ai[q] += ao[q] * d1[q];
            }
            for &c in &firsts {
                for q in 0..p {
                    let a = ao[c * p + q];
                    ai[c * p + q] += a * d1[q];
                    ai[q] += a * d2[q] * z[c * p + q];
                }
            }
            for &(s2, c) in &seconds {
                for q in 0..p {
                    let a = ao[s2 * p + q];
                    let zc = z[c * p + q];
                    ai[s2 * p + q] += a * d1[q];
                    ai[c * p + q] += two * a * d2[q] * zc;
                    ai[q] += a * (d3[q] * zc * zc + d2[q] * z[s2 * p + q]);
                }
            }
        }
    }
    adj_in
}

/// Product rule on single-row batches sharing a layout.
pub fn mul_rows<T: Real>(f: &JetBatch<T>, g: &JetBatch<T>) -> JetBatch<T> {
    debug_assert_eq!(f.layout, g.layout);
    let p = f.points;
    let firsts = f.layout.first_dims().len();
    let seconds = f.layout.second_sources();
    let mut h = JetBatch::zeros(f.layout.clone(), 1, p);
    let two = T::lit(2.0);
    {
        let fd = f.data.row(0);
        let gd = g.data.row(0);
        let mut hd = h.data.row_mut(0);
        for q in 0..p {
            let (fv, gv) = (fd[q], gd[q]);
            hd[q] = fv * gv;
            for c in 1..=firsts {
                hd[c * p + q] = fd[c * p + q] * gv + fv * gd[c * p + q];
            }
            for &(s2, c) in &seconds {
                hd[s2 * p + q] = fd[s2 * p + q] * gv + two * fd[c * p + q] * gd[c * p + q] + fv * gd[s2 * p + q];
            }
        }
    }
    h
}

/// Adjoint of the first factor of [`mul_rows`] given the second factor `g`.
/// The product rule is symmetric, so the adjoint of `g` is obtained by
/// swapping the arguments.
pub fn mul_rows_backward<T: Real>(g: &JetBatch<T>, adj_h: &Array2<T>) -> Array2<T> {
    let p = g.points;
    let firsts = g.layout.first_dims().len();
    let seconds = g.layout.second_sources();
    let two = T::lit(2.0);
    let mut adj_f = Array2::zeros((1, g.layout.channels() * p));
    let gd = g.data.row(0);
    let ah = adj_h.row(0);
    let mut af = adj_f.row_mut(0);
    for q in 0..p {
        let gv = gd[q];
        let mut av = ah[q] * gv;
        for c in 1..=firsts {
            av += ah[c * p + q] * gd[c * p + q];
            af[c * p + q] = ah[c * p + q] * gv;
        }
        for &(s2, c) in &seconds {
            av += ah[s2 * p + q] * gd[s2 * p + q];
            af[c * p + q] += two * ah[s2 * p + q] * gd[c * p + q];
            af[s2 * p + q] = ah[s2 * p + q] * gv;
        }
        af[q] = av;
    }
    adj_f
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn tanh_derivs(z: f64, out: &mut [Derivs<f64>]) {
        let t = z.tanh();
        let t1 = 1.0 - t * t;
        let t2 = -2.0 * t * t1;
        let t3 = -2.0 * (t1 * t1 + t * t2);
        out[0] = [t, t1, t2, t3];
    }

    #[test]
    fn layout_channels() {
        let l = JetLayout::new(2, vec![0, 1], vec![0]).unwrap();
        assert_eq!(l.channels(), 4);
        assert_eq!(l.first_channel(1), Some(2));
        assert_eq!(l.second_channel(0), Some(3));
        assert_eq!(l.second_channel(1), None);
        assert_eq!(l.second_sources(), vec![(3, 1)]);
        assert!(JetLayout::new(2, vec![0], vec![1]).is_err());
        let w = l.without(0);
        assert_eq!(w.channels(), 2);
        assert_eq!(w.channel_map_into(&l), vec![Some(0), Some(2)]);
    }

    #[test]
    fn seed_sets_unit_tangents() {
        let coords = array![[0.25, 0.5], [0.75, 1.0]];
        let b = JetBatch::seed(coords.view(), JetLayout::full(2)).unwrap();
        assert_eq!(b.at(0, 0, 1), 0.75);
        assert_eq!(b.at(1, 0, 0), 0.5);
        assert_eq!(b.at(0, 1, 0), 1.0);
        assert_eq!(b.at(1, 1, 0), 0.0);
        assert_eq!(b.at(1, 2, 1), 1.0);
        assert_eq!(b.at(0, 3, 0), 0.0);
    }

    #[test]
    fn tanh_of_coordinate_matches_closed_form() {
        let coords = array![[0.3], [-1.2]];
        let b = JetBatch::seed(coords.view(), JetLayout::full(1)).unwrap();
        let (out, _) = expand_forward(b, 1, tanh_derivs);
        for (p, &x) in [0.3_f64, -1.2].iter().enumerate() {
            let t = x.tanh();
            assert!((out.at(0, 0, p) - t).abs() < 1e-15);
            assert!((out.at(0, 1, p) - (1.0 - t * t)).abs() < 1e-15);
            assert!((out.at(0, 2, p) + 2.0 * t * (1.0 - t * t)).abs() < 1e-15);
        }
    }

    #[test]
    fn expand_backward_matches_finite_differences() {
        // scalar objective: weighted sum of all output channels of tanh(z)
        let layout = JetLayout::full(1);
        let mut z = JetBatch::<f64>::zeros(layout, 1, 2);
        z.data.assign(&array![[0.4, -0.7, 1.3, 0.2, -0.5, 0.9]]);
        let w = array![[0.3, -1.1, 0.8, 0.5, -0.2, 1.7]];
        let objective = |zb: &JetBatch<f64>| {
            let (o, _) = expand_forward(zb.clone(), 1, tanh_derivs);
            (&o.data * &w).sum()
        };
        let (_, cache) = expand_forward(z.clone(), 1, tanh_derivs);
        let adj = expand_backward(&cache, &w);
        let h = 1e-6;
        for j in 0..6 {
            let mut zp = z.clone();
            zp.data[[0, j]] += h;
            let mut zm = z.clone();
            zm.data[[0, j]] -= h;
            let fd = (objective(&zp) - objective(&zm)) / (2.0 * h);
            assert!((fd - adj[[0, j]]).abs() < 1e-8, "channel column {j}: {fd} vs {}", adj[[0, j]]);
        }
    }

    #[test]
    fn product_rule_backward_matches_finite_differences() {
        let layout = JetLayout::new(2, vec![0, 1], vec![1]).unwrap();
        let mut f = JetBatch::<f64>::zeros(layout.clone(), 1, 1);
        let mut g = JetBatch::<f64>::zeros(layout, 1, 1);
        f.data.assign(&array![[0.5, -0.3, 0.7, 1.1]]);
        g.data.assign(&array![[1.5, 0.2, -0.4, 0.6]]);
        let w = array![[0.9, -0.6, 1.2, 0.4]];
        let objective = |f: &JetBatch<f64>| (&mul_rows(f, &g).data * &w).sum();
        let adj = mul_rows_backward(&g, &w);
        for j in 0..4 {
            let mut fp = f.clone();
            fp.data[[0, j]] += 1e-6;
            let mut fm = f.clone();
            fm.data[[0, j]] -= 1e-6;
            let fd = (objective(&fp) - objective(&fm)) / 2e-6;
            assert!((fd - adj[[0, j]]).abs() < 1e-8);
        }
    }
}
