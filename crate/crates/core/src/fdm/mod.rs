//! Upwind finite differences on Shishkin meshes.
//!
//! Every operator is brought to the form `−d·u″ + b·u′ + c·u = f` with
//! `d > 0` along the layer direction. Diffusion is discretized centrally on
//! the nonuniform mesh, convection by one-sided differences against the
//! flow, so the interior matrices are M-matrices whenever `c ≥ 0`.
//!
//! * one dimension: one tridiagonal solve;
//! * two dimensions: a sine transform along the tangential direction
//!   (uniform, homogeneous Dirichlet data) decouples the 5-point system
//!   into one tridiagonal solve per mode;
//! * parabolic: implicit Euler in time, one tridiagonal solve per step.

mod grid;
mod mesh;

pub use grid::{coordinate_names, sha256_hex, sidecar_path, GridMeta, GridSidecar, GridSolution, GRID_FORMAT};
pub use mesh::{uniform_nodes, ShishkinMesh, SHISHKIN_SIGMA};

use ndarray::Array2;

use crate::error::{config, Error, Result};
use crate::problems::{Face, ProblemSpec};
use crate::real::Real;

/// Default intervals per spatial axis and time steps of the frozen test sets.
pub const DEFAULT_N: usize = 1024;
pub const DEFAULT_M: usize = 512;

/// Thomas algorithm for `lower[i]·x[i−1] + diag[i]·x[i] + upper[i]·x[i+1] = rhs[i]`.
pub fn solve_tridiagonal<T: Real>(lower: &[T], diag: &[T], upper: &[T], rhs: &[T]) -> Result<Vec<T>> {
    let n = diag.len();
    if lower.len() != n || upper.len() != n || rhs.len() != n {
        return Err(config("tridiagonal bands of unequal length"));
    }
    let mut c = vec![T::zero(); n];
    let mut d = vec![T::zero(); n];
    let mut prev_c = T::zero();
    let mut prev_d = T::zero();
    for i in 0..n {
        let pivot = diag[i] - lower[i] * prev_c;
        if !(pivot.abs() > T::min_positive_value()) || !pivot.is_finite() {
            return Err(Error::Solve(format!("zero pivot in row {i}")));
        }
        c[i] = upper[i] / pivot;
        d[i] = (rhs[i] - lower[i] * prev_d) / pivot;
        prev_c = c[i];
        prev_d = d[i];
    }
    let mut x = d;
    for i in (0..n.saturating_sub(1)).rev() {
        x[i] = x[i] - c[i] * x[i + 1];
    }
    Ok(x)
}

/// `−diffusion·u″ + convection·u′ + reaction·u` along one line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineOperator<T> {
    pub diffusion: T,
    pub convection: T,
    pub reaction: T,
}

/// Interior rows `1..n` of the line operator on `nodes`; entries `i − 1`
/// belong to node `i`.
#[derive(Clone, Debug)]
pub struct LineMatrix<T> {
    pub lower: Vec<T>,
    pub diag: Vec<T>,
    pub upper: Vec<T>,
}

impl<T: Real> LineOperator<T> {
    pub fn assemble(&self, nodes: &[T]) -> LineMatrix<T> {
        let n = nodes.len() - 1;
        let two = T::lit(2.0);
        let mut m = LineMatrix {
            lower: Vec::with_capacity(n - 1),
            diag: Vec::with_capacity(n - 1),
            upper: Vec::with_capacity(n - 1),
        };
        for i in 1..n {
            let hl = nodes[i] - nodes[i - 1];
            let hr = nodes[i + 1] - nodes[i];
            let s = two * self.diffusion / (hl + hr);
            let (mut lo, mut di, mut up) = (-s / hl, s / hl + s / hr + self.reaction, -s / hr);
            if self.convection > T::zero() {
                lo -= self.convection / hl;
                di += self.convection / hl;
            } else {
                up += self.convection / hr;
                di -= self.convection / hr;
            }
            m.lower.push(lo);
            m.diag.push(di);
            m.upper.push(up);
        }
        m
    }
}

impl<T: Real> LineMatrix<T> {
    /// Solves for the interior values given the two boundary values and the
    /// interior right-hand side; returns all nodal values.
    pub fn solve(&self, left: T, right: T, rhs: &[T]) -> Result<Vec<T>> {
        let k = self.diag.len();
        let mut r = rhs.to_vec();
        r[0] -= self.lower[0] * left;
        r[k - 1] -= self.upper[k - 1] * right;
        let mut lower = self.lower.clone();
        let mut upper = self.upper.clone();
        lower[0] = T::zero();
        upper[k - 1] = T::zero();
        let inner = solve_tridiagonal(&lower, &self.diag, &upper, &r)?;
        let mut u = Vec::with_capacity(k + 2);
        u.push(left);
        u.extend(inner);
        u.push(right);
        Ok(u)
    }

    /// Discrete operator applied to nodal values (interior rows).
    pub fn apply(&self, u: &[T]) -> Vec<T> {
        (0..self.diag.len()).map(|i| self.lower[i] * u[i] + self.diag[i] * u[i + 1] + self.upper[i] * u[i + 2]).collect()
    }
}

/// Coefficients normalized so the diffusion along `dim` is negative.
struct Normalized<T> {
    sign: T,
    second: Vec<T>,
    first: Vec<T>,
    reaction: T,
}

fn normalize<T: Real>(problem: &ProblemSpec<T>, dim: usize) -> Result<Normalized<T>> {
    let op = &problem.operator;
    let a = op.second[dim];
    if a == T::zero() {
        return Err(config(format!("{} has no diffusion along dimension {dim}", problem.name)));
    }
    let sign = if a < T::zero() { T::one() } else { -T::one() };
    Ok(Normalized {
        sign,
        second: op.second.iter().map(|&v| sign * v).collect(),
        first: op.first.iter().map(|&v| sign * v).collect(),
        reaction: sign * op.reaction,
    })
}

fn layer<T: Real>(problem: &ProblemSpec<T>) -> Result<(usize, T, T)> {
    let prior = problem.priors.first().ok_or_else(|| config(format!("{} has no boundary layer", problem.name)))?;
    Ok((prior.normal_dim, prior.position, prior.decay))
}

fn face_trace<T: Real>(problem: &ProblemSpec<T>, face: Face) -> Result<&crate::problems::Trace<T>> {
    problem.trace_on(face).ok_or_else(|| config(format!("{} has no data on {face:?}", problem.name)))
}

fn meta<T: Real>(scheme: &str, n: usize, m: Option<usize>, mesh: &ShishkinMesh<T>, dim: usize) -> GridMeta {
    GridMeta {
        scheme: scheme.into(),
        n,
        m,
        sigma: SHISHKIN_SIGMA,
        tau: mesh.tau.to_f64_lossy(),
        layer_dim: dim,
        layer_at: mesh.layer_at.to_f64_lossy(),
    }
}

/// Reference solution with the default resolution of the problem type.
pub fn solve<T: Real>(problem: &ProblemSpec<T>, n: usize, m: usize) -> Result<GridSolution<T>> {
    if problem.time_dim.is_some() {
        solve_parabolic(problem, n, m)
    } else if problem.input_dim == 1 {
        solve_steady_1d(problem, n)
    } else {
        solve_steady_2d(problem, n)
    }
}

/// Steady one-dimensional problems.
pub fn solve_steady_1d<T: Real>(problem: &ProblemSpec<T>, n: usize) -> Result<GridSolution<T>> {
    if problem.input_dim != 1 || problem.time_dim.is_some() {
        return Err(config(format!("{} is not a steady one-dimensional problem", problem.name)));
    }
    let (dim, at, beta) = layer(problem)?;
    let mesh = ShishkinMesh::new(n, problem.epsilon, beta, at)?;
    let c = normalize(problem, 0)?;
    let op = LineOperator { diffusion: -c.second[0], convection: c.first[0], reaction: c.reaction };
    let x = &mesh.nodes;
    let rhs: Vec<T> = x[1..n].iter().map(|&xi| c.sign * problem.forcing_at(&[xi])).collect();
    let left = face_trace(problem, Face::low(0))?.eval(&[T::zero()]);
    let right = face_trace(problem, Face::high(0))?.eval(&[T::one()]);
    let values = op.assemble(x).solve(left, right, &rhs)?;
    Ok(GridSolution {
        problem: problem.name,
        epsilon: problem.epsilon,
        axes: vec![x.clone()],
        values,
        meta: meta("shishkin-upwind", n, None, &mesh, dim),
    })
}

/// Sine-transform matrix `S[j][m] = sin(jπ m/n)` for `j, m = 1..n−1`.
fn sine_matrix<T: Real>(n: usize) -> Array2<T> {
    let w = T::PI() / T::from_count(n);
    Array2::from_shape_fn((n - 1, n - 1), |(j, m)| {
        // reduce (j+1)(m+1) mod 2n before scaling to keep the argument small
        let k = ((j + 1) * (m + 1)) % (2 * n);
        (w * T::from_count(k)).sin()
    })
}

/// Steady two-dimensional problems whose convection is normal to the layer.
pub fn solve_steady_2d<T: Real>(problem: &ProblemSpec<T>, n: usize) -> Result<GridSolution<T>> {
    if problem.input_dim != 2 || problem.time_dim.is_some() {
        return Err(config(format!("{} is not a steady two-dimensional problem", problem.name)));
    }
    let (nd, at, beta) = layer(problem)?;
    let td = 1 - nd;
    let c = normalize(problem, nd)?;
    if c.first[td] != T::zero() {
        return Err(config("the two-dimensional solver needs convection normal to the layer only"));
    }
    if c.second[td] >= T::zero() {
        return Err(config("tangential diffusion must have the same sign as the normal diffusion"));
    }
    for side in [Face::low(td), Face::high(td)] {
        if !face_trace(problem, side)?.is_zero() {
            return Err(config("the two-dimensional solver needs zero data on the tangential faces"));
        }
    }
    let mesh = ShishkinMesh::new(n, problem.epsilon, beta, at)?;
    let xn = mesh.nodes.clone();
    let xt: Vec<T> = uniform_nodes(n);
    let k = n - 1;
    let s = sine_matrix::<T>(n);
    let scale = T::lit(2.0) / T::from_count(n);
    let point = |i_n: usize, m: usize| -> Vec<T> {
        let mut p = vec![T::zero(); 2];
        p[nd] = xn[i_n];
        p[td] = xt[m];
        p
    };

    // transformed face data and forcing
    let lo = face_trace(problem, Face::low(nd))?;
    let hi = face_trace(problem, Face::high(nd))?;
    let g = Array2::from_shape_fn((2, k), |(f, m)| if f == 0 { lo.eval(&point(0, m + 1)) } else { hi.eval(&point(n, m + 1)) });
    let g_hat = g.dot(&s) * scale;
    let f = Array2::from_shape_fn((k, k), |(i, m)| c.sign * problem.forcing_at(&point(i + 1, m + 1)));
    let f_hat = f.dot(&s) * scale;

    let h = T::one() / T::from_count(n);
    let two = T::lit(2.0);
    let mut v = Array2::zeros((n + 1, k));
    for j in 0..k {
        let half_angle = T::from_count(j + 1) * T::PI() * h / two;
        let lambda = T::lit(4.0) / (h * h) * half_angle.sin().powi(2);
        let op = LineOperator { diffusion: -c.second[nd], convection: c.first[nd], reaction: c.reaction - c.second[td] * lambda };
        let line = op.assemble(&xn).solve(g_hat[[0, j]], g_hat[[1, j]], &f_hat.column(j).to_vec())?;
        for (i, u) in line.into_iter().enumerate() {
            v[[i, j]] = u;
        }
    }
    let u = v.dot(&s);

    let mut values = vec![T::zero(); (n + 1) * (n + 1)];
    let at_index = |i_n: usize, m: usize| if nd == 0 { i_n * (n + 1) + m } else { m * (n + 1) + i_n };
    for i_n in 0..=n {
        for m in 0..=n {
            let val = if i_n == 0 {
                lo.eval(&point(0, m))
            } else if i_n == n {
                hi.eval(&point(n, m))
            } else if m == 0 || m == n {
                T::zero()
            } else {
                u[[i_n, m - 1]]
            };
            values[at_index(i_n, m)] = val;
        }
    }
    let axes = if nd == 0 { vec![xn, xt] } else { vec![xt, xn] };
    Ok(GridSolution {
        problem: problem.name,
        epsilon: problem.epsilon,
        axes,
        values,
        meta: meta("shishkin-upwind-5pt-sine", n, None, &mesh, nd),
    })
}

/// Parabolic problems on `(0,1) × (0,1]`: implicit Euler with `m` steps.
/// The `t = 0` row carries the initial data, including its endpoints.
pub fn solve_parabolic<T: Real>(problem: &ProblemSpec<T>, n: usize, m: usize) -> Result<GridSolution<T>> {
    let td = problem.time_dim.ok_or_else(|| config(format!("{} is not time dependent", problem.name)))?;
    if problem.input_dim != 2 || td != 1 {
        return Err(config("parabolic problems have coordinates (x, t)"));
    }
    if m == 0 {
        return Err(config("need at least one time step"));
    }
    let (nd, at, beta) = layer(problem)?;
    let c = normalize(problem, 0)?;
    let bt = c.first[1];
    if !(bt > T::zero()) || c.second[1] != T::zero() {
        return Err(config("time derivative must enter as a positive first-order term"));
    }
    let initial = problem.initial.as_ref().ok_or_else(|| config("missing initial data"))?;
    let mesh = ShishkinMesh::new(n, problem.epsilon, beta, at)?;
    let x = mesh.nodes.clone();
    let t: Vec<T> = uniform_nodes(m);
    let dt = T::one() / T::from_count(m);
    let mass = bt / dt;
    let op = LineOperator { diffusion: -c.second[0], convection: c.first[0], reaction: c.reaction + mass };
    let matrix = op.assemble(&x);
    let lo = face_trace(problem, Face::low(0))?;
    let hi = face_trace(problem, Face::high(0))?;

    let mut values = vec![T::zero(); (n + 1) * (m + 1)];
    // values[i * (m + 1) + k] = u(x_i, t_k)
    let mut u: Vec<T> = x.iter().map(|&xi| initial.eval(&[xi, T::zero()])).collect();
    for (i, &ui) in u.iter().enumerate() {
        values[i * (m + 1)] = ui;
    }
    for k in 1..=m {
        let tk = t[k];
        let rhs: Vec<T> = (1..n).map(|i| c.sign * problem.forcing_at(&[x[i], tk]) + mass * u[i]).collect();
        u = matrix.solve(lo.eval(&[T::zero(), tk]), hi.eval(&[T::one(), tk]), &rhs)?;
        if let Some(i) = u.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { op: format!("implicit Euler step {k}"), index: i });
        }
        for (i, &ui) in u.iter().enumerate() {
            values[i * (m + 1) + k] = ui;
        }
    }
    Ok(GridSolution {
        problem: problem.name,
        epsilon: problem.epsilon,
        axes: vec![x, t],
        values,
        meta: meta("shishkin-upwind-implicit-euler", n, Some(m), &mesh, nd),
    })
}

#[cfg(test)]
mod tests;
