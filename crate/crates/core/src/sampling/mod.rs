//! Seeded training points: Latin hypercube collocation, boundary and
//! initial samples.

use ndarray::Array2;
use rand::distributions::{Distribution, Open01};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::problems::{Face, ProblemSpec};
use crate::real::Real;

/// Latin hypercube sample of `n` points in `[0,1]^d`: along every
/// dimension each of the `n` strata `[i/n, (i+1)/n)` holds exactly one
/// point, jittered uniformly inside its stratum.
pub fn lhs<T: Real>(n: usize, d: usize, seed: u64) -> Vec<Vec<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    lhs_with(&mut rng, n, d)
}

fn lhs_with<T: Real>(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<T>> {
    let mut points = vec![vec![T::zero(); d]; n];
    let mut strata: Vec<usize> = (0..n).collect();
    for k in 0..d {
        strata.shuffle(rng);
        for (p, &s) in points.iter_mut().zip(&strata) {
            let u: f64 = Open01.sample(rng);
            p[k] = T::lit((s as f64 + u) / n as f64);
        }
    }
    points
}

/// Point counts per category.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleCounts {
    pub interior: usize,
    /// Total over all spatial faces; ignored in one dimension, where both
    /// endpoints are always used.
    pub boundary: usize,
    /// Ignored for problems without an initial condition.
    pub initial: usize,
}

impl SampleCounts {
    /// 1000 collocation points in one dimension; 10000 interior, 100
    /// boundary and 100 initial points otherwise.
    pub fn standard<T: Real>(problem: &ProblemSpec<T>) -> Self {
        if problem.input_dim == 1 {
            Self { interior: 1000, boundary: 2, initial: 0 }
        } else {
            Self { interior: 10_000, boundary: 100, initial: 100 }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet<T> {
    pub interior: Vec<Vec<T>>,
    pub boundary: Vec<(Vec<T>, Face)>,
    pub initial: Vec<Vec<T>>,
}

impl<T: Real> SampleSet<T> {
    pub fn interior_array(&self) -> Array2<T> {
        to_array(self.interior.iter())
    }

    pub fn boundary_array(&self) -> Array2<T> {
        to_array(self.boundary.iter().map(|(x, _)| x))
    }

    pub fn initial_array(&self) -> Array2<T> {
        to_array(self.initial.iter())
    }
}

fn to_array<'a, T: Real>(rows: impl ExactSizeIterator<Item = &'a Vec<T>> + Clone) -> Array2<T> {
    let n = rows.len();
    let d = rows.clone().next().map_or(0, |r| r.len());
    let mut a = Array2::zeros((n, d));
    for (i, r) in rows.enumerate() {
        for (k, &v) in r.iter().enumerate() {
            a[[i, k]] = v;
        }
    }
    a
}

/// Training points for `problem` with the standard counts.
pub fn sample_problem<T: Real>(problem: &ProblemSpec<T>, seed: u64) -> SampleSet<T> {
    sample_problem_with(problem, SampleCounts::standard(problem), seed)
}

/// Training points with explicit counts. Boundary points are split evenly
/// over the spatial faces, which all have unit measure; the first faces
/// take the remainder.
pub fn sample_problem_with<T: Real>(problem: &ProblemSpec<T>, counts: SampleCounts, seed: u64) -> SampleSet<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = problem.input_dim;
    let interior = lhs_with(&mut rng, counts.interior, dims);
    let faces = problem.faces();
    let boundary = if dims == 1 {
        faces.iter().map(|&f| (vec![f.coordinate::<T>()], f)).collect()
    } else {
        let mut out = Vec::with_capacity(counts.boundary);
        let k = faces.len();
        for (i, &face) in faces.iter().enumerate() {
            let n = counts.boundary / k + usize::from(i < counts.boundary % k);
            for tangential in lhs_with::<T>(&mut rng, n, dims - 1) {
                out.push((on_face(face, &tangential), face));
            }
        }
        out
    };
    let initial = match problem.time_dim {
        Some(t) if problem.initial.is_some() => lhs_with::<T>(&mut rng, counts.initial, dims - 1)
            .into_iter()
            .map(|s| on_face(Face::low(t), &s))
            .collect(),
        _ => Vec::new(),
    };
    SampleSet { interior, boundary, initial }
}

/// Inserts the face coordinate into a point of the remaining dimensions.
fn on_face<T: Real>(face: Face, tangential: &[T]) -> Vec<T> {
    let mut x = tangential.to_vec();
    x.insert(face.dim, face.coordinate());
    x
}
