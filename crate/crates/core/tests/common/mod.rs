//! Finite-difference and symbolic oracles shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spinn_core::autodiff::{eval_with_input_derivatives, param_gradient, DerivativeBundle, Jet, Scalar, Tape};
use spinn_core::models::{Model, ModelKind};
use spinn_core::networks::{Activation, MlpConfig, NetworkConfig};
use spinn_core::problems::{problem, ProblemName};
use spinn_core::sampling::{sample_problem_with, SampleCounts, SampleSet};
use spinn_core::training::{assemble_loss, LossWeights, RbaMode, RbaSet};

/// `|a − b| / max(|b|, floor)`.
pub fn rel(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / b.abs().max(floor)
}

/// Central first difference with step `h`.
pub fn d1(f: &dyn Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Richardson-extrapolated central second difference, `O(h⁴)`.
pub fn d2(f: &dyn Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    let c = |h: f64| (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
    (4.0 * c(h / 2.0) - c(h)) / 3.0
}

#[derive(Clone, Copy, Debug)]
pub enum Prim {
    Add,
    Sub,
    Mul,
    Div,
    Tanh,
    Sigmoid,
    Sin,
    Cos,
    Exp,
    Acos,
    Abs,
    Pow3,
}

pub const PRIMS: [Prim; 12] = [
    Prim::Add,
    Prim::Sub,
    Prim::Mul,
    Prim::Div,
    Prim::Tanh,
    Prim::Sigmoid,
    Prim::Sin,
    Prim::Cos,
    Prim::Exp,
    Prim::Acos,
    Prim::Abs,
    Prim::Pow3,
];

impl Prim {
    pub fn apply<S: Scalar<f64>>(self, a: &S, b: &S) -> S {
        match self {
            Prim::Add => a.clone() + b.clone(),
            Prim::Sub => a.clone() - b.clone(),
            Prim::Mul => a.clone() * b.clone(),
            Prim::Div => a.clone() / b.clone(),
            Prim::Tanh => a.tanh(),
            Prim::Sigmoid => a.sigmoid(),
            Prim::Sin => a.sin(),
            Prim::Cos => a.cos(),
            Prim::Exp => a.exp(),
            Prim::Acos => a.acos(),
            Prim::Abs => a.abs(),
            Prim::Pow3 => a.powi(3),
        }
    }

    /// Random argument pair inside the domain of the primitive.
    pub fn sample(self, rng: &mut ChaCha8Rng) -> (f64, f64) {
        let a = match self {
            Prim::Acos => rng.gen_range(-0.9..0.9),
            Prim::Abs => {
                let m = rng.gen_range(0.1..2.0);
                if rng.gen_bool(0.5) {
                    m
                } else {
                    -m
                }
            }
            _ => rng.gen_range(-2.0..2.0),
        };
        (a, rng.gen_range(0.5..2.0))
    }
}

/// Worst relative error of reverse-mode partials and forward-mode first and
/// second derivatives of `prim` against finite differences on `n` inputs.
pub fn primitive_error(prim: Prim, n: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..n {
        let (a, b) = prim.sample(&mut rng);
        let fa = |x: f64| prim.apply(&x, &b);
        let fb = |y: f64| prim.apply(&a, &y);
        let tape = Tape::new();
        let (va, vb) = (tape.var(a), tape.var(b));
        let out = prim.apply(&va, &vb);
        let g = tape.gradient(&out);
        worst = worst.max(rel(g.wrt(&va), d1(&fa, a, 1e-5), 1e-3));
        worst = worst.max(rel(g.wrt(&vb), d1(&fb, b, 1e-5), 1e-3));
        let jet = prim.apply(&Jet::coordinate(a, 0, 1), &Jet::constant(b, 1));
        let bundle = DerivativeBundle::from(&jet);
        worst = worst.max(rel(bundle.u, fa(a), 1e-3));
        worst = worst.max(rel(bundle.du[0], d1(&fa, a, 1e-5), 1e-3));
        // acos has large high derivatives near ±1
        let h = if matches!(prim, Prim::Acos) { 2e-3 } else { 1e-2 };
        worst = worst.max(rel(bundle.d2u[0], d2(&fa, a, h), 1e-3));
    }
    worst
}

pub fn random_mlp(input_dim: usize, widths: Vec<usize>, activation: Activation, eps: f64) -> Model<f64> {
    let net = NetworkConfig::Mlp(MlpConfig { input_dim, hidden_widths: widths, output_dim: 1, activation });
    Model::new(ModelKind::Pinn, net, Vec::new(), eps).expect("valid network")
}

/// Worst relative error of the input derivatives of a random MLP against
/// central differences: step `1e-4` for first derivatives, a Richardson
/// second difference for second derivatives.
pub fn mlp_input_derivative_error(points: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for (dims, act) in [(1, Activation::Sigmoid), (2, Activation::Tanh)] {
        let model = random_mlp(dims, vec![20, 20], act, 0.1);
        let params = model.init_params(seed).values;
        for _ in 0..points {
            let x: Vec<f64> = (0..dims).map(|_| rng.gen_range(0.0..1.0)).collect();
            let b = eval_with_input_derivatives(&model, &x, &params).expect("finite");
            for k in 0..dims {
                let f = |t: f64| {
                    let mut y = x.clone();
                    y[k] = t;
                    model.predict(&params, &y).expect("finite")
                };
                worst = worst.max(rel(b.du[k], d1(&f, x[k], 1e-4), 1e-3));
                worst = worst.max(rel(b.d2u[k], d2(&f, x[k], 1e-2), 1e-3));
            }
        }
    }
    worst
}

/// A PINN with one hidden layer of width 4 on example 1 with 16
/// collocation points.
pub fn small_pinn(seed: u64) -> (Model<f64>, Vec<f64>, SampleSet<f64>, spinn_core::problems::ProblemSpec<f64>) {
    let spec = problem(ProblemName::Ex1, 0.1);
    let net = NetworkConfig::Mlp(MlpConfig { input_dim: 1, hidden_widths: vec![4], output_dim: 1, activation: Activation::Tanh });
    let model = Model::new(ModelKind::Pinn, net, spec.priors.clone(), spec.epsilon).expect("valid network");
    let params = model.init_params(seed).values;
    let samples = sample_problem_with(&spec, SampleCounts { interior: 16, boundary: 2, initial: 0 }, seed);
    (model, params, samples, spec)
}

fn loss_value(model: &Model<f64>, params: &[f64], samples: &SampleSet<f64>, spec: &spinn_core::problems::ProblemSpec<f64>, rba: &RbaSet<f64>) -> f64 {
    let tape = Tape::new();
    let vars = tape.vars(params);
    assemble_loss(&tape, model, &vars, samples, spec, LossWeights::default(), rba).expect("loss").total.value()
}

/// Worst relative error of the reverse-mode loss gradient of
/// [`small_pinn`] against central differences with step `1e-5`.
pub fn pinn_loss_gradient_error(seed: u64) -> f64 {
    let (model, params, samples, spec) = small_pinn(seed);
    let mut rba = RbaSet::new(RbaMode::Residual, &samples);
    if let Some(r) = &mut rba.residual {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        r.alpha.iter_mut().for_each(|a| *a = rng.gen_range(0.0..1.0));
    }
    let tape = Tape::new();
    let vars = tape.vars(&params);
    let loss = assemble_loss(&tape, &model, &vars, &samples, &spec, LossWeights::default(), &rba).expect("loss");
    let grad = param_gradient(&loss.total, &vars);
    let fd: Vec<f64> = (0..params.len())
        .map(|i| {
            let f = |t: f64| {
                let mut p = params.clone();
                p[i] = t;
                loss_value(&model, &p, &samples, &spec, &rba)
            };
            d1(&f, params[i], 1e-5)
        })
        .collect();
    let scale = fd.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    grad.iter().zip(&fd).map(|(&a, &b)| rel(a, b, 1e-3 * scale)).fold(0.0, f64::max)
}

/// Gradient of the sum of two losses against the sum of their gradients,
/// relative to the largest entry.
pub fn gradient_linearity_error(seed: u64) -> f64 {
    let (model, params, samples, spec) = small_pinn(seed);
    let other = sample_problem_with(&spec, SampleCounts { interior: 16, boundary: 2, initial: 0 }, seed + 1);
    let rba = RbaSet::off();
    let grad_of = |sets: &[&SampleSet<f64>]| {
        let tape = Tape::new();
        let vars = tape.vars(&params);
        let mut total = tape.constant(0.0);
        for s in sets {
            total = total + assemble_loss(&tape, &model, &vars, s, &spec, LossWeights::default(), &rba).expect("loss").total;
        }
        param_gradient(&total, &vars)
    };
    let joint = grad_of(&[&samples, &other]);
    let (a, b) = (grad_of(&[&samples]), grad_of(&[&other]));
    let scale = joint.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    joint.iter().zip(a.iter().zip(&b)).map(|(&j, (&x, &y))| (j - (x + y)).abs() / scale).fold(0.0, f64::max)
}

/// Coefficients of `p ∘ q`, lowest degree first.
pub fn compose(p: &[f64], q: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0];
    let mut power = vec![1.0];
    for &c in p {
        if out.len() < power.len() {
            out.resize(power.len(), 0.0);
        }
        for (o, &v) in out.iter_mut().zip(&power) {
            *o += c * v;
        }
        let mut next = vec![0.0; power.len() + q.len() - 1];
        for (i, &a) in power.iter().enumerate() {
            for (j, &b) in q.iter().enumerate() {
                next[i + j] += a * b;
            }
        }
        power = next;
    }
    out
}

pub fn derive(p: &[f64]) -> Vec<f64> {
    p.iter().enumerate().skip(1).map(|(k, &c)| k as f64 * c).collect()
}

pub fn horner(p: &[f64], x: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

pub fn horner_scalar<S: Scalar<f64>>(p: &[f64], x: &S) -> S {
    p.iter().rev().fold(x.lift(0.0), |acc, &c| acc * x.clone() + x.lift(c))
}

/// Forward-mode derivatives of `f(g(x))` against the derivatives of the
/// expanded composite polynomial.
pub fn chain_rule_error(f: &[f64], g: &[f64], x: f64) -> f64 {
    let jet = horner_scalar(f, &horner_scalar(g, &Jet::coordinate(x, 0, 1)));
    let b = DerivativeBundle::from(&jet);
    let h = compose(f, g);
    let (h1, h2) = (derive(&h), derive(&derive(&h)));
    [rel(b.u, horner(&h, x), 1.0), rel(b.du[0], horner(&h1, x), 1.0), rel(b.d2u[0], horner(&h2, x), 1.0)]
        .into_iter()
        .fold(0.0, f64::max)
}
