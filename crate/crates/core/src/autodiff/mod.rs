//! Differentiation: a reverse-mode scalar tape, second-order forward jets,
//! and batched jet kernels used by the training loop.
//!
//! Input derivatives (`u_x`, `u_xx`, ...) come from forward propagation of
//! `(value, first, second)` triples through the predictor. Parameter
//! gradients come from a reverse sweep over the loss. The scalar tape is the
//! reference implementation; the batched kernels in [`batch`] compute the
//! same quantities at layer granularity and are tested against it.

pub mod batch;
mod jet;
mod scalar;
mod tape;

pub use jet::{DerivativeBundle, Jet};
pub use scalar::Scalar;
pub use tape::{param_gradient, Gradient, Op, ScalarNode, Tape, Var};

use crate::error::{config, Result};
use crate::real::Real;

/// A model whose output can be evaluated in any [`Scalar`] mode.
pub trait ScalarPredictor<T: Real> {
    fn input_dim(&self) -> usize;
    fn param_len(&self) -> usize;
    fn predict<S: Scalar<T>>(&self, params: &[S], x: &[S]) -> S;
}

/// `u`, `∇u` and the pure second derivatives of `model` at `point`.
///
/// The evaluation is recorded on a tape so that a non-finite intermediate
/// can be traced back to the primitive that produced it.
pub fn eval_with_input_derivatives<T, P>(model: &P, point: &[T], params: &[T]) -> Result<DerivativeBundle<T>>
where
    T: Real,
    P: ScalarPredictor<T>,
{
    let dims = model.input_dim();
    if point.len() != dims {
        return Err(config(format!("point has {} coordinates, model expects {dims}", point.len())));
    }
    if params.len() != model.param_len() {
        return Err(config(format!("{} parameters given, model expects {}", params.len(), model.param_len())));
    }
    let tape = Tape::new();
    let x: Vec<Jet<Var<'_, T>>> =
        point.iter().enumerate().map(|(k, &xk)| Jet::coordinate(tape.var(xk), k, dims)).collect();
    let p: Vec<Jet<Var<'_, T>>> = params.iter().map(|&w| Jet::constant(tape.constant(w), dims)).collect();
    let out = model.predict(&p, &x);
    tape.check_finite()?;
    Ok(DerivativeBundle::from(&out))
}

/// Same as [`eval_with_input_derivatives`] without the tape: plain `f64`/`f32`
/// jets and no diagnostics.
pub fn eval_jet<T, P>(model: &P, point: &[T], params: &[T]) -> DerivativeBundle<T>
where
    T: Real,
    P: ScalarPredictor<T>,
{
    let dims = point.len();
    let x: Vec<Jet<T>> = point.iter().enumerate().map(|(k, &xk)| Jet::coordinate(xk, k, dims)).collect();
    let p: Vec<Jet<T>> = params.iter().map(|&w| Jet::constant(w, dims)).collect();
    DerivativeBundle::from(&model.predict(&p, &x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    struct Identity;
    impl ScalarPredictor<f64> for Identity {
        fn input_dim(&self) -> usize {
            1
        }
        fn param_len(&self) -> usize {
            0
        }
        fn predict<S: Scalar<f64>>(&self, _: &[S], x: &[S]) -> S {
            x[0].clone()
        }
    }

    struct Square;
    impl ScalarPredictor<f64> for Square {
        fn input_dim(&self) -> usize {
            1
        }
        fn param_len(&self) -> usize {
            0
        }
        fn predict<S: Scalar<f64>>(&self, _: &[S], x: &[S]) -> S {
            x[0].clone() * x[0].clone()
        }
    }

    struct LogLike;
    impl ScalarPredictor<f64> for LogLike {
        fn input_dim(&self) -> usize {
            1
        }
        fn param_len(&self) -> usize {
            0
        }
        fn predict<S: Scalar<f64>>(&self, _: &[S], x: &[S]) -> S {
            x[0].lift(1.0) / x[0].clone()
        }
    }

    #[test]
    fn identity_derivatives() {
        let b = eval_with_input_derivatives(&Identity, &[0.3], &[]).unwrap();
        assert_eq!(b, DerivativeBundle { u: 0.3, du: vec![1.0], d2u: vec![0.0] });
    }

    #[test]
    fn square_derivatives() {
        let b = eval_with_input_derivatives(&Square, &[2.0], &[]).unwrap();
        assert_eq!(b, DerivativeBundle { u: 4.0, du: vec![4.0], d2u: vec![2.0] });
    }

    #[test]
    fn dimension_mismatch_is_a_config_error() {
        assert!(matches!(eval_with_input_derivatives(&Square, &[1.0, 2.0], &[]), Err(Error::Config(_))));
        assert!(matches!(eval_with_input_derivatives(&Square, &[1.0], &[1.0]), Err(Error::Config(_))));
    }

    #[test]
    fn non_finite_intermediate_names_the_op() {
        match eval_with_input_derivatives(&LogLike, &[0.0], &[]) {
            Err(Error::NonFinite { op, .. }) => assert_eq!(op, "Div"),
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }
}
