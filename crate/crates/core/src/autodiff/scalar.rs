use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::real::Real;

/// A differentiable scalar over the real type `T`.
///
/// Implemented by `T` itself (plain evaluation), by tape variables
/// ([`Var`](super::Var), reverse mode) and by second-order jets
/// ([`Jet`](super::Jet), forward mode). Network and predictor code written
/// against this trait runs unchanged in all three modes, and in nested
/// combinations such as `Jet<Var<T>>`.
pub trait Scalar<T: Real>:
    Clone
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn value(&self) -> T;

    /// A constant living in the same context as `self` (same tape, same
    /// jet dimension).
    fn lift(&self, c: T) -> Self;

    fn scale(&self, c: T) -> Self;
    fn exp(&self) -> Self;
    fn tanh(&self) -> Self;
    fn sigmoid(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    /// Defined on the open interval (-1, 1).
    fn acos(&self) -> Self;
    fn abs(&self) -> Self;
    fn powi(&self, n: i32) -> Self;

    /// `max(self, floor)`; the derivative is zero where the floor is active.
    fn clamp_min(&self, floor: T) -> Self;

    fn add_const(&self, c: T) -> Self {
        self.clone() + self.lift(c)
    }
}

#[inline]
pub(crate) fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

impl<T: Real> Scalar<T> for T {
    #[inline]
    fn value(&self) -> T {
        *self
    }
    #[inline]
    fn lift(&self, c: T) -> Self {
        c
    }
    #[inline]
    fn scale(&self, c: T) -> Self {
        *self * c
    }
    #[inline]
    fn exp(&self) -> Self {
        Float::exp(*self)
    }
    #[inline]
    fn tanh(&self) -> Self {
        Float::tanh(*self)
    }
    #[inline]
    fn sigmoid(&self) -> Self {
        sigmoid(*self)
    }
    #[inline]
    fn sin(&self) -> Self {
        Float::sin(*self)
    }
    #[inline]
    fn cos(&self) -> Self {
        Float::cos(*self)
    }
    #[inline]
    fn acos(&self) -> Self {
        Float::acos(*self)
    }
    #[inline]
    fn abs(&self) -> Self {
        Float::abs(*self)
    }
    #[inline]
    fn powi(&self, n: i32) -> Self {
        Float::powi(*self, n)
    }
    #[inline]
    fn clamp_min(&self, floor: T) -> Self {
        Float::max(*self, floor)
    }
}

use num_traits::Float;
