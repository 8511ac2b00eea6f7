//! Second-order forward mode: a value with its first and pure second
//! derivatives along each input coordinate.

use std::ops::{Add, Div, Mul, Neg, Sub};

use super::scalar::Scalar;
use crate::real::Real;

/// Truncated Taylor triple `(u, ∂u/∂x_k, ∂²u/∂x_k²)` for every input
/// coordinate `k`. Mixed partials are not carried.
#[derive(Clone, Debug)]
pub struct Jet<S> {
    pub v: S,
    pub d: Vec<S>,
    pub dd: Vec<S>,
}

impl<S> Jet<S> {
    pub fn dims(&self) -> usize {
        self.d.len()
    }
}

impl<S: Clone> Jet<S> {
    /// Independent coordinate `k` of a `dims`-dimensional input.
    pub fn coordinate<T: Real>(x: S, k: usize, dims: usize) -> Self
    where
        S: Scalar<T>,
    {
        let zero = x.lift(T::zero());
        let mut d = vec![zero.clone(); dims];
        d[k] = x.lift(T::one());
        Jet { v: x, d, dd: vec![zero; dims] }
    }

    /// A value with all derivatives zero.
    pub fn constant<T: Real>(x: S, dims: usize) -> Self
    where
        S: Scalar<T>,
    {
        let zero = x.lift(T::zero());
        Jet { v: x, d: vec![zero.clone(); dims], dd: vec![zero; dims] }
    }

    /// Applies a univariate function given its value and first two
    /// derivatives at `self.v`.
    pub fn chain<T: Real>(&self, f0: S, f1: S, f2: S) -> Self
    where
        S: Scalar<T>,
    {
        let d: Vec<S> = self.d.iter().map(|dk| f1.clone() * dk.clone()).collect();
        let dd = self
            .d
            .iter()
            .zip(&self.dd)
            .map(|(dk, ddk)| f2.clone() * dk.clone() * dk.clone() + f1.clone() * ddk.clone())
            .collect();
        Jet { v: f0, d, dd }
    }
}

impl<S: Clone + Add<Output = S>> Add for Jet<S> {
    type Output = Jet<S>;
    fn add(self, rhs: Self) -> Self {
        Jet {
            v: self.v + rhs.v,
            d: self.d.into_iter().zip(rhs.d).map(|(a, b)| a + b).collect(),
            dd: self.dd.into_iter().zip(rhs.dd).map(|(a, b)| a + b).collect(),
        }
    }
}

impl<S: Clone + Sub<Output = S>> Sub for Jet<S> {
    type Output = Jet<S>;
    fn sub(self, rhs: Self) -> Self {
        Jet {
            v: self.v - rhs.v,
            d: self.d.into_iter().zip(rhs.d).map(|(a, b)| a - b).collect(),
            dd: self.dd.into_iter().zip(rhs.dd).map(|(a, b)| a - b).collect(),
        }
    }
}

impl<S: Clone + Neg<Output = S>> Neg for Jet<S> {
    type Output = Jet<S>;
    fn neg(self) -> Self {
        Jet {
            v: -self.v,
            d: self.d.into_iter().map(|a| -a).collect(),
            dd: self.dd.into_iter().map(|a| -a).collect(),
        }
    }
}

impl<S: Clone + Add<Output = S> + Mul<Output = S>> Mul for Jet<S> {
    type Output = Jet<S>;
    fn mul(self, rhs: Self) -> Self {
        let n = self.d.len();
        let mut d = Vec::with_capacity(n);
        let mut dd = Vec::with_capacity(n);
        for k in 0..n {
            let (fd, gd) = (self.d[k].clone(), rhs.d[k].clone());
            d.push(fd.clone() * rhs.v.clone() + self.v.clone() * gd.clone());
            let cross = fd * gd;
            dd.push(
                self.dd[k].clone() * rhs.v.clone()
                    + cross.clone()
                    + cross
                    + self.v.clone() * rhs.dd[k].clone(),
            );
        }
        Jet { v: self.v * rhs.v, d, dd }
    }
}

impl<S> Div for Jet<S>
where
    S: Clone + Add<Output = S> + Sub<Output = S> + Mul<Output = S> + Div<Output = S> + Neg<Output = S>,
{
    type Output = Jet<S>;
    fn div(self, rhs: Self) -> Self {
        // 1/g has derivatives -1/g^2 and 2/g^3
        let g = rhs.v.clone();
        let inv = g.clone() / (g.clone() * g);
        let inv2 = inv.clone() * inv.clone();
        let f1 = -inv2.clone();
        let f2 = inv2.clone() * inv.clone() + inv2 * inv.clone();
        let recip = chain_raw(&rhs, inv, f1, f2);
        self * recip
    }
}

fn chain_raw<S: Clone + Add<Output = S> + Mul<Output = S>>(j: &Jet<S>, f0: S, f1: S, f2: S) -> Jet<S> {
    let d: Vec<S> = j.d.iter().map(|dk| f1.clone() * dk.clone()).collect();
    let dd = j
        .d
        .iter()
        .zip(&j.dd)
        .map(|(dk, ddk)| f2.clone() * dk.clone() * dk.clone() + f1.clone() * ddk.clone())
        .collect();
    Jet { v: f0, d, dd }
}

impl<T: Real, S: Scalar<T>> Scalar<T> for Jet<S> {
    fn value(&self) -> T {
        self.v.value()
    }

    fn lift(&self, c: T) -> Self {
        Jet::constant(self.v.lift(c), self.d.len())
    }

    fn scale(&self, c: T) -> Self {
        Jet {
            v: self.v.scale(c),
            d: self.d.iter().map(|a| a.scale(c)).collect(),
            dd: self.dd.iter().map(|a| a.scale(c)).collect(),
        }
    }

    fn exp(&self) -> Self {
        let e = self.v.exp();
        self.chain(e.clone(), e.clone(), e)
    }

    fn tanh(&self) -> Self {
        let t = self.v.tanh();
        let t1 = self.v.lift(T::one()) - t.clone() * t.clone();
        let t2 = (t.clone() * t1.clone()).scale(-T::lit(2.0));
        self.chain(t, t1, t2)
    }

    fn sigmoid(&self) -> Self {
        let s = self.v.sigmoid();
        let one_minus = self.v.lift(T::one()) - s.clone();
        let s1 = s.clone() * one_minus;
        let s2 = s1.clone() * (self.v.lift(T::one()) - s.scale(T::lit(2.0)));
        self.chain(s, s1, s2)
    }

    fn sin(&self) -> Self {
        let s = self.v.sin();
        let c = self.v.cos();
        self.chain(s.clone(), c, -s)
    }

    fn cos(&self) -> Self {
        let s = self.v.sin();
        let c = self.v.cos();
        self.chain(c.clone(), -s, -c)
    }

    fn acos(&self) -> Self {
        // d/dx acos = -(1-x^2)^(-1/2), d2/dx2 = -x (1-x^2)^(-3/2)
        let x = self.v.clone();
        let one = x.lift(T::one());
        let w = one.clone() - x.clone() * x.clone();
        let r = w.value().sqrt();
        let inv_r = one.scale(T::one() / r);
        let f1 = -inv_r.clone();
        let f2 = -(x.clone() * inv_r).scale(T::one() / w.value());
        self.chain(x.acos(), f1, f2)
    }

    fn abs(&self) -> Self {
        if self.v.value() < T::zero() {
            -self.clone()
        } else {
            self.clone()
        }
    }

    fn powi(&self, n: i32) -> Self {
        let x = &self.v;
        let f0 = x.powi(n);
        let (f1, f2) = match n {
            0 => (x.lift(T::zero()), x.lift(T::zero())),
            1 => (x.lift(T::one()), x.lift(T::zero())),
            _ => {
                let nf = T::from_i32(n).unwrap();
                (x.powi(n - 1).scale(nf), x.powi(n - 2).scale(nf * (nf - T::one())))
            }
        };
        self.chain(f0, f1, f2)
    }

    fn clamp_min(&self, floor: T) -> Self {
        if self.v.value() < floor {
            Jet::constant(self.v.clamp_min(floor), self.d.len())
        } else {
            self.clone()
        }
    }
}

/// Value, first, and pure second input-derivatives of a model output at one
/// point.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivativeBundle<T> {
    pub u: T,
    pub du: Vec<T>,
    pub d2u: Vec<T>,
}

impl<T: Real> DerivativeBundle<T> {
    pub fn zero(dims: usize) -> Self {
        Self { u: T::zero(), du: vec![T::zero(); dims], d2u: vec![T::zero(); dims] }
    }

    pub fn dims(&self) -> usize {
        self.du.len()
    }
}

impl<T: Real, S: Scalar<T>> From<&Jet<S>> for DerivativeBundle<T> {
    fn from(j: &Jet<S>) -> Self {
        DerivativeBundle {
            u: j.v.value(),
            du: j.d.iter().map(Scalar::value).collect(),
            d2u: j.dd.iter().map(Scalar::value).collect(),
        }
    }
}
