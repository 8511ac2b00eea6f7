//! Reverse-mode scalar computational graph.

use std::cell::RefCell;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};


use super::scalar::{sigmoid, Scalar};
use crate::error::{Error, Result};
use crate::real::Real;

/// Primitive that produced a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    Input,
    Const,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Scale,
    Exp,
    Tanh,
    Sigmoid,
    Sin,
    Cos,
    Acos,
    Abs,
    Powi,
    Clamp,
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// One recorded value together with its local partials with respect to
/// at most two predecessors.
#[derive(Clone, Debug)]
pub struct ScalarNode<T> {
    pub op: Op,
    pub value: T,
    parents: [usize; 2],
    partials: [T; 2],
    arity: u8,
}

/// Append-only graph. Nodes are pushed in evaluation order, so the index
/// order is a topological order and the reverse sweep is a single backward
/// scan.
#[derive(Default)]
pub struct Tape<T> {
    nodes: RefCell<Vec<ScalarNode<T>>>,
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t, T: Real> {
    tape: &'t Tape<T>,
    index: usize,
    value: T,
}

impl<T: Real> fmt::Debug for Var<'_, T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var#{}({})", self.index, self.value)
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: RefCell::new(Vec::new()) }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Registers an independent variable (an input or a parameter).
    pub fn var(&self, value: T) -> Var<'_, T> {
        self.push(Op::Input, value, [0, 0], [T::zero(), T::zero()], 0)
    }

    pub fn vars(&self, values: &[T]) -> Vec<Var<'_, T>> {
        values.iter().map(|&v| self.var(v)).collect()
    }

    pub fn constant(&self, value: T) -> Var<'_, T> {
        self.push(Op::Const, value, [0, 0], [T::zero(), T::zero()], 0)
    }

    fn push(&self, op: Op, value: T, parents: [usize; 2], partials: [T; 2], arity: u8) -> Var<'_, T> {
        let mut nodes = self.nodes.borrow_mut();
        let index = nodes.len();
        nodes.push(ScalarNode { op, value, parents, partials, arity });
        Var { tape: self, index, value }
    }

    fn unary(&self, op: Op, a: &Var<'_, T>, value: T, da: T) -> Var<'_, T> {
        self.push(op, value, [a.index, 0], [da, T::zero()], 1)
    }

    fn binary(&self, op: Op, a: &Var<'_, T>, b: &Var<'_, T>, value: T, da: T, db: T) -> Var<'_, T> {
        self.push(op, value, [a.index, b.index], [da, db], 2)
    }

    /// Returns the first recorded node whose value or local partials are not
    /// finite.
    pub fn check_finite(&self) -> Result<()> {
        let nodes = self.nodes.borrow();
        for (index, node) in nodes.iter().enumerate() {
            let partials_ok = node.partials[..node.arity as usize].iter().all(|p| p.is_finite());
            if !node.value.is_finite() || !partials_ok {
                return Err(Error::NonFinite { op: node.op.to_string(), index });
            }
        }
        Ok(())
    }

    /// Adjoints of `output` with respect to every node recorded before it.
    pub fn gradient(&self, output: &Var<'_, T>) -> Gradient<T> {
        let nodes = self.nodes.borrow();
        let mut adjoints = vec![T::zero(); output.index + 1];
        adjoints[output.index] = T::one();
        for i in (0..=output.index).rev() {
            let adj = adjoints[i];
            if adj == T::zero() {
                continue;
            }
            let node = &nodes[i];
            for slot in 0..node.arity as usize {
                let p = node.parents[slot];
                adjoints[p] += adj * node.partials[slot];
            }
        }
        Gradient { adjoints }
    }
}

/// Adjoint vector produced by [`Tape::gradient`].
pub struct Gradient<T> {
    adjoints: Vec<T>,
}

impl<T: Real> Gradient<T> {
    /// Zero for variables recorded after the output or not connected to it.
    pub fn wrt(&self, v: &Var<'_, T>) -> T {
        self.adjoints.get(v.index).copied().unwrap_or_else(T::zero)
    }

    pub fn wrt_all(&self, vars: &[Var<'_, T>]) -> Vec<T> {
        vars.iter().map(|v| self.wrt(v)).collect()
    }
}

/// Gradient of a scalar loss with respect to a list of parameter variables.
/// Parameters the loss does not depend on get an exact zero.
pub fn param_gradient<T: Real>(loss: &Var<'_, T>, params: &[Var<'_, T>]) -> Vec<T> {
    loss.tape.gradient(loss).wrt_all(params)
}

impl<'t, T: Real> Var<'t, T> {
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn tape(&self) -> &'t Tape<T> {
        self.tape
    }
}

impl<'t, T: Real> Add for Var<'t, T> {
    type Output = Var<'t, T>;
    fn add(self, rhs: Self) -> Self::Output {
        self.tape.binary(Op::Add, &self, &rhs, self.value + rhs.value, T::one(), T::one())
    }
}

impl<'t, T: Real> Sub for Var<'t, T> {
    type Output = Var<'t, T>;
    fn sub(self, rhs: Self) -> Self::Output {
        self.tape.binary(Op::Sub, &self, &rhs, self.value - rhs.value, T::one(), -T::one())
    }
}

impl<'t, T: Real> Mul for Var<'t, T> {
    type Output = Var<'t, T>;
    fn mul(self, rhs: Self) -> Self::Output {
        self.tape.binary(Op::Mul, &self, &rhs, self.value * rhs.value, rhs.value, self.value)
    }
}

impl<'t, T: Real> Div for Var<'t, T> {
    type Output = Var<'t, T>;
    fn div(self, rhs: Self) -> Self::Output {
        let q = self.value / rhs.value;
        self.tape.binary(Op::Div, &self, &rhs, q, T::one() / rhs.value, -q / rhs.value)
    }
}

impl<'t, T: Real> Neg for Var<'t, T> {
    type Output = Var<'t, T>;
    fn neg(self) -> Self::Output {
        self.tape.unary(Op::Neg, &self, -self.value, -T::one())
    }
}

impl<'t, T: Real> Scalar<T> for Var<'t, T> {
    fn value(&self) -> T {
        self.value
    }

    fn lift(&self, c: T) -> Self {
        self.tape.constant(c)
    }

    fn scale(&self, c: T) -> Self {
        self.tape.unary(Op::Scale, self, self.value * c, c)
    }

    fn exp(&self) -> Self {
        let e = self.value.exp();
        self.tape.unary(Op::Exp, self, e, e)
    }

    fn tanh(&self) -> Self {
        let t = self.value.tanh();
        self.tape.unary(Op::Tanh, self, t, T::one() - t * t)
    }

    fn sigmoid(&self) -> Self {
        let s = sigmoid(self.value);
        self.tape.unary(Op::Sigmoid, self, s, s * (T::one() - s))
    }

    fn sin(&self) -> Self {
        self.tape.unary(Op::Sin, self, self.value.sin(), self.value.cos())
    }

    fn cos(&self) -> Self {
        self.tape.unary(Op::Cos, self, self.value.cos(), -self.value.sin())
    }

    fn acos(&self) -> Self {
        let x = self.value;
        let d = -T::one() / (T::one() - x * x).sqrt();
        self.tape.unary(Op::Acos, self, x.acos(), d)
    }

    fn abs(&self) -> Self {
        let x = self.value;
        let s = if x < T::zero() { -T::one() } else { T::one() };
        self.tape.unary(Op::Abs, self, x.abs(), s)
    }

    fn powi(&self, n: i32) -> Self {
        let x = self.value;
        let d = if n == 0 { T::zero() } else { T::from_i32(n).unwrap() * x.powi(n - 1) };
        self.tape.unary(Op::Powi, self, x.powi(n), d)
    }

    fn clamp_min(&self, floor: T) -> Self {
        if self.value < floor {
            self.tape.unary(Op::Clamp, self, floor, T::zero())
        } else {
            self.tape.unary(Op::Clamp, self, self.value, T::one())
        }
    }
}
