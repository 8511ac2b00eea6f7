use crate::error::{config, Error, Result};
use crate::real::Real;

/// Bias-corrected Adam moments.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub step: u64,
    pub beta1: T,
    pub beta2: T,
    pub eps_hat: T,
}

impl<T: Real> AdamState<T> {
    /// `β₁ = 0.9`, `β₂ = 0.999`, `ε̂ = 1e-8`.
    pub fn new(params: usize) -> Self {
        Self {
            m: vec![T::zero(); params],
            v: vec![T::zero(); params],
            step: 0,
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            eps_hat: T::lit(1e-8),
        }
    }

    /// Applies one update in place. A non-finite gradient leaves both the
    /// parameters and the moments untouched.
    pub fn step(&mut self, params: &mut [T], grad: &[T], lr: T, iteration: usize) -> Result<()> {
        if params.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(config(format!(
                "adam state holds {} moments, got {} parameters and {} gradient entries",
                self.m.len(),
                params.len(),
                grad.len()
            )));
        }
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::Diverged { what: format!("gradient entry {i}"), iteration });
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = T::one() - self.beta1.powi(t);
        let c2 = T::one() - self.beta2.powi(t);
        let (b1, b2) = (self.beta1, self.beta2);
        for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = b1 * *m + (T::one() - b1) * g;
            *v = b2 * *v + (T::one() - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + self.eps_hat);
        }
        Ok(())
    }
}
