use crate::error::{config, Result};
use crate::real::Real;

/// Residual-based attention multipliers, one per training point.
#[derive(Clone, Debug, PartialEq)]
pub struct RbaState<T> {
    pub alpha: Vec<T>,
}

impl<T: Real> RbaState<T> {
    /// All multipliers start at 1.
    pub fn new(points: usize) -> Self {
        Self { alpha: vec![T::one(); points] }
    }

    /// `α_i ← (1 − η)·α_i + η·|e_i| / max_j |e_j|`. Skipped when every
    /// residual is zero.
    pub fn update(&mut self, residuals: &[T], eta: T) -> Result<()> {
        if residuals.len() != self.alpha.len() {
            return Err(config(format!(
                "{} residuals for {} attention weights",
                residuals.len(),
                self.alpha.len()
            )));
        }
        let max = residuals.iter().fold(T::zero(), |m, e| m.max(e.abs()));
        if max == T::zero() || !max.is_finite() {
            return Ok(());
        }
        let keep = T::one() - eta;
        for (a, e) in self.alpha.iter_mut().zip(residuals) {
            *a = keep * *a + eta * (e.abs() / max);
        }
        Ok(())
    }
}
