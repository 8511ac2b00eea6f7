//! Physics-informed networks with asymptotic priors for singularly
//! perturbed problems, with finite-difference references.

pub mod autodiff;
pub mod error;
pub mod eval;
pub mod fdm;
pub mod models;
pub mod networks;
pub mod problems;
pub mod real;
pub mod sampling;
pub mod training;

pub use error::{Error, Result};
pub use real::Real;

/// Double-precision instances of the generic types.
pub type Model64 = models::Model<f64>;
pub type ProblemSpec64 = problems::ProblemSpec<f64>;
pub type NetworkParams64 = networks::NetworkParams<f64>;
pub type TrainOutcome64 = training::TrainOutcome<f64>;
pub type GridSolution64 = fdm::GridSolution<f64>;
pub type TestSet64 = eval::TestSet<f64>;
pub type ErrorField64 = eval::ErrorField<f64>;

/// Single-precision instances.
pub type Model32 = models::Model<f32>;
pub type ProblemSpec32 = problems::ProblemSpec<f32>;
