//! Multi-view stacking for binary classification.
//!
//! Each view (a disjoint block of features) gets its own cross-validated
//! logistic ridge base learner. The out-of-fold base predictions form a
//! matrix `Z` with one column per view, and a meta-learner fit on `Z`
//! decides which views enter the final model. Seven meta-learners are
//! provided, all with nonnegative coefficients.

pub mod dataset;
pub mod error;
pub mod glm;
pub mod harness;
pub mod meta;
pub mod metrics;
pub mod numerics;
pub mod scalar;
pub mod simulation;
pub mod stacking;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Dense matrix over `f64`, the precision used by the pipeline modules.
pub type Matrix = numerics::DenseMatrix<f64>;
pub type GlmFit = glm::GlmFit<f64>;
pub type PenaltySpec = glm::PenaltySpec<f64>;
pub type LambdaPath = glm::LambdaPath<f64>;
