//! Supervised screening and regularized factor-based forecasting.
//!
//! Predictors are screened against the target, scaled by their predictive
//! coefficients, compressed by PCA, and the resulting factors are passed to a
//! Lasso. Static and dynamic (lagged) variants are provided, together with a
//! Monte Carlo harness for latent-factor data-generating processes.

pub mod error;
pub mod factors;
pub mod numerics;
pub mod pipeline;
pub mod scaling;
pub mod screening;
pub mod shrinkage;
pub mod simulation;
pub mod transform;

pub use error::{Error, Result};
pub use numerics::Matrix;
