//! Robust small-area estimation of the Gini coefficient under unit-level
//! mixed models.
//!
//! The crate estimates an inequality functional (principally the Gini
//! coefficient) for small domains from a unit-level sample plus census
//! covariates. Outlier-robust model fits shrink tails, which biases
//! inequality measures downward; the estimators here add the bias back in a
//! controlled, asymmetric way:
//!
//! * [`fit`]: robustified nested-error regression ([`fit::reblup`]) and
//!   M-quantile regression ([`fit::mq`]);
//! * [`cdf`]: area-level distribution function estimators, from the naive
//!   plug-in to asymmetric bias calibration with pooled residuals;
//! * [`functional`]: the Gini functional, its pseudo-value linearisation and
//!   influence function, and the influence-function calibration engine;
//! * [`tuning`]: data-driven selection of the asymmetry parameter and a
//!   parametric-free bootstrap search over `(c, gamma)` grids;
//! * [`sim`]: population generators and the Monte Carlo harness;
//! * [`methods`]: a by-name registry of ready-made estimation pipelines.

pub mod cdf;
pub mod data;
pub mod error;
pub mod fit;
pub mod functional;
pub mod methods;
pub mod psi;
pub mod scale;
pub mod sim;
pub mod tuning;

pub use error::{Error, Result};
