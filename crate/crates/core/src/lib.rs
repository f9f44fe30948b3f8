//! Certified data deletion for convex empirical risk minimization.
//!
//! A model is trained with projected gradient descent and only ever released
//! with Gaussian noise. After each add or delete, a few warm-started descent
//! steps bring the hidden model close enough to what retraining would produce
//! that the two noisy releases are statistically indistinguishable.
//!
//! * [`losses`] and [`optimizer`]: loss families with certified constants and PGD.
//! * [`data`]: multiset datasets, update streams and generators.
//! * [`unlearn`]: the single-model pipeline and its noise calibration.
//! * [`distributed`]: bootstrap/partition variant with reservoir maintenance.
//! * [`harness`]: experiment runner, retraining baseline, certificate and reports.

pub mod data;
pub mod distributed;
mod error;
pub mod exec;
pub mod harness;
pub mod linalg;
pub mod losses;
pub mod mechanism;
pub mod optimizer;
pub mod rng;
pub mod unlearn;

pub use error::{Error, Result};
