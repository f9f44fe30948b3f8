//! Perturbed projected gradient descent: learning, per-update unlearning and
//! Gaussian publishing, with noise and iteration calibration for each mode.

mod params;
mod state;

pub use params::{
    params_regularized_strong, params_weak, perfect_iteration_floor, perfect_schedule, sigma_perfect,
    sigma_strong, train_iterations, weak_schedule, Mode, Privacy, UnlearnConfig, UnlearnParams, WeakParams,
};
pub use state::{learn, publish, RoundOutcome, Snapshot, UnlearnState, SNAPSHOT_FORMAT};
