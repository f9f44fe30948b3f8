//! Distributed perturbed gradient descent.
//!
//! Each of `C` copies holds a bootstrap sample of `B` points split into `K`
//! fixed partitions, one model per partition. Updates are absorbed by
//! reservoir edits of the sample, and only partitions whose contents changed
//! are re-optimized. The published model is the noisy average of the copy
//! whose average has the lowest empirical loss.

mod config;
mod reservoir;
mod state;

pub use config::{dist_params, DistConfig, DEFAULT_BOOTSTRAP_CEILING};
pub use reservoir::{reservoir_update, Change, PointId, PointStore};
pub use state::{dist_learn, dist_publish, select_best, CopyRound, DistRound, DistSnapshot, PartitionedState, DIST_SNAPSHOT_FORMAT};
