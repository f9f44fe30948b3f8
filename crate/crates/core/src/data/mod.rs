//! Datasets with multiset semantics, update streams, and generators.

mod dataset;
mod generate;
mod updates;

pub use dataset::{Dataset, UpdateEffect};
pub use generate::{gen_adversarial_sequence, gen_synthetic_dataset, LabelKind, Model, Strategy, Synthetic, UpdateSpec};
pub use updates::{Op, Update, UpdateSequence, SequenceKind};
