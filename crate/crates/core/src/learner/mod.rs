//! Learners that turn a scheduled task into per-episode outcomes.

mod synthetic;
mod tabular;

pub use synthetic::{DenseReward, SyntheticLearner, SyntheticModel};
pub use tabular::{TabularConfig, TabularPolicy};
