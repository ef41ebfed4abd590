//! Curriculum scheduling toolkit built around success-induced task
//! prioritization: tasks are sampled from a softmax over smoothed absolute
//! changes in their per-stage success rate.
//!
//! The crate contains the schedulers ([`scheduler`]), success-rate rules
//! ([`metrics`]), a multi-agent grid pathfinding environment ([`grid`]),
//! a synthetic and a tabular Q-learning learner ([`learner`]), and the
//! seeded experiment harness that ties them together ([`harness`]).

pub mod error;
pub mod grid;
pub mod harness;
pub mod learner;
pub mod metrics;
pub mod scheduler;

pub use error::{Error, Result};
pub use metrics::{episode_sr, mean_sr, EpisodeOutcome, SrRule};
pub use scheduler::{
    softmax_distribution, tscl_score, SamplingDistribution, SchedulerConfig, SchedulerKind,
    SchedulerState, TaskScoreState,
};
