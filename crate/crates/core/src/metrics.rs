//! Episode success rate (SR) rules and their aggregates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Raw result of one training episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    /// One flag per agent; an agent that reached its goal before the step
    /// limit counts even if the episode later truncated.
    pub per_agent_reached: Vec<bool>,
    pub total_reward: f64,
    pub steps_used: usize,
    pub truncated: bool,
}

impl EpisodeOutcome {
    /// Fraction of agents that reached their goals.
    pub fn individual_sr(&self) -> f64 {
        if self.per_agent_reached.is_empty() {
            return 0.0;
        }
        let reached = self.per_agent_reached.iter().filter(|r| **r).count();
        reached as f64 / self.per_agent_reached.len() as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SrRule {
    /// Cooperative success: every agent reached its goal.
    GoalAllAgents,
    /// Success iff the episode reward is strictly above `sr_min`.
    RewardThreshold { sr_min: f64 },
}

impl SrRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SrRule::RewardThreshold { sr_min } if !sr_min.is_finite() => {
                Err(Error::config("sr_min", format!("{sr_min} is not finite")))
            }
            _ => Ok(()),
        }
    }
}

pub fn episode_sr(outcome: &EpisodeOutcome, rule: SrRule) -> u8 {
    let success = match rule {
        SrRule::GoalAllAgents => outcome.per_agent_reached.iter().all(|r| *r),
        SrRule::RewardThreshold { sr_min } => outcome.total_reward > sr_min,
    };
    success as u8
}

/// Arithmetic mean of binary episode SRs, computed as `count / len` so the
/// result only depends on how many successes there were.
pub fn mean_sr(srs: &[u8]) -> Result<f64> {
    if srs.is_empty() {
        return Err(Error::InvalidInput("mean SR of zero episodes".into()));
    }
    if let Some(v) = srs.iter().find(|v| **v > 1) {
        return Err(Error::InvalidInput(format!("episode SR {v} is not binary")));
    }
    let successes = srs.iter().filter(|v| **v == 1).count();
    Ok(successes as f64 / srs.len() as f64)
}
