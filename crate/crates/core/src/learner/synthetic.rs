use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{episode_sr, EpisodeOutcome, SrRule};

/// Optional dense episode reward: `scale · x + noise · N(0, 1)` where `x` is
/// the proficiency on the trained task.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseReward {
    pub scale: f64,
    pub noise: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticModel {
    /// Per-task success probability.
    pub proficiency: Vec<f64>,
    /// `transfer[i][j]`: how much training on `i` improves `j`.
    pub transfer: Vec<Vec<f64>>,
    pub learn_rate: f64,
    pub forget_rate: f64,
    pub dense_reward: Option<DenseReward>,
}

impl SyntheticModel {
    /// Two tasks: the easy one learns four times faster than the hard one
    /// and gives mild positive transfer to it.
    pub fn easy_hard() -> Self {
        Self {
            proficiency: vec![0.0, 0.0],
            transfer: vec![vec![0.8, 0.05], vec![0.0, 0.2]],
            learn_rate: 0.1,
            forget_rate: 0.0,
            dense_reward: None,
        }
    }

    pub fn n_tasks(&self) -> usize {
        self.proficiency.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.proficiency.len();
        if n == 0 {
            return Err(Error::config("proficiency", "needs at least one task"));
        }
        if self.proficiency.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::config("proficiency", "entries must lie in [0, 1]"));
        }
        if self.transfer.len() != n || self.transfer.iter().any(|row| row.len() != n) {
            return Err(Error::config("transfer", format!("must be a {n}×{n} matrix")));
        }
        if self.transfer.iter().flatten().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::config("transfer", "entries must be finite and nonnegative"));
        }
        if (0..n).any(|i| self.transfer[i][i] <= 0.0) {
            return Err(Error::config("transfer", "diagonal entries must be positive"));
        }
        if !(self.learn_rate.is_finite() && self.learn_rate > 0.0) {
            return Err(Error::config("learn_rate", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.forget_rate) {
            return Err(Error::config("forget_rate", "must lie in [0, 1)"));
        }
        if let Some(d) = self.dense_reward {
            if !(d.scale.is_finite() && d.noise.is_finite() && d.noise >= 0.0) {
                return Err(Error::config("dense_reward", "scale must be finite and noise nonnegative"));
            }
        }
        Ok(())
    }
}

/// Learner whose per-task success probability follows a saturating update
/// with cross-task transfer and forgetting.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticLearner {
    model: SyntheticModel,
}

impl SyntheticLearner {
    pub fn new(model: SyntheticModel) -> Result<Self> {
        model.validate()?;
        Ok(Self { model })
    }

    pub fn proficiency(&self) -> &[f64] {
        &self.model.proficiency
    }

    pub fn model(&self) -> &SyntheticModel {
        &self.model
    }

    /// Plays `k` episodes at the current proficiency of `task`, then applies
    /// one learning step on `task`.
    pub fn train_stage<R: Rng + ?Sized>(&mut self, task: usize, k: usize, rng: &mut R) -> Result<Vec<EpisodeOutcome>> {
        if task >= self.model.n_tasks() {
            return Err(Error::InvalidInput(format!("task {task} out of range")));
        }
        let x = self.model.proficiency[task];
        let outcomes = (0..k)
            .map(|_| {
                let success = rng.random::<f64>() < x;
                let total_reward = match self.model.dense_reward {
                    Some(d) => d.scale * x + d.noise * rng.sample::<f64, _>(StandardNormal),
                    None => success as u8 as f64,
                };
                EpisodeOutcome {
                    per_agent_reached: vec![success],
                    total_reward,
                    steps_used: 1,
                    truncated: false,
                }
            })
            .collect();
        self.learn(task);
        Ok(outcomes)
    }

    /// [`train_stage`](Self::train_stage) reduced to binary SRs.
    pub fn train_stage_srs<R: Rng + ?Sized>(&mut self, task: usize, k: usize, rule: SrRule, rng: &mut R) -> Result<Vec<u8>> {
        Ok(self
            .train_stage(task, k, rng)?
            .iter()
            .map(|o| episode_sr(o, rule))
            .collect())
    }

    /// `x_j += η·W[task][j]·(1 − x_j)` for every `j`, then `x_j *= 1 − λ`
    /// for `j ≠ task`, clamped to `[0, 1]`.
    pub fn learn(&mut self, task: usize) {
        let SyntheticModel {
            proficiency,
            transfer,
            learn_rate,
            forget_rate,
            ..
        } = &mut self.model;
        for (j, x) in proficiency.iter_mut().enumerate() {
            *x += *learn_rate * transfer[task][j] * (1.0 - *x);
            if j != task {
                *x *= 1.0 - *forget_rate;
            }
            *x = x.clamp(0.0, 1.0);
        }
    }
}
