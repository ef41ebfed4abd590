//! Task schedulers: success-induced task prioritization (SITP), a windowed
//! slope (TSCL) comparator, and uniform sampling.
//!
//! All three share one sampling path. Each task carries a score, the
//! scores are pushed through a softmax to get a distribution, and the next
//! task is drawn from that distribution by cumulative inversion. The kinds
//! differ only in how a finished stage turns into a new score:
//!
//! * SITP: `S ← α·S + (1−α)·|SR_new − SR_old|`, then `S ← min_score` when
//!   `SR_new > max_sr`.
//! * TSCL: `S ← |slope|` of an ordinary least-squares line through the last
//!   `window_length` stage success rates.
//! * Uniform: scores are never touched and the distribution stays `1/N`.

use std::collections::VecDeque;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics;

/// Lowest accepted `min_score`. Keeps `exp(min_score - 1)` a normal,
/// nonzero double so every task retains positive probability.
pub const MIN_SCORE_FLOOR: f64 = -700.0;

/// Per-task success-rate history is capped at `max(window_length, 64)`.
const HISTORY_FLOOR: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchedulerConfig {
    pub n_tasks: usize,
    /// Smoothing coefficient of the score EMA.
    pub alpha: f64,
    /// Episodes trained per stage (`k`).
    pub episodes_per_stage: usize,
    /// A stage mean SR strictly above this marks the task as solved.
    pub max_sr: f64,
    /// Score assigned to a solved task.
    pub min_score: f64,
    /// Number of scheduler stages (`M`).
    pub iterations: usize,
}

impl SchedulerConfig {
    pub const DEFAULT_ALPHA: f64 = 0.5;
    pub const DEFAULT_EPISODES_PER_STAGE: usize = 32;
    pub const DEFAULT_MAX_SR: f64 = 0.95;
    pub const DEFAULT_MIN_SCORE: f64 = -2.0;

    pub fn new(n_tasks: usize, iterations: usize) -> Self {
        Self {
            n_tasks,
            alpha: Self::DEFAULT_ALPHA,
            episodes_per_stage: Self::DEFAULT_EPISODES_PER_STAGE,
            max_sr: Self::DEFAULT_MAX_SR,
            min_score: Self::DEFAULT_MIN_SCORE,
            iterations,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_tasks == 0 {
            return Err(Error::config("n_tasks", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::config("alpha", format!("{} is outside [0, 1]", self.alpha)));
        }
        if self.episodes_per_stage == 0 {
            return Err(Error::config("episodes_per_stage", "must be at least 1"));
        }
        if !(self.max_sr > 0.0 && self.max_sr <= 1.0) {
            return Err(Error::config("max_sr", format!("{} is outside (0, 1]", self.max_sr)));
        }
        if !self.min_score.is_finite() || self.min_score > 1.0 {
            return Err(Error::config(
                "min_score",
                format!("{} must be finite and at most 1", self.min_score),
            ));
        }
        if self.min_score < MIN_SCORE_FLOOR {
            return Err(Error::config(
                "min_score",
                format!("{} is below the floor {MIN_SCORE_FLOOR}", self.min_score),
            ));
        }
        if self.iterations == 0 {
            return Err(Error::config("iterations", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SchedulerKind {
    Sitp,
    Tscl { window_length: usize },
    Uniform,
}

impl SchedulerKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SchedulerKind::Tscl { window_length } if window_length < 2 => Err(Error::config(
                "window_length",
                format!("{window_length} is below 2"),
            )),
            _ => Ok(()),
        }
    }

    /// Short lowercase label used in file names and summaries.
    pub fn label(&self) -> &'static str {
        match self {
            SchedulerKind::Sitp => "sitp",
            SchedulerKind::Tscl { .. } => "tscl",
            SchedulerKind::Uniform => "uniform",
        }
    }

    fn history_capacity(&self) -> usize {
        match *self {
            SchedulerKind::Tscl { window_length } => window_length.max(HISTORY_FLOOR),
            _ => HISTORY_FLOOR,
        }
    }
}

impl fmt::Display for SchedulerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskScoreState {
    pub score: f64,
    /// Mean SR of the previous stage on this task; 0 before the first stage.
    pub sr_old: f64,
    pub stages_seen: usize,
    /// Most recent stage mean SRs, oldest first.
    pub sr_history: VecDeque<f64>,
}

impl TaskScoreState {
    fn fresh() -> Self {
        Self {
            score: 0.0,
            sr_old: 0.0,
            stages_seen: 0,
            sr_history: VecDeque::new(),
        }
    }
}

/// A probability vector with strictly positive entries summing to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingDistribution(Vec<f64>);

impl SamplingDistribution {
    pub const SUM_TOLERANCE: f64 = 1e-9;

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("distribution over zero tasks".into()));
        }
        Ok(Self(vec![1.0 / n as f64; n]))
    }

    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let dist = Self(probs);
        dist.validate()?;
        Ok(dist)
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.is_empty() {
            return Err(Error::InvalidInput("empty distribution".into()));
        }
        if let Some(p) = self.0.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
            return Err(Error::InvalidInput(format!("probability {p} is not positive")));
        }
        let sum: f64 = self.0.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::InvalidInput(format!("probabilities sum to {sum}")));
        }
        Ok(())
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Draws an index by cumulative inversion: one uniform draw `u`, then
    /// the first index whose running sum exceeds `u`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut cumulative = 0.0;
        for (i, p) in self.0.iter().enumerate() {
            cumulative += p;
            if u < cumulative {
                return i;
            }
        }
        // rounding left the total a hair under u
        self.0.len() - 1
    }
}

/// Softmax over task scores, `p_i = exp(S_i) / Σ_j exp(S_j)`, evaluated
/// after subtracting the maximum score.
pub fn softmax_distribution(scores: &[f64]) -> Result<SamplingDistribution> {
    if scores.is_empty() {
        return Err(Error::InvalidInput("softmax of an empty score list".into()));
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite score {s}")));
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    SamplingDistribution::new(exps.into_iter().map(|e| e / total).collect())
}

/// Absolute OLS slope of the last `window_length` history points against
/// their positions `0, 1, ...`. Fewer than two points score 0.
pub fn tscl_score(sr_history: &[f64], window_length: usize) -> f64 {
    let window = &sr_history[sr_history.len().saturating_sub(window_length)..];
    let n = window.len();
    if n < 2 {
        return 0.0;
    }
    let mean_x = (n - 1) as f64 / 2.0;
    let mean_y = window.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in window.iter().enumerate() {
        let dx = i as f64 - mean_x;
        sxy += dx * (y - mean_y);
        sxx += dx * dx;
    }
    (sxy / sxx).abs()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchedulerState {
    config: SchedulerConfig,
    kind: SchedulerKind,
    tasks: Vec<TaskScoreState>,
    distribution: SamplingDistribution,
    stages: usize,
}

impl SchedulerState {
    /// Validates the configuration and starts every task at score 0 with a
    /// uniform distribution.
    pub fn new(config: SchedulerConfig, kind: SchedulerKind) -> Result<Self> {
        config.validate()?;
        kind.validate()?;
        let distribution = SamplingDistribution::uniform(config.n_tasks)?;
        Ok(Self {
            tasks: vec![TaskScoreState::fresh(); config.n_tasks],
            config,
            kind,
            distribution,
            stages: 0,
        })
    }

    pub fn config(&self) -> &SchedulerConfig {
        &self.config
    }

    pub fn kind(&self) -> SchedulerKind {
        self.kind
    }

    pub fn tasks(&self) -> &[TaskScoreState] {
        &self.tasks
    }

    pub fn distribution(&self) -> &SamplingDistribution {
        &self.distribution
    }

    /// Stages recorded so far.
    pub fn stages(&self) -> usize {
        self.stages
    }

    pub fn scores(&self) -> Vec<f64> {
        self.tasks.iter().map(|t| t.score).collect()
    }

    /// Consumes exactly one `f64` draw from `rng`.
    pub fn sample_task<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.distribution.sample(rng)
    }

    /// Folds one stage of `k` binary episode results on `task` into the
    /// task's score and refreshes the distribution. Returns the stage mean
    /// SR. Nothing is modified when the input is rejected.
    pub fn record_stage(&mut self, task: usize, episode_srs: &[u8]) -> Result<f64> {
        if task >= self.tasks.len() {
            return Err(Error::InvalidInput(format!(
                "task index {task} out of range for {} tasks",
                self.tasks.len()
            )));
        }
        if episode_srs.len() != self.config.episodes_per_stage {
            return Err(Error::InvalidInput(format!(
                "expected {} episode results, got {}",
                self.config.episodes_per_stage,
                episode_srs.len()
            )));
        }
        let sr_new = metrics::mean_sr(episode_srs)?;

        let capacity = self.kind.history_capacity();
        let alpha = self.config.alpha;
        let state = &mut self.tasks[task];
        state.sr_history.push_back(sr_new);
        while state.sr_history.len() > capacity {
            state.sr_history.pop_front();
        }
        match self.kind {
            SchedulerKind::Sitp => {
                state.score = alpha * state.score + (1.0 - alpha) * (sr_new - state.sr_old).abs();
                state.sr_old = sr_new;
                if sr_new > self.config.max_sr {
                    state.score = self.config.min_score;
                }
            }
            SchedulerKind::Tscl { window_length } => {
                state.score = tscl_score(state.sr_history.make_contiguous(), window_length);
                state.sr_old = sr_new;
            }
            SchedulerKind::Uniform => {
                state.sr_old = sr_new;
            }
        }
        state.stages_seen += 1;
        self.stages += 1;

        if self.kind != SchedulerKind::Uniform {
            self.distribution = softmax_distribution(&self.scores())?;
        }
        Ok(sr_new)
    }

    /// Mean over tasks of each task's latest stage SR, counting untrained
    /// tasks as 0.
    pub fn general_mean_sr(&self) -> f64 {
        self.tasks.iter().map(|t| t.sr_old).sum::<f64>() / self.tasks.len() as f64
    }
}
