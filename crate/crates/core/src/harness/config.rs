//! Experiment configuration and its TOML file schema.
//!
//! ```toml
//! name = "two-task-synthetic"
//! seeds = [1, 2, 3]
//! output_dir = "runs/two-task-synthetic"
//!
//! [scheduler]
//! kind = "sitp"            # sitp | tscl | uniform
//! window_length = 10       # tscl only
//! alpha = 0.5
//! episodes_per_stage = 32
//! max_sr = 0.95
//! min_score = -2.0
//! iterations = 200
//!
//! [sr_rule]
//! kind = "goal_all_agents" # or "reward_threshold" with `sr_min`
//!
//! [learner]
//! kind = "synthetic"       # or "tabular"
//! learn_rate = 0.1
//! forget_rate = 0.0
//! transfer = [[0.8, 0.05], [0.0, 0.2]]
//!
//! [[tasks]]
//! name = "easy"
//! [[tasks]]
//! name = "hard"
//! ```
//!
//! Tabular tasks carry an `[tasks.env]` table with either `size` and
//! `obstacle_density` or `map_file`, plus `n_agents`, `max_steps` and
//! `obs_radius`. Unknown keys anywhere are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::{EnvConfig, GridMap, MapSource};
use crate::learner::{DenseReward, SyntheticModel, TabularConfig};
use crate::metrics::SrRule;
use crate::scheduler::{SchedulerConfig, SchedulerKind};

pub const DEFAULT_TSCL_WINDOW: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum LearnerSpec {
    Synthetic(SyntheticModel),
    Tabular(TabularConfig),
}

/// One schedulable task. Synthetic tasks are identified by index alone;
/// tabular tasks carry the environment distribution they sample from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskDescriptor {
    pub name: String,
    pub env: Option<EnvConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub scheduler: SchedulerConfig,
    pub kind: SchedulerKind,
    pub learner: LearnerSpec,
    pub tasks: Vec<TaskDescriptor>,
    pub sr_rule: SrRule,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base).map_err(|e| match e {
            Error::ConfigParse { reason, .. } => Error::ConfigParse {
                path: path.to_path_buf(),
                reason,
            },
            other => other,
        })
    }

    /// Parses and validates a config document. Relative `map_file` paths are
    /// resolved against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::ConfigParse {
            path: PathBuf::from("<inline>"),
            reason: e.to_string(),
        })?;
        let config = file.into_config(base_dir)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "at least one seed is required"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::config("seeds", "seeds must be distinct"));
        }
        if self.tasks.is_empty() {
            return Err(Error::config("tasks", "at least one task is required"));
        }
        if self.scheduler.n_tasks != self.tasks.len() {
            return Err(Error::config(
                "scheduler.n_tasks",
                format!("{} does not match {} tasks", self.scheduler.n_tasks, self.tasks.len()),
            ));
        }
        self.scheduler.validate()?;
        self.kind.validate()?;
        self.sr_rule.validate()?;
        match &self.learner {
            LearnerSpec::Synthetic(model) => {
                model.validate()?;
                if model.n_tasks() != self.tasks.len() {
                    return Err(Error::config(
                        "learner.transfer",
                        format!("model has {} tasks, config lists {}", model.n_tasks(), self.tasks.len()),
                    ));
                }
                if let Some(t) = self.tasks.iter().find(|t| t.env.is_some()) {
                    return Err(Error::config(
                        format!("tasks.{}.env", t.name),
                        "synthetic tasks take no environment",
                    ));
                }
            }
            LearnerSpec::Tabular(cfg) => {
                cfg.validate()?;
                for t in &self.tasks {
                    t.env
                        .as_ref()
                        .ok_or_else(|| Error::config(format!("tasks.{}.env", t.name), "tabular tasks need an environment"))?
                        .validate()
                        .map_err(|e| prefix_field(e, &format!("tasks.{}.env", t.name)))?;
                }
            }
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON form of everything except
    /// `output_dir`.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        let json = serde_json::to_vec(&canonical).expect("config serializes");
        let digest = Sha256::digest(&json);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Identifies the method in summaries: the scheduler label.
    pub fn label(&self) -> &'static str {
        self.kind.label()
    }
}

fn prefix_field(err: Error, prefix: &str) -> Error {
    match err {
        Error::InvalidConfig { field, reason } => Error::InvalidConfig {
            field: format!("{prefix}.{field}"),
            reason,
        },
        other => other,
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    name: Option<String>,
    seeds: Vec<u64>,
    output_dir: PathBuf,
    scheduler: SchedulerSection,
    sr_rule: SrRuleSection,
    learner: LearnerSection,
    tasks: Vec<TaskSection>,
}

#[derive(Deserialize, Clone, Copy)]
#[serde(rename_all = "lowercase")]
enum KindName {
    Sitp,
    Tscl,
    Uniform,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SchedulerSection {
    kind: KindName,
    window_length: Option<usize>,
    alpha: Option<f64>,
    episodes_per_stage: Option<usize>,
    max_sr: Option<f64>,
    min_score: Option<f64>,
    iterations: usize,
}

#[derive(Deserialize)]
#[serde(rename_all = "snake_case")]
enum SrRuleName {
    GoalAllAgents,
    RewardThreshold,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SrRuleSection {
    kind: SrRuleName,
    sr_min: Option<f64>,
}

#[derive(Deserialize)]
#[serde(rename_all = "lowercase")]
enum LearnerName {
    Synthetic,
    Tabular,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LearnerSection {
    kind: LearnerName,
    // synthetic
    learn_rate: Option<f64>,
    forget_rate: Option<f64>,
    transfer: Option<Vec<Vec<f64>>>,
    initial_proficiency: Option<Vec<f64>>,
    dense_reward: Option<DenseRewardSection>,
    // tabular
    epsilon_start: Option<f64>,
    epsilon_min: Option<f64>,
    epsilon_decay: Option<f64>,
    learning_rate: Option<f64>,
    discount: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DenseRewardSection {
    scale: f64,
    noise: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskSection {
    name: String,
    env: Option<EnvSection>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvSection {
    size: Option<usize>,
    obstacle_density: Option<f64>,
    map_file: Option<PathBuf>,
    n_agents: usize,
    max_steps: Option<usize>,
    obs_radius: Option<usize>,
}

fn reject_present<T>(value: &Option<T>, field: &str, context: &str) -> Result<()> {
    match value {
        Some(_) => Err(Error::config(field, format!("not valid for {context}"))),
        None => Ok(()),
    }
}

impl ConfigFile {
    fn into_config(self, base_dir: &Path) -> Result<ExperimentConfig> {
        let n_tasks = self.tasks.len();
        let s = self.scheduler;
        let kind = match s.kind {
            KindName::Sitp => SchedulerKind::Sitp,
            KindName::Tscl => SchedulerKind::Tscl {
                window_length: s.window_length.unwrap_or(DEFAULT_TSCL_WINDOW),
            },
            KindName::Uniform => SchedulerKind::Uniform,
        };
        if !matches!(s.kind, KindName::Tscl) {
            reject_present(&s.window_length, "scheduler.window_length", "non-tscl schedulers")?;
        }
        let scheduler = SchedulerConfig {
            n_tasks,
            alpha: s.alpha.unwrap_or(SchedulerConfig::DEFAULT_ALPHA),
            episodes_per_stage: s.episodes_per_stage.unwrap_or(SchedulerConfig::DEFAULT_EPISODES_PER_STAGE),
            max_sr: s.max_sr.unwrap_or(SchedulerConfig::DEFAULT_MAX_SR),
            min_score: s.min_score.unwrap_or(SchedulerConfig::DEFAULT_MIN_SCORE),
            iterations: s.iterations,
        };

        let sr_rule = match self.sr_rule.kind {
            SrRuleName::GoalAllAgents => {
                reject_present(&self.sr_rule.sr_min, "sr_rule.sr_min", "goal_all_agents")?;
                SrRule::GoalAllAgents
            }
            SrRuleName::RewardThreshold => SrRule::RewardThreshold {
                sr_min: self
                    .sr_rule
                    .sr_min
                    .ok_or_else(|| Error::config("sr_rule.sr_min", "required for reward_threshold"))?,
            },
        };

        let l = self.learner;
        let learner = match l.kind {
            LearnerName::Synthetic => {
                let ctx = "synthetic learners";
                reject_present(&l.epsilon_start, "learner.epsilon_start", ctx)?;
                reject_present(&l.epsilon_min, "learner.epsilon_min", ctx)?;
                reject_present(&l.epsilon_decay, "learner.epsilon_decay", ctx)?;
                reject_present(&l.learning_rate, "learner.learning_rate", ctx)?;
                reject_present(&l.discount, "learner.discount", ctx)?;
                let transfer = l
                    .transfer
                    .ok_or_else(|| Error::config("learner.transfer", "required for synthetic learners"))?;
                LearnerSpec::Synthetic(SyntheticModel {
                    proficiency: l.initial_proficiency.unwrap_or_else(|| vec![0.0; transfer.len()]),
                    transfer,
                    learn_rate: l
                        .learn_rate
                        .ok_or_else(|| Error::config("learner.learn_rate", "required for synthetic learners"))?,
                    forget_rate: l.forget_rate.unwrap_or(0.0),
                    dense_reward: l.dense_reward.map(|d| DenseReward {
                        scale: d.scale,
                        noise: d.noise,
                    }),
                })
            }
            LearnerName::Tabular => {
                let ctx = "tabular learners";
                reject_present(&l.learn_rate, "learner.learn_rate", ctx)?;
                reject_present(&l.forget_rate, "learner.forget_rate", ctx)?;
                reject_present(&l.transfer, "learner.transfer", ctx)?;
                reject_present(&l.initial_proficiency, "learner.initial_proficiency", ctx)?;
                reject_present(&l.dense_reward, "learner.dense_reward", ctx)?;
                let d = TabularConfig::default();
                LearnerSpec::Tabular(TabularConfig {
                    epsilon_start: l.epsilon_start.unwrap_or(d.epsilon_start),
                    epsilon_min: l.epsilon_min.unwrap_or(d.epsilon_min),
                    epsilon_decay: l.epsilon_decay.unwrap_or(d.epsilon_decay),
                    learning_rate: l.learning_rate.unwrap_or(d.learning_rate),
                    discount: l.discount.unwrap_or(d.discount),
                })
            }
        };

        let tasks = self
            .tasks
            .into_iter()
            .map(|t| {
                let env = t.env.map(|e| e.into_env(&t.name, base_dir)).transpose()?;
                Ok(TaskDescriptor { name: t.name, env })
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(ExperimentConfig {
            name: self.name.unwrap_or_else(|| "experiment".into()),
            scheduler,
            kind,
            learner,
            tasks,
            sr_rule,
            seeds: self.seeds,
            output_dir: self.output_dir,
        })
    }
}

impl EnvSection {
    fn into_env(self, task: &str, base_dir: &Path) -> Result<EnvConfig> {
        let field = |f: &str| format!("tasks.{task}.env.{f}");
        let (map_source, extent) = match (self.size, self.obstacle_density, self.map_file) {
            (Some(size), density, None) => (
                MapSource::Procedural {
                    size,
                    obstacle_density: density.unwrap_or(0.0),
                },
                size,
            ),
            (None, None, Some(path)) => {
                let path = if path.is_relative() { base_dir.join(path) } else { path };
                let text = std::fs::read_to_string(&path).map_err(|e| Error::config(field("map_file"), format!("{}: {e}", path.display())))?;
                let mut map = GridMap::parse_movingai(&text)
                    .map_err(|e| Error::config(field("map_file"), format!("{}: {e}", path.display())))?;
                map.name = path.display().to_string();
                let extent = map.height().max(map.width());
                (MapSource::Fixed(map), extent)
            }
            (None, Some(_), _) => return Err(Error::config(field("obstacle_density"), "requires `size`")),
            (Some(_), _, Some(_)) => return Err(Error::config(field("map_file"), "conflicts with `size`")),
            (None, None, None) => return Err(Error::config(field("size"), "either `size` or `map_file` is required")),
        };
        Ok(EnvConfig {
            map_source,
            n_agents: self.n_agents,
            max_steps: self.max_steps.unwrap_or_else(|| EnvConfig::default_max_steps(extent)),
            obs_radius: self.obs_radius.unwrap_or(EnvConfig::DEFAULT_OBS_RADIUS),
            seed: 0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
name = "t"
seeds = [1, 2]
output_dir = "out"

[scheduler]
kind = "sitp"
iterations = 5

[sr_rule]
kind = "goal_all_agents"

[learner]
kind = "synthetic"
learn_rate = 0.1
transfer = [[0.8, 0.05], [0.0, 0.2]]

[[tasks]]
name = "easy"
[[tasks]]
name = "hard"
"#;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::from_toml_str(text, Path::new("."))
    }

    #[test]
    fn parses_with_defaults() {
        let cfg = parse(BASE).unwrap();
        assert_eq!(cfg.scheduler.n_tasks, 2);
        assert_eq!(cfg.scheduler.alpha, 0.5);
        assert_eq!(cfg.scheduler.episodes_per_stage, 32);
        assert_eq!(cfg.scheduler.max_sr, 0.95);
        assert_eq!(cfg.scheduler.min_score, -2.0);
        assert_eq!(cfg.kind, SchedulerKind::Sitp);
        match &cfg.learner {
            LearnerSpec::Synthetic(m) => assert_eq!(m, &SyntheticModel::easy_hard()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_errors() {
        let text = BASE.replace("iterations = 5", "iterations = 5\nalpah = 0.3");
        assert!(matches!(parse(&text), Err(Error::ConfigParse { .. })));
        let text = BASE.replace("name = \"easy\"", "name = \"easy\"\ncolour = 1");
        assert!(parse(&text).is_err());
    }

    #[test]
    fn field_errors_name_the_field() {
        let cases = [
            (BASE.replace("seeds = [1, 2]", "seeds = []"), "seeds"),
            (BASE.replace("seeds = [1, 2]", "seeds = [3, 3]"), "seeds"),
            (BASE.replace("iterations = 5", "iterations = 5\nalpha = 2.0"), "alpha"),
            (BASE.replace("iterations = 5", "iterations = 5\nwindow_length = 4"), "scheduler.window_length"),
            (BASE.replace("kind = \"sitp\"", "kind = \"tscl\"\nwindow_length = 1"), "window_length"),
            (BASE.replace("[[0.8, 0.05], [0.0, 0.2]]", "[[0.8]]"), "learner.transfer"),
            (BASE.replace("kind = \"goal_all_agents\"", "kind = \"reward_threshold\""), "sr_rule.sr_min"),
            (BASE.replace("learn_rate = 0.1", "learn_rate = 0.1\ndiscount = 0.9"), "learner.discount"),
        ];
        for (text, field) in cases {
            match parse(&text) {
                Err(Error::InvalidConfig { field: f, .. }) => assert_eq!(f, field, "{text}"),
                other => panic!("{field}: {other:?}"),
            }
        }
    }

    #[test]
    fn tabular_tasks_need_envs() {
        let text = BASE
            .replace("kind = \"synthetic\"\nlearn_rate = 0.1\ntransfer = [[0.8, 0.05], [0.0, 0.2]]", "kind = \"tabular\"")
            .replace("name = \"easy\"", "name = \"easy\"\nenv = { size = 8, obstacle_density = 0.05, n_agents = 2 }");
        match parse(&text) {
            Err(Error::InvalidConfig { field, .. }) => assert_eq!(field, "tasks.hard.env"),
            other => panic!("{other:?}"),
        }
        let text = text.replace("name = \"hard\"", "name = \"hard\"\nenv = { size = 8, obstacle_density = 1.0, n_agents = 2 }");
        match parse(&text) {
            Err(Error::InvalidConfig { field, .. }) => assert_eq!(field, "tasks.hard.env.obstacle_density"),
            other => panic!("{other:?}"),
        }
        let text = text.replace("obstacle_density = 1.0", "obstacle_density = 0.3");
        let cfg = parse(&text).unwrap();
        let env = cfg.tasks[1].env.as_ref().unwrap();
        assert_eq!(env.max_steps, 64);
        assert_eq!(env.obs_radius, 2);
    }

    #[test]
    fn map_files_resolve_relative_to_config() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("tiny.map"), "type octile\nheight 3\nwidth 3\nmap\n...\n.@.\n...\n").unwrap();
        let text = BASE
            .replace("kind = \"synthetic\"\nlearn_rate = 0.1\ntransfer = [[0.8, 0.05], [0.0, 0.2]]", "kind = \"tabular\"")
            .replace("name = \"easy\"", "name = \"easy\"\nenv = { map_file = \"tiny.map\", n_agents = 1 }")
            .replace("name = \"hard\"", "name = \"hard\"\nenv = { size = 4, n_agents = 1 }");
        let cfg = ExperimentConfig::from_toml_str(&text, dir.path()).unwrap();
        match &cfg.tasks[0].env.as_ref().unwrap().map_source {
            MapSource::Fixed(map) => assert!(map.is_obstacle((1, 1))),
            other => panic!("{other:?}"),
        }
        let missing = text.replace("tiny.map", "nope.map");
        assert!(ExperimentConfig::from_toml_str(&missing, dir.path()).is_err());
    }

    #[test]
    fn hash_ignores_output_dir() {
        let a = parse(BASE).unwrap();
        let mut b = a.clone();
        b.output_dir = "elsewhere".into();
        assert_eq!(a.hash(), b.hash());
        b.seeds.push(9);
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
