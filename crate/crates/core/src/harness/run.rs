use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, LearnerSpec};
use super::records::{CsvSink, StageRecord};
use crate::error::{Error, Result};
use crate::learner::{SyntheticLearner, TabularPolicy};
use crate::metrics::{episode_sr, EpisodeOutcome};
use crate::scheduler::SchedulerState;

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_FILE: &str = "manifest.json";

/// RNG stream used by the learner; the scheduler uses stream 0 of the same
/// seed, so task choices never perturb episode draws.
const LEARNER_STREAM: u64 = 1;

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Upper bound on seeds run in parallel; `None` lets the pool decide.
    pub jobs: Option<usize>,
}

pub fn seed_csv_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("seed_{seed}.csv"))
}

#[derive(Serialize)]
struct Manifest<'a> {
    artifact: &'static str,
    version: &'static str,
    config_hash: String,
    config: &'a ExperimentConfig,
}

pub fn write_manifest(config: &ExperimentConfig, dir: &Path) -> Result<()> {
    let manifest = Manifest {
        artifact: env!("CARGO_PKG_NAME"),
        version: ARTIFACT_VERSION,
        config_hash: config.hash(),
        config,
    };
    let path = dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| Error::io(path, e))
}

enum Learner {
    Synthetic(SyntheticLearner),
    Tabular(TabularPolicy),
}

impl Learner {
    fn new(spec: &LearnerSpec) -> Result<Self> {
        Ok(match spec {
            LearnerSpec::Synthetic(model) => Learner::Synthetic(SyntheticLearner::new(model.clone())?),
            LearnerSpec::Tabular(cfg) => Learner::Tabular(TabularPolicy::new(*cfg)?),
        })
    }

    fn train(&mut self, config: &ExperimentConfig, task: usize, rng: &mut ChaCha8Rng) -> Result<Vec<EpisodeOutcome>> {
        let k = config.scheduler.episodes_per_stage;
        match self {
            Learner::Synthetic(l) => l.train_stage(task, k, rng),
            Learner::Tabular(p) => {
                let env = config.tasks[task]
                    .env
                    .as_ref()
                    .ok_or_else(|| Error::InvalidInput(format!("task {task} has no environment")))?;
                p.train_stage(env, k, rng)
            }
        }
    }
}

/// Runs the training loop for one seed: `iterations` times sample a task,
/// train `k` episodes on it, record the stage. Each record is passed to
/// `sink` as soon as it exists.
pub fn run_seed(
    config: &ExperimentConfig,
    seed: u64,
    mut sink: impl FnMut(&StageRecord) -> Result<()>,
) -> Result<Vec<StageRecord>> {
    let mut scheduler = SchedulerState::new(config.scheduler.clone(), config.kind)?;
    let mut learner = Learner::new(&config.learner)?;
    let mut scheduler_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut learner_rng = ChaCha8Rng::seed_from_u64(seed);
    learner_rng.set_stream(LEARNER_STREAM);

    let mut records = Vec::with_capacity(config.scheduler.iterations);
    for iteration in 1..=config.scheduler.iterations {
        let task = scheduler.sample_task(&mut scheduler_rng);
        let outcomes = learner.train(config, task, &mut learner_rng)?;
        let srs: Vec<u8> = outcomes.iter().map(|o| episode_sr(o, config.sr_rule)).collect();
        let sr_new = scheduler.record_stage(task, &srs)?;
        let record = StageRecord::capture(seed, iteration, task, sr_new, &scheduler);
        if log::log_enabled!(log::Level::Debug) {
            let isr = outcomes.iter().map(EpisodeOutcome::individual_sr).sum::<f64>() / outcomes.len() as f64;
            log::debug!("seed {seed} iteration {iteration}: individual SR {isr:.3}");
        }
        log::info!("seed {seed} iteration {iteration} task {task} sr_new {sr_new:.4}");
        sink(&record)?;
        records.push(record);
    }
    Ok(records)
}

/// Runs every seed of `config` without touching the filesystem.
pub fn run_in_memory(config: &ExperimentConfig, options: RunOptions) -> Result<Vec<StageRecord>> {
    config.validate()?;
    run_seeds(config, options, |seed| run_seed(config, seed, |_| Ok(())))
}

/// Validates the config, writes the manifest, then runs all seeds (in
/// parallel up to `options.jobs`), streaming one CSV per seed into
/// `config.output_dir`. Records come back grouped by seed in config order.
pub fn run_experiment(config: &ExperimentConfig, options: RunOptions) -> Result<Vec<StageRecord>> {
    config.validate()?;
    let dir = &config.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_manifest(config, dir)?;
    run_seeds(config, options, |seed| {
        let path = seed_csv_path(dir, seed);
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut csv = CsvSink::new(BufWriter::new(file), config.tasks.len()).map_err(|e| Error::io(&path, e))?;
        run_seed(config, seed, |r| csv.push(r).map_err(|e| Error::io(&path, e)))
    })
}

fn run_seeds(
    config: &ExperimentConfig,
    options: RunOptions,
    job: impl Fn(u64) -> Result<Vec<StageRecord>> + Sync,
) -> Result<Vec<StageRecord>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start worker pool: {e}")))?;
    let per_seed: Vec<Vec<StageRecord>> =
        pool.install(|| config.seeds.par_iter().map(|seed| job(*seed)).collect::<Result<_>>())?;
    Ok(per_seed.into_iter().flatten().collect())
}
