use std::path::Path;

use sitp::harness::{
    self, by_seed, read_run_dir, summarize, ExperimentConfig, LearnerSpec, RunOptions, StageRecord,
};
use sitp::learner::SyntheticModel;
use sitp::{SchedulerKind, SchedulerState, SrRule};

fn preset(name: &str) -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets").join(name);
    ExperimentConfig::load(&path).unwrap()
}

fn small_two_task() -> ExperimentConfig {
    let mut c = preset("two-task-synthetic.toml");
    c.seeds = vec![3, 1, 4];
    c.scheduler.iterations = 60;
    c
}

#[test]
fn presets_load_and_two_task_matches_reference_model() {
    let c = preset("two-task-synthetic.toml");
    assert_eq!(c.learner, LearnerSpec::Synthetic(SyntheticModel::easy_hard()));
    assert_eq!(c.seeds.len(), 10);
    assert_eq!((c.scheduler.iterations, c.scheduler.episodes_per_stage), (200, 32));

    let tab = preset("two-task-tabular-8x8.toml");
    let densities: Vec<_> = tab
        .tasks
        .iter()
        .map(|t| match &t.env.as_ref().unwrap().map_source {
            sitp::grid::MapSource::Procedural { size, obstacle_density } => (*size, *obstacle_density),
            other => panic!("unexpected map source {other:?}"),
        })
        .collect();
    assert_eq!(densities, [(8, 0.05), (8, 0.30)]);
    assert!(tab.tasks.iter().all(|t| t.env.as_ref().unwrap().n_agents == 8));

    let ten = preset("ten-task-synthetic.toml");
    assert_eq!(ten.tasks.len(), 10);
    let LearnerSpec::Synthetic(model) = &ten.learner else { panic!() };
    let own: Vec<f64> = (0..10).map(|i| model.transfer[i][i]).collect();
    assert!(own.windows(2).all(|w| w[0] > w[1]), "last task must be the hardest: {own:?}");

    let demo = preset("reward-threshold-demo.toml");
    assert!(matches!(demo.sr_rule, SrRule::RewardThreshold { .. }));
    let LearnerSpec::Synthetic(model) = &demo.learner else { panic!() };
    assert!(model.dense_reward.is_some());
}

#[test]
fn one_record_per_iteration_per_seed() {
    let c = small_two_task();
    let records = harness::run_in_memory(&c, RunOptions::default()).unwrap();
    assert_eq!(records.len(), c.seeds.len() * c.scheduler.iterations);
    let grouped = by_seed(&records);
    for seed in &c.seeds {
        let iters: Vec<usize> = grouped[seed].iter().map(|r| r.iteration).collect();
        assert_eq!(iters, (1..=c.scheduler.iterations).collect::<Vec<_>>());
    }
}

/// Feeding each record's stage result back through a fresh scheduler
/// reproduces the logged scores. k = 32 makes every stage SR an exact
/// multiple of 1/32, so it maps back to a unique episode count.
#[test]
fn records_replay_to_identical_scores() {
    let mut c = small_two_task();
    for kind in [SchedulerKind::Sitp, SchedulerKind::Tscl { window_length: 10 }, SchedulerKind::Uniform] {
        c.kind = kind;
        let dir = tempfile::tempdir().unwrap();
        c.output_dir = dir.path().to_path_buf();
        harness::run_experiment(&c, RunOptions::default()).unwrap();
        let k = c.scheduler.episodes_per_stage;
        for (_, records) in by_seed(&read_run_dir(dir.path()).unwrap()) {
            let mut s = SchedulerState::new(c.scheduler.clone(), c.kind).unwrap();
            for r in &records {
                let ones = (r.sr_new * k as f64).round() as usize;
                let srs: Vec<u8> = (0..k).map(|i| (i < ones) as u8).collect();
                s.record_stage(r.task, &srs).unwrap();
                for (got, logged) in s.scores().iter().zip(&r.scores) {
                    assert!((got - logged).abs() <= 1e-8 * got.abs().max(1.0), "{kind}: {got} vs {logged}");
                }
                assert!((s.general_mean_sr() - r.general_mean_sr).abs() <= 1e-8);
            }
        }
    }
}

#[test]
fn summary_matches_brute_force_over_csv_files() {
    let mut c = small_two_task();
    let dir = tempfile::tempdir().unwrap();
    c.output_dir = dir.path().to_path_buf();
    harness::run_experiment(&c, RunOptions::default()).unwrap();
    let summary = summarize("sitp", &read_run_dir(dir.path()).unwrap(), 0.5).unwrap();

    // Independent pass over the raw text.
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for seed in &c.seeds {
        let text = std::fs::read_to_string(dir.path().join(format!("seed_{seed}.csv"))).unwrap();
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap().split(',').collect();
        let g = header.iter().position(|h| *h == "general_mean_sr").unwrap();
        columns.push(lines.map(|l| l.split(',').nth(g).unwrap().parse().unwrap()).collect());
    }
    let n = columns.len() as f64;
    for t in 0..c.scheduler.iterations {
        let vals: Vec<f64> = columns.iter().map(|col| col[t]).collect();
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((summary.mean[t] - mean).abs() <= 1e-9);
        assert!((summary.std[t] - var.sqrt()).abs() <= 1e-9);
    }
    for (seed, col) in c.seeds.iter().zip(&columns) {
        let first = col.iter().position(|g| *g >= 0.5).map(|i| i + 1);
        let idx = summary.seeds.iter().position(|s| s == seed).unwrap();
        assert_eq!(summary.stages_to_target[idx], first);
    }
}

#[test]
fn csv_layout_and_manifest() {
    let mut c = small_two_task();
    let dir = tempfile::tempdir().unwrap();
    c.output_dir = dir.path().join("nested/out");
    harness::run_experiment(&c, RunOptions { jobs: Some(2) }).unwrap();
    let text = std::fs::read_to_string(c.output_dir.join("seed_4.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "seed,iteration,task,sr_new,s_0,s_1,p_0,p_1,general_mean_sr");
    assert_eq!(text.lines().count(), c.scheduler.iterations + 1);

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(c.output_dir.join(harness::MANIFEST_FILE)).unwrap()).unwrap();
    assert_eq!(manifest["config_hash"], c.hash());
    assert_eq!(manifest["version"], harness::ARTIFACT_VERSION);
    assert_eq!(manifest["config"]["seeds"], serde_json::json!([3, 1, 4]));
}

#[test]
fn compare_rejects_mismatched_task_sets_and_duplicate_kinds() {
    let a = small_two_task();
    let mut b = a.clone();
    b.kind = SchedulerKind::Uniform;
    b.tasks[1].name = "other".into();
    let dir = tempfile::tempdir().unwrap();
    let err = harness::compare(&[a.clone(), b], 0.9, dir.path(), RunOptions::default()).unwrap_err();
    assert!(err.to_string().contains("tasks"), "{err}");
    let err = harness::compare(&[a.clone(), a], 0.9, dir.path(), RunOptions::default()).unwrap_err();
    assert!(err.to_string().contains("kind"), "{err}");
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0, "nothing written on error");
}

#[test]
fn identical_streams_give_identical_summaries() {
    let mut c = small_two_task();
    c.kind = SchedulerKind::Uniform;
    let run = || {
        let records: Vec<StageRecord> = harness::run_in_memory(&c, RunOptions::default()).unwrap();
        summarize("uniform", &records, 0.9).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn compare_writes_reports_with_valid_svg() {
    let base = small_two_task();
    let configs: Vec<_> = [SchedulerKind::Sitp, SchedulerKind::Uniform]
        .into_iter()
        .map(|kind| ExperimentConfig { kind, ..base.clone() })
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let summaries = harness::compare(&configs, 0.9, dir.path(), RunOptions::default()).unwrap();
    assert_eq!(summaries.len(), 2);
    for kind in ["sitp", "uniform"] {
        assert_eq!(read_run_dir(&dir.path().join(kind)).unwrap().len(), 3 * 60);
    }
    let svg = std::fs::read_to_string(dir.path().join(harness::PLOT_FILE)).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    let summary = std::fs::read_to_string(dir.path().join(harness::SUMMARY_FILE)).unwrap();
    assert_eq!(summary.lines().count(), 3);
}

#[test]
fn tabular_run_is_deterministic() {
    let mut c = preset("two-task-tabular-8x8.toml");
    c.seeds = vec![5];
    c.scheduler.iterations = 6;
    c.scheduler.episodes_per_stage = 4;
    let a = harness::run_in_memory(&c, RunOptions::default()).unwrap();
    let b = harness::run_in_memory(&c, RunOptions::default()).unwrap();
    assert_eq!(a, b);
    assert!(a.iter().all(|r| r.sr_new >= 0.0 && r.sr_new <= 1.0));
}
