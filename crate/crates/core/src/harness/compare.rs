use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::config::ExperimentConfig;
use super::records::{format_sig9, StageRecord};
use super::run::{run_experiment, RunOptions};
use super::svg::{line_chart, Series};
use crate::error::{Error, Result};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const PLOT_FILE: &str = "general_mean_sr.svg";

/// Cross-seed statistics of one method's general mean SR trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct MethodSummary {
    pub label: String,
    pub seeds: Vec<u64>,
    /// Per-iteration mean over seeds (index 0 is iteration 1).
    pub mean: Vec<f64>,
    /// Per-iteration sample standard deviation over seeds.
    pub std: Vec<f64>,
    pub target: f64,
    /// Per seed, first iteration whose general mean SR reached `target`.
    pub stages_to_target: Vec<Option<usize>>,
}

impl MethodSummary {
    /// Median of `stages_to_target`, treating seeds that never reached the
    /// target as infinitely slow. `None` when the median itself is infinite.
    pub fn median_stages_to_target(&self) -> Option<f64> {
        median_stages(&self.stages_to_target)
    }

    pub fn final_mean(&self) -> f64 {
        self.mean.last().copied().unwrap_or(0.0)
    }

    pub fn final_std(&self) -> f64 {
        self.std.last().copied().unwrap_or(0.0)
    }

    pub fn reached(&self) -> usize {
        self.stages_to_target.iter().flatten().count()
    }
}

pub fn median_stages(stages: &[Option<usize>]) -> Option<f64> {
    if stages.is_empty() {
        return None;
    }
    let mut v: Vec<f64> = stages
        .iter()
        .map(|s| s.map_or(f64::INFINITY, |s| s as f64))
        .collect();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let m = if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 };
    m.is_finite().then_some(m)
}

/// First iteration whose general mean SR is at least `target`.
pub fn stages_to_target(records: &[StageRecord], target: f64) -> Option<usize> {
    records.iter().find(|r| r.general_mean_sr >= target).map(|r| r.iteration)
}

/// Groups records by seed, preserving iteration order within each seed.
pub fn by_seed(records: &[StageRecord]) -> BTreeMap<u64, Vec<StageRecord>> {
    let mut map: BTreeMap<u64, Vec<StageRecord>> = BTreeMap::new();
    for r in records {
        map.entry(r.seed).or_default().push(r.clone());
    }
    for v in map.values_mut() {
        v.sort_by_key(|r| r.iteration);
    }
    map
}

pub fn summarize(label: &str, records: &[StageRecord], target: f64) -> Result<MethodSummary> {
    let runs = by_seed(records);
    let Some(iterations) = runs.values().map(Vec::len).next() else {
        return Err(Error::InvalidInput(format!("no records for `{label}`")));
    };
    if runs.values().any(|r| r.len() != iterations) {
        return Err(Error::InvalidInput(format!("`{label}` seeds have unequal run lengths")));
    }
    let n = runs.len() as f64;
    let mut mean = Vec::with_capacity(iterations);
    let mut std = Vec::with_capacity(iterations);
    for t in 0..iterations {
        let m = runs.values().map(|r| r[t].general_mean_sr).sum::<f64>() / n;
        let var = if runs.len() > 1 {
            runs.values().map(|r| (r[t].general_mean_sr - m).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        mean.push(m);
        std.push(var.sqrt());
    }
    Ok(MethodSummary {
        label: label.to_string(),
        seeds: runs.keys().copied().collect(),
        stages_to_target: runs.values().map(|r| stages_to_target(r, target)).collect(),
        mean,
        std,
        target,
    })
}

pub fn summary_csv(summaries: &[MethodSummary]) -> String {
    let mut out = String::from(
        "method,seeds,iterations,final_mean_general_sr,final_std_general_sr,target,median_stages_to_target,seeds_reaching_target\n",
    );
    for s in summaries {
        let median = s.median_stages_to_target().map_or("never".to_string(), format_sig9);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            s.label,
            s.seeds.len(),
            s.mean.len(),
            format_sig9(s.final_mean()),
            format_sig9(s.final_std()),
            format_sig9(s.target),
            median,
            s.reached()
        );
    }
    out
}

pub fn trajectory_csv(summaries: &[MethodSummary]) -> String {
    let mut out = String::from("method,iteration,mean_general_sr,std_general_sr\n");
    for s in summaries {
        for (t, (m, sd)) in s.mean.iter().zip(&s.std).enumerate() {
            let _ = writeln!(out, "{},{},{},{}", s.label, t + 1, format_sig9(*m), format_sig9(*sd));
        }
    }
    out
}

pub fn plot_svg(summaries: &[MethodSummary], title: &str) -> String {
    let series: Vec<Series> = summaries
        .iter()
        .map(|s| Series {
            label: s.label.clone(),
            mean: s.mean.clone(),
            std: s.std.clone(),
        })
        .collect();
    line_chart(title, "iteration", "general mean SR", &series)
}

/// Writes `summary.csv`, `trajectory.csv` and the SVG chart into `dir`.
pub fn write_reports(summaries: &[MethodSummary], title: &str, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, body: String| {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| Error::io(path, e))
    };
    write(SUMMARY_FILE, summary_csv(summaries))?;
    write(TRAJECTORY_FILE, trajectory_csv(summaries))?;
    write(PLOT_FILE, plot_svg(summaries, title))
}

/// Checks that configs differ only in scheduler kind, and that no two share
/// a kind.
pub fn check_comparable(configs: &[ExperimentConfig]) -> Result<()> {
    let Some(first) = configs.first() else {
        return Err(Error::InvalidInput("nothing to compare".into()));
    };
    for c in &configs[1..] {
        let mismatch = |what: &str| {
            Err(Error::config(
                what,
                format!("`{}` and `{}` differ; compared configs may only differ in scheduler kind", first.name, c.name),
            ))
        };
        if c.tasks != first.tasks {
            return mismatch("tasks");
        }
        if c.learner != first.learner {
            return mismatch("learner");
        }
        if c.sr_rule != first.sr_rule {
            return mismatch("sr_rule");
        }
        if c.seeds != first.seeds {
            return mismatch("seeds");
        }
        if c.scheduler != first.scheduler {
            return mismatch("scheduler");
        }
    }
    let mut labels: Vec<&str> = configs.iter().map(|c| c.label()).collect();
    labels.sort_unstable();
    if labels.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::config("scheduler.kind", "each compared config needs a distinct kind"));
    }
    Ok(())
}

/// Runs each config into `out_dir/<kind>/` and writes comparison reports
/// into `out_dir`.
pub fn compare(configs: &[ExperimentConfig], target: f64, out_dir: &Path, options: RunOptions) -> Result<Vec<MethodSummary>> {
    check_comparable(configs)?;
    for c in configs {
        c.validate()?;
    }
    let mut summaries = Vec::with_capacity(configs.len());
    for c in configs {
        let mut run = c.clone();
        run.output_dir = out_dir.join(c.label());
        let records = run_experiment(&run, options)?;
        summaries.push(summarize(c.label(), &records, target)?);
    }
    write_reports(&summaries, &configs[0].name, out_dir)?;
    Ok(summaries)
}
