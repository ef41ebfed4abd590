//! Seeded experiment runner: scheduler × learner × task set, with per-seed
//! CSV logs, a manifest, and cross-method comparison reports.

mod compare;
mod config;
mod records;
mod run;
mod svg;

pub use compare::{
    by_seed, check_comparable, compare, median_stages, plot_svg, stages_to_target, summarize, summary_csv,
    trajectory_csv, write_reports, MethodSummary, PLOT_FILE, SUMMARY_FILE, TRAJECTORY_FILE,
};
pub use config::{ExperimentConfig, LearnerSpec, TaskDescriptor, DEFAULT_TSCL_WINDOW};
pub use records::{csv_header, csv_row, format_sig9, parse_csv, read_csv, read_run_dir, CsvSink, StageRecord};
pub use run::{
    run_experiment, run_in_memory, run_seed, seed_csv_path, write_manifest, RunOptions, ARTIFACT_VERSION,
    MANIFEST_FILE,
};
pub use svg::{line_chart, Series};
