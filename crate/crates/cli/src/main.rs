use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sitp::grid::GridMap;
use sitp::harness::{self, ExperimentConfig, RunOptions, DEFAULT_TSCL_WINDOW};
use sitp::SchedulerKind;

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

#[derive(Parser)]
#[command(name = "sitp", version, about = "Curriculum experiments with success-induced task prioritization")]
struct Cli {
    /// Print per-stage progress (-v) or debug detail (-vv).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run configs that differ only in scheduler kind and summarize them.
    Compare {
        #[arg(long = "config", required = true)]
        configs: Vec<PathBuf>,
        /// Derive one config per kind from a single base config.
        #[arg(long, value_delimiter = ',')]
        kinds: Vec<String>,
        /// General mean SR level for the stages-to-target statistic.
        #[arg(long, default_value_t = 0.9)]
        target: f64,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Chart and summarize existing run directories.
    Plot {
        /// `label=dir` or just `dir` (label = directory name).
        #[arg(long = "run", required = true)]
        runs: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.9)]
        target: f64,
        #[arg(long, default_value = "general mean SR")]
        title: String,
    },
    /// Write a procedural map in MovingAI format.
    GenMap {
        #[arg(long)]
        size: usize,
        #[arg(long)]
        density: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check configs without running anything.
    ValidateConfig {
        #[arg(long = "config", required = true)]
        configs: Vec<PathBuf>,
    },
}

#[derive(Args)]
struct Overrides {
    /// Replace the config's seed list.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Run exactly this one seed.
    #[arg(long)]
    seed_override: Option<u64>,
    #[arg(long, env = "SITP_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,
    /// Maximum seeds run in parallel.
    #[arg(long)]
    jobs: Option<usize>,
}

impl Overrides {
    fn apply(&self, config: &mut ExperimentConfig) {
        if !self.seeds.is_empty() {
            config.seeds = self.seeds.clone();
        }
        if let Some(seed) = self.seed_override {
            config.seeds = vec![seed];
        }
        if let Some(dir) = &self.output_dir {
            config.output_dir = dir.clone();
        }
    }

    fn options(&self) -> RunOptions {
        RunOptions { jobs: self.jobs }
    }
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<sitp::Error> for Failure {
    fn from(e: sitp::Error) -> Self {
        if e.is_config_error() {
            Failure::Config(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn load(path: &Path) -> Result<ExperimentConfig, Failure> {
    if !path.is_file() {
        return Err(Failure::Config(format!("config file not found: {}", path.display())));
    }
    ExperimentConfig::load(path).map_err(|e| match e {
        sitp::Error::Io { .. } => Failure::Config(e.to_string()),
        other => {
            if other.is_config_error() {
                Failure::Config(format!("{}: {other}", path.display()))
            } else {
                other.into()
            }
        }
    })
}

fn parse_kind(name: &str, base: &ExperimentConfig) -> Result<SchedulerKind, Failure> {
    match name {
        "sitp" => Ok(SchedulerKind::Sitp),
        "uniform" => Ok(SchedulerKind::Uniform),
        "tscl" => Ok(match base.kind {
            k @ SchedulerKind::Tscl { .. } => k,
            _ => SchedulerKind::Tscl {
                window_length: DEFAULT_TSCL_WINDOW,
            },
        }),
        other => Err(Failure::Config(format!("unknown scheduler kind `{other}`"))),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { config, overrides } => {
            let mut cfg = load(&config)?;
            overrides.apply(&mut cfg);
            cfg.validate()?;
            let records = harness::run_experiment(&cfg, overrides.options())?;
            println!(
                "{}: {} stage records for {} seed(s) in {}",
                cfg.name,
                records.len(),
                cfg.seeds.len(),
                cfg.output_dir.display()
            );
        }
        Command::Compare {
            configs,
            kinds,
            target,
            overrides,
        } => {
            let mut loaded = configs.iter().map(|p| load(p)).collect::<Result<Vec<_>, _>>()?;
            if !kinds.is_empty() {
                if loaded.len() != 1 {
                    return Err(Failure::Config("--kinds needs exactly one --config".into()));
                }
                let base = loaded.remove(0);
                for name in &kinds {
                    let mut c = base.clone();
                    c.kind = parse_kind(name, &base)?;
                    loaded.push(c);
                }
            }
            for c in &mut loaded {
                overrides.apply(c);
                c.validate()?;
            }
            let out_dir = loaded[0].output_dir.clone();
            let summaries = harness::compare(&loaded, target, &out_dir, overrides.options())?;
            print!("{}", harness::summary_csv(&summaries));
        }
        Command::Plot {
            runs,
            out,
            target,
            title,
        } => {
            let mut summaries = Vec::new();
            for spec in &runs {
                let (label, dir) = match spec.split_once('=') {
                    Some((l, d)) => (l.to_string(), PathBuf::from(d)),
                    None => {
                        let dir = PathBuf::from(spec);
                        let label = dir.file_name().map_or(spec.clone(), |n| n.to_string_lossy().into_owned());
                        (label, dir)
                    }
                };
                let records = harness::read_run_dir(&dir)?;
                summaries.push(harness::summarize(&label, &records, target)?);
            }
            std::fs::write(&out, harness::plot_svg(&summaries, &title))
                .map_err(|e| Failure::Runtime(format!("{}: {e}", out.display())))?;
            print!("{}", harness::summary_csv(&summaries));
        }
        Command::GenMap {
            size,
            density,
            seed,
            out,
        } => {
            if size == 0 {
                return Err(Failure::Config("size must be at least 1".into()));
            }
            if !(0.0..1.0).contains(&density) {
                return Err(Failure::Config(format!("density {density} is outside [0, 1)")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let map = GridMap::random(size, density, &mut rng);
            std::fs::write(&out, map.to_movingai())
                .map_err(|e| Failure::Runtime(format!("{}: {e}", out.display())))?;
        }
        Command::ValidateConfig { configs } => {
            for path in &configs {
                let cfg = load(path)?;
                println!("{}: ok ({} tasks, {} seeds, hash {})", path.display(), cfg.tasks.len(), cfg.seeds.len(), cfg.hash());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
