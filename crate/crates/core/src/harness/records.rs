//! Stage records and their CSV form.
//!
//! Header: `seed,iteration,task,sr_new,s_0..s_{N-1},p_0..p_{N-1},general_mean_sr`.
//! Floats are written with 9 significant digits.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scheduler::SchedulerState;

/// Observable trace of one scheduler stage. `scores` and `probs` are the
/// values after the stage was recorded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub seed: u64,
    /// 1-based.
    pub iteration: usize,
    pub task: usize,
    pub sr_new: f64,
    pub scores: Vec<f64>,
    pub probs: Vec<f64>,
    pub general_mean_sr: f64,
}

impl StageRecord {
    pub fn capture(seed: u64, iteration: usize, task: usize, sr_new: f64, state: &SchedulerState) -> Self {
        Self {
            seed,
            iteration,
            task,
            sr_new,
            scores: state.scores(),
            probs: state.distribution().probs().to_vec(),
            general_mean_sr: state.general_mean_sr(),
        }
    }
}

/// Formats like C's `%.9g`.
pub fn format_sig9(x: f64) -> String {
    const DIGITS: i32 = 9;
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..DIGITS).contains(&exp) {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{}{:02}", trim_zeros(mantissa.to_string()), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn csv_header(n_tasks: usize) -> String {
    let mut h = String::from("seed,iteration,task,sr_new");
    for i in 0..n_tasks {
        let _ = write!(h, ",s_{i}");
    }
    for i in 0..n_tasks {
        let _ = write!(h, ",p_{i}");
    }
    h.push_str(",general_mean_sr");
    h
}

pub fn csv_row(r: &StageRecord) -> String {
    let mut row = format!("{},{},{},{}", r.seed, r.iteration, r.task, format_sig9(r.sr_new));
    for v in r.scores.iter().chain(&r.probs) {
        row.push(',');
        row.push_str(&format_sig9(*v));
    }
    row.push(',');
    row.push_str(&format_sig9(r.general_mean_sr));
    row
}

/// Incremental writer: the header goes out on creation, each record is
/// flushed as it arrives.
pub struct CsvSink<W: Write> {
    out: W,
}

impl<W: Write> CsvSink<W> {
    pub fn new(mut out: W, n_tasks: usize) -> std::io::Result<Self> {
        writeln!(out, "{}", csv_header(n_tasks))?;
        Ok(Self { out })
    }

    pub fn push(&mut self, record: &StageRecord) -> std::io::Result<()> {
        writeln!(self.out, "{}", csv_row(record))?;
        self.out.flush()
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

pub fn parse_csv(text: &str) -> Result<Vec<StageRecord>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::InvalidInput("empty stage CSV".into()))?;
    let columns = header.split(',').count();
    let n_tasks = header.split(',').filter(|c| c.starts_with("s_")).count();
    if header != csv_header(n_tasks) {
        return Err(Error::InvalidInput(format!("unexpected stage CSV header `{header}`")));
    }
    let bad = |line: usize, what: &str| Error::InvalidInput(format!("stage CSV line {}: bad {what}", line + 1));
    lines
        .filter(|(_, l)| !l.is_empty())
        .map(|(no, line)| {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != columns {
                return Err(bad(no, "column count"));
            }
            let float = |s: &str| s.parse::<f64>().map_err(|_| bad(no, "number"));
            let floats = |range: std::ops::Range<usize>| fields[range].iter().map(|s| float(s)).collect::<Result<Vec<_>>>();
            Ok(StageRecord {
                seed: fields[0].parse().map_err(|_| bad(no, "seed"))?,
                iteration: fields[1].parse().map_err(|_| bad(no, "iteration"))?,
                task: fields[2].parse().map_err(|_| bad(no, "task"))?,
                sr_new: float(fields[3])?,
                scores: floats(4..4 + n_tasks)?,
                probs: floats(4 + n_tasks..4 + 2 * n_tasks)?,
                general_mean_sr: float(fields[columns - 1])?,
            })
        })
        .collect()
}

pub fn read_csv(path: &Path) -> Result<Vec<StageRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text)
}

/// Reads every `seed_*.csv` in `dir`, ordered by file name.
pub fn read_run_dir(dir: &Path) -> Result<Vec<StageRecord>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("seed_") && n.ends_with(".csv"))
        })
        .collect();
    paths.sort();
    let mut records = Vec::new();
    for p in paths {
        records.extend(read_csv(&p)?);
    }
    Ok(records)
}
