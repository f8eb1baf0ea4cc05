//! The `gather3d` subcommands: `run`, `batch`, `check` and `gen`.
//!
//! Exit statuses: 0 success, 1 bad input, 2 not gathered within the event
//! budget, 3 a monitor reported a violation (or a replay disagreed with
//! the recorded verdicts).

pub mod json;
pub mod run_config;
pub mod trace_io;

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::ops::Range;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::sim::{self, replay_monitors, MonitorId, SimError, Trace};
use run_config::{RunConfig, Setup};
use trace_io::{read_trace, write_trace, TraceReadError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Success = 0,
    BadInput = 1,
    NotGathered = 2,
    MonitorFailure = 3,
}

impl Exit {
    pub fn code(self) -> i32 {
        self as i32
    }

    fn worst(self, other: Exit) -> Exit {
        if other.code() > self.code() {
            other
        } else {
            self
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed trace: {0}")]
    Trace(#[from] TraceReadError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> CliError {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit(&self) -> Exit {
        Exit::BadInput
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

/// Simulates a validated setup.
pub fn simulate(setup: &Setup) -> Result<Trace, CliError> {
    Ok(sim::run(&setup.robots, setup.params, setup.faults.clone())?)
}

fn run_exit(trace: &Trace) -> Exit {
    if trace.summary.monitor_failures.values().any(|&n| n > 0) {
        Exit::MonitorFailure
    } else if !trace.summary.gathered {
        Exit::NotGathered
    } else {
        Exit::Success
    }
}

/// `gather3d run`: simulate one configuration and write its JSONL trace.
pub fn cmd_run(config_path: &Path, trace_out: &Path) -> Result<Exit, CliError> {
    let setup = RunConfig::load(config_path)?.to_setup()?;
    let trace = simulate(&setup)?;
    let mut out = create(trace_out)?;
    write_trace(&trace, &mut out)
        .and_then(|_| out.flush())
        .map_err(|e| CliError::io(trace_out, e))?;
    let s = &trace.summary;
    println!(
        "gathered={} events={} moves={} monitor_failures={}",
        s.gathered,
        s.events_used,
        s.moves,
        s.monitor_failures.values().sum::<u64>()
    );
    if let Some(g) = s.gather_point {
        println!("gather_point=[{}, {}, {}]", json::real(g.x), json::real(g.y), json::real(g.z));
    }
    if s.gathered_at_crashed {
        println!("note: the gathering point is occupied by a crashed robot");
    }
    Ok(run_exit(&trace))
}

/// One CSV row of `gather3d batch`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchRow {
    pub seed: u64,
    pub gathered: bool,
    pub events: u64,
    pub final_span: f64,
    pub max_monitor_violation: f64,
    pub monitor_failures: u64,
}

/// Runs `setup` once per seed (in parallel), rows in seed order.
pub fn batch(setup: &Setup, seeds: Range<u64>) -> Result<Vec<BatchRow>, CliError> {
    seeds
        .into_par_iter()
        .map(|seed| {
            let mut s = setup.clone();
            s.params.seed = seed;
            let t = simulate(&s)?;
            Ok(BatchRow {
                seed,
                gathered: t.summary.gathered,
                events: t.summary.events_used,
                final_span: t.summary.final_span,
                max_monitor_violation: t.summary.max_monitor_violation,
                monitor_failures: t.summary.monitor_failures.values().sum(),
            })
        })
        .collect()
}

pub fn batch_csv(rows: &[BatchRow]) -> String {
    let mut out = String::from("seed,gathered,events,final_span,max_monitor_violation\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.seed,
            r.gathered,
            r.events,
            json::real(r.final_span),
            json::real(r.max_monitor_violation)
        )
        .unwrap();
    }
    out
}

/// Parses `a..b` (exclusive) or `a..=b` (inclusive).
pub fn parse_seed_range(text: &str) -> Result<Range<u64>, CliError> {
    let bad = || CliError::Config(format!("seed range `{text}` is not of the form a..b or a..=b"));
    let (lo, hi, inclusive) = if let Some((lo, hi)) = text.split_once("..=") {
        (lo, hi, true)
    } else if let Some((lo, hi)) = text.split_once("..") {
        (lo, hi, false)
    } else {
        return Err(bad());
    };
    let lo: u64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: u64 = hi.trim().parse().map_err(|_| bad())?;
    let end = if inclusive { hi.checked_add(1).ok_or_else(bad)? } else { hi };
    if end <= lo {
        return Err(CliError::Config(format!("seed range `{text}` is empty")));
    }
    Ok(lo..end)
}

/// `gather3d batch`: run every seed and write a CSV summary.
pub fn cmd_batch(config_path: &Path, seeds: Range<u64>, summary_out: &Path) -> Result<Exit, CliError> {
    if seeds.is_empty() {
        return Err(CliError::Config("seed range is empty".into()));
    }
    let setup = RunConfig::load(config_path)?.to_setup()?;
    let rows = batch(&setup, seeds)?;
    let mut out = create(summary_out)?;
    out.write_all(batch_csv(&rows).as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| CliError::io(summary_out, e))?;
    let gathered = rows.iter().filter(|r| r.gathered).count();
    let dirty = rows.iter().filter(|r| r.monitor_failures > 0).count();
    println!("runs={} gathered={} monitor_dirty={}", rows.len(), gathered, dirty);
    let mut exit = Exit::Success;
    if gathered < rows.len() {
        exit = exit.worst(Exit::NotGathered);
    }
    if dirty > 0 {
        exit = exit.worst(Exit::MonitorFailure);
    }
    Ok(exit)
}

/// Outcome of re-running the monitors over a trace file.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub passes: Vec<(MonitorId, u64)>,
    pub failures: Vec<(MonitorId, u64)>,
    /// Events whose recorded flags differ from the replayed ones.
    pub mismatches: u64,
    pub events: usize,
}

impl CheckReport {
    pub fn is_clean(&self) -> bool {
        self.mismatches == 0 && self.failures.iter().all(|(_, n)| *n == 0)
    }

    pub fn exit(&self) -> Exit {
        if self.is_clean() {
            Exit::Success
        } else {
            Exit::MonitorFailure
        }
    }
}

pub fn check_trace(path: &Path) -> Result<CheckReport, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let parsed = read_trace(BufReader::new(file))?;
    let report = replay_monitors(&parsed.header, &parsed.events);
    let mismatches = parsed
        .events
        .iter()
        .zip(&report.per_event)
        .filter(|(ev, flags)| &ev.monitor_flags != *flags)
        .count() as u64;
    let count = |m: &std::collections::BTreeMap<MonitorId, u64>| {
        MonitorId::ALL
            .iter()
            .map(|id| (*id, m.get(id).copied().unwrap_or(0)))
            .collect()
    };
    Ok(CheckReport {
        passes: count(&report.passes),
        failures: count(&report.failures),
        mismatches,
        events: parsed.events.len(),
    })
}

/// `gather3d check`: replay the monitors over a trace file.
pub fn cmd_check(trace_path: &Path) -> Result<Exit, CliError> {
    let report = check_trace(trace_path)?;
    println!("events={}", report.events);
    for ((id, pass), (_, fail)) in report.passes.iter().zip(&report.failures) {
        println!("{id}: pass={pass} fail={fail}");
    }
    println!("recorded/replayed mismatches={}", report.mismatches);
    Ok(report.exit())
}

/// `gather3d gen`: write a random run configuration.
pub fn cmd_gen(n: usize, z_layers: Option<usize>, spread: f64, seed: u64, out_path: &Path) -> Result<Exit, CliError> {
    let cfg = run_config::generate(n, z_layers, spread, seed)?;
    let text = json::to_pretty(&cfg).map_err(|e| CliError::Config(e.to_string()))?;
    let mut out = create(out_path)?;
    out.write_all(text.as_bytes())
        .and_then(|_| out.write_all(b"\n"))
        .and_then(|_| out.flush())
        .map_err(|e| CliError::io(out_path, e))?;
    Ok(Exit::Success)
}
