//! Result files of a run: `<run>.series.csv`, `<run>.summary.json`,
//! `<run>.report.txt` and `<run>.timers.json`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use timekeep_core::checkpoint::{CheckpointMode, CheckpointPolicy};
use timekeep_core::harness::{Event, ExperimentResult, RunSummary, SeriesRow, WorkloadModel};
use timekeep_core::report::render_report;

use crate::export::export_snapshot;

pub const SERIES_HEADER: &str = "iteration,elapsed_ns,checkpoint_ns_cum,fraction,grid_points,event";

pub fn series_csv(rows: &[SeriesRow]) -> String {
    let mut out = String::with_capacity(48 * (rows.len() + 1));
    out.push_str(SERIES_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.iteration,
            r.elapsed_ns,
            r.checkpoint_ns_cumulative,
            r.fraction(),
            r.grid_points,
            r.event.as_str()
        );
    }
    out
}

#[derive(Debug, thiserror::Error)]
#[error("series line {line}: {message}")]
pub struct SeriesError {
    pub line: usize,
    pub message: String,
}

/// Parses a series written by [`series_csv`]. The fraction column is
/// recomputed, not read.
pub fn parse_series(text: &str) -> Result<Vec<SeriesRow>, SeriesError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == SERIES_HEADER => {}
        _ => {
            return Err(SeriesError {
                line: 1,
                message: format!("expected header `{SERIES_HEADER}`"),
            })
        }
    }
    lines
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let err = |message: &str| SeriesError {
                line: i + 1,
                message: message.into(),
            };
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 6 {
                return Err(err("expected 6 fields"));
            }
            let int = |s: &str| s.parse::<u64>().map_err(|_| err("bad integer"));
            Ok(SeriesRow {
                iteration: int(f[0])?,
                elapsed_ns: int(f[1])?,
                checkpoint_ns_cumulative: int(f[2])?,
                grid_points: int(f[4])?,
                event: Event::parse(f[5]).ok_or_else(|| err("unknown event"))?,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub base_points: u64,
    pub points_per_level: u64,
    pub regrid_every: u64,
    pub compute_unit_ns: u64,
    pub checkpoint_base_ns: u64,
    pub total_iterations: u64,
    pub startup_ns: u64,
    pub terminate_ns: u64,
}

impl From<WorkloadModel> for ModelRecord {
    fn from(m: WorkloadModel) -> Self {
        Self {
            base_points: m.base_points,
            points_per_level: m.points_per_level,
            regrid_every: m.regrid_every,
            compute_unit_ns: m.compute_unit_ns,
            checkpoint_base_ns: m.checkpoint_base_ns,
            total_iterations: m.total_iterations,
            startup_ns: m.startup_ns,
            terminate_ns: m.terminate_ns,
        }
    }
}

impl From<ModelRecord> for WorkloadModel {
    fn from(m: ModelRecord) -> Self {
        Self {
            base_points: m.base_points,
            points_per_level: m.points_per_level,
            regrid_every: m.regrid_every,
            compute_unit_ns: m.compute_unit_ns,
            checkpoint_base_ns: m.checkpoint_base_ns,
            total_iterations: m.total_iterations,
            startup_ns: m.startup_ns,
            terminate_ns: m.terminate_ns,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyRecord {
    pub mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub every: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_fraction_ppb: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_interval_ns: Option<u64>,
    pub on_initial: bool,
    pub on_terminate: bool,
}

impl From<&CheckpointPolicy> for PolicyRecord {
    fn from(p: &CheckpointPolicy) -> Self {
        let (mode, every, max_fraction_ppb, max_interval_ns) = match p.mode {
            CheckpointMode::FixedInterval { every } => ("fixed_interval", Some(every), None, None),
            CheckpointMode::Adaptive {
                max_fraction,
                max_interval_ns,
            } => ("adaptive", None, Some(max_fraction.ppb()), max_interval_ns),
        };
        Self {
            mode: mode.into(),
            every,
            max_fraction_ppb,
            max_interval_ns,
            on_initial: p.on_initial,
            on_terminate: p.on_terminate,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub target_fraction: f64,
    pub baseline_every: u64,
    pub achieved_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub run: String,
    pub model: ModelRecord,
    pub policy: PolicyRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restarted_from_iteration: Option<u64>,
    pub total_runtime_ns: u64,
    pub total_checkpoint_ns: u64,
    pub checkpoints_taken: u64,
    pub final_fraction: f64,
    /// Number of policy decisions per reason.
    pub decisions: BTreeMap<String, u64>,
    /// File name of the series CSV, relative to the summary.
    pub series: String,
}

impl Summary {
    pub fn run_summary(&self) -> RunSummary {
        RunSummary {
            total_runtime_ns: self.total_runtime_ns,
            total_checkpoint_ns: self.total_checkpoint_ns,
            checkpoints_taken: self.checkpoints_taken,
        }
    }
}

pub struct RunFiles {
    pub series: PathBuf,
    pub summary: PathBuf,
    pub report: PathBuf,
    pub timers: PathBuf,
}

impl RunFiles {
    pub fn new(dir: &Path, run: &str) -> Self {
        Self {
            series: dir.join(format!("{run}.series.csv")),
            summary: dir.join(format!("{run}.summary.json")),
            report: dir.join(format!("{run}.report.txt")),
            timers: dir.join(format!("{run}.timers.json")),
        }
    }
}

pub fn summarize(
    run: &str,
    result: &ExperimentResult,
    calibration: Option<CalibrationRecord>,
    restarted_from_iteration: Option<u64>,
) -> Summary {
    let mut decisions = BTreeMap::new();
    for d in &result.decisions {
        *decisions.entry(d.decision.reason.as_str().to_string()).or_insert(0) += 1;
    }
    Summary {
        run: run.to_string(),
        model: result.model.into(),
        policy: (&result.policy).into(),
        calibration,
        restarted_from_iteration,
        total_runtime_ns: result.total_runtime_ns,
        total_checkpoint_ns: result.total_checkpoint_ns,
        checkpoints_taken: result.checkpoints_taken,
        final_fraction: result.final_fraction(),
        decisions,
        series: format!("{run}.series.csv"),
    }
}

/// Writes all four result files.
pub fn write_run(dir: &Path, summary: &Summary, result: &ExperimentResult) -> io::Result<RunFiles> {
    std::fs::create_dir_all(dir)?;
    let files = RunFiles::new(dir, &summary.run);
    std::fs::write(&files.series, series_csv(&result.series))?;
    let mut json = serde_json::to_string_pretty(summary).map_err(io::Error::other)?;
    json.push('\n');
    std::fs::write(&files.summary, json)?;
    std::fs::write(&files.report, render_report(&result.final_snapshot, &result.layout))?;
    std::fs::write(
        &files.timers,
        export_snapshot(&result.final_snapshot, Some(&result.layout)) + "\n",
    )?;
    Ok(files)
}
