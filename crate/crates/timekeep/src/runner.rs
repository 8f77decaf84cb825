//! Turns a [`RunConfig`] into an experiment with file-writing hooks.

use std::path::{Path, PathBuf};

use timekeep_core::checkpoint::{checkpoint_file_name, CheckpointFile, CheckpointPolicy};
use timekeep_core::harness::{
    calibrate_checkpoint_cost, CalibrationError, Experiment, ExperimentBuilder, ExperimentConfig, ExperimentHooks,
};
use timekeep_core::schedule::{RoutineError, ScheduleLayout};
use timekeep_core::TimerSnapshot;

use crate::backends::{os_backend, UnknownBackend};
use crate::config::RunConfig;
use crate::emit::{Reporter, ReporterConfig, Sink};
use crate::output::CalibrationRecord;

/// Periodic reports plus checkpoint files.
pub struct RunHooks {
    pub reporter: Reporter,
    pub checkpoint_dir: Option<PathBuf>,
}

impl ExperimentHooks for RunHooks {
    fn on_checkpoint(&mut self, file: &CheckpointFile) -> Result<(), RoutineError> {
        if let Some(dir) = &self.checkpoint_dir {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(checkpoint_file_name(file.state.iteration));
            std::fs::write(&path, file.encode()).map_err(|e| format!("{}: {e}", path.display()))?;
        }
        Ok(())
    }

    fn on_report(&mut self, iteration: u64, snapshot: &TimerSnapshot, layout: &ScheduleLayout) {
        self.reporter.emit(iteration, snapshot, layout);
    }
}

/// Experiment parameters after optional calibration.
#[derive(Clone, Debug, PartialEq)]
pub struct Prepared {
    pub experiment: ExperimentConfig,
    pub calibration: Option<CalibrationRecord>,
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared, CalibrationError> {
    let mut model = cfg.model;
    let calibration = match cfg.calibrate {
        None => None,
        Some(req) => {
            let baseline = CheckpointPolicy::fixed_interval(req.every)?;
            let cal = calibrate_checkpoint_cost(&model, &baseline, req.target)?;
            model = cal.model;
            Some(CalibrationRecord {
                target_fraction: req.target,
                baseline_every: req.every,
                achieved_fraction: cal.achieved_fraction(),
            })
        }
    };
    Ok(Prepared {
        experiment: ExperimentConfig {
            model,
            policy: cfg.policy,
            report: cfg.report,
        },
        calibration,
    })
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Builder with the configured clocks, decision clock and hooks. Relative
/// paths in the configuration are taken relative to `out_dir`. `quiet`
/// drops the stdout report sink.
pub fn builder(
    cfg: &RunConfig,
    prepared: &Prepared,
    out_dir: &Path,
    quiet: bool,
) -> Result<ExperimentBuilder, UnknownBackend> {
    let sinks = cfg
        .sinks
        .iter()
        .copied()
        .filter(|s| !(quiet && *s == Sink::Stdout))
        .collect();
    let reporter = Reporter::new(ReporterConfig {
        schedule: cfg.report,
        sinks,
        logfile: cfg.logfile.as_deref().map(|p| resolve(out_dir, p)),
        export_file: Some(out_dir.join(format!("{}.timers.jsonl", cfg.name))),
    });
    let mut b = Experiment::builder(prepared.experiment)
        .decision_clock(cfg.decision_clock.clone())
        .hooks(RunHooks {
            reporter,
            checkpoint_dir: cfg.checkpoint_dir.as_deref().map(|p| resolve(out_dir, p)),
        });
    for name in &cfg.clocks {
        if let Some(source) = os_backend(name)? {
            b = b.clock(name.clone(), source);
        }
    }
    Ok(b)
}
