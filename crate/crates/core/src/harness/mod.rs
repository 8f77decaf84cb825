//! Synthetic AMR experiment: a schedule of auto-timed routines driven by a
//! virtual clock, with a parametric workload and pluggable checkpoint
//! policy.

mod calibrate;
mod compare;
mod experiment;
mod workload;

pub use calibrate::{calibrate_checkpoint_cost, simulate, Calibration, CalibrationError};
pub use compare::{compare, CompareError, Comparison, RunSummary};
pub use experiment::{
    run_experiment, DecisionRecord, Event, Experiment, ExperimentBuilder, ExperimentConfig, ExperimentError,
    ExperimentHooks, ExperimentResult, NoHooks, SeriesRow, VIRTUAL_WALL,
};
pub use workload::{ModelError, WorkloadModel, GRID_POINTS_PER_LEVEL};
