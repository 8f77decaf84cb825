use thiserror::Error;

use super::experiment::ExperimentResult;
use super::workload::WorkloadModel;

/// Totals of one finished run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RunSummary {
    pub total_runtime_ns: u64,
    pub total_checkpoint_ns: u64,
    pub checkpoints_taken: u64,
}

impl RunSummary {
    pub fn final_fraction(&self) -> f64 {
        if self.total_runtime_ns == 0 {
            0.0
        } else {
            self.total_checkpoint_ns as f64 / self.total_runtime_ns as f64
        }
    }
}

impl From<&ExperimentResult> for RunSummary {
    fn from(r: &ExperimentResult) -> Self {
        Self {
            total_runtime_ns: r.total_runtime_ns,
            total_checkpoint_ns: r.total_checkpoint_ns,
            checkpoints_taken: r.checkpoints_taken,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CompareError {
    #[error("runs use different workload models")]
    ModelMismatch,
    #[error("baseline run has zero runtime")]
    EmptyBaseline,
}

/// Baseline against candidate on the same workload.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Comparison {
    pub baseline: RunSummary,
    pub candidate: RunSummary,
    /// `(T_baseline - T_candidate) / T_baseline`.
    pub runtime_reduction: f64,
    /// `C_baseline / C_candidate`; infinite if the candidate never
    /// checkpointed.
    pub checkpoint_ratio: f64,
}

pub fn compare(baseline: &ExperimentResult, candidate: &ExperimentResult) -> Result<Comparison, CompareError> {
    Comparison::from_summaries((&baseline.model, baseline.into()), (&candidate.model, candidate.into()))
}

impl Comparison {
    /// Same as [`compare`], from totals already extracted from two runs.
    pub fn from_summaries(
        baseline: (&WorkloadModel, RunSummary),
        candidate: (&WorkloadModel, RunSummary),
    ) -> Result<Self, CompareError> {
        same_model(baseline.0, candidate.0)?;
        let (b, c) = (baseline.1, candidate.1);
        if b.total_runtime_ns == 0 {
            return Err(CompareError::EmptyBaseline);
        }
        let runtime_reduction = (b.total_runtime_ns as f64 - c.total_runtime_ns as f64) / b.total_runtime_ns as f64;
        let checkpoint_ratio = if c.total_checkpoint_ns == 0 {
            f64::INFINITY
        } else {
            b.total_checkpoint_ns as f64 / c.total_checkpoint_ns as f64
        };
        Ok(Self {
            baseline: b,
            candidate: c,
            runtime_reduction,
            checkpoint_ratio,
        })
    }
}

fn same_model(a: &WorkloadModel, b: &WorkloadModel) -> Result<(), CompareError> {
    if a == b {
        Ok(())
    } else {
        Err(CompareError::ModelMismatch)
    }
}
