use thiserror::Error;

use super::compare::RunSummary;
use super::workload::{ModelError, WorkloadModel};
use crate::checkpoint::{decide, AccountingError, CheckpointAccounting, CheckpointMode, CheckpointPolicy, PolicyError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("target checkpoint fraction {0} is outside (0, 1)")]
    TargetOutOfRange(f64),
    #[error("calibration baseline must use a fixed checkpoint interval")]
    NotFixedInterval,
    #[error("no checkpoint cost reaches fraction {0} for this workload")]
    NoSolution(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Accounting(#[from] AccountingError),
}

/// Totals of the run `model` + `policy` would produce in virtual time,
/// without building the schedule. Agrees exactly with a full experiment.
pub fn simulate(model: &WorkloadModel, policy: &CheckpointPolicy) -> Result<RunSummary, CalibrationError> {
    model.validate()?;
    policy.validate()?;
    let n = model.total_iterations;
    let mut acct = CheckpointAccounting::new();
    let mut now = model.startup_ns;
    let boundary = |acct: &mut CheckpointAccounting, now: &mut u64, it: u64| -> Result<(), CalibrationError> {
        acct.observe(*now)?;
        if decide(policy, acct, *now, it, it == 0, it == n)?.is_checkpoint() {
            let end = *now + model.checkpoint_ns(it);
            acct.record_checkpoint(*now, end)?;
            *now = end;
        }
        Ok(())
    };
    boundary(&mut acct, &mut now, 0)?;
    for it in 1..=n {
        now += model.compute_ns(it);
        boundary(&mut acct, &mut now, it)?;
    }
    now += model.terminate_ns;
    Ok(RunSummary {
        total_runtime_ns: now,
        total_checkpoint_ns: acct.total_checkpoint_ns(),
        checkpoints_taken: acct.checkpoints_taken(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Calibration {
    /// Input model with `checkpoint_base_ns` replaced.
    pub model: WorkloadModel,
    pub baseline: RunSummary,
}

impl Calibration {
    pub fn achieved_fraction(&self) -> f64 {
        self.baseline.final_fraction()
    }
}

/// Finds the checkpoint base cost (integer ns) whose fixed-interval
/// baseline run spends a share closest to `target` of its wall time
/// checkpointing. All other model parameters are kept.
pub fn calibrate_checkpoint_cost(
    model: &WorkloadModel,
    baseline: &CheckpointPolicy,
    target: f64,
) -> Result<Calibration, CalibrationError> {
    if !(target > 0.0 && target < 1.0) {
        return Err(CalibrationError::TargetOutOfRange(target));
    }
    if !matches!(baseline.mode, CheckpointMode::FixedInterval { .. }) {
        return Err(CalibrationError::NotFixedInterval);
    }
    let run = |c0: u64| -> Result<(WorkloadModel, RunSummary), CalibrationError> {
        let m = WorkloadModel {
            checkpoint_base_ns: c0,
            ..*model
        };
        Ok((m, simulate(&m, baseline)?))
    };

    // Fraction is nondecreasing in c0. Bracket, then bisect for the
    // smallest c0 reaching the target.
    let mut lo = 1u64;
    let (_, first) = run(lo)?;
    if first.final_fraction() >= target {
        let (model, baseline) = run(lo)?;
        return Ok(Calibration { model, baseline });
    }
    let mut hi = 2u64;
    loop {
        match run(hi) {
            Ok((_, s)) if s.final_fraction() >= target => break,
            Ok(_) => {
                lo = hi;
                hi = hi.checked_mul(2).ok_or(CalibrationError::NoSolution(target))?;
            }
            Err(CalibrationError::Model(ModelError::Overflow)) => return Err(CalibrationError::NoSolution(target)),
            Err(e) => return Err(e),
        }
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if run(mid)?.1.final_fraction() >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (m_lo, s_lo) = run(lo)?;
    let (m_hi, s_hi) = run(hi)?;
    let (model, baseline) = if target - s_lo.final_fraction() < s_hi.final_fraction() - target {
        (m_lo, s_lo)
    } else {
        (m_hi, s_hi)
    };
    Ok(Calibration { model, baseline })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checkpoint::FractionBound;
    use crate::NANOS_PER_SEC as SEC;

    #[test]
    fn fixed_small_run() {
        let m = WorkloadModel::constant(SEC, 2 * SEC, 2048);
        let s = simulate(&m, &CheckpointPolicy::fixed_interval(512).unwrap()).unwrap();
        assert_eq!(s.checkpoints_taken, 4);
        assert_eq!(s.total_checkpoint_ns, 8 * SEC);
        assert_eq!(s.total_runtime_ns, 2056 * SEC);
    }

    #[test]
    fn adaptive_spacing_settles() {
        let m = WorkloadModel::constant(SEC, 2 * SEC, 400);
        let p = CheckpointPolicy::adaptive(FractionBound::from_f64(0.05).unwrap(), None).unwrap();
        let s = simulate(&m, &p).unwrap();
        // First at iteration 1, then every 38 compute seconds.
        assert_eq!(s.checkpoints_taken, 1 + (400 - 1) / 38);
    }

    #[test]
    fn calibration_hits_target() {
        let m = WorkloadModel::amr_reference();
        let p = CheckpointPolicy::fixed_interval(512).unwrap();
        let c = calibrate_checkpoint_cost(&m, &p, 0.19).unwrap();
        assert!((c.achieved_fraction() - 0.19).abs() < 1e-8);
        assert_eq!(c.baseline.checkpoints_taken, 40);
        assert!((c.model.checkpoint_base_ns as f64 / 1e9 - 3.118_557_693).abs() < 1e-6);
    }

    #[test]
    fn calibration_errors() {
        let m = WorkloadModel::amr_reference();
        let p = CheckpointPolicy::fixed_interval(512).unwrap();
        assert_eq!(
            calibrate_checkpoint_cost(&m, &p, 1.0),
            Err(CalibrationError::TargetOutOfRange(1.0))
        );
        let a = CheckpointPolicy::adaptive(FractionBound::from_f64(0.05).unwrap(), None).unwrap();
        assert_eq!(
            calibrate_checkpoint_cost(&m, &a, 0.2),
            Err(CalibrationError::NotFixedInterval)
        );
        let never = CheckpointPolicy::fixed_interval(1_000_000).unwrap();
        assert_eq!(
            calibrate_checkpoint_cost(&m, &never, 0.2),
            Err(CalibrationError::NoSolution(0.2))
        );
    }

    #[test]
    fn fraction_depends_only_on_cost_ratio() {
        let p = CheckpointPolicy::fixed_interval(512).unwrap();
        let m = WorkloadModel::amr_reference();
        let doubled = WorkloadModel {
            compute_unit_ns: 2 * m.compute_unit_ns,
            checkpoint_base_ns: 2 * m.checkpoint_base_ns,
            ..m
        };
        let (a, b) = (simulate(&m, &p).unwrap(), simulate(&doubled, &p).unwrap());
        assert_eq!(2 * a.total_runtime_ns, b.total_runtime_ns);
        assert_eq!(a.final_fraction(), b.final_fraction());
    }
}
