use thiserror::Error;

/// Parametric cost model of an AMR run that gains one refinement level
/// every `regrid_every` iterations.
///
/// With `L = iteration / regrid_every`:
/// compute per iteration is `compute_unit_ns * 2^L`, one checkpoint costs
/// `checkpoint_base_ns * (L + 1)`, and the grid holds
/// `base_points + L * points_per_level` points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct WorkloadModel {
    pub base_points: u64,
    pub points_per_level: u64,
    pub regrid_every: u64,
    pub compute_unit_ns: u64,
    pub checkpoint_base_ns: u64,
    pub total_iterations: u64,
    /// Fixed cost of the STARTUP bin.
    pub startup_ns: u64,
    /// Fixed cost of the TERMINATE bin.
    pub terminate_ns: u64,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("workload parameter `{0}` must be positive")]
    NotPositive(&'static str),
    #[error("workload costs overflow 64-bit nanoseconds")]
    Overflow,
}

/// 40^3
pub const GRID_POINTS_PER_LEVEL: u64 = 64_000;

impl WorkloadModel {
    /// The shape of the AMR experiment: 40^3 points per level, a new level
    /// every 5120 iterations, four regrids, 18 ms per iteration at level 0.
    /// The checkpoint coefficient is the calibrated value at which a
    /// checkpoint every 512 iterations takes 19% of the run.
    pub fn amr_reference() -> Self {
        Self {
            base_points: GRID_POINTS_PER_LEVEL,
            points_per_level: GRID_POINTS_PER_LEVEL,
            regrid_every: 5120,
            compute_unit_ns: 18_000_000,
            checkpoint_base_ns: 3_118_557_692,
            total_iterations: 20_480,
            startup_ns: 0,
            terminate_ns: 0,
        }
    }

    /// Constant per-iteration and per-checkpoint costs (no regrid within
    /// the run).
    pub fn constant(compute_ns: u64, checkpoint_ns: u64, total_iterations: u64) -> Self {
        Self {
            base_points: GRID_POINTS_PER_LEVEL,
            points_per_level: GRID_POINTS_PER_LEVEL,
            regrid_every: total_iterations + 1,
            compute_unit_ns: compute_ns,
            checkpoint_base_ns: checkpoint_ns,
            total_iterations,
            startup_ns: 0,
            terminate_ns: 0,
        }
    }

    pub fn level(&self, iteration: u64) -> u64 {
        iteration / self.regrid_every
    }

    pub fn grid_points(&self, iteration: u64) -> u64 {
        self.base_points + self.level(iteration) * self.points_per_level
    }

    pub fn compute_ns(&self, iteration: u64) -> u64 {
        self.compute_unit_ns << self.level(iteration)
    }

    pub fn checkpoint_ns(&self, iteration: u64) -> u64 {
        self.checkpoint_base_ns * (self.level(iteration) + 1)
    }

    pub fn is_regrid(&self, iteration: u64) -> bool {
        iteration > 0 && iteration.is_multiple_of(self.regrid_every)
    }

    /// Checks positivity, and that a run checkpointing at every boundary
    /// still fits in `u64` nanoseconds.
    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, v) in [
            ("base_points", self.base_points),
            ("points_per_level", self.points_per_level),
            ("regrid_every", self.regrid_every),
            ("compute_unit_s", self.compute_unit_ns),
            ("checkpoint_base_s", self.checkpoint_base_ns),
        ] {
            if v == 0 {
                return Err(ModelError::NotPositive(name));
            }
        }
        let top = self.level(self.total_iterations);
        if top >= 63 {
            return Err(ModelError::Overflow);
        }
        let worst = (self.total_iterations as u128 + 1) * ((self.compute_unit_ns as u128) << top)
            + (self.total_iterations as u128 + 1) * self.checkpoint_base_ns as u128 * (top as u128 + 1)
            + self.startup_ns as u128
            + self.terminate_ns as u128;
        let points = self.points_per_level as u128 * top as u128 + self.base_points as u128;
        if worst > u64::MAX as u128 || points > u64::MAX as u128 {
            return Err(ModelError::Overflow);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cost_model() {
        let m = WorkloadModel::amr_reference();
        assert_eq!(m.level(5119), 0);
        assert_eq!(m.level(5120), 1);
        assert_eq!(m.grid_points(0), 64_000);
        assert_eq!(m.grid_points(5120), 128_000);
        assert_eq!(m.grid_points(20_480), 5 * 64_000);
        assert_eq!(m.compute_ns(10_240), 4 * m.compute_unit_ns);
        assert_eq!(m.checkpoint_ns(10_240), 3 * m.checkpoint_base_ns);
        assert!(m.is_regrid(5120) && !m.is_regrid(0) && !m.is_regrid(5121));
        m.validate().unwrap();
    }

    #[test]
    fn validation() {
        let mut m = WorkloadModel::constant(1, 1, 10);
        m.validate().unwrap();
        m.regrid_every = 0;
        assert_eq!(m.validate(), Err(ModelError::NotPositive("regrid_every")));
        let mut m = WorkloadModel::amr_reference();
        m.regrid_every = 1;
        assert_eq!(m.validate(), Err(ModelError::Overflow));
        let mut m = WorkloadModel::constant(u64::MAX / 2, 1, 4);
        assert_eq!(m.validate(), Err(ModelError::Overflow));
        m.compute_unit_ns = 0;
        assert_eq!(m.validate(), Err(ModelError::NotPositive("compute_unit_s")));
    }
}
