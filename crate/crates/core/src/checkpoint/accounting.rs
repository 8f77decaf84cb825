use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AccountingError {
    #[error("checkpoint ends ({end_ns} ns) before it starts ({start_ns} ns)")]
    NegativeDuration { start_ns: u64, end_ns: u64 },
    #[error("checkpoint starts ({start_ns} ns) before the previous one ended ({previous_end_ns} ns)")]
    Overlap { start_ns: u64, previous_end_ns: u64 },
    #[error("elapsed time cannot move backwards ({from_ns} ns -> {to_ns} ns)")]
    TimeReversed { from_ns: u64, to_ns: u64 },
}

/// Running totals of checkpoint time. Timestamps are nanoseconds since
/// simulation start.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct CheckpointAccounting {
    total_checkpoint_ns: u64,
    total_elapsed_ns: u64,
    last_checkpoint_start_ns: Option<u64>,
    last_checkpoint_end_ns: Option<u64>,
    checkpoints_taken: u64,
}

impl CheckpointAccounting {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rebuilds accounting from stored fields, checking its invariants.
    pub fn from_parts(
        total_checkpoint_ns: u64,
        total_elapsed_ns: u64,
        last_checkpoint_start_ns: Option<u64>,
        last_checkpoint_end_ns: Option<u64>,
        checkpoints_taken: u64,
    ) -> Option<Self> {
        let consistent = total_checkpoint_ns <= total_elapsed_ns
            && last_checkpoint_start_ns.is_some() == last_checkpoint_end_ns.is_some()
            && last_checkpoint_start_ns.is_some() == (checkpoints_taken > 0)
            && match (last_checkpoint_start_ns, last_checkpoint_end_ns) {
                (Some(s), Some(e)) => s <= e && e <= total_elapsed_ns,
                _ => total_checkpoint_ns == 0,
            };
        consistent.then_some(Self {
            total_checkpoint_ns,
            total_elapsed_ns,
            last_checkpoint_start_ns,
            last_checkpoint_end_ns,
            checkpoints_taken,
        })
    }

    pub fn total_checkpoint_ns(&self) -> u64 {
        self.total_checkpoint_ns
    }

    pub fn total_elapsed_ns(&self) -> u64 {
        self.total_elapsed_ns
    }

    pub fn last_checkpoint_start_ns(&self) -> Option<u64> {
        self.last_checkpoint_start_ns
    }

    pub fn last_checkpoint_end_ns(&self) -> Option<u64> {
        self.last_checkpoint_end_ns
    }

    pub fn checkpoints_taken(&self) -> u64 {
        self.checkpoints_taken
    }

    /// Moves the elapsed-time mark forward to `now_ns`.
    pub fn observe(&mut self, now_ns: u64) -> Result<(), AccountingError> {
        if now_ns < self.total_elapsed_ns {
            return Err(AccountingError::TimeReversed {
                from_ns: self.total_elapsed_ns,
                to_ns: now_ns,
            });
        }
        self.total_elapsed_ns = now_ns;
        Ok(())
    }

    pub fn record_checkpoint(&mut self, start_ns: u64, end_ns: u64) -> Result<(), AccountingError> {
        if end_ns < start_ns {
            return Err(AccountingError::NegativeDuration { start_ns, end_ns });
        }
        if let Some(previous_end_ns) = self.last_checkpoint_end_ns {
            if start_ns < previous_end_ns {
                return Err(AccountingError::Overlap {
                    start_ns,
                    previous_end_ns,
                });
            }
        }
        self.total_checkpoint_ns += end_ns - start_ns;
        self.total_elapsed_ns = self.total_elapsed_ns.max(end_ns);
        self.last_checkpoint_start_ns = Some(start_ns);
        self.last_checkpoint_end_ns = Some(end_ns);
        self.checkpoints_taken += 1;
        Ok(())
    }

    /// Share of elapsed time spent checkpointing; 0 when nothing elapsed.
    pub fn checkpoint_fraction(&self) -> f64 {
        fraction(self.total_checkpoint_ns, self.total_elapsed_ns)
    }
}

/// `part / whole`, defined as 0 for an empty whole.
pub(crate) fn fraction(part: u64, whole: u64) -> f64 {
    if whole == 0 {
        0.0
    } else {
        part as f64 / whole as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{secs_to_nanos, NANOS_PER_SEC as SEC};

    #[test]
    fn record_after_run() {
        let mut a = CheckpointAccounting::new();
        a.observe(38 * SEC).unwrap();
        a.record_checkpoint(38 * SEC, 40 * SEC).unwrap();
        assert_eq!(a.checkpoint_fraction(), 0.05);
        assert_eq!(a.checkpoints_taken(), 1);
        assert_eq!(a.last_checkpoint_end_ns(), Some(40 * SEC));
        assert_eq!(a.total_elapsed_ns(), 40 * SEC);
    }

    #[test]
    fn two_records() {
        let mut a = CheckpointAccounting::new();
        a.record_checkpoint(10 * SEC, 11 * SEC).unwrap();
        a.record_checkpoint(50 * SEC, 51 * SEC).unwrap();
        a.observe(100 * SEC).unwrap();
        assert!((a.checkpoint_fraction() - 0.02).abs() < 1e-15);
    }

    #[test]
    fn bad_records() {
        let mut a = CheckpointAccounting::new();
        assert!(matches!(
            a.record_checkpoint(5, 4),
            Err(AccountingError::NegativeDuration { .. })
        ));
        a.record_checkpoint(10, 20).unwrap();
        assert!(matches!(
            a.record_checkpoint(15, 30),
            Err(AccountingError::Overlap { .. })
        ));
        assert!(matches!(a.observe(3), Err(AccountingError::TimeReversed { .. })));
        assert_eq!(a.checkpoints_taken(), 1);
    }

    #[test]
    fn fraction_values() {
        let f = fraction(secs_to_nanos(79.76328), secs_to_nanos(1417.137309));
        assert!((f - 0.0563).abs() < 1e-4, "{f}");
        let f = fraction(319 * SEC, 1737 * SEC);
        assert!((f - 0.18365).abs() < 1e-4, "{f}");
        assert_eq!((f * 100.0 + 0.5) as u32, 18);
        assert_eq!(CheckpointAccounting::new().checkpoint_fraction(), 0.0);
    }

    #[test]
    fn from_parts_checks_invariants() {
        assert!(CheckpointAccounting::from_parts(2, 40, Some(38), Some(40), 1).is_some());
        assert!(CheckpointAccounting::from_parts(50, 40, Some(38), Some(40), 1).is_none());
        assert!(CheckpointAccounting::from_parts(0, 40, Some(38), None, 1).is_none());
        assert!(CheckpointAccounting::from_parts(0, 40, None, None, 0).is_some());
        assert!(CheckpointAccounting::from_parts(3, 40, None, None, 0).is_none());
    }
}
