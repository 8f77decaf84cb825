use core::fmt;

use thiserror::Error;

use super::CheckpointAccounting;

/// A fraction in (0, 1], held as parts per billion so that comparisons
/// against nanosecond totals are exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FractionBound {
    ppb: u64,
}

impl FractionBound {
    pub const PARTS: u64 = 1_000_000_000;

    /// `None` unless `0 < ppb <= 1e9`.
    pub fn from_ppb(ppb: u64) -> Option<Self> {
        (ppb > 0 && ppb <= Self::PARTS).then_some(Self { ppb })
    }

    /// Rounds to the nearest part per billion. `None` outside (0, 1] or if
    /// the value rounds to zero.
    pub fn from_f64(value: f64) -> Option<Self> {
        if !(value > 0.0 && value <= 1.0) {
            return None;
        }
        Self::from_ppb((value * Self::PARTS as f64 + 0.5) as u64)
    }

    pub fn ppb(self) -> u64 {
        self.ppb
    }

    pub fn as_f64(self) -> f64 {
        self.ppb as f64 / Self::PARTS as f64
    }

    /// `part / whole <= self`, with `0 / 0` taken as zero.
    pub fn admits(self, part: u64, whole: u64) -> bool {
        part as u128 * Self::PARTS as u128 <= self.ppb as u128 * whole as u128
    }
}

impl fmt::Display for FractionBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_f64())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckpointMode {
    /// Checkpoint every `every` iterations (iteration > 0).
    FixedInterval { every: u64 },
    /// Gate on the checkpoint-time fraction, with an optional cap on the
    /// wall time between checkpoint starts.
    Adaptive {
        max_fraction: FractionBound,
        max_interval_ns: Option<u64>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CheckpointPolicy {
    pub mode: CheckpointMode,
    pub on_initial: bool,
    pub on_terminate: bool,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolicyError {
    #[error("checkpoint interval must be at least one iteration")]
    ZeroInterval,
    #[error("maximum checkpoint interval must be positive")]
    ZeroMaxInterval,
}

impl CheckpointPolicy {
    pub fn fixed_interval(every: u64) -> Result<Self, PolicyError> {
        let p = Self {
            mode: CheckpointMode::FixedInterval { every },
            on_initial: false,
            on_terminate: false,
        };
        p.validate().map(|_| p)
    }

    pub fn adaptive(max_fraction: FractionBound, max_interval_ns: Option<u64>) -> Result<Self, PolicyError> {
        let p = Self {
            mode: CheckpointMode::Adaptive {
                max_fraction,
                max_interval_ns,
            },
            on_initial: false,
            on_terminate: false,
        };
        p.validate().map(|_| p)
    }

    pub fn with_initial(mut self, on: bool) -> Self {
        self.on_initial = on;
        self
    }

    pub fn with_terminate(mut self, on: bool) -> Self {
        self.on_terminate = on;
        self
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        match self.mode {
            CheckpointMode::FixedInterval { every: 0 } => Err(PolicyError::ZeroInterval),
            CheckpointMode::Adaptive {
                max_interval_ns: Some(0),
                ..
            } => Err(PolicyError::ZeroMaxInterval),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Verdict {
    Checkpoint,
    Skip,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Reason {
    Initial,
    Terminal,
    PeriodicDue,
    AdaptiveAllowed,
    MaxIntervalForced,
    SkipFractionExceeded,
    SkipNotDue,
}

impl Reason {
    pub fn verdict(self) -> Verdict {
        match self {
            Reason::SkipFractionExceeded | Reason::SkipNotDue => Verdict::Skip,
            _ => Verdict::Checkpoint,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Reason::Initial => "initial",
            Reason::Terminal => "terminal",
            Reason::PeriodicDue => "periodic_due",
            Reason::AdaptiveAllowed => "adaptive_allowed",
            Reason::MaxIntervalForced => "max_interval_forced",
            Reason::SkipFractionExceeded => "skip_fraction_exceeded",
            Reason::SkipNotDue => "skip_not_due",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CheckpointDecision {
    pub verdict: Verdict,
    pub reason: Reason,
}

impl From<Reason> for CheckpointDecision {
    fn from(reason: Reason) -> Self {
        Self {
            verdict: reason.verdict(),
            reason,
        }
    }
}

impl CheckpointDecision {
    pub fn is_checkpoint(&self) -> bool {
        self.verdict == Verdict::Checkpoint
    }
}

/// Decides whether to checkpoint at the boundary reached at `now_ns`
/// (nanoseconds since simulation start).
///
/// Precedence: terminal, then initial, then the mode rule. In adaptive
/// mode the maximum interval wins over the fraction veto; the interval is
/// measured from the start of the last checkpoint (from simulation start if
/// there was none). Initial boundaries only ever checkpoint through
/// `on_initial`.
pub fn decide(
    policy: &CheckpointPolicy,
    accounting: &CheckpointAccounting,
    now_ns: u64,
    iteration: u64,
    is_initial: bool,
    is_terminal: bool,
) -> Result<CheckpointDecision, PolicyError> {
    policy.validate()?;
    if is_terminal && policy.on_terminate {
        return Ok(Reason::Terminal.into());
    }
    if is_initial {
        return Ok(if policy.on_initial {
            Reason::Initial
        } else {
            Reason::SkipNotDue
        }
        .into());
    }
    let reason = match policy.mode {
        CheckpointMode::FixedInterval { every } => {
            if iteration > 0 && iteration.is_multiple_of(every) {
                Reason::PeriodicDue
            } else {
                Reason::SkipNotDue
            }
        }
        CheckpointMode::Adaptive {
            max_fraction,
            max_interval_ns,
        } => {
            let since_last = now_ns.saturating_sub(accounting.last_checkpoint_start_ns().unwrap_or(0));
            if max_interval_ns.is_some_and(|max| since_last >= max) {
                Reason::MaxIntervalForced
            } else if max_fraction.admits(accounting.total_checkpoint_ns(), now_ns) {
                Reason::AdaptiveAllowed
            } else {
                Reason::SkipFractionExceeded
            }
        }
    };
    Ok(reason.into())
}
