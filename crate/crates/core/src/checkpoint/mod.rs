//! Adaptive checkpoint control.
//!
//! [`decide`] is evaluated at iteration boundaries. In fixed-interval mode
//! it looks only at the iteration counter. In adaptive mode it vetoes a
//! checkpoint while the share of wall time already spent checkpointing is
//! above the configured bound, unless the time since the last checkpoint
//! has reached the configured maximum interval. The bound is weak: it is
//! checked before the candidate checkpoint, so the checkpoint it allows may
//! itself push the share above the bound.
//!
//! All time quantities are integer nanoseconds measured from simulation
//! start; the fraction test is exact integer arithmetic.

mod accounting;
mod file;
mod policy;

pub use accounting::{AccountingError, CheckpointAccounting};
pub use file::{checkpoint_file_name, CheckpointFile, FormatError, SimulationState, FORMAT_VERSION, MAGIC};
pub use policy::{
    decide, CheckpointDecision, CheckpointMode, CheckpointPolicy, FractionBound, PolicyError, Reason, Verdict,
};
