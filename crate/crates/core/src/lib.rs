//! Timing core: pluggable clocks, caliper timers and an auto-timed
//! schedule executor, plus an adaptive checkpoint policy and a synthetic
//! AMR experiment driver that runs entirely in virtual time.
//!
//! The crate is `no_std` (it needs `alloc`). Operating-system clocks, file
//! formats, the monitoring endpoint and the command line live in the
//! `timekeep` companion crate. The virtual clock, event counters and the
//! experiment driver need 64-bit atomics and are absent on targets
//! without them.
//!
//! Clocks are the low-level measurement sources ([`clock`]); timers bundle
//! one instance of every registered clock and are what application code
//! is expected to use ([`timer`]). Every routine registered with a
//! [`schedule::Scheduler`] gets a timer automatically.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod checkpoint;
pub mod clock;
#[cfg(target_has_atomic = "64")]
pub mod harness;
pub mod report;
pub mod schedule;
pub mod timer;

pub use clock::{BackendId, ClockError, ClockInstance, ClockRegistry, ClockSource, ClockValueDescriptor, Unit};
#[cfg(target_has_atomic = "64")]
pub use clock::{EventCounter, VirtualClockController};
pub use timer::{ClockReading, TimerDatabase, TimerError, TimerHandle, TimerReading, TimerSnapshot};

/// Nanoseconds per second; the internal time unit is the integer nanosecond.
pub const NANOS_PER_SEC: u64 = 1_000_000_000;

/// Converts seconds to whole nanoseconds, rounding to nearest.
///
/// Negative and NaN inputs map to zero; values beyond `u64::MAX` ns
/// (including infinity) saturate.
pub fn secs_to_nanos(secs: f64) -> u64 {
    if secs.is_nan() || secs <= 0.0 {
        return 0;
    }
    let ns = secs * NANOS_PER_SEC as f64;
    if ns >= u64::MAX as f64 {
        u64::MAX
    } else {
        // round half away from zero without std's f64::round
        (ns + 0.5) as u64
    }
}

/// Converts integer nanoseconds to seconds. Presentation only.
pub fn nanos_to_secs(ns: u64) -> f64 {
    ns as f64 / NANOS_PER_SEC as f64
}
