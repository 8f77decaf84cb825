//! Clock abstraction and backend registry.
//!
//! A clock backend is anything that can produce a vector of raw, monotonic
//! integer readings (nanoseconds for time, plain counts for events). The
//! generic [`ClockInstance`] turns those readings into the familiar
//! create / start / stop / get / set / reset surface: stopping adds the
//! reading delta since the matching start to an accumulator.
//!
//! Clocks are normally not used directly; see [`crate::timer`].

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

#[cfg(target_has_atomic = "64")]
mod sources;
#[cfg(target_has_atomic = "64")]
pub use sources::{EventCounter, VirtualClockController};

/// Unit of one clock value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Unit {
    /// Time, stored as integer nanoseconds.
    Seconds,
    /// Discrete events (instructions, cache misses, packet losses, ...).
    Count,
}

impl Unit {
    pub fn as_str(self) -> &'static str {
        match self {
            Unit::Seconds => "seconds",
            Unit::Count => "count",
        }
    }

    pub fn parse(s: &str) -> Option<Unit> {
        match s {
            "seconds" => Some(Unit::Seconds),
            "count" => Some(Unit::Count),
            _ => None,
        }
    }
}

/// Describes one value produced by a clock backend.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClockValueDescriptor {
    pub name: String,
    pub unit: Unit,
    /// Smallest meaningful increment, in the integer base of `unit`
    /// (nanoseconds or counts). Informational only.
    pub resolution: u64,
}

impl ClockValueDescriptor {
    pub fn new(name: impl Into<String>, unit: Unit, resolution: u64) -> Self {
        Self {
            name: name.into(),
            unit,
            resolution,
        }
    }

    pub fn seconds(name: impl Into<String>, resolution_ns: u64) -> Self {
        Self::new(name, Unit::Seconds, resolution_ns)
    }

    pub fn count(name: impl Into<String>) -> Self {
        Self::new(name, Unit::Count, 1)
    }
}

/// A measurement source. Implementations must be cheap to read; `read` is
/// called on every start, stop and live snapshot.
pub trait ClockSource: Send + Sync {
    /// Values produced by this source, in output order. Must be non-empty
    /// and must not change after registration.
    fn descriptors(&self) -> &[ClockValueDescriptor];

    /// Writes the current raw readings into `out` (`out.len()` equals the
    /// number of descriptors).
    fn read(&self, out: &mut [u64]);
}

/// Stable index of a registered backend.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BackendId(usize);

impl BackendId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for BackendId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClockState {
    Stopped,
    Running,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ClockError {
    #[error("clock backend `{0}` is already registered")]
    DuplicateBackend(String),
    #[error("clock backend name must not be empty")]
    EmptyBackendName,
    #[error("clock backend `{0}` exposes no values")]
    NoValues(String),
    #[error("clock backend `{backend}` declares value `{value}` twice")]
    DuplicateValueName { backend: String, value: String },
    #[error("unknown clock backend {0}")]
    UnknownBackend(BackendId),
    #[error("clock is already running")]
    AlreadyRunning,
    #[error("clock is not running")]
    NotRunning,
    #[error("expected {expected} values, got {got}")]
    Arity { expected: usize, got: usize },
}

struct Backend {
    name: String,
    source: Arc<dyn ClockSource>,
}

/// Registry of clock backends. Registration order is preserved and defines
/// column order everywhere downstream.
#[derive(Default)]
pub struct ClockRegistry {
    backends: Vec<Backend>,
}

impl fmt::Debug for ClockRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.names()).finish()
    }
}

impl ClockRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: impl Into<String>, source: Arc<dyn ClockSource>) -> Result<BackendId, ClockError> {
        let name = name.into();
        if name.is_empty() {
            return Err(ClockError::EmptyBackendName);
        }
        if self.lookup(&name).is_some() {
            return Err(ClockError::DuplicateBackend(name));
        }
        let descriptors = source.descriptors();
        if descriptors.is_empty() {
            return Err(ClockError::NoValues(name));
        }
        for (i, d) in descriptors.iter().enumerate() {
            if descriptors[..i].iter().any(|o| o.name == d.name) {
                return Err(ClockError::DuplicateValueName {
                    backend: name,
                    value: d.name.clone(),
                });
            }
        }
        self.backends.push(Backend { name, source });
        Ok(BackendId(self.backends.len() - 1))
    }

    pub fn lookup(&self, name: &str) -> Option<BackendId> {
        self.backends.iter().position(|b| b.name == name).map(BackendId)
    }

    pub fn len(&self) -> usize {
        self.backends.len()
    }

    pub fn is_empty(&self) -> bool {
        self.backends.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = BackendId> + '_ {
        (0..self.backends.len()).map(BackendId)
    }

    /// Backend names in registration order.
    pub fn names(&self) -> impl Iterator<Item = &str> + '_ {
        self.backends.iter().map(|b| b.name.as_str())
    }

    pub fn name(&self, id: BackendId) -> Result<&str, ClockError> {
        self.backend(id).map(|b| b.name.as_str())
    }

    pub fn descriptors(&self, id: BackendId) -> Result<&[ClockValueDescriptor], ClockError> {
        self.backend(id).map(|b| b.source.descriptors())
    }

    /// Raw current reading of a backend, outside of any instance.
    pub fn read_now(&self, id: BackendId) -> Result<Vec<u64>, ClockError> {
        let b = self.backend(id)?;
        let mut out = vec![0; b.source.descriptors().len()];
        b.source.read(&mut out);
        Ok(out)
    }

    /// Creates a fresh, stopped, all-zero instance of backend `id`.
    pub fn create(&self, id: BackendId) -> Result<ClockInstance, ClockError> {
        let b = self.backend(id)?;
        Ok(ClockInstance::new(id, b.source.clone()))
    }

    fn backend(&self, id: BackendId) -> Result<&Backend, ClockError> {
        self.backends.get(id.0).ok_or(ClockError::UnknownBackend(id))
    }
}

/// One independent measurement of a backend.
pub struct ClockInstance {
    backend: BackendId,
    source: Arc<dyn ClockSource>,
    state: ClockState,
    accumulated: Vec<u64>,
    epoch: Vec<u64>,
    scratch: Vec<u64>,
}

impl fmt::Debug for ClockInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClockInstance")
            .field("backend", &self.backend)
            .field("state", &self.state)
            .field("accumulated", &self.accumulated)
            .finish()
    }
}

impl ClockInstance {
    fn new(backend: BackendId, source: Arc<dyn ClockSource>) -> Self {
        let n = source.descriptors().len();
        Self {
            backend,
            source,
            state: ClockState::Stopped,
            accumulated: vec![0; n],
            epoch: vec![0; n],
            scratch: vec![0; n],
        }
    }

    pub fn backend(&self) -> BackendId {
        self.backend
    }

    pub fn state(&self) -> ClockState {
        self.state
    }

    pub fn is_running(&self) -> bool {
        self.state == ClockState::Running
    }

    pub fn arity(&self) -> usize {
        self.accumulated.len()
    }

    pub fn start(&mut self) -> Result<(), ClockError> {
        if self.is_running() {
            return Err(ClockError::AlreadyRunning);
        }
        self.source.read(&mut self.epoch);
        self.state = ClockState::Running;
        Ok(())
    }

    pub fn stop(&mut self) -> Result<(), ClockError> {
        if !self.is_running() {
            return Err(ClockError::NotRunning);
        }
        self.source.read(&mut self.scratch);
        for ((acc, now), start) in self.accumulated.iter_mut().zip(&self.scratch).zip(&self.epoch) {
            *acc = acc.saturating_add(now.saturating_sub(*start));
        }
        self.state = ClockState::Stopped;
        Ok(())
    }

    /// Accumulated values; while running, includes the interval in progress
    /// without disturbing it.
    pub fn get(&self) -> Vec<u64> {
        let mut out = self.accumulated.clone();
        if self.is_running() {
            let mut now = vec![0; out.len()];
            self.source.read(&mut now);
            for ((v, now), start) in out.iter_mut().zip(&now).zip(&self.epoch) {
                *v = v.saturating_add(now.saturating_sub(*start));
            }
        }
        out
    }

    /// Replaces the accumulated values. The instance must be stopped.
    pub fn set(&mut self, values: &[u64]) -> Result<(), ClockError> {
        if self.is_running() {
            return Err(ClockError::AlreadyRunning);
        }
        if values.len() != self.accumulated.len() {
            return Err(ClockError::Arity {
                expected: self.accumulated.len(),
                got: values.len(),
            });
        }
        self.accumulated.copy_from_slice(values);
        Ok(())
    }

    /// Zeroes the accumulator. A running instance keeps running from a
    /// fresh epoch.
    pub fn reset(&mut self) {
        self.accumulated.iter_mut().for_each(|v| *v = 0);
        if self.is_running() {
            self.source.read(&mut self.epoch);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SEC: u64 = crate::NANOS_PER_SEC;

    fn virtual_registry() -> (ClockRegistry, BackendId, VirtualClockController) {
        let ctrl = VirtualClockController::new();
        let mut reg = ClockRegistry::new();
        let id = reg.register("virtual-wall", ctrl.wall_source()).unwrap();
        (reg, id, ctrl)
    }

    #[test]
    fn first_registration_gets_id_zero() {
        let (reg, id, _) = virtual_registry();
        assert_eq!(id.index(), 0);
        assert_eq!(reg.len(), 1);
    }

    #[test]
    fn duplicate_backend_is_rejected() {
        let (mut reg, _, ctrl) = virtual_registry();
        let err = reg.register("virtual-wall", ctrl.wall_source()).unwrap_err();
        assert_eq!(err, ClockError::DuplicateBackend("virtual-wall".into()));
    }

    #[test]
    fn names_in_registration_order() {
        let ctrl = VirtualClockController::new();
        let mut reg = ClockRegistry::new();
        for n in ["c", "a", "b"] {
            reg.register(n, ctrl.wall_source()).unwrap();
        }
        assert_eq!(reg.names().collect::<Vec<_>>(), ["c", "a", "b"]);
    }

    #[test]
    fn bad_backends_are_rejected() {
        let mut reg = ClockRegistry::new();
        let ctrl = VirtualClockController::new();
        assert_eq!(
            reg.register("", ctrl.wall_source()).unwrap_err(),
            ClockError::EmptyBackendName
        );
        let empty = EventCounter::new(Vec::<String>::new());
        assert!(matches!(
            reg.register("none", empty.source()),
            Err(ClockError::NoValues(_))
        ));
        let dup = EventCounter::new(["x", "x"]);
        assert!(matches!(
            reg.register("dup", dup.source()),
            Err(ClockError::DuplicateValueName { .. })
        ));
    }

    #[test]
    fn create_gives_stopped_zero_instance() {
        let (reg, id, _) = virtual_registry();
        let c = reg.create(id).unwrap();
        assert_eq!(c.state(), ClockState::Stopped);
        assert_eq!(c.get(), [0]);
    }

    #[test]
    fn create_unknown_backend() {
        let (reg, _, _) = virtual_registry();
        let bogus = BackendId(7);
        assert_eq!(reg.create(bogus).unwrap_err(), ClockError::UnknownBackend(bogus));
    }

    #[test]
    fn instances_are_independent() {
        let (reg, id, ctrl) = virtual_registry();
        let mut a = reg.create(id).unwrap();
        let b = reg.create(id).unwrap();
        a.start().unwrap();
        ctrl.advance(3 * SEC);
        a.stop().unwrap();
        assert_eq!(a.get(), [3 * SEC]);
        assert_eq!(b.get(), [0]);
    }

    #[test]
    fn single_and_repeated_intervals() {
        let (reg, id, ctrl) = virtual_registry();
        let mut c = reg.create(id).unwrap();
        c.start().unwrap();
        ctrl.advance(5 * SEC);
        c.stop().unwrap();
        assert_eq!(c.get(), [5 * SEC]);

        let mut c = reg.create(id).unwrap();
        c.start().unwrap();
        ctrl.advance(2 * SEC);
        c.stop().unwrap();
        ctrl.advance(100 * SEC); // not running, not counted
        c.start().unwrap();
        ctrl.advance(3 * SEC);
        c.stop().unwrap();
        assert_eq!(c.get(), [5 * SEC]);
    }

    #[test]
    fn state_violations() {
        let (reg, id, _) = virtual_registry();
        let mut c = reg.create(id).unwrap();
        assert_eq!(c.stop().unwrap_err(), ClockError::NotRunning);
        c.start().unwrap();
        assert_eq!(c.start().unwrap_err(), ClockError::AlreadyRunning);
    }

    #[test]
    fn live_snapshot_while_running() {
        let (reg, id, ctrl) = virtual_registry();
        let mut c = reg.create(id).unwrap();
        c.set(&[5 * SEC]).unwrap();
        c.start().unwrap();
        ctrl.advance(2 * SEC);
        assert_eq!(c.get(), [7 * SEC]);
        assert!(c.is_running());
        ctrl.advance(SEC);
        c.stop().unwrap();
        assert_eq!(c.get(), [8 * SEC]);
    }

    #[test]
    fn event_counter_counts_while_running() {
        let ev = EventCounter::new(["events"]);
        let mut reg = ClockRegistry::new();
        let id = reg.register("event-counter", ev.source()).unwrap();
        let mut c = reg.create(id).unwrap();
        ev.record(100); // before start: not observed
        c.start().unwrap();
        ev.record(3);
        ev.record(4);
        assert_eq!(c.get(), [7]);
    }

    #[test]
    fn multi_value_counters() {
        let ev = EventCounter::new(["instructions", "flops"]);
        let mut reg = ClockRegistry::new();
        let id = reg.register("counters", ev.source()).unwrap();
        let mut c = reg.create(id).unwrap();
        c.start().unwrap();
        ev.record_at(0, 10);
        ev.record_at(1, 4);
        ev.record_at(0, 1);
        c.stop().unwrap();
        assert_eq!(c.get(), [11, 4]);
        assert_eq!(reg.descriptors(id).unwrap()[1].name, "flops");
    }

    #[test]
    fn set_rules() {
        let (reg, id, _) = virtual_registry();
        let mut c = reg.create(id).unwrap();
        c.set(&[12_500_000_000]).unwrap();
        assert_eq!(c.get(), [12_500_000_000]);
        assert_eq!(c.set(&[1, 2]).unwrap_err(), ClockError::Arity { expected: 1, got: 2 });
        c.start().unwrap();
        assert_eq!(c.set(&[1]).unwrap_err(), ClockError::AlreadyRunning);
    }

    #[test]
    fn reset_rules() {
        let (reg, id, ctrl) = virtual_registry();
        let mut c = reg.create(id).unwrap();
        c.reset();
        assert_eq!(c.get(), [0]);

        c.start().unwrap();
        ctrl.advance(5 * SEC);
        c.stop().unwrap();
        c.reset();
        assert_eq!(c.get(), [0]);

        c.start().unwrap();
        ctrl.advance(4 * SEC);
        c.reset();
        ctrl.advance(SEC);
        c.stop().unwrap();
        assert_eq!(c.get(), [SEC]);
    }

    #[test]
    fn controller_monotone() {
        let ctrl = VirtualClockController::starting_at(10);
        let other = ctrl.clone();
        ctrl.advance(5);
        assert_eq!(other.now_ns(), 15);
    }

    #[derive(Debug, Clone)]
    enum Op {
        Start,
        Stop,
        Advance(u64),
        Reset,
    }

    fn op() -> impl Strategy<Value = Op> {
        prop_oneof![
            Just(Op::Start),
            Just(Op::Stop),
            (0u64..10 * SEC).prop_map(Op::Advance),
            Just(Op::Reset),
        ]
    }

    proptest! {
        #[test]
        fn accumulated_equals_running_advances(ops in prop::collection::vec(op(), 0..64)) {
            let (reg, id, ctrl) = virtual_registry();
            let mut c = reg.create(id).unwrap();
            let mut expected = 0u64;
            let mut running = false;
            let mut last = 0u64;
            for op in ops {
                match op {
                    Op::Start => { if c.start().is_ok() { running = true; } }
                    Op::Stop => { if c.stop().is_ok() { running = false; } }
                    Op::Advance(d) => { ctrl.advance(d); if running { expected += d; } }
                    Op::Reset => { c.reset(); expected = 0; last = 0; }
                }
                prop_assert_eq!(c.get(), [expected]);
                if running {
                    prop_assert!(c.get()[0] >= last);
                }
                last = c.get()[0];
            }
        }
    }
}
