//! Timers and the timer database.
//!
//! A timer is a named caliper: starting it starts one instance of every
//! clock backend that was registered when the timer was created, and
//! reading it returns the values of all of those clocks. Handles are
//! assigned sequentially and never reused.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::clock::{BackendId, ClockError, ClockInstance, ClockRegistry, ClockSource, ClockValueDescriptor, Unit};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimerHandle(u32);

impl TimerHandle {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for TimerHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TimerError {
    #[error("timer name must not be empty")]
    EmptyName,
    #[error("timer `{0}` already exists")]
    DuplicateName(String),
    #[error("unknown timer handle {0}")]
    UnknownHandle(TimerHandle),
    #[error("timer `{0}` is already running")]
    AlreadyRunning(String),
    #[error("timer `{0}` is not running")]
    NotRunning(String),
    #[error("timer has no clock named `{0}`")]
    UnknownClock(String),
    #[error("clock `{clock}` takes {expected} values, got {got}")]
    Arity { clock: String, expected: usize, got: usize },
    #[error(transparent)]
    Clock(#[from] ClockError),
}

/// Values of one clock within a timer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClockReading {
    pub clock: String,
    pub values: Vec<u64>,
}

/// Result of reading a timer: one entry per clock, in registration order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TimerReading {
    pub clocks: Vec<ClockReading>,
}

impl TimerReading {
    pub fn get(&self, clock: &str) -> Option<&[u64]> {
        self.clocks
            .iter()
            .find(|r| r.clock == clock)
            .map(|r| r.values.as_slice())
    }

    /// First value of `clock`, or zero when absent.
    pub fn first(&self, clock: &str) -> u64 {
        self.get(clock).and_then(|v| v.first().copied()).unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[u64])> {
        self.clocks.iter().map(|r| (r.clock.as_str(), r.values.as_slice()))
    }
}

/// A clock column group as seen by a snapshot.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClockInfo {
    pub name: String,
    pub values: Vec<ClockValueDescriptor>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SnapshotEntry {
    pub name: String,
    pub running: bool,
    pub reading: TimerReading,
}

/// A consistent read of every timer in the database.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TimerSnapshot {
    /// Wall timestamp (ns) from the database's timestamp clock, 0 if none.
    pub taken_at_ns: u64,
    pub clocks: Vec<ClockInfo>,
    /// Timers in handle order.
    pub entries: Vec<SnapshotEntry>,
}

impl TimerSnapshot {
    pub fn entry(&self, name: &str) -> Option<&SnapshotEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn unit_of(&self, clock: &str, value: usize) -> Option<Unit> {
        self.clocks
            .iter()
            .find(|c| c.name == clock)
            .and_then(|c| c.values.get(value))
            .map(|d| d.unit)
    }
}

struct Timer {
    name: String,
    clocks: Vec<ClockInstance>,
    running: bool,
}

/// Registry of all timers, plus the clock registry they draw from.
pub struct TimerDatabase {
    registry: ClockRegistry,
    timers: Vec<Timer>,
    by_name: BTreeMap<String, TimerHandle>,
    timestamp_clock: Option<BackendId>,
}

impl fmt::Debug for TimerDatabase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TimerDatabase")
            .field("clocks", &self.registry)
            .field("timers", &self.timers.len())
            .finish()
    }
}

impl Default for TimerDatabase {
    fn default() -> Self {
        Self::new(ClockRegistry::new())
    }
}

impl TimerDatabase {
    pub fn new(registry: ClockRegistry) -> Self {
        Self {
            registry,
            timers: Vec::new(),
            by_name: BTreeMap::new(),
            timestamp_clock: None,
        }
    }

    pub fn registry(&self) -> &ClockRegistry {
        &self.registry
    }

    /// Registers another clock backend. Only timers created afterwards
    /// carry it.
    pub fn register_backend(
        &mut self,
        name: impl Into<String>,
        source: Arc<dyn ClockSource>,
    ) -> Result<BackendId, ClockError> {
        self.registry.register(name, source)
    }

    /// Chooses the backend whose first value stamps snapshots. Defaults to
    /// the first registered backend whose first value is in seconds.
    pub fn set_timestamp_clock(&mut self, id: BackendId) -> Result<(), ClockError> {
        self.registry.descriptors(id)?;
        self.timestamp_clock = Some(id);
        Ok(())
    }

    /// Current wall time according to the timestamp clock.
    pub fn now_ns(&self) -> u64 {
        let id = self.timestamp_clock.or_else(|| {
            self.registry.ids().find(|&id| {
                self.registry
                    .descriptors(id)
                    .map(|d| d[0].unit == Unit::Seconds)
                    .unwrap_or(false)
            })
        });
        id.and_then(|id| self.registry.read_now(id).ok())
            .map(|v| v[0])
            .unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.timers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timers.is_empty()
    }

    pub fn handles(&self) -> impl Iterator<Item = TimerHandle> {
        (0..self.timers.len() as u32).map(TimerHandle)
    }

    pub fn create(&mut self, name: &str) -> Result<TimerHandle, TimerError> {
        if name.is_empty() {
            return Err(TimerError::EmptyName);
        }
        if self.by_name.contains_key(name) {
            return Err(TimerError::DuplicateName(name.to_string()));
        }
        let clocks = self
            .registry
            .ids()
            .map(|id| self.registry.create(id))
            .collect::<Result<Vec<_>, _>>()?;
        let handle = TimerHandle(self.timers.len() as u32);
        self.timers.push(Timer {
            name: name.to_string(),
            clocks,
            running: false,
        });
        self.by_name.insert(name.to_string(), handle);
        Ok(handle)
    }

    pub fn lookup(&self, name: &str) -> Option<TimerHandle> {
        self.by_name.get(name).copied()
    }

    pub fn name(&self, handle: TimerHandle) -> Result<&str, TimerError> {
        self.timer(handle).map(|t| t.name.as_str())
    }

    pub fn is_running(&self, handle: TimerHandle) -> Result<bool, TimerError> {
        self.timer(handle).map(|t| t.running)
    }

    pub fn start(&mut self, handle: TimerHandle) -> Result<(), TimerError> {
        let t = self.timer_mut(handle)?;
        if t.running {
            return Err(TimerError::AlreadyRunning(t.name.clone()));
        }
        for c in &mut t.clocks {
            c.start()?;
        }
        t.running = true;
        Ok(())
    }

    pub fn stop(&mut self, handle: TimerHandle) -> Result<(), TimerError> {
        let t = self.timer_mut(handle)?;
        if !t.running {
            return Err(TimerError::NotRunning(t.name.clone()));
        }
        for c in &mut t.clocks {
            c.stop()?;
        }
        t.running = false;
        Ok(())
    }

    /// Values of every clock of the timer; live if the timer is running.
    pub fn read(&self, handle: TimerHandle) -> Result<TimerReading, TimerError> {
        let t = self.timer(handle)?;
        Ok(self.reading_of(t))
    }

    /// Zeroes every clock; a running timer keeps running.
    pub fn reset(&mut self, handle: TimerHandle) -> Result<(), TimerError> {
        let t = self.timer_mut(handle)?;
        t.clocks.iter_mut().for_each(ClockInstance::reset);
        Ok(())
    }

    /// Overwrites the named clocks of a stopped timer. Validation happens
    /// before anything is written, so a failed call changes nothing.
    pub fn set<'a, I>(&mut self, handle: TimerHandle, values: I) -> Result<(), TimerError>
    where
        I: IntoIterator<Item = (&'a str, &'a [u64])>,
    {
        let values: Vec<_> = values.into_iter().collect();
        let positions = {
            let t = self.timer(handle)?;
            if t.running {
                return Err(TimerError::AlreadyRunning(t.name.clone()));
            }
            let mut positions = Vec::with_capacity(values.len());
            for (clock, vals) in &values {
                let pos = t
                    .clocks
                    .iter()
                    .position(|c| self.registry.name(c.backend()).ok() == Some(*clock))
                    .ok_or_else(|| TimerError::UnknownClock(clock.to_string()))?;
                let expected = t.clocks[pos].arity();
                if expected != vals.len() {
                    return Err(TimerError::Arity {
                        clock: clock.to_string(),
                        expected,
                        got: vals.len(),
                    });
                }
                positions.push(pos);
            }
            positions
        };
        let t = self.timer_mut(handle)?;
        for (pos, (_, vals)) in positions.into_iter().zip(values) {
            t.clocks[pos].set(vals)?;
        }
        Ok(())
    }

    pub fn snapshot(&self) -> TimerSnapshot {
        let clocks = self
            .registry
            .ids()
            .map(|id| ClockInfo {
                name: self.registry.name(id).unwrap_or_default().to_string(),
                values: self.registry.descriptors(id).unwrap_or_default().to_vec(),
            })
            .collect();
        TimerSnapshot {
            taken_at_ns: self.now_ns(),
            clocks,
            entries: self
                .timers
                .iter()
                .map(|t| SnapshotEntry {
                    name: t.name.clone(),
                    running: t.running,
                    reading: self.reading_of(t),
                })
                .collect(),
        }
    }

    fn reading_of(&self, t: &Timer) -> TimerReading {
        TimerReading {
            clocks: t
                .clocks
                .iter()
                .map(|c| ClockReading {
                    clock: self.registry.name(c.backend()).unwrap_or_default().to_string(),
                    values: c.get(),
                })
                .collect(),
        }
    }

    fn timer(&self, handle: TimerHandle) -> Result<&Timer, TimerError> {
        self.timers.get(handle.index()).ok_or(TimerError::UnknownHandle(handle))
    }

    fn timer_mut(&mut self, handle: TimerHandle) -> Result<&mut Timer, TimerError> {
        self.timers
            .get_mut(handle.index())
            .ok_or(TimerError::UnknownHandle(handle))
    }
}
