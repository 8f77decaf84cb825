//! Clock sources backed by 64-bit atomics.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;
use core::sync::atomic::{AtomicU64, Ordering};

use super::{ClockSource, ClockValueDescriptor};

/// Manually advanced simulation time in integer nanoseconds.
///
/// Cloning yields another handle to the same time line. There should be one
/// writer; reads may come from anywhere.
#[derive(Clone, Debug, Default)]
pub struct VirtualClockController {
    now: Arc<AtomicU64>,
}

impl VirtualClockController {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn starting_at(now_ns: u64) -> Self {
        Self {
            now: Arc::new(AtomicU64::new(now_ns)),
        }
    }

    pub fn now_ns(&self) -> u64 {
        self.now.load(Ordering::Acquire)
    }

    /// Advances time by exactly `ns`.
    ///
    /// # Panics
    ///
    /// Panics if virtual time would overflow `u64` nanoseconds (~584 years).
    pub fn advance(&self, ns: u64) {
        let prev = self.now.fetch_add(ns, Ordering::AcqRel);
        assert!(prev.checked_add(ns).is_some(), "virtual time overflow");
    }

    /// A wall-time clock source reading this controller.
    pub fn wall_source(&self) -> Arc<dyn ClockSource> {
        Arc::new(VirtualWallSource {
            ctrl: self.clone(),
            descriptors: [ClockValueDescriptor::seconds("wall", 1)],
        })
    }
}

struct VirtualWallSource {
    ctrl: VirtualClockController,
    descriptors: [ClockValueDescriptor; 1],
}

impl ClockSource for VirtualWallSource {
    fn descriptors(&self) -> &[ClockValueDescriptor] {
        &self.descriptors
    }

    fn read(&self, out: &mut [u64]) {
        out[0] = self.ctrl.now_ns();
    }
}

/// Explicitly fed event counters, modelled after hardware counter sets:
/// every instance created from the backend observes the events recorded
/// while it runs.
#[derive(Clone)]
pub struct EventCounter {
    inner: Arc<EventCounterInner>,
}

struct EventCounterInner {
    descriptors: Vec<ClockValueDescriptor>,
    counts: Vec<AtomicU64>,
}

impl fmt::Debug for EventCounter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EventCounter")
            .field("counters", &self.inner.descriptors.len())
            .finish()
    }
}

impl EventCounter {
    /// One counter per name. An empty list is accepted here but rejected
    /// at registration.
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Self {
        let descriptors: Vec<_> = names.into_iter().map(ClockValueDescriptor::count).collect();
        let counts = descriptors.iter().map(|_| AtomicU64::new(0)).collect();
        Self {
            inner: Arc::new(EventCounterInner { descriptors, counts }),
        }
    }

    /// Records `n` events on the first counter.
    pub fn record(&self, n: u64) {
        self.record_at(0, n);
    }

    /// # Panics
    ///
    /// Panics if `index` is not a valid counter index.
    pub fn record_at(&self, index: usize, n: u64) {
        self.inner.counts[index].fetch_add(n, Ordering::AcqRel);
    }

    pub fn source(&self) -> Arc<dyn ClockSource> {
        Arc::new(self.clone())
    }
}

impl ClockSource for EventCounter {
    fn descriptors(&self) -> &[ClockValueDescriptor] {
        &self.inner.descriptors
    }

    fn read(&self, out: &mut [u64]) {
        for (o, c) in out.iter_mut().zip(&self.inner.counts) {
            *o = c.load(Ordering::Acquire);
        }
    }
}
