//! Clock backends backed by the operating system.

use std::sync::Arc;
use std::time::Instant;

use timekeep_core::{ClockSource, ClockValueDescriptor};

pub const REAL_WALL: &str = "real-wall";
pub const PROCESS_CPU: &str = "process-cpu";
pub const CYCLE: &str = "cycle";

/// Monotonic wall time since the source was created.
pub struct RealWall {
    epoch: Instant,
    descriptors: [ClockValueDescriptor; 1],
}

impl RealWall {
    pub fn new() -> Self {
        Self {
            epoch: Instant::now(),
            descriptors: [ClockValueDescriptor::seconds("wall", 1)],
        }
    }
}

impl Default for RealWall {
    fn default() -> Self {
        Self::new()
    }
}

impl ClockSource for RealWall {
    fn descriptors(&self) -> &[ClockValueDescriptor] {
        &self.descriptors
    }

    fn read(&self, out: &mut [u64]) {
        out[0] = u64::try_from(self.epoch.elapsed().as_nanos()).unwrap_or(u64::MAX);
    }
}

/// CPU time consumed by the whole process (user + system).
pub struct ProcessCpu {
    descriptors: [ClockValueDescriptor; 1],
}

impl ProcessCpu {
    /// `None` if the platform cannot report process CPU time.
    pub fn new() -> Option<Self> {
        process_cpu_ns()?;
        let mut res = libc::timespec { tv_sec: 0, tv_nsec: 0 };
        // SAFETY: `res` is a valid, writable timespec.
        let rc = unsafe { libc::clock_getres(libc::CLOCK_PROCESS_CPUTIME_ID, &mut res) };
        let resolution = if rc == 0 { timespec_ns(&res).max(1) } else { 1 };
        Some(Self {
            descriptors: [ClockValueDescriptor::seconds("cpu", resolution)],
        })
    }
}

impl ClockSource for ProcessCpu {
    fn descriptors(&self) -> &[ClockValueDescriptor] {
        &self.descriptors
    }

    fn read(&self, out: &mut [u64]) {
        out[0] = process_cpu_ns().unwrap_or(0);
    }
}

fn process_cpu_ns() -> Option<u64> {
    let mut ts = libc::timespec { tv_sec: 0, tv_nsec: 0 };
    // SAFETY: `ts` is a valid, writable timespec.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_PROCESS_CPUTIME_ID, &mut ts) };
    (rc == 0).then(|| timespec_ns(&ts))
}

fn timespec_ns(ts: &libc::timespec) -> u64 {
    (ts.tv_sec as u64)
        .saturating_mul(1_000_000_000)
        .saturating_add(ts.tv_nsec as u64)
}

/// Raw time-stamp counter. Only on x86_64; elsewhere [`Cycle::new`]
/// returns `None`.
pub struct Cycle {
    descriptors: [ClockValueDescriptor; 1],
}

impl Cycle {
    pub fn new() -> Option<Self> {
        if cfg!(target_arch = "x86_64") {
            Some(Self {
                descriptors: [ClockValueDescriptor::count("cycles")],
            })
        } else {
            None
        }
    }
}

impl ClockSource for Cycle {
    fn descriptors(&self) -> &[ClockValueDescriptor] {
        &self.descriptors
    }

    fn read(&self, out: &mut [u64]) {
        #[cfg(target_arch = "x86_64")]
        {
            // SAFETY: rdtsc has no preconditions on x86_64.
            out[0] = unsafe { core::arch::x86_64::_rdtsc() };
        }
        #[cfg(not(target_arch = "x86_64"))]
        {
            out[0] = 0;
        }
    }
}

/// Looks up a built-in OS backend by name. Returns `Ok(None)` for a known
/// backend that is unavailable on this platform.
pub fn os_backend(name: &str) -> Result<Option<Arc<dyn ClockSource>>, UnknownBackend> {
    Ok(match name {
        REAL_WALL => Some(Arc::new(RealWall::new())),
        PROCESS_CPU => ProcessCpu::new().map(|c| Arc::new(c) as Arc<dyn ClockSource>),
        CYCLE => Cycle::new().map(|c| Arc::new(c) as Arc<dyn ClockSource>),
        _ => return Err(UnknownBackend(name.to_string())),
    })
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
#[error("unknown clock backend `{0}` (expected real-wall, process-cpu or cycle)")]
pub struct UnknownBackend(pub String);

#[cfg(test)]
mod tests {
    use super::*;

    fn read(src: &dyn ClockSource) -> u64 {
        let mut v = [0];
        src.read(&mut v);
        v[0]
    }

    #[test]
    fn wall_is_monotonic() {
        let w = RealWall::new();
        let a = read(&w);
        std::thread::sleep(std::time::Duration::from_millis(2));
        let b = read(&w);
        assert!(b >= a + 1_000_000);
    }

    #[test]
    fn cpu_advances_under_load() {
        let c = ProcessCpu::new().expect("process cpu clock");
        let a = read(&c);
        let mut x = 0u64;
        for i in 0..5_000_000u64 {
            x = x.wrapping_mul(31).wrapping_add(i);
        }
        std::hint::black_box(x);
        assert!(read(&c) > a);
    }

    #[test]
    fn lookup() {
        assert!(os_backend(REAL_WALL).unwrap().is_some());
        assert!(os_backend("sundial").is_err());
        assert_eq!(os_backend(CYCLE).unwrap().is_some(), cfg!(target_arch = "x86_64"));
    }
}
