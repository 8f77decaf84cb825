//! Bin-based schedule executor with automatic per-routine timing.
//!
//! Routines are registered by `(thorn, routine name)` into named bins.
//! Registration creates the routine's timer (`"<thorn>: <routine>"`), and
//! running a bin brackets every routine call with that timer, so routine
//! bodies never need to touch the timer API themselves. Each bin also gets
//! a `"Total time for <label>"` timer around the whole bin, and the
//! scheduler owns a `"Total time for simulation"` timer that the driver
//! starts and stops around the whole run.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::timer::{TimerDatabase, TimerError, TimerHandle};

/// Default bin order. EVOL, CHECKPOINT and ANALYSIS are executed once per
/// iteration by the driver loop.
pub const DEFAULT_BINS: [&str; 7] = [
    "STARTUP",
    "INITIAL",
    "CHECKPOINT_INITIAL",
    "EVOL",
    "CHECKPOINT",
    "ANALYSIS",
    "TERMINATE",
];

pub const DEFAULT_LABEL_PREFIX: &str = "CCTK_";

pub const SIMULATION_TOTAL: &str = "Total time for simulation";

/// Error type routine bodies may return.
pub type RoutineError = Box<dyn core::error::Error + Send + Sync>;

/// What a routine body sees besides its own context: read access to the
/// timer database (its own timer is running at this point).
pub struct RoutineEnv<'a> {
    pub timers: &'a TimerDatabase,
    pub bin: &'a str,
}

type Body<C> = Box<dyn FnMut(&mut C, &RoutineEnv<'_>) -> Result<(), RoutineError> + Send>;

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("unknown schedule bin `{0}`")]
    UnknownBin(String),
    #[error("schedule bin `{0}` declared twice")]
    DuplicateBin(String),
    #[error("routine `{thorn}: {routine}` is already scheduled in bin `{bin}`")]
    DuplicateRoutine {
        bin: String,
        thorn: String,
        routine: String,
    },
    #[error("routine `{timer}` failed: {source}")]
    RoutineFailed {
        timer: String,
        #[source]
        source: RoutineError,
    },
    #[error(transparent)]
    Timer(#[from] TimerError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RoutineId {
    pub bin: usize,
    pub index: usize,
}

/// Outcome of one `run_bin` call.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinRun {
    pub bin: String,
    pub routines_run: usize,
}

/// Which timers make up which bin; what the report renderer needs to lay
/// out sections.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ScheduleLayout {
    pub bins: Vec<BinLayout>,
    pub simulation_total: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinLayout {
    pub name: String,
    /// Name of the bin-total timer.
    pub total_timer: String,
    pub routines: Vec<RoutineLayout>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoutineLayout {
    pub thorn: String,
    pub routine: String,
    pub timer: String,
}

struct Routine<C> {
    thorn: String,
    name: String,
    timer: TimerHandle,
    body: Body<C>,
}

struct Bin<C> {
    name: String,
    total_name: String,
    total_timer: Option<TimerHandle>,
    routines: Vec<Routine<C>>,
}

pub struct Scheduler<C> {
    db: TimerDatabase,
    bins: Vec<Bin<C>>,
    simulation_total: TimerHandle,
}

impl<C> fmt::Debug for Scheduler<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Scheduler")
            .field("bins", &self.bins.iter().map(|b| &b.name).collect::<Vec<_>>())
            .field("timers", &self.db)
            .finish()
    }
}

/// Name of the timer for a routine.
pub fn routine_timer_name(thorn: &str, routine: &str) -> String {
    format!("{thorn}: {routine}")
}

impl<C> Scheduler<C> {
    /// Scheduler with [`DEFAULT_BINS`] and the default label prefix. Clock
    /// backends must already be registered in `db`.
    pub fn new(db: TimerDatabase) -> Result<Self, ScheduleError> {
        Self::with_bins(db, DEFAULT_BINS, DEFAULT_LABEL_PREFIX)
    }

    pub fn with_bins<'a>(
        mut db: TimerDatabase,
        bins: impl IntoIterator<Item = &'a str>,
        label_prefix: &str,
    ) -> Result<Self, ScheduleError> {
        let simulation_total = db.create(SIMULATION_TOTAL)?;
        let mut out: Vec<Bin<C>> = Vec::new();
        for name in bins {
            if out.iter().any(|b| b.name == name) {
                return Err(ScheduleError::DuplicateBin(name.to_string()));
            }
            out.push(Bin {
                name: name.to_string(),
                total_name: format!("Total time for {label_prefix}{name}"),
                total_timer: None,
                routines: Vec::new(),
            });
        }
        Ok(Self {
            db,
            bins: out,
            simulation_total,
        })
    }

    pub fn timers(&self) -> &TimerDatabase {
        &self.db
    }

    /// Mutable database access, for user-defined timers outside the
    /// schedule.
    pub fn timers_mut(&mut self) -> &mut TimerDatabase {
        &mut self.db
    }

    pub fn bin_names(&self) -> impl Iterator<Item = &str> {
        self.bins.iter().map(|b| b.name.as_str())
    }

    pub fn register_routine<F>(
        &mut self,
        bin: &str,
        thorn: &str,
        routine: &str,
        body: F,
    ) -> Result<RoutineId, ScheduleError>
    where
        F: FnMut(&mut C, &RoutineEnv<'_>) -> Result<(), RoutineError> + Send + 'static,
    {
        let bin_index = self.bin_index(bin)?;
        let b = &self.bins[bin_index];
        if b.routines.iter().any(|r| r.thorn == thorn && r.name == routine) {
            return Err(ScheduleError::DuplicateRoutine {
                bin: bin.to_string(),
                thorn: thorn.to_string(),
                routine: routine.to_string(),
            });
        }
        let timer = self.db.create(&routine_timer_name(thorn, routine))?;
        let b = &mut self.bins[bin_index];
        if b.total_timer.is_none() {
            b.total_timer = Some(self.db.create(&b.total_name)?);
        }
        b.routines.push(Routine {
            thorn: thorn.to_string(),
            name: routine.to_string(),
            timer,
            body: Box::new(body),
        });
        Ok(RoutineId {
            bin: bin_index,
            index: b.routines.len() - 1,
        })
    }

    /// Timer of a registered routine.
    pub fn routine_timer(&self, id: RoutineId) -> Option<TimerHandle> {
        self.bins
            .get(id.bin)
            .and_then(|b| b.routines.get(id.index))
            .map(|r| r.timer)
    }

    /// Bin-total timer; `None` until a routine is registered in the bin.
    pub fn bin_total_timer(&self, bin: &str) -> Result<Option<TimerHandle>, ScheduleError> {
        Ok(self.bins[self.bin_index(bin)?].total_timer)
    }

    pub fn simulation_total_timer(&self) -> TimerHandle {
        self.simulation_total
    }

    pub fn begin_simulation(&mut self) -> Result<(), ScheduleError> {
        self.db.start(self.simulation_total)?;
        Ok(())
    }

    pub fn end_simulation(&mut self) -> Result<(), ScheduleError> {
        self.db.stop(self.simulation_total)?;
        Ok(())
    }

    /// Runs every routine of `bin` in registration order. If a routine
    /// fails, its timer and the bin-total timer are stopped before the
    /// error is returned; later routines of the bin are not run.
    pub fn run_bin(&mut self, bin: &str, ctx: &mut C) -> Result<BinRun, ScheduleError> {
        let bin_index = self.bin_index(bin)?;
        let Self { db, bins, .. } = self;
        let b = &mut bins[bin_index];
        let Some(total) = b.total_timer else {
            return Ok(BinRun {
                bin: b.name.clone(),
                routines_run: 0,
            });
        };
        db.start(total)?;
        let mut ran = 0;
        for r in &mut b.routines {
            db.start(r.timer)?;
            let env = RoutineEnv {
                timers: db,
                bin: &b.name,
            };
            let outcome = (r.body)(ctx, &env);
            db.stop(r.timer)?;
            if let Err(source) = outcome {
                db.stop(total)?;
                return Err(ScheduleError::RoutineFailed {
                    timer: routine_timer_name(&r.thorn, &r.name),
                    source,
                });
            }
            ran += 1;
        }
        db.stop(total)?;
        Ok(BinRun {
            bin: b.name.clone(),
            routines_run: ran,
        })
    }

    pub fn layout(&self) -> ScheduleLayout {
        ScheduleLayout {
            bins: self
                .bins
                .iter()
                .filter(|b| !b.routines.is_empty())
                .map(|b| BinLayout {
                    name: b.name.clone(),
                    total_timer: b.total_name.clone(),
                    routines: b
                        .routines
                        .iter()
                        .map(|r| RoutineLayout {
                            thorn: r.thorn.clone(),
                            routine: r.name.clone(),
                            timer: routine_timer_name(&r.thorn, &r.name),
                        })
                        .collect(),
                })
                .collect(),
            simulation_total: SIMULATION_TOTAL.to_string(),
        }
    }

    fn bin_index(&self, bin: &str) -> Result<usize, ScheduleError> {
        self.bins
            .iter()
            .position(|b| b.name == bin)
            .ok_or_else(|| ScheduleError::UnknownBin(bin.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::VirtualClockController;
    use alloc::vec;
    use proptest::prelude::*;

    const SEC: u64 = crate::NANOS_PER_SEC;

    fn scheduler() -> (Scheduler<VirtualClockController>, VirtualClockController) {
        let ctrl = VirtualClockController::new();
        let mut db = TimerDatabase::default();
        db.register_backend("virtual-wall", ctrl.wall_source()).unwrap();
        (Scheduler::new(db).unwrap(), ctrl)
    }

    fn sleeper(ns: u64) -> impl FnMut(&mut VirtualClockController, &RoutineEnv<'_>) -> Result<(), RoutineError> + Send {
        move |c, _| {
            c.advance(ns);
            Ok(())
        }
    }

    fn value(s: &Scheduler<VirtualClockController>, name: &str) -> u64 {
        let h = s.timers().lookup(name).unwrap();
        s.timers().read(h).unwrap().first("virtual-wall")
    }

    #[test]
    fn registering_creates_routine_timer() {
        let (mut s, _) = scheduler();
        s.register_routine("STARTUP", "AdaptCheck", "Adaptive checkpointing startup", sleeper(0))
            .unwrap();
        assert!(s
            .timers()
            .lookup("AdaptCheck: Adaptive checkpointing startup")
            .is_some());
        assert!(s.timers().lookup("Total time for CCTK_STARTUP").is_some());
    }

    #[test]
    fn registration_errors() {
        let (mut s, _) = scheduler();
        assert!(matches!(
            s.register_routine("FOO", "t", "r", sleeper(0)),
            Err(ScheduleError::UnknownBin(b)) if b == "FOO"
        ));
        s.register_routine("EVOL", "t", "r", sleeper(0)).unwrap();
        assert!(matches!(
            s.register_routine("EVOL", "t", "r", sleeper(0)),
            Err(ScheduleError::DuplicateRoutine { .. })
        ));
        assert!(matches!(
            Scheduler::<()>::with_bins(TimerDatabase::default(), ["A", "A"], ""),
            Err(ScheduleError::DuplicateBin(_))
        ));
    }

    #[test]
    fn run_bin_times_routines() {
        let (mut s, ctrl) = scheduler();
        let mut ctx = ctrl.clone();
        s.register_routine("EVOL", "Toy", "step", sleeper(3 * SEC)).unwrap();
        let run = s.run_bin("EVOL", &mut ctx).unwrap();
        assert_eq!(run.routines_run, 1);
        assert_eq!(value(&s, "Toy: step"), 3 * SEC);
        assert!(value(&s, "Total time for CCTK_EVOL") >= 3 * SEC);
    }

    #[test]
    fn repeated_runs_accumulate() {
        let (mut s, ctrl) = scheduler();
        let mut ctx = ctrl.clone();
        s.register_routine("EVOL", "Toy", "step", sleeper(2 * SEC)).unwrap();
        s.run_bin("EVOL", &mut ctx).unwrap();
        s.run_bin("EVOL", &mut ctx).unwrap();
        assert_eq!(value(&s, "Toy: step"), 4 * SEC);
    }

    #[test]
    fn two_routines_exact() {
        let (mut s, ctrl) = scheduler();
        let mut ctx = ctrl.clone();
        s.register_routine("EVOL", "Toy", "one", sleeper(SEC)).unwrap();
        s.register_routine("EVOL", "Toy", "two", sleeper(2 * SEC)).unwrap();
        s.run_bin("EVOL", &mut ctx).unwrap();
        assert_eq!(value(&s, "Toy: one"), SEC);
        assert_eq!(value(&s, "Toy: two"), 2 * SEC);
        assert!(value(&s, "Total time for CCTK_EVOL") >= 3 * SEC);
    }

    #[test]
    fn routines_run_in_registration_order() {
        let mut s: Scheduler<Vec<&'static str>> = Scheduler::new(TimerDatabase::default()).unwrap();
        for name in ["b", "a", "c"] {
            s.register_routine("EVOL", "T", name, move |log: &mut Vec<_>, _| {
                log.push(name);
                Ok(())
            })
            .unwrap();
        }
        let mut log = vec![];
        s.run_bin("EVOL", &mut log).unwrap();
        assert_eq!(log, ["b", "a", "c"]);
    }

    #[test]
    fn failing_routine_stops_its_timers() {
        let (mut s, ctrl) = scheduler();
        let mut ctx = ctrl.clone();
        s.register_routine("EVOL", "Toy", "boom", |c: &mut VirtualClockController, _| {
            c.advance(SEC);
            Err("disk full".into())
        })
        .unwrap();
        s.register_routine("EVOL", "Toy", "after", sleeper(SEC)).unwrap();
        let err = s.run_bin("EVOL", &mut ctx).unwrap_err();
        assert!(matches!(&err, ScheduleError::RoutineFailed { timer, .. } if timer == "Toy: boom"));
        let db = s.timers();
        for name in ["Toy: boom", "Total time for CCTK_EVOL"] {
            assert!(!db.is_running(db.lookup(name).unwrap()).unwrap());
        }
        assert_eq!(value(&s, "Toy: boom"), SEC);
        assert_eq!(value(&s, "Toy: after"), 0);
        // The database stays usable.
        let _ = s.run_bin("EVOL", &mut ctx);
    }

    #[test]
    fn routine_sees_own_timer_running() {
        let mut s: Scheduler<bool> = Scheduler::new(TimerDatabase::default()).unwrap();
        s.register_routine("ANALYSIS", "Probe", "look", |seen: &mut bool, env| {
            let h = env.timers.lookup("Probe: look").unwrap();
            *seen = env.timers.is_running(h).unwrap() && env.bin == "ANALYSIS";
            Ok(())
        })
        .unwrap();
        let mut seen = false;
        s.run_bin("ANALYSIS", &mut seen).unwrap();
        assert!(seen);
    }

    #[test]
    fn empty_bin_runs_nothing() {
        let (mut s, ctrl) = scheduler();
        let mut ctx = ctrl.clone();
        assert_eq!(s.run_bin("TERMINATE", &mut ctx).unwrap().routines_run, 0);
        assert_eq!(s.bin_total_timer("TERMINATE").unwrap(), None);
        assert!(matches!(s.run_bin("NOPE", &mut ctx), Err(ScheduleError::UnknownBin(_))));
    }

    #[test]
    fn zero_iteration_run_counts_startup_and_terminate() {
        let (mut s, ctrl) = scheduler();
        let mut ctx = ctrl.clone();
        s.register_routine("STARTUP", "Drv", "boot", sleeper(SEC)).unwrap();
        s.register_routine("EVOL", "Drv", "step", sleeper(5 * SEC)).unwrap();
        s.register_routine("TERMINATE", "Drv", "bye", sleeper(2 * SEC)).unwrap();
        s.begin_simulation().unwrap();
        s.run_bin("STARTUP", &mut ctx).unwrap();
        s.run_bin("TERMINATE", &mut ctx).unwrap();
        s.end_simulation().unwrap();
        assert_eq!(value(&s, SIMULATION_TOTAL), 3 * SEC);
    }

    #[test]
    fn layout_lists_populated_bins() {
        let (mut s, _) = scheduler();
        s.register_routine("CHECKPOINT", "CarpetIOHDF5", "Evolution checkpoint routine", sleeper(0))
            .unwrap();
        let l = s.layout();
        assert_eq!(l.bins.len(), 1);
        assert_eq!(l.bins[0].total_timer, "Total time for CCTK_CHECKPOINT");
        assert_eq!(
            l.bins[0].routines[0].timer,
            "CarpetIOHDF5: Evolution checkpoint routine"
        );
        assert_eq!(l.simulation_total, SIMULATION_TOTAL);
    }

    proptest! {
        // Routine bodies only advance virtual time; bins therefore add up.
        #[test]
        fn bin_totals_bound_routines(costs in prop::collection::vec((0usize..3, 0u64..4 * SEC), 1..12),
                                     rounds in 1usize..4) {
            let (mut s, ctrl) = scheduler();
            let bins = ["EVOL", "CHECKPOINT", "ANALYSIS"];
            for (i, &(bin, cost)) in costs.iter().enumerate() {
                s.register_routine(bins[bin], "P", &alloc::format!("r{i}"), sleeper(cost)).unwrap();
            }
            let mut ctx = ctrl.clone();
            s.begin_simulation().unwrap();
            for _ in 0..rounds {
                for b in bins { s.run_bin(b, &mut ctx).unwrap(); }
            }
            s.end_simulation().unwrap();
            let mut sum_totals = 0;
            for (bi, b) in bins.iter().enumerate() {
                let Some(total) = s.bin_total_timer(b).unwrap() else { continue };
                let total = s.timers().read(total).unwrap().first("virtual-wall");
                let routines: u64 = costs.iter().enumerate().filter(|(_, c)| c.0 == bi)
                    .map(|(i, _)| value(&s, &alloc::format!("P: r{i}"))).sum();
                prop_assert!(routines <= total);
                sum_totals += total;
            }
            let sim = value(&s, SIMULATION_TOTAL);
            prop_assert_eq!(sim, sum_totals);
            prop_assert_eq!(sim, ctrl.now_ns());
        }
    }
}
