use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use super::workload::{ModelError, WorkloadModel};
use crate::checkpoint::{
    decide, AccountingError, CheckpointAccounting, CheckpointDecision, CheckpointFile, CheckpointPolicy, PolicyError,
    SimulationState,
};
use crate::clock::{BackendId, ClockError, ClockRegistry, ClockSource, Unit, VirtualClockController};
use crate::report::ReportSchedule;
use crate::schedule::{RoutineEnv, RoutineError, ScheduleError, ScheduleLayout, Scheduler};
use crate::timer::{TimerDatabase, TimerError, TimerSnapshot};

/// Name of the virtual wall-clock backend every experiment registers first.
pub const VIRTUAL_WALL: &str = "virtual-wall";

/// What happened at an iteration, as recorded in the series.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Event {
    #[default]
    None,
    Checkpoint,
    Regrid,
    RegridCheckpoint,
}

impl Event {
    pub fn as_str(self) -> &'static str {
        match self {
            Event::None => "none",
            Event::Checkpoint => "checkpoint",
            Event::Regrid => "regrid",
            Event::RegridCheckpoint => "regrid+checkpoint",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Event::None, Event::Checkpoint, Event::Regrid, Event::RegridCheckpoint]
            .into_iter()
            .find(|e| e.as_str() == s)
    }

    pub fn code(self) -> u64 {
        self as u64
    }

    pub fn from_code(code: u64) -> Option<Self> {
        [Event::None, Event::Checkpoint, Event::Regrid, Event::RegridCheckpoint]
            .get(code as usize)
            .copied()
    }

    pub fn is_checkpoint(self) -> bool {
        matches!(self, Event::Checkpoint | Event::RegridCheckpoint)
    }

    fn with_checkpoint(self) -> Self {
        match self {
            Event::Regrid | Event::RegridCheckpoint => Event::RegridCheckpoint,
            _ => Event::Checkpoint,
        }
    }
}

/// State at the end of one iteration (iteration 0 is the end of initial
/// data, including any initial checkpoint).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SeriesRow {
    pub iteration: u64,
    pub elapsed_ns: u64,
    pub checkpoint_ns_cumulative: u64,
    pub grid_points: u64,
    pub event: Event,
}

impl SeriesRow {
    pub fn fraction(&self) -> f64 {
        if self.elapsed_ns == 0 {
            0.0
        } else {
            self.checkpoint_ns_cumulative as f64 / self.elapsed_ns as f64
        }
    }
}

/// One call of the checkpoint policy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DecisionRecord {
    pub iteration: u64,
    /// Boundary time, ns since simulation start.
    pub now_ns: u64,
    /// Checkpoint time accumulated before this decision.
    pub checkpoint_ns_before: u64,
    pub decision: CheckpointDecision,
    /// Duration of the checkpoint taken, 0 if skipped.
    pub cost_ns: u64,
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub model: WorkloadModel,
    pub policy: CheckpointPolicy,
    pub total_runtime_ns: u64,
    pub total_checkpoint_ns: u64,
    pub checkpoints_taken: u64,
    pub series: Vec<SeriesRow>,
    pub decisions: Vec<DecisionRecord>,
    pub final_snapshot: TimerSnapshot,
    pub layout: ScheduleLayout,
}

impl ExperimentResult {
    pub fn final_fraction(&self) -> f64 {
        if self.total_runtime_ns == 0 {
            0.0
        } else {
            self.total_checkpoint_ns as f64 / self.total_runtime_ns as f64
        }
    }
}

/// Callbacks from inside the schedule. Errors from `on_checkpoint` abort
/// the run; report emission cannot fail.
pub trait ExperimentHooks: Send {
    fn on_checkpoint(&mut self, file: &CheckpointFile) -> Result<(), RoutineError> {
        let _ = file;
        Ok(())
    }

    fn on_report(&mut self, iteration: u64, snapshot: &TimerSnapshot, layout: &ScheduleLayout) {
        let _ = (iteration, snapshot, layout);
    }
}

/// Hooks that do nothing.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoHooks;

impl ExperimentHooks for NoHooks {}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExperimentConfig {
    pub model: WorkloadModel,
    pub policy: CheckpointPolicy,
    pub report: ReportSchedule,
}

impl ExperimentConfig {
    pub fn new(model: WorkloadModel, policy: CheckpointPolicy) -> Self {
        Self {
            model,
            policy,
            report: ReportSchedule::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Clock(#[from] ClockError),
    #[error(transparent)]
    Timer(#[from] TimerError),
    #[error(transparent)]
    Accounting(#[from] AccountingError),
    #[error("decision clock `{0}` is not registered")]
    UnknownDecisionClock(String),
    #[error("decision clock `{0}` does not measure seconds")]
    DecisionClockUnit(String),
    #[error("cannot restore checkpoint: {0}")]
    Restore(String),
}

pub(crate) mod names {
    pub const THORN: &str = "SynthAMR";
    pub const ADAPT: &str = "AdaptCheck";
    pub const REPORT: &str = "TimerReport";
    pub const STARTUP: &str = "Harness startup";
    pub const INITIAL: &str = "Initial data";
    pub const INITIAL_CHECKPOINT: &str = "Initial data checkpoint routine";
    pub const EVOLVE: &str = "Evolve one iteration";
    pub const CHECKPOINT: &str = "Evolution checkpoint routine";
    pub const ANALYSIS: &str = "Periodic timer report";
    pub const TERMINATE: &str = "Harness shutdown";
}

/// Context handed to every scheduled routine of the experiment.
struct Driver {
    model: WorkloadModel,
    policy: CheckpointPolicy,
    report: ReportSchedule,
    ctrl: VirtualClockController,
    decision_clock: BackendId,
    origin_ns: u64,
    iteration: u64,
    event: Event,
    accounting: CheckpointAccounting,
    decisions: Vec<DecisionRecord>,
    layout: ScheduleLayout,
    hooks: Box<dyn ExperimentHooks>,
}

impl Driver {
    fn elapsed(&self, registry: &ClockRegistry) -> Result<u64, ClockError> {
        Ok(registry.read_now(self.decision_clock)?[0].saturating_sub(self.origin_ns))
    }

    fn state(&self) -> SimulationState {
        SimulationState {
            iteration: self.iteration,
            levels: self.model.level(self.iteration),
            grid_points: self.model.grid_points(self.iteration),
            virtual_time_ns: self.ctrl.now_ns(),
        }
    }

    fn capture(&self, timers: &TimerDatabase) -> CheckpointFile {
        CheckpointFile {
            state: self.state(),
            last_event: self.event.code(),
            accounting: self.accounting,
            timers: timers
                .handles()
                .filter_map(|h| Some((timers.name(h).ok()?.to_string(), timers.read(h).ok()?)))
                .collect(),
        }
    }

    fn checkpoint_boundary(&mut self, env: &RoutineEnv<'_>, is_initial: bool) -> Result<(), RoutineError> {
        let now = self.elapsed(env.timers.registry())?;
        self.accounting.observe(now)?;
        let is_terminal = self.iteration == self.model.total_iterations;
        let decision = decide(
            &self.policy,
            &self.accounting,
            now,
            self.iteration,
            is_initial,
            is_terminal,
        )?;
        let checkpoint_ns_before = self.accounting.total_checkpoint_ns();
        let mut cost_ns = 0;
        if decision.is_checkpoint() {
            self.ctrl.advance(self.model.checkpoint_ns(self.iteration));
            let end = self.elapsed(env.timers.registry())?;
            self.accounting.record_checkpoint(now, end)?;
            cost_ns = end - now;
            self.event = self.event.with_checkpoint();
            let file = self.capture(env.timers);
            self.hooks.on_checkpoint(&file)?;
        }
        self.decisions.push(DecisionRecord {
            iteration: self.iteration,
            now_ns: now,
            checkpoint_ns_before,
            decision,
            cost_ns,
        });
        Ok(())
    }

    fn evolve(&mut self) {
        self.iteration += 1;
        self.event = if self.model.is_regrid(self.iteration) {
            Event::Regrid
        } else {
            Event::None
        };
        self.ctrl.advance(self.model.compute_ns(self.iteration));
    }

    fn analysis(&mut self, env: &RoutineEnv<'_>) {
        if self.report.is_due(self.iteration) {
            let snapshot = env.timers.snapshot();
            self.hooks.on_report(self.iteration, &snapshot, &self.layout);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    Fresh,
    Running,
    Finished,
}

/// Builder for [`Experiment`].
pub struct ExperimentBuilder {
    config: ExperimentConfig,
    clocks: Vec<(String, Arc<dyn ClockSource>)>,
    decision_clock: String,
    hooks: Box<dyn ExperimentHooks>,
}

impl ExperimentBuilder {
    /// Registers an additional clock backend after `virtual-wall`.
    pub fn clock(mut self, name: impl Into<String>, source: Arc<dyn ClockSource>) -> Self {
        self.clocks.push((name.into(), source));
        self
    }

    /// Clock whose first value drives checkpoint accounting. Defaults to
    /// `virtual-wall`.
    pub fn decision_clock(mut self, name: impl Into<String>) -> Self {
        self.decision_clock = name.into();
        self
    }

    pub fn hooks(mut self, hooks: impl ExperimentHooks + 'static) -> Self {
        self.hooks = Box::new(hooks);
        self
    }

    pub fn build(self) -> Result<Experiment, ExperimentError> {
        self.assemble(VirtualClockController::new())
    }

    /// Rebuilds an experiment from a checkpoint so that continuing it
    /// reproduces the uninterrupted run.
    pub fn restore(self, file: &CheckpointFile) -> Result<Experiment, ExperimentError> {
        let model = self.config.model;
        let s = file.state;
        if s.iteration > model.total_iterations {
            return Err(ExperimentError::Restore(alloc::format!(
                "checkpoint iteration {} is beyond the configured {} iterations",
                s.iteration,
                model.total_iterations
            )));
        }
        if s.levels != model.level(s.iteration) || s.grid_points != model.grid_points(s.iteration) {
            return Err(ExperimentError::Restore(
                "checkpointed grid does not match the workload model".into(),
            ));
        }
        let event =
            Event::from_code(file.last_event).ok_or_else(|| ExperimentError::Restore("unknown event code".into()))?;

        let mut exp = self.assemble(VirtualClockController::starting_at(s.virtual_time_ns))?;
        {
            let db = exp.scheduler.timers_mut();
            for (name, reading) in &file.timers {
                let h = db
                    .lookup(name)
                    .ok_or_else(|| ExperimentError::Restore(alloc::format!("unknown timer `{name}`")))?;
                db.set(h, reading.iter())?;
            }
        }
        let d = &mut exp.driver;
        d.iteration = s.iteration;
        d.event = event;
        d.accounting = file.accounting;
        let raw = exp.scheduler.timers().registry().read_now(d.decision_clock)?[0];
        d.origin_ns = raw.saturating_sub(file.accounting.total_elapsed_ns());
        exp.scheduler.begin_simulation()?;
        exp.push_row()?;
        exp.phase = Phase::Running;
        Ok(exp)
    }

    fn assemble(self, ctrl: VirtualClockController) -> Result<Experiment, ExperimentError> {
        let ExperimentConfig { model, policy, report } = self.config;
        model.validate()?;
        policy.validate()?;

        let mut db = TimerDatabase::default();
        let wall = db.register_backend(VIRTUAL_WALL, ctrl.wall_source())?;
        for (name, source) in self.clocks {
            db.register_backend(name, source)?;
        }
        let decision_clock = db
            .registry()
            .lookup(&self.decision_clock)
            .ok_or_else(|| ExperimentError::UnknownDecisionClock(self.decision_clock.clone()))?;
        if db.registry().descriptors(decision_clock)?[0].unit != Unit::Seconds {
            return Err(ExperimentError::DecisionClockUnit(self.decision_clock));
        }
        db.set_timestamp_clock(wall)?;
        let origin_ns = db.registry().read_now(decision_clock)?[0];

        let mut scheduler = Scheduler::new(db)?;
        use names::*;
        scheduler.register_routine("STARTUP", THORN, STARTUP, |d: &mut Driver, _| {
            d.ctrl.advance(d.model.startup_ns);
            Ok(())
        })?;
        scheduler.register_routine("INITIAL", THORN, INITIAL, |_: &mut Driver, _| Ok(()))?;
        scheduler.register_routine(
            "CHECKPOINT_INITIAL",
            ADAPT,
            INITIAL_CHECKPOINT,
            |d: &mut Driver, env| d.checkpoint_boundary(env, true),
        )?;
        scheduler.register_routine("EVOL", THORN, EVOLVE, |d: &mut Driver, _| {
            d.evolve();
            Ok(())
        })?;
        scheduler.register_routine("CHECKPOINT", ADAPT, CHECKPOINT, |d: &mut Driver, env| {
            d.checkpoint_boundary(env, false)
        })?;
        scheduler.register_routine("ANALYSIS", REPORT, ANALYSIS, |d: &mut Driver, env| {
            d.analysis(env);
            Ok(())
        })?;
        scheduler.register_routine("TERMINATE", THORN, TERMINATE, |d: &mut Driver, _| {
            d.ctrl.advance(d.model.terminate_ns);
            Ok(())
        })?;
        let layout = scheduler.layout();

        Ok(Experiment {
            scheduler,
            driver: Driver {
                model,
                policy,
                report,
                ctrl,
                decision_clock,
                origin_ns,
                iteration: 0,
                event: Event::None,
                accounting: CheckpointAccounting::new(),
                decisions: Vec::new(),
                layout,
                hooks: self.hooks,
            },
            series: Vec::new(),
            phase: Phase::Fresh,
        })
    }
}

/// The synthetic AMR run: a schedule of auto-timed routines driven in
/// virtual time. Each [`step`](Experiment::step) completes one iteration
/// (the first completes startup and initial data).
pub struct Experiment {
    scheduler: Scheduler<Driver>,
    driver: Driver,
    series: Vec<SeriesRow>,
    phase: Phase,
}

impl fmt::Debug for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Experiment")
            .field("model", &self.driver.model)
            .field("policy", &self.driver.policy)
            .field("iteration", &self.driver.iteration)
            .field("phase", &self.phase)
            .finish()
    }
}

impl Experiment {
    pub fn builder(config: ExperimentConfig) -> ExperimentBuilder {
        ExperimentBuilder {
            config,
            clocks: Vec::new(),
            decision_clock: VIRTUAL_WALL.to_string(),
            hooks: Box::new(NoHooks),
        }
    }

    pub fn new(config: ExperimentConfig) -> Result<Self, ExperimentError> {
        Self::builder(config).build()
    }

    /// Last completed iteration.
    pub fn iteration(&self) -> u64 {
        self.driver.iteration
    }

    pub fn is_finished(&self) -> bool {
        self.phase == Phase::Finished
    }

    pub fn model(&self) -> &WorkloadModel {
        &self.driver.model
    }

    pub fn virtual_clock(&self) -> &VirtualClockController {
        &self.driver.ctrl
    }

    pub fn timers(&self) -> &TimerDatabase {
        self.scheduler.timers()
    }

    pub fn snapshot(&self) -> TimerSnapshot {
        self.scheduler.timers().snapshot()
    }

    pub fn layout(&self) -> ScheduleLayout {
        self.driver.layout.clone()
    }

    pub fn series(&self) -> &[SeriesRow] {
        &self.series
    }

    pub fn decisions(&self) -> &[DecisionRecord] {
        &self.driver.decisions
    }

    /// Checkpoint contents for the current state (between steps).
    pub fn capture(&self) -> CheckpointFile {
        self.driver.capture(self.scheduler.timers())
    }

    /// Advances by one step: startup and initial data, one iteration, or
    /// shutdown once the last iteration is done. Returns `true` once the
    /// run has terminated.
    pub fn step(&mut self) -> Result<bool, ExperimentError> {
        match self.phase {
            Phase::Finished => {}
            Phase::Fresh => {
                self.scheduler.begin_simulation()?;
                for bin in ["STARTUP", "INITIAL", "CHECKPOINT_INITIAL"] {
                    self.scheduler.run_bin(bin, &mut self.driver)?;
                }
                self.phase = Phase::Running;
                self.push_row()?;
            }
            Phase::Running if self.driver.iteration < self.driver.model.total_iterations => {
                for bin in ["EVOL", "CHECKPOINT", "ANALYSIS"] {
                    self.scheduler.run_bin(bin, &mut self.driver)?;
                }
                self.push_row()?;
            }
            Phase::Running => {
                self.scheduler.run_bin("TERMINATE", &mut self.driver)?;
                self.scheduler.end_simulation()?;
                let now = self.driver.elapsed(self.scheduler.timers().registry())?;
                self.driver.accounting.observe(now)?;
                self.phase = Phase::Finished;
            }
        }
        Ok(self.is_finished())
    }

    /// Steps until iteration `iteration` has completed. Never runs
    /// shutdown.
    pub fn run_until(&mut self, iteration: u64) -> Result<(), ExperimentError> {
        let target = iteration.min(self.driver.model.total_iterations);
        while self.phase == Phase::Fresh || (self.phase == Phase::Running && self.driver.iteration < target) {
            self.step()?;
        }
        Ok(())
    }

    pub fn run(mut self) -> Result<ExperimentResult, ExperimentError> {
        while !self.step()? {}
        Ok(self.into_result())
    }

    /// Summary of the run so far.
    pub fn result(&self) -> ExperimentResult {
        let timers = self.scheduler.timers();
        let clock = timers
            .registry()
            .name(self.driver.decision_clock)
            .unwrap_or(VIRTUAL_WALL);
        let total_runtime_ns = timers
            .read(self.scheduler.simulation_total_timer())
            .map(|r| r.first(clock))
            .unwrap_or(0);
        ExperimentResult {
            model: self.driver.model,
            policy: self.driver.policy,
            total_runtime_ns,
            total_checkpoint_ns: self.driver.accounting.total_checkpoint_ns(),
            checkpoints_taken: self.driver.accounting.checkpoints_taken(),
            series: self.series.clone(),
            decisions: self.driver.decisions.clone(),
            final_snapshot: timers.snapshot(),
            layout: self.driver.layout.clone(),
        }
    }

    pub fn into_result(self) -> ExperimentResult {
        self.result()
    }

    fn push_row(&mut self) -> Result<(), ExperimentError> {
        let d = &mut self.driver;
        let now = d.elapsed(self.scheduler.timers().registry())?;
        d.accounting.observe(now)?;
        self.series.push(SeriesRow {
            iteration: d.iteration,
            elapsed_ns: d.accounting.total_elapsed_ns(),
            checkpoint_ns_cumulative: d.accounting.total_checkpoint_ns(),
            grid_points: d.model.grid_points(d.iteration),
            event: d.event,
        });
        Ok(())
    }
}

/// Runs an experiment to completion without hooks or extra clocks.
pub fn run_experiment(config: ExperimentConfig) -> Result<ExperimentResult, ExperimentError> {
    Experiment::new(config)?.run()
}
