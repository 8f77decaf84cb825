//! Run configuration files.
//!
//! One `section::key = value` pair per line. `#` starts a comment (at the
//! start of a line or after whitespace). Values may be double-quoted.
//! Keys are case-insensitive; unknown and repeated keys are errors.
//!
//! ```text
//! run::name                          = adaptive
//! cactus::print_timing_info          = full
//! checkpoint::mode                   = adaptive
//! adaptcheck::max_checkpoint_fraction = 0.05
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;
use timekeep_core::checkpoint::{CheckpointMode, CheckpointPolicy, FractionBound};
use timekeep_core::harness::{WorkloadModel, VIRTUAL_WALL};
use timekeep_core::report::{ReportMode, ReportSchedule};
use timekeep_core::secs_to_nanos;

use crate::backends::{CYCLE, PROCESS_CPU, REAL_WALL};
use crate::emit::Sink;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
}

/// Calibrate `workload::checkpoint_base_s` before running so that a
/// fixed-interval baseline spends `target` of its time checkpointing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CalibrationRequest {
    pub target: f64,
    pub every: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub name: String,
    pub model: WorkloadModel,
    pub calibrate: Option<CalibrationRequest>,
    pub policy: CheckpointPolicy,
    pub report: ReportSchedule,
    pub sinks: Vec<Sink>,
    pub logfile: Option<PathBuf>,
    pub listen: Option<String>,
    /// Checkpoint files are written here when set.
    pub checkpoint_dir: Option<PathBuf>,
    /// Clock that drives checkpoint accounting.
    pub decision_clock: String,
    /// Operating-system clocks registered after `virtual-wall`.
    pub clocks: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            name: "run".into(),
            model: WorkloadModel::amr_reference(),
            calibrate: None,
            policy: CheckpointPolicy::fixed_interval(512).expect("512 is a valid interval"),
            report: ReportSchedule::default(),
            sinks: vec![Sink::Stdout],
            logfile: None,
            listen: None,
            checkpoint_dir: None,
            decision_clock: VIRTUAL_WALL.into(),
            clocks: Vec::new(),
        }
    }
}

const KEYS: &[&str] = &[
    "run::name",
    "run::clocks",
    "cactus::print_timing_info",
    "report::period",
    "report::sinks",
    "report::logfile",
    "report::listen",
    "checkpoint::mode",
    "checkpoint::every",
    "checkpoint::on_initial",
    "checkpoint::on_terminate",
    "checkpoint::dir",
    "adaptcheck::max_checkpoint_fraction",
    "adaptcheck::max_checkpoint_interval",
    "adaptcheck::clock",
    "workload::base_points",
    "workload::points_per_level",
    "workload::regrid_every",
    "workload::compute_unit_s",
    "workload::checkpoint_base_s",
    "workload::total_iterations",
    "workload::startup_s",
    "workload::terminate_s",
    "workload::calibrate_fraction",
    "workload::calibrate_every",
];

struct Entries {
    map: BTreeMap<&'static str, (usize, String)>,
}

impl Entries {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.map.remove(key)
    }

    fn parse<T>(&mut self, key: &str, f: impl FnOnce(&str) -> Option<T>, what: &str) -> Result<Option<T>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => f(&v).map(Some).ok_or_else(|| ConfigError::Line {
                line,
                message: format!("{key}: expected {what}, got `{v}`"),
            }),
        }
    }

    fn positive_int(&mut self, key: &str) -> Result<Option<u64>, ConfigError> {
        self.parse(key, |v| v.parse::<u64>().ok().filter(|&n| n > 0), "a positive integer")
    }

    fn seconds(&mut self, key: &str, allow_zero: bool) -> Result<Option<u64>, ConfigError> {
        self.parse(
            key,
            |v| {
                let s: f64 = v.parse().ok()?;
                let ns = secs_to_nanos(s);
                (s.is_finite() && s >= 0.0 && (allow_zero || ns > 0)).then_some(ns)
            },
            if allow_zero {
                "non-negative seconds"
            } else {
                "positive seconds"
            },
        )
    }

    fn boolean(&mut self, key: &str) -> Result<Option<bool>, ConfigError> {
        self.parse(
            key,
            |v| match v.to_ascii_lowercase().as_str() {
                "yes" | "true" | "1" => Some(true),
                "no" | "false" | "0" => Some(false),
                _ => None,
            },
            "yes or no",
        )
    }

    fn list(&mut self, key: &str) -> Option<(usize, Vec<String>)> {
        self.take(key).map(|(line, v)| {
            let items = v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(String::from)
                .collect();
            (line, items)
        })
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut e = Entries { map: BTreeMap::new() };
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = strip_comment(raw).trim();
            if content.is_empty() {
                continue;
            }
            let err = |message: String| ConfigError::Line { line, message };
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(format!("expected `section::key = value`, got `{content}`")))?;
            let key = key.trim().to_ascii_lowercase();
            let value = unquote(value.trim());
            let Some(&known) = KEYS.iter().find(|k| **k == key) else {
                return Err(err(format!("unknown key `{key}`")));
            };
            if let Some((first, _)) = e.map.insert(known, (line, value.to_string())) {
                return Err(err(format!("`{key}` already set on line {first}")));
            }
        }

        let mut c = RunConfig::default();
        if let Some((line, name)) = e.take("run::name") {
            if name.is_empty() || name.contains(['/', '\\']) || name.starts_with('.') {
                return Err(ConfigError::Line {
                    line,
                    message: format!("run::name `{name}` is not a plain file name"),
                });
            }
            c.name = name;
        }
        if let Some((line, clocks)) = e.list("run::clocks") {
            for clock in &clocks {
                if ![REAL_WALL, PROCESS_CPU, CYCLE].contains(&clock.as_str()) {
                    return Err(ConfigError::Line {
                        line,
                        message: format!("run::clocks: unknown clock `{clock}`"),
                    });
                }
            }
            c.clocks = clocks;
        }

        // Workload.
        let m = &mut c.model;
        for (key, field) in [
            ("workload::base_points", &mut m.base_points),
            ("workload::points_per_level", &mut m.points_per_level),
            ("workload::regrid_every", &mut m.regrid_every),
        ] {
            if let Some(v) = e.positive_int(key)? {
                *field = v;
            }
        }
        if let Some(v) = e.parse("workload::total_iterations", |v| v.parse().ok(), "an integer")? {
            m.total_iterations = v;
        }
        for (key, field, zero_ok) in [
            ("workload::compute_unit_s", &mut m.compute_unit_ns, false),
            ("workload::checkpoint_base_s", &mut m.checkpoint_base_ns, false),
            ("workload::startup_s", &mut m.startup_ns, true),
            ("workload::terminate_s", &mut m.terminate_ns, true),
        ] {
            if let Some(v) = e.seconds(key, zero_ok)? {
                *field = v;
            }
        }
        let target = e.parse(
            "workload::calibrate_fraction",
            |v| v.parse::<f64>().ok().filter(|f| *f > 0.0 && *f < 1.0),
            "a fraction in (0, 1)",
        )?;
        let every = e.positive_int("workload::calibrate_every")?;
        c.calibrate = match (target, every) {
            (Some(target), every) => Some(CalibrationRequest {
                target,
                every: every.unwrap_or(512),
            }),
            (None, Some(_)) => {
                return Err(ConfigError::Invalid(
                    "workload::calibrate_every needs workload::calibrate_fraction".into(),
                ))
            }
            (None, None) => None,
        };
        c.model
            .validate()
            .map_err(|err| ConfigError::Invalid(err.to_string()))?;

        // Checkpointing.
        let adaptive = match e.take("checkpoint::mode") {
            None => false,
            Some((line, mode)) => match mode.as_str() {
                "fixed_interval" | "fixed" => false,
                "adaptive" => true,
                _ => {
                    return Err(ConfigError::Line {
                        line,
                        message: format!("checkpoint::mode: expected fixed_interval or adaptive, got `{mode}`"),
                    })
                }
            },
        };
        let every = e.positive_int("checkpoint::every")?;
        let fraction = e.parse(
            "adaptcheck::max_checkpoint_fraction",
            |v| FractionBound::from_f64(v.parse().ok()?),
            "a fraction in (0, 1]",
        )?;
        let interval = e.parse(
            "adaptcheck::max_checkpoint_interval",
            |v| match v.to_ascii_lowercase().as_str() {
                "inf" | "infinite" | "none" => Some(None),
                _ => {
                    let s: f64 = v.parse().ok()?;
                    let ns = secs_to_nanos(s);
                    (s.is_finite() && ns > 0).then_some(Some(ns))
                }
            },
            "positive seconds or `inf`",
        )?;
        let mode = if adaptive {
            if every.is_some() {
                return Err(ConfigError::Invalid(
                    "checkpoint::every only applies to checkpoint::mode = fixed_interval".into(),
                ));
            }
            CheckpointMode::Adaptive {
                max_fraction: fraction.unwrap_or(FractionBound::from_ppb(50_000_000).expect("5% is valid")),
                max_interval_ns: interval.flatten(),
            }
        } else {
            if fraction.is_some() || interval.is_some() {
                return Err(ConfigError::Invalid(
                    "adaptcheck::* settings need checkpoint::mode = adaptive".into(),
                ));
            }
            CheckpointMode::FixedInterval {
                every: every.unwrap_or(512),
            }
        };
        c.policy = CheckpointPolicy {
            mode,
            on_initial: e.boolean("checkpoint::on_initial")?.unwrap_or(false),
            on_terminate: e.boolean("checkpoint::on_terminate")?.unwrap_or(false),
        };
        c.checkpoint_dir = e.take("checkpoint::dir").map(|(_, v)| PathBuf::from(v));
        if let Some((line, clock)) = e.take("adaptcheck::clock") {
            if clock != VIRTUAL_WALL && clock != REAL_WALL {
                return Err(ConfigError::Line {
                    line,
                    message: format!("adaptcheck::clock: expected virtual-wall or real-wall, got `{clock}`"),
                });
            }
            if clock == REAL_WALL && !c.clocks.iter().any(|n| n == REAL_WALL) {
                c.clocks.push(REAL_WALL.into());
            }
            c.decision_clock = clock;
        }

        // Reporting.
        let mode = e
            .parse("cactus::print_timing_info", ReportMode::parse, "off or full")?
            .unwrap_or_default();
        let period = e.positive_int("report::period")?.unwrap_or(1);
        c.report = ReportSchedule::new(mode, period).expect("period is positive");
        if let Some((line, sinks)) = e.list("report::sinks") {
            c.sinks = sinks
                .iter()
                .map(|s| {
                    Sink::parse(s).ok_or_else(|| ConfigError::Line {
                        line,
                        message: format!("report::sinks: unknown sink `{s}`"),
                    })
                })
                .collect::<Result<_, _>>()?;
        }
        c.logfile = e.take("report::logfile").map(|(_, v)| PathBuf::from(v));
        if c.sinks.contains(&Sink::Logfile) && c.logfile.is_none() {
            return Err(ConfigError::Invalid(
                "report::sinks includes logfile but report::logfile is not set".into(),
            ));
        }
        c.listen = e.take("report::listen").map(|(_, v)| v);

        debug_assert!(e.map.is_empty(), "unhandled keys: {:?}", e.map.keys());
        Ok(c)
    }
}

fn strip_comment(line: &str) -> &str {
    let mut prev_ws = true;
    for (i, ch) in line.char_indices() {
        if ch == '#' && prev_ws {
            return &line[..i];
        }
        prev_ws = ch.is_whitespace();
    }
    line
}

fn unquote(v: &str) -> &str {
    v.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(v)
}
