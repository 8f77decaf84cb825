//! Periodic timer reports.
//!
//! Sink failures never stop a run: they are kept as warnings (and printed
//! to stderr once per sink) and the sink is retried at the next emission.

use std::fs::OpenOptions;
use std::io::{self, Write};
use std::path::PathBuf;

use timekeep_core::report::{render_report, ReportSchedule};
use timekeep_core::schedule::ScheduleLayout;
use timekeep_core::TimerSnapshot;

use crate::export::export_snapshot;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sink {
    Stdout,
    Logfile,
    Export,
}

impl Sink {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "stdout" => Some(Sink::Stdout),
            "logfile" => Some(Sink::Logfile),
            "export" => Some(Sink::Export),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Sink::Stdout => "stdout",
            Sink::Logfile => "logfile",
            Sink::Export => "export",
        }
    }
}

/// Where periodic reports go.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReporterConfig {
    pub schedule: ReportSchedule,
    pub sinks: Vec<Sink>,
    /// Text reports are appended here.
    pub logfile: Option<PathBuf>,
    /// Exported snapshots are appended here, one JSON document per line.
    pub export_file: Option<PathBuf>,
}

pub struct Reporter {
    config: ReporterConfig,
    stdout: Box<dyn Write + Send>,
    emitted: Vec<u64>,
    warnings: Vec<String>,
    warned: Vec<Sink>,
    echo_warnings: bool,
}

impl Reporter {
    pub fn new(config: ReporterConfig) -> Self {
        Self::with_stdout(config, Box::new(io::stdout()))
    }

    /// Like [`Reporter::new`] with the stdout sink redirected.
    pub fn with_stdout(config: ReporterConfig, stdout: Box<dyn Write + Send>) -> Self {
        Self {
            config,
            stdout,
            emitted: Vec::new(),
            warnings: Vec::new(),
            warned: Vec::new(),
            echo_warnings: true,
        }
    }

    /// Keeps warnings without printing them.
    pub fn silence_warnings(mut self) -> Self {
        self.echo_warnings = false;
        self
    }

    /// Iterations at which a report was emitted.
    pub fn emitted(&self) -> &[u64] {
        &self.emitted
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Emits to every configured sink if a report is due at `iteration`.
    /// Returns whether one was due.
    pub fn emit(&mut self, iteration: u64, snapshot: &TimerSnapshot, layout: &ScheduleLayout) -> bool {
        if !self.config.schedule.is_due(iteration) {
            return false;
        }
        self.emitted.push(iteration);
        let text = render_report(snapshot, layout);
        for sink in self.config.sinks.clone() {
            let result = match sink {
                Sink::Stdout => writeln!(self.stdout, "Timer report at iteration {iteration}\n{text}")
                    .and_then(|_| self.stdout.flush()),
                Sink::Logfile => append(
                    self.config.logfile.as_ref(),
                    &format!("Timer report at iteration {iteration}\n{text}\n"),
                ),
                Sink::Export => append(
                    self.config.export_file.as_ref(),
                    &format!("{}\n", export_snapshot(snapshot, Some(layout))),
                ),
            };
            if let Err(e) = result {
                self.warn(sink, format!("iteration {iteration}: {} sink: {e}", sink.as_str()));
            }
        }
        true
    }

    fn warn(&mut self, sink: Sink, message: String) {
        if self.echo_warnings && !self.warned.contains(&sink) {
            eprintln!("warning: {message}");
        }
        self.warned.push(sink);
        self.warnings.push(message);
    }
}

fn append(path: Option<&PathBuf>, text: &str) -> io::Result<()> {
    let path = path.ok_or_else(|| io::Error::new(io::ErrorKind::NotFound, "no path configured"))?;
    OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)?
        .write_all(text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::{Arc, Mutex};
    use timekeep_core::report::ReportMode;

    #[derive(Clone, Default)]
    struct Shared(Arc<Mutex<Vec<u8>>>);

    impl Write for Shared {
        fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
            self.0.lock().unwrap().write(buf)
        }
        fn flush(&mut self) -> io::Result<()> {
            Ok(())
        }
    }

    fn config(mode: ReportMode, sinks: Vec<Sink>) -> ReporterConfig {
        ReporterConfig {
            schedule: ReportSchedule::new(mode, 10).unwrap(),
            sinks,
            logfile: None,
            export_file: None,
        }
    }

    #[test]
    fn emits_on_period() {
        let out = Shared::default();
        let mut r = Reporter::with_stdout(config(ReportMode::Full, vec![Sink::Stdout]), Box::new(out.clone()));
        let snap = TimerSnapshot::default();
        for it in 0..=30 {
            r.emit(it, &snap, &ScheduleLayout::default());
        }
        assert_eq!(r.emitted(), [0, 10, 20, 30]);
        let text = String::from_utf8(out.0.lock().unwrap().clone()).unwrap();
        assert_eq!(text.matches("Timer report at iteration").count(), 4);
        assert!(r.warnings().is_empty());
    }

    #[test]
    fn off_never_emits() {
        let out = Shared::default();
        let mut r = Reporter::with_stdout(config(ReportMode::Off, vec![Sink::Stdout]), Box::new(out.clone()));
        for it in 0..100 {
            assert!(!r.emit(it, &TimerSnapshot::default(), &ScheduleLayout::default()));
        }
        assert!(out.0.lock().unwrap().is_empty());
    }

    #[test]
    fn unwritable_logfile_is_a_warning() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = config(ReportMode::Full, vec![Sink::Logfile, Sink::Export]);
        c.logfile = Some(dir.path().join("missing/dir/log.txt"));
        c.export_file = Some(dir.path().join("snap.jsonl"));
        let mut r = Reporter::new(c).silence_warnings();
        r.emit(0, &TimerSnapshot::default(), &ScheduleLayout::default());
        r.emit(10, &TimerSnapshot::default(), &ScheduleLayout::default());
        assert_eq!(r.emitted(), [0, 10]);
        assert_eq!(r.warnings().len(), 2);
        assert!(r.warnings()[0].contains("logfile"));
        let lines = std::fs::read_to_string(dir.path().join("snap.jsonl")).unwrap();
        assert_eq!(lines.lines().count(), 2);
    }
}
