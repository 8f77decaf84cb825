//! The `timekeep` command line.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use clap::{Parser, Subcommand};
use timekeep_core::checkpoint::CheckpointFile;
use timekeep_core::harness::{Comparison, ExperimentResult};
use timekeep_core::report::{format_seconds, render_report};

use crate::config::RunConfig;
use crate::export::parse_snapshot;
use crate::monitor::{Monitor, SnapshotSource};
use crate::output::{parse_series, summarize, write_run, Summary};
use crate::runner::{builder, prepare, Prepared};

#[derive(Parser, Debug)]
#[command(
    name = "timekeep",
    version,
    about = "Timed synthetic AMR runs with adaptive checkpointing"
)]
struct Cli {
    /// Directory for result files.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Accepted for compatibility; the workload is deterministic.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print nothing on success.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run an experiment and write its result files.
    Run { config: PathBuf },
    /// Compare two runs from their summary files.
    Compare { baseline: PathBuf, candidate: PathBuf },
    /// Render an exported timer snapshot as a text report.
    Report { snapshot: PathBuf },
    /// Run an experiment while serving the HTTP monitor.
    Serve {
        config: PathBuf,
        /// Overrides report::listen.
        #[arg(long)]
        listen: Option<String>,
        /// Keep serving this long after the run ends.
        #[arg(long, default_value_t = 0)]
        linger_secs: u64,
        /// Real-time pause between iterations.
        #[arg(long, default_value_t = 0)]
        step_delay_us: u64,
    },
    /// Continue a run from a checkpoint file.
    Restart { checkpoint: PathBuf, config: PathBuf },
}

enum Failure {
    /// Bad invocation or unusable input files (exit 2).
    Usage(String),
    /// Failure while running (exit 1).
    Runtime(String),
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

/// Runs the CLI and returns the process exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return e.exit_code();
        }
    };
    match dispatch(&cli, out) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "timekeep: {msg}");
            2
        }
        Err(Failure::Runtime(msg)) => {
            let _ = writeln!(err, "timekeep: error: {msg}");
            1
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<(), Failure> {
    if matches!(
        cli.command,
        Command::Run { .. } | Command::Restart { .. } | Command::Serve { .. }
    ) {
        std::fs::create_dir_all(&cli.out_dir)
            .map_err(|e| runtime(format!("creating {}: {e}", cli.out_dir.display())))?;
    }
    match &cli.command {
        Command::Run { config } => {
            let (cfg, prepared) = load(config)?;
            let exp = builder(&cfg, &prepared, &cli.out_dir, cli.quiet)
                .map_err(usage)?
                .build()
                .map_err(usage)?;
            let result = exp.run().map_err(runtime)?;
            finish(cli, out, &cfg, &prepared, &result, None)
        }
        Command::Restart { checkpoint, config } => {
            let (cfg, prepared) = load(config)?;
            let bytes = std::fs::read(checkpoint).map_err(|e| usage(format!("{}: {e}", checkpoint.display())))?;
            let file = CheckpointFile::decode(&bytes).map_err(|e| usage(format!("{}: {e}", checkpoint.display())))?;
            let exp = builder(&cfg, &prepared, &cli.out_dir, cli.quiet)
                .map_err(usage)?
                .restore(&file)
                .map_err(usage)?;
            let result = exp.run().map_err(runtime)?;
            finish(cli, out, &cfg, &prepared, &result, Some(file.state.iteration))
        }
        Command::Serve {
            config,
            listen,
            linger_secs,
            step_delay_us,
        } => {
            let (cfg, prepared) = load(config)?;
            let addr = listen
                .clone()
                .or_else(|| cfg.listen.clone())
                .ok_or_else(|| usage("serve needs report::listen or --listen"))?;
            let exp = builder(&cfg, &prepared, &cli.out_dir, cli.quiet)
                .map_err(usage)?
                .build()
                .map_err(usage)?;
            let shared = Arc::new(Mutex::new(exp));
            let monitor = Monitor::bind(&addr, shared.clone() as Arc<dyn SnapshotSource>)
                .map_err(|e| runtime(format!("cannot listen on {addr}: {e}")))?;
            eprintln!("monitor listening on http://{}", monitor.local_addr());
            let result = loop {
                let mut exp = shared.lock().map_err(|_| runtime("experiment lock poisoned"))?;
                if exp.step().map_err(runtime)? {
                    break exp.result();
                }
                drop(exp);
                if *step_delay_us > 0 {
                    std::thread::sleep(Duration::from_micros(*step_delay_us));
                }
            };
            let written = finish(cli, out, &cfg, &prepared, &result, None);
            std::thread::sleep(Duration::from_secs(*linger_secs));
            monitor.shutdown();
            written
        }
        Command::Compare { baseline, candidate } => compare(cli, out, baseline, candidate),
        Command::Report { snapshot } => {
            let text = std::fs::read_to_string(snapshot).map_err(|e| usage(format!("{}: {e}", snapshot.display())))?;
            let doc = parse_snapshot(&text).map_err(|e| usage(format!("{}: {e}", snapshot.display())))?;
            let layout = doc.layout.unwrap_or_default();
            write!(out, "{}", render_report(&doc.snapshot, &layout)).map_err(runtime)
        }
    }
}

fn load(path: &Path) -> Result<(RunConfig, Prepared), Failure> {
    let cfg = RunConfig::load(path).map_err(usage)?;
    let prepared = prepare(&cfg).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    Ok((cfg, prepared))
}

fn finish(
    cli: &Cli,
    out: &mut dyn Write,
    cfg: &RunConfig,
    prepared: &Prepared,
    result: &ExperimentResult,
    restarted_from: Option<u64>,
) -> Result<(), Failure> {
    let summary = summarize(&cfg.name, result, prepared.calibration.clone(), restarted_from);
    let files = write_run(&cli.out_dir, &summary, result)
        .map_err(|e| runtime(format!("writing results to {}: {e}", cli.out_dir.display())))?;
    if !cli.quiet {
        let _ = writeln!(
            out,
            "run `{}`: {} iterations, {} checkpoints\n  total runtime    {:>20} s\n  checkpoint time  {:>20} s ({:.2}%)\n  summary          {}",
            summary.run,
            result.model.total_iterations,
            summary.checkpoints_taken,
            format_seconds(summary.total_runtime_ns),
            format_seconds(summary.total_checkpoint_ns),
            100.0 * summary.final_fraction,
            files.summary.display()
        );
    }
    Ok(())
}

fn read_summary(path: &Path) -> Result<(Summary, PathBuf), Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let summary: Summary = serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let series = path.parent().unwrap_or(Path::new(".")).join(&summary.series);
    Ok((summary, series))
}

fn compare(cli: &Cli, out: &mut dyn Write, a: &Path, b: &Path) -> Result<(), Failure> {
    let (sa, series_a) = read_summary(a)?;
    let (sb, series_b) = read_summary(b)?;
    let cmp = Comparison::from_summaries(
        (&sa.model.into(), sa.run_summary()),
        (&sb.model.into(), sb.run_summary()),
    )
    .map_err(usage)?;

    let load_series = |p: &Path| -> Result<_, Failure> {
        let text = std::fs::read_to_string(p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
        parse_series(&text).map_err(|e| usage(format!("{}: {e}", p.display())))
    };
    let (ra, rb) = (load_series(&series_a)?, load_series(&series_b)?);
    let mut csv =
        String::from("iteration,baseline_elapsed_ns,baseline_fraction,candidate_elapsed_ns,candidate_fraction\n");
    let mut j = 0;
    for x in &ra {
        while j < rb.len() && rb[j].iteration < x.iteration {
            j += 1;
        }
        if let Some(y) = rb.get(j).filter(|y| y.iteration == x.iteration) {
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                x.iteration,
                x.elapsed_ns,
                x.fraction(),
                y.elapsed_ns,
                y.fraction()
            ));
        }
    }
    std::fs::create_dir_all(&cli.out_dir).map_err(runtime)?;
    let path = cli.out_dir.join(format!("{}_vs_{}.fractions.csv", sa.run, sb.run));
    std::fs::write(&path, csv).map_err(|e| runtime(format!("{}: {e}", path.display())))?;

    if !cli.quiet {
        let line = |s: &Summary| {
            format!(
                "{:>20} s total, {:>20} s checkpointing ({:.2}%), {} checkpoints",
                format_seconds(s.total_runtime_ns),
                format_seconds(s.total_checkpoint_ns),
                100.0 * s.final_fraction,
                s.checkpoints_taken
            )
        };
        let _ = writeln!(
            out,
            "baseline  `{}`: {}\ncandidate `{}`: {}\nruntime reduction      {:.2}%\ncheckpoint time ratio  {:.2}\nfraction curves        {}",
            sa.run,
            line(&sa),
            sb.run,
            line(&sb),
            100.0 * cmp.runtime_reduction,
            cmp.checkpoint_ratio,
            path.display()
        );
    }
    Ok(())
}
