//! Fixed-width timer report.
//!
//! Layout:
//!
//! ```text
//! Thorn          | Scheduled routine in time bin    | gettimeofday [secs] | getrusage [secs]
//! ===========================================================================================
//! CarpetIOHDF5   | Evolution checkpoint routine     |         79.76328000 |      13.66692200
//! -------------------------------------------------------------------------------------------
//!                | Total time for CCTK_CHECKPOINT   |         79.76328000 |      13.66692200
//! ===========================================================================================
//!                | Total time for simulation        |       1417.13730900 |    1305.43354400
//! ===========================================================================================
//! ```
//!
//! Text columns are padded to their widest cell plus three spaces; value
//! columns are right-aligned to their widest cell. Seconds print with eight
//! decimals, counts as integers. Every line carries one trailing space.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::clock::Unit;
use crate::schedule::{ScheduleLayout, SIMULATION_TOTAL};
use crate::timer::TimerSnapshot;

const THORN_HEADER: &str = "Thorn";
const ROUTINE_HEADER: &str = "Scheduled routine in time bin";

/// Whether timing reports are produced at all.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ReportMode {
    #[default]
    Off,
    Full,
}

impl ReportMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "off" | "no" => Some(ReportMode::Off),
            "full" => Some(ReportMode::Full),
            _ => None,
        }
    }
}

/// When periodic reports are due. Where they go is the caller's business.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReportSchedule {
    pub mode: ReportMode,
    period_iterations: u64,
}

impl Default for ReportSchedule {
    fn default() -> Self {
        Self {
            mode: ReportMode::Off,
            period_iterations: 1,
        }
    }
}

impl ReportSchedule {
    /// `None` if `period_iterations` is zero.
    pub fn new(mode: ReportMode, period_iterations: u64) -> Option<Self> {
        (period_iterations >= 1).then_some(Self {
            mode,
            period_iterations,
        })
    }

    pub fn period_iterations(&self) -> u64 {
        self.period_iterations
    }

    pub fn is_due(&self, iteration: u64) -> bool {
        self.mode == ReportMode::Full && iteration.is_multiple_of(self.period_iterations)
    }
}

/// Formats integer nanoseconds as seconds with eight decimals, rounding the
/// ninth digit half-up.
pub fn format_seconds(ns: u64) -> String {
    let tenths = (ns as u128 + 5) / 10; // units of 1e-8 s
    format!("{}.{:08}", tenths / 100_000_000, tenths % 100_000_000)
}

fn format_value(v: u64, unit: Unit) -> String {
    match unit {
        Unit::Seconds => format_seconds(v),
        Unit::Count => format!("{v}"),
    }
}

fn unit_label(unit: Unit) -> &'static str {
    match unit {
        Unit::Seconds => "secs",
        Unit::Count => "count",
    }
}

enum Line {
    Row {
        thorn: String,
        routine: String,
        values: Vec<String>,
    },
    Rule(char),
}

struct Column {
    clock: String,
    value: usize,
    unit: Unit,
    header: String,
}

/// Splits `"thorn: routine"`; names without the separator have no thorn.
fn split_timer_name(name: &str) -> (&str, &str) {
    name.split_once(": ").unwrap_or(("", name))
}

/// Renders the report. Pure: equal inputs give byte-identical output.
///
/// Sections follow the layout's bin order. A bin's total line is printed
/// only if its total timer is present in the snapshot. Timers the layout
/// does not mention are listed in a trailing section so that every timer
/// appears exactly once.
pub fn render_report(snapshot: &TimerSnapshot, layout: &ScheduleLayout) -> String {
    let columns: Vec<Column> = snapshot
        .clocks
        .iter()
        .flat_map(|c| {
            let multi = c.values.len() > 1;
            c.values.iter().enumerate().map(move |(i, d)| Column {
                clock: c.name.clone(),
                value: i,
                unit: d.unit,
                header: if multi {
                    format!("{}:{} [{}]", c.name, d.name, unit_label(d.unit))
                } else {
                    format!("{} [{}]", c.name, unit_label(d.unit))
                },
            })
        })
        .collect();

    let values_of = |timer: &str| -> Vec<String> {
        let entry = snapshot.entry(timer);
        columns
            .iter()
            .map(|col| {
                let v = entry
                    .and_then(|e| e.reading.get(&col.clock))
                    .and_then(|vals| vals.get(col.value).copied())
                    .unwrap_or(0);
                format_value(v, col.unit)
            })
            .collect()
    };

    let sim_total = if layout.simulation_total.is_empty() {
        SIMULATION_TOTAL
    } else {
        layout.simulation_total.as_str()
    };

    let mut lines = Vec::new();
    let mut claimed = BTreeSet::new();
    claimed.insert(sim_total);

    for bin in &layout.bins {
        let rows: Vec<_> = bin
            .routines
            .iter()
            .filter(|r| snapshot.entry(&r.timer).is_some())
            .collect();
        let has_total = snapshot.entry(&bin.total_timer).is_some();
        if rows.is_empty() && !has_total {
            continue;
        }
        for r in rows {
            claimed.insert(r.timer.as_str());
            lines.push(Line::Row {
                thorn: r.thorn.clone(),
                routine: r.routine.clone(),
                values: values_of(&r.timer),
            });
        }
        if has_total {
            claimed.insert(bin.total_timer.as_str());
            lines.push(Line::Rule('-'));
            lines.push(Line::Row {
                thorn: String::new(),
                routine: bin.total_timer.clone(),
                values: values_of(&bin.total_timer),
            });
        }
        lines.push(Line::Rule('='));
    }

    let others: Vec<_> = snapshot
        .entries
        .iter()
        .filter(|e| !claimed.contains(e.name.as_str()))
        .collect();
    if !others.is_empty() {
        for e in others {
            let (thorn, routine) = split_timer_name(&e.name);
            lines.push(Line::Row {
                thorn: thorn.into(),
                routine: routine.into(),
                values: values_of(&e.name),
            });
        }
        lines.push(Line::Rule('='));
    }

    lines.push(Line::Row {
        thorn: String::new(),
        routine: sim_total.into(),
        values: values_of(sim_total),
    });
    lines.push(Line::Rule('='));

    let mut thorn_w = THORN_HEADER.len();
    let mut routine_w = ROUTINE_HEADER.len();
    let mut value_w: Vec<usize> = columns.iter().map(|c| c.header.chars().count()).collect();
    for line in &lines {
        if let Line::Row { thorn, routine, values } = line {
            thorn_w = thorn_w.max(thorn.chars().count());
            routine_w = routine_w.max(routine.chars().count());
            for (w, v) in value_w.iter_mut().zip(values) {
                *w = (*w).max(v.len());
            }
        }
    }
    thorn_w += 3;
    routine_w += 3;

    let row = |out: &mut String, thorn: &str, routine: &str, cells: &[String]| {
        let _ = write!(out, "{thorn:<thorn_w$}| {routine:<routine_w$}");
        for (cell, w) in cells.iter().zip(&value_w) {
            let _ = write!(out, "| {cell:>w$} ");
        }
        out.push('\n');
    };

    let mut out = String::new();
    let headers: Vec<String> = columns.iter().map(|c| c.header.clone()).collect();
    row(&mut out, THORN_HEADER, ROUTINE_HEADER, &headers);
    let width = out.chars().count() - 1;
    let rule = |out: &mut String, c: char| {
        out.extend(core::iter::repeat_n(c, width));
        out.push('\n');
    };
    rule(&mut out, '=');
    for line in &lines {
        match line {
            Line::Row { thorn, routine, values } => row(&mut out, thorn, routine, values),
            Line::Rule(c) => rule(&mut out, *c),
        }
    }
    out
}
