//! Machine-readable timer snapshots.
//!
//! Values are integer nanoseconds (for clocks measuring seconds) or
//! integer counts, so parsing and re-exporting a document reproduces it
//! byte for byte.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use timekeep_core::schedule::{BinLayout, RoutineLayout, ScheduleLayout};
use timekeep_core::timer::{ClockInfo, SnapshotEntry};
use timekeep_core::{ClockReading, ClockValueDescriptor, TimerReading, TimerSnapshot, Unit};

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("malformed snapshot document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unknown unit `{0}`")]
    Unit(String),
    #[error("timer `{timer}` has values for unknown clock `{clock}`")]
    UnknownClock { timer: String, clock: String },
    #[error("timer `{timer}`, clock `{clock}`: expected {expected} values, got {got}")]
    Arity {
        timer: String,
        clock: String,
        expected: usize,
        got: usize,
    },
}

/// A snapshot plus, optionally, the schedule layout needed to render it
/// with bin sections.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SnapshotDocument {
    pub snapshot: TimerSnapshot,
    pub layout: Option<ScheduleLayout>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    taken_at: u64,
    clocks: Vec<Clock>,
    timers: Vec<Timer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bins: Option<Layout>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Clock {
    name: String,
    values: Vec<Value>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Value {
    name: String,
    unit: String,
    resolution: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Timer {
    name: String,
    running: bool,
    values: IndexMap<String, Vec<u64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Layout {
    simulation_total: String,
    bins: Vec<Bin>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Bin {
    name: String,
    total_timer: String,
    routines: Vec<Routine>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Routine {
    thorn: String,
    routine: String,
    timer: String,
}

/// Serializes a snapshot as compact JSON.
pub fn export_snapshot(snapshot: &TimerSnapshot, layout: Option<&ScheduleLayout>) -> String {
    let doc = Document {
        taken_at: snapshot.taken_at_ns,
        clocks: snapshot
            .clocks
            .iter()
            .map(|c| Clock {
                name: c.name.clone(),
                values: c
                    .values
                    .iter()
                    .map(|d| Value {
                        name: d.name.clone(),
                        unit: d.unit.as_str().to_string(),
                        resolution: d.resolution,
                    })
                    .collect(),
            })
            .collect(),
        timers: snapshot
            .entries
            .iter()
            .map(|e| Timer {
                name: e.name.clone(),
                running: e.running,
                values: e.reading.iter().map(|(c, v)| (c.to_string(), v.to_vec())).collect(),
            })
            .collect(),
        bins: layout.map(|l| Layout {
            simulation_total: l.simulation_total.clone(),
            bins: l
                .bins
                .iter()
                .map(|b| Bin {
                    name: b.name.clone(),
                    total_timer: b.total_timer.clone(),
                    routines: b
                        .routines
                        .iter()
                        .map(|r| Routine {
                            thorn: r.thorn.clone(),
                            routine: r.routine.clone(),
                            timer: r.timer.clone(),
                        })
                        .collect(),
                })
                .collect(),
        }),
    };
    serde_json::to_string(&doc).expect("snapshot documents always serialize")
}

/// Parses a document written by [`export_snapshot`], checking that every
/// timer's values match the declared clocks.
pub fn parse_snapshot(text: &str) -> Result<SnapshotDocument, ExportError> {
    let doc: Document = serde_json::from_str(text)?;
    let clocks = doc
        .clocks
        .into_iter()
        .map(|c| {
            let values = c
                .values
                .into_iter()
                .map(|v| {
                    let unit = Unit::parse(&v.unit).ok_or(ExportError::Unit(v.unit))?;
                    Ok(ClockValueDescriptor::new(v.name, unit, v.resolution))
                })
                .collect::<Result<Vec<_>, ExportError>>()?;
            Ok(ClockInfo { name: c.name, values })
        })
        .collect::<Result<Vec<_>, ExportError>>()?;

    let mut entries = Vec::with_capacity(doc.timers.len());
    for t in doc.timers {
        let mut reading = TimerReading::default();
        for (clock, values) in t.values {
            let Some(info) = clocks.iter().find(|c| c.name == clock) else {
                return Err(ExportError::UnknownClock { timer: t.name, clock });
            };
            if info.values.len() != values.len() {
                return Err(ExportError::Arity {
                    timer: t.name,
                    clock,
                    expected: info.values.len(),
                    got: values.len(),
                });
            }
            reading.clocks.push(ClockReading { clock, values });
        }
        entries.push(SnapshotEntry {
            name: t.name,
            running: t.running,
            reading,
        });
    }

    let layout = doc.bins.map(|l| ScheduleLayout {
        simulation_total: l.simulation_total,
        bins: l
            .bins
            .into_iter()
            .map(|b| BinLayout {
                name: b.name,
                total_timer: b.total_timer,
                routines: b
                    .routines
                    .into_iter()
                    .map(|r| RoutineLayout {
                        thorn: r.thorn,
                        routine: r.routine,
                        timer: r.timer,
                    })
                    .collect(),
            })
            .collect(),
    });
    Ok(SnapshotDocument {
        snapshot: TimerSnapshot {
            taken_at_ns: doc.taken_at,
            clocks,
            entries,
        },
        layout,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use timekeep_core::{EventCounter, TimerDatabase, VirtualClockController};

    fn sample() -> TimerSnapshot {
        let ctrl = VirtualClockController::new();
        let ev = EventCounter::new(["instructions", "flops"]);
        let mut db = TimerDatabase::default();
        db.register_backend("virtual-wall", ctrl.wall_source()).unwrap();
        db.register_backend("papi", ev.source()).unwrap();
        let h = db.create("CarpetIOHDF5: Evolution checkpoint routine").unwrap();
        db.set(h, [("virtual-wall", &[79_763_280_000][..]), ("papi", &[7, 9][..])])
            .unwrap();
        let r = db.create("running").unwrap();
        db.start(r).unwrap();
        ctrl.advance(3);
        db.snapshot()
    }

    #[test]
    fn one_timer_document() {
        let ctrl = VirtualClockController::new();
        let mut db = TimerDatabase::default();
        db.register_backend("virtual-wall", ctrl.wall_source()).unwrap();
        db.create("A: a").unwrap();
        let text = export_snapshot(&db.snapshot(), None);
        assert_eq!(
            text,
            r#"{"taken_at":0,"clocks":[{"name":"virtual-wall","values":[{"name":"wall","unit":"seconds","resolution":1}]}],"timers":[{"name":"A: a","running":false,"values":{"virtual-wall":[0]}}]}"#
        );
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let snap = sample();
        let layout = ScheduleLayout {
            bins: vec![BinLayout {
                name: "CHECKPOINT".into(),
                total_timer: "Total time for CCTK_CHECKPOINT".into(),
                routines: vec![RoutineLayout {
                    thorn: "CarpetIOHDF5".into(),
                    routine: "Evolution checkpoint routine".into(),
                    timer: "CarpetIOHDF5: Evolution checkpoint routine".into(),
                }],
            }],
            simulation_total: "Total time for simulation".into(),
        };
        for layout in [None, Some(&layout)] {
            let text = export_snapshot(&snap, layout);
            let doc = parse_snapshot(&text).unwrap();
            assert_eq!(doc.snapshot, snap);
            assert_eq!(doc.layout.as_ref(), layout);
            assert_eq!(export_snapshot(&doc.snapshot, doc.layout.as_ref()), text);
        }
        let text = export_snapshot(&snap, None);
        assert!(text.contains(r#""virtual-wall":[79763280000]"#));
        assert!(text.contains(r#""running":true"#));
    }

    #[test]
    fn rejects_inconsistent_documents() {
        let text = export_snapshot(&sample(), None);
        assert!(matches!(
            parse_snapshot(&text.replace(r#""papi":[7,9]"#, r#""papi":[7]"#)),
            Err(ExportError::Arity {
                expected: 2,
                got: 1,
                ..
            })
        ));
        assert!(matches!(
            parse_snapshot(&text.replace(r#""papi":[7,9]"#, r#""sundial":[7,9]"#)),
            Err(ExportError::UnknownClock { .. })
        ));
        assert!(matches!(
            parse_snapshot(&text.replace(r#""unit":"count""#, r#""unit":"furlong""#)),
            Err(ExportError::Unit(_))
        ));
        assert!(matches!(parse_snapshot("{"), Err(ExportError::Json(_))));
    }
}
