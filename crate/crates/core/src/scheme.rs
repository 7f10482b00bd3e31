//! Scheduling schemes: the timestamped assignment records an episode emits
//! and the verifier consumes.
//!
//! On disk a scheme is CSV with the header
//! `task,op,equipment,workstation,car,start,end`, one record per line.

use std::collections::{BTreeMap, BTreeSet};
use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{CarId, Location, TaskId};
use crate::scenario::{ScenarioConfig, Slice};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SchemeRecord {
    pub task: TaskId,
    pub op: usize,
    pub location: Location,
    pub car: CarId,
    pub start: Slice,
    pub end: Slice,
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    task: usize,
    op: usize,
    equipment: usize,
    workstation: usize,
    car: usize,
    start: Slice,
    end: Slice,
}

#[derive(Debug, Error)]
pub enum SchemeError {
    #[error("scheme csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("scheme record {line}: {message}")]
    Record { line: usize, message: String },
    #[error("incomplete scheme, missing (task, op): {}", fmt_pairs(.0))]
    Incomplete(Vec<(TaskId, usize)>),
    #[error("{0}")]
    Violation(#[from] SchemeViolation),
}

fn fmt_pairs(pairs: &[(TaskId, usize)]) -> String {
    pairs
        .iter()
        .map(|(t, o)| format!("({t}, {o})"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// A broken scheme invariant.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum SchemeViolation {
    #[error("{task} op {op} starts at {start} before op {prev} ends at {prev_end}")]
    Precedence {
        task: TaskId,
        prev: usize,
        prev_end: Slice,
        op: usize,
        start: Slice,
    },
    #[error("{location} is used by {a} and {b} at the same time")]
    LocationOverlap {
        location: Location,
        a: TaskId,
        b: TaskId,
    },
    #[error("{car} serves {a} and {b} at the same time")]
    CarOverlap { car: CarId, a: TaskId, b: TaskId },
    #[error("{task} op {op} appears more than once")]
    Duplicate { task: TaskId, op: usize },
    #[error("{task} op {op} has an empty interval")]
    EmptyInterval { task: TaskId, op: usize },
    #[error("{task} op {op}: {message}")]
    Mismatch {
        task: TaskId,
        op: usize,
        message: String,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SchedulingScheme {
    pub records: Vec<SchemeRecord>,
}

impl SchedulingScheme {
    pub fn new(records: Vec<SchemeRecord>) -> Self {
        SchedulingScheme { records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Latest end time over all records (0 for an empty scheme).
    pub fn horizon(&self) -> Slice {
        self.records.iter().map(|r| r.end).max().unwrap_or(0)
    }

    /// Records sorted by `(start, task, op)`.
    pub fn sorted(&self) -> Vec<SchemeRecord> {
        let mut out = self.records.clone();
        out.sort_by_key(|r| (r.start, r.task, r.op));
        out
    }

    /// Keeps only the records accepted by `keep`.
    pub fn filtered(&self, keep: impl Fn(&SchemeRecord) -> bool) -> Self {
        SchedulingScheme::new(self.records.iter().copied().filter(|r| keep(r)).collect())
    }

    /// Shifts every record by `delta` slices.
    pub fn translated(&self, delta: Slice) -> Self {
        SchedulingScheme::new(
            self.records
                .iter()
                .map(|r| SchemeRecord {
                    start: r.start + delta,
                    end: r.end + delta,
                    ..*r
                })
                .collect(),
        )
    }

    /// Checks task precedence and exclusive use of every location and car.
    pub fn check_invariants(&self) -> Result<(), SchemeViolation> {
        let mut seen = BTreeSet::new();
        for r in &self.records {
            if !seen.insert((r.task, r.op)) {
                return Err(SchemeViolation::Duplicate { task: r.task, op: r.op });
            }
            if r.end <= r.start {
                return Err(SchemeViolation::EmptyInterval { task: r.task, op: r.op });
            }
        }

        let mut by_task: BTreeMap<TaskId, Vec<&SchemeRecord>> = BTreeMap::new();
        let mut by_loc: BTreeMap<Location, Vec<&SchemeRecord>> = BTreeMap::new();
        let mut by_car: BTreeMap<CarId, Vec<&SchemeRecord>> = BTreeMap::new();
        for r in &self.records {
            by_task.entry(r.task).or_default().push(r);
            by_loc.entry(r.location).or_default().push(r);
            by_car.entry(r.car).or_default().push(r);
        }

        for (task, mut recs) in by_task {
            recs.sort_by_key(|r| r.op);
            for pair in recs.windows(2) {
                if pair[1].start < pair[0].end {
                    return Err(SchemeViolation::Precedence {
                        task,
                        prev: pair[0].op,
                        prev_end: pair[0].end,
                        op: pair[1].op,
                        start: pair[1].start,
                    });
                }
            }
        }
        for (location, mut recs) in by_loc {
            recs.sort_by_key(|r| (r.start, r.end));
            for pair in recs.windows(2) {
                if pair[1].start < pair[0].end {
                    return Err(SchemeViolation::LocationOverlap {
                        location,
                        a: pair[0].task,
                        b: pair[1].task,
                    });
                }
            }
        }
        for (car, mut recs) in by_car {
            recs.sort_by_key(|r| (r.start, r.end));
            for pair in recs.windows(2) {
                if pair[1].start < pair[0].end {
                    return Err(SchemeViolation::CarOverlap {
                        car,
                        a: pair[0].task,
                        b: pair[1].task,
                    });
                }
            }
        }
        Ok(())
    }

    /// Checks every record against the scenario: known task/op, matching
    /// equipment type, existing location and car, and exact duration.
    pub fn check_against(&self, scenario: &ScenarioConfig) -> Result<(), SchemeViolation> {
        for r in &self.records {
            let mismatch = |message: String| SchemeViolation::Mismatch {
                task: r.task,
                op: r.op,
                message,
            };
            let task = scenario
                .tasks
                .get(r.task.0)
                .ok_or_else(|| mismatch("unknown task".into()))?;
            let op = task
                .ops
                .get(r.op)
                .ok_or_else(|| mismatch("unknown operation".into()))?;
            if !scenario.has_location(r.location) {
                return Err(mismatch(format!("unknown location {}", r.location)));
            }
            let eq = scenario.equipment[r.location.equipment];
            if eq.resource_type != op.resource_type {
                return Err(mismatch(format!(
                    "{} provides resource type {} but the operation needs {}",
                    r.location, eq.resource_type, op.resource_type
                )));
            }
            if r.car.0 == 0 || r.car.0 > scenario.cars {
                return Err(mismatch(format!("unknown {}", r.car)));
            }
            if r.end.saturating_sub(r.start) != op.duration {
                return Err(mismatch(format!(
                    "interval [{}, {}) does not match duration {}",
                    r.start, r.end, op.duration
                )));
            }
        }
        Ok(())
    }

    /// `(task, op)` pairs of the scenario that have no record.
    pub fn missing(&self, scenario: &ScenarioConfig) -> Vec<(TaskId, usize)> {
        let have: BTreeSet<_> = self.records.iter().map(|r| (r.task, r.op)).collect();
        scenario
            .tasks
            .iter()
            .enumerate()
            .flat_map(|(t, task)| (0..task.ops.len()).map(move |o| (TaskId(t), o)))
            .filter(|pair| !have.contains(pair))
            .collect()
    }

    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<(), SchemeError> {
        let mut w = csv::Writer::from_writer(writer);
        for r in self.sorted() {
            w.serialize(CsvRow {
                task: r.task.0,
                op: r.op,
                equipment: r.location.equipment,
                workstation: r.location.workstation,
                car: r.car.0,
                start: r.start,
                end: r.end,
            })?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn read_csv<R: io::Read>(reader: R) -> Result<Self, SchemeError> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = r.headers()?.clone();
        let expected = ["task", "op", "equipment", "workstation", "car", "start", "end"];
        if headers.iter().ne(expected.iter().copied()) {
            return Err(SchemeError::Record {
                line: 1,
                message: format!("expected header {}", expected.join(",")),
            });
        }
        let mut records = Vec::new();
        for (i, row) in r.deserialize::<CsvRow>().enumerate() {
            let row = row?;
            if row.car == 0 {
                return Err(SchemeError::Record {
                    line: i + 2,
                    message: "car ids start at 1".into(),
                });
            }
            records.push(SchemeRecord {
                task: TaskId(row.task),
                op: row.op,
                location: Location::new(row.equipment, row.workstation),
                car: CarId(row.car),
                start: row.start,
                end: row.end,
            });
        }
        Ok(SchedulingScheme { records })
    }

    pub fn from_csv_str(text: &str) -> Result<Self, SchemeError> {
        Self::read_csv(text.as_bytes())
    }
}

/// Completion time of a complete scheme (ComT).
pub fn makespan(scheme: &SchedulingScheme, scenario: &ScenarioConfig) -> Result<Slice, SchemeError> {
    let missing = scheme.missing(scenario);
    if !missing.is_empty() {
        return Err(SchemeError::Incomplete(missing));
    }
    Ok(scheme.horizon())
}
