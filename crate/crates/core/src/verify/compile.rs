use std::collections::BTreeMap;

use crate::lang::{CarExpr, CarVar, Command, Expr, PlanItem, Program, Stmt, TaskVar};
use crate::scenario::{ScenarioConfig, Slice};
use crate::scheme::{SchedulingScheme, SchemeRecord, SchemeViolation};

/// A program compiled from a scheme.
#[derive(Clone, Debug)]
pub struct ModelingProgram {
    pub program: Program,
    /// Scheme record realized by each top-level command.
    pub line_map: Vec<usize>,
}

impl ModelingProgram {
    pub fn source(&self) -> String {
        self.program.to_string()
    }
}

/// A maximal stretch of one task's operations on one car that can be
/// planned at once.
struct Run {
    records: Vec<usize>,
}

fn overlaps(a: Slice, b: Slice, r: &SchemeRecord) -> bool {
    r.start < b && a < r.end
}

fn split_runs(recs: &[SchemeRecord], task_recs: &[usize]) -> Vec<Run> {
    let mut runs: Vec<Run> = Vec::new();
    for &i in task_recs {
        let r = &recs[i];
        let extend = runs.last().is_some_and(|run| {
            let first = &recs[run.records[0]];
            let start = first.start;
            first.car == r.car
                && !recs.iter().enumerate().any(|(j, o)| {
                    j != i
                        && !run.records.contains(&j)
                        && o.car == r.car
                        && overlaps(start, r.end, o)
                })
                && !recs
                    .iter()
                    .enumerate()
                    .any(|(j, o)| j != i && o.location == r.location && overlaps(start, r.start, o))
        });
        if extend {
            runs.last_mut().expect("checked").records.push(i);
        } else {
            runs.push(Run { records: vec![i] });
        }
    }
    runs
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Phase {
    Release,
    Allocate,
}

struct Event {
    time: Slice,
    phase: Phase,
    task: usize,
    seq: usize,
    command: Command,
    record: usize,
}

fn task_var(r: &SchemeRecord) -> TaskVar {
    TaskVar(r.task.0 as u32)
}

/// Translates a scheme into a modeling program.
///
/// Each task is cut into runs of consecutive operations on the same car;
/// a run is cut early when another record would need one of its cells
/// before it is used. Every run becomes `plan` and `asgn`/`att` at its
/// start, one `exec1` per operation end, and `free` at its end; `comp`
/// follows the last run. Commands are ordered by time, with releases
/// before allocations at equal times.
pub fn compile_scheme(
    scheme: &SchedulingScheme,
    scenario: Option<&ScenarioConfig>,
) -> Result<ModelingProgram, SchemeViolation> {
    scheme.check_invariants()?;
    if let Some(sc) = scenario {
        scheme.check_against(sc)?;
    }
    let recs = &scheme.records;
    let mut by_task: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, r) in recs.iter().enumerate() {
        by_task.entry(r.task.0).or_default().push(i);
    }

    let mut events = Vec::new();
    for (&task, idx) in by_task.iter_mut() {
        idx.sort_by_key(|&i| recs[i].op);
        let mut seq = 0;
        let mut push = |events: &mut Vec<Event>, time, phase, command, record| {
            events.push(Event {
                time,
                phase,
                task,
                seq,
                command,
                record,
            });
            seq += 1;
        };
        let runs = split_runs(recs, idx);
        for (k, run) in runs.iter().enumerate() {
            let first = &recs[run.records[0]];
            let last = &recs[*run.records.last().expect("runs are non-empty")];
            let t = task_var(first);
            let car = CarVar::new(first.car.0 as u32, t.0);
            let items = run
                .records
                .iter()
                .map(|&i| PlanItem::pinned((recs[i].end - recs[i].start) as i64, recs[i].location.loc_id()))
                .collect();
            push(&mut events, first.start, Phase::Allocate, Command::Plan(car, items), run.records[0]);
            let bind = if k == 0 {
                Command::Asgn(t, vec![CarExpr::Var(car)])
            } else {
                Command::Att(t, vec![CarExpr::Var(car)])
            };
            push(&mut events, first.start, Phase::Allocate, bind, run.records[0]);
            for &i in &run.records {
                push(&mut events, recs[i].end, Phase::Release, Command::Exec1(t, Expr::Num(0)), i);
            }
            let last_idx = *run.records.last().expect("runs are non-empty");
            push(&mut events, last.end, Phase::Release, Command::Free(t, Expr::Num(0)), last_idx);
            if k + 1 == runs.len() {
                push(&mut events, last.end, Phase::Release, Command::Comp(t), last_idx);
            }
        }
    }

    events.sort_by(|a, b| {
        a.time
            .cmp(&b.time)
            .then(a.phase.cmp(&b.phase))
            .then(a.task.cmp(&b.task))
            .then(a.seq.cmp(&b.seq))
    });
    let line_map = events.iter().map(|e| e.record).collect();
    let program = Program {
        stmts: events
            .into_iter()
            .enumerate()
            .map(|(i, e)| Stmt {
                command: e.command,
                line: i + 1,
            })
            .collect(),
    };
    Ok(ModelingProgram { program, line_map })
}
