//! Scheme verification: compile a scheme into a modeling program, run it,
//! and judge the terminal state.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::ids::LocId;
use crate::lang::{
    run_program, Effect, MachineState, Outcome, Program, RunOptions, Stuck, TaskVar,
};
use crate::scenario::{ScenarioConfig, Slice};
use crate::scheme::{makespan, SchedulingScheme, SchemeError, SchemeViolation};

mod compile;

pub use compile::{compile_scheme, ModelingProgram};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error("scheme cannot be compiled: {0}")]
    Invalid(#[from] SchemeViolation),
    #[error("scheme makespan {scheme} differs from simulated makespan {simulated}")]
    MakespanMismatch { scheme: Slice, simulated: Slice },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Verified,
    /// No rule applies at top-level command `command`.
    Stuck { reason: Stuck, command: usize },
    FuelExhausted,
    /// The program terminated but left heap cells or unfinished tasks.
    Unclean,
}

impl Verdict {
    pub fn is_verified(&self) -> bool {
        matches!(self, Verdict::Verified)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Verified => f.write_str("Verified"),
            Verdict::Stuck { reason, command } => write!(f, "Stuck({reason}) at command {command}"),
            Verdict::FuelExhausted => f.write_str("FuelExhausted"),
            Verdict::Unclean => f.write_str("Unclean"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OccupancyKind {
    Allocate,
    Release,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OccupancyEvent {
    pub location: LocId,
    pub task: TaskVar,
    pub kind: OccupancyKind,
    /// Position of the step in the trace.
    pub step: usize,
}

#[derive(Clone, Debug)]
pub struct VerificationReport {
    pub verdict: Verdict,
    pub terminal_state: MachineState,
    pub occupancy: Vec<OccupancyEvent>,
    /// Makespan of the ASAP retiming of the executed operations.
    pub simulated_makespan: Slice,
    /// Makespan of the source scheme, when there is one.
    pub scheme_makespan: Option<Slice>,
    pub steps: usize,
}

impl VerificationReport {
    pub fn is_verified(&self) -> bool {
        self.verdict.is_verified()
    }

    pub fn makespan_matches(&self) -> Option<bool> {
        self.scheme_makespan.map(|m| m == self.simulated_makespan)
    }

    /// Occupancy events of one location, in trace order.
    pub fn occupancy_of(&self, loc: LocId) -> impl Iterator<Item = &OccupancyEvent> {
        self.occupancy.iter().filter(move |e| e.location == loc)
    }

    /// Per location, events alternate allocate/release starting with allocate.
    pub fn occupancy_alternates(&self) -> bool {
        let mut held: BTreeMap<LocId, bool> = BTreeMap::new();
        self.occupancy.iter().all(|e| {
            let h = held.entry(e.location).or_insert(false);
            let ok = *h == (e.kind == OccupancyKind::Release);
            *h = !*h;
            ok
        })
    }

    /// Plain-text report: verdict, makespans and the occupancy table.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "verdict: {}", self.verdict);
        let _ = writeln!(s, "steps: {}", self.steps);
        match self.scheme_makespan {
            Some(m) => {
                let _ = writeln!(s, "makespan: scheme {m}, simulated {}", self.simulated_makespan);
            }
            None => {
                let _ = writeln!(s, "makespan: simulated {}", self.simulated_makespan);
            }
        }
        let _ = writeln!(s, "occupancy:");
        let _ = writeln!(s, "{:>6}  {:<8}  {:<5}  event", "step", "location", "task");
        for e in &self.occupancy {
            let kind = match e.kind {
                OccupancyKind::Allocate => "allocate",
                OccupancyKind::Release => "release",
            };
            let _ = writeln!(
                s,
                "{:>6}  {:<8}  {:<5}  {kind}",
                e.step,
                e.location.to_string(),
                e.task.to_string()
            );
        }
        s
    }
}

/// Default fuel: ten steps per command node plus slack for loops.
pub fn default_fuel(program: &Program) -> usize {
    let size: usize = program.stmts.iter().map(|s| s.command.size()).sum();
    10 * size + 1000
}

/// Runs `program` from the empty state and judges the result.
pub fn verify(program: &Program, fuel: Option<usize>) -> VerificationReport {
    let fuel = fuel.unwrap_or_else(|| default_fuel(program));
    let run = run_program(
        program,
        MachineState::new(),
        RunOptions {
            fuel,
            snapshots: false,
        },
    );

    let mut occupancy = Vec::new();
    let mut task_clock: BTreeMap<TaskVar, i64> = BTreeMap::new();
    let mut car_clock = BTreeMap::new();
    let mut loc_clock: BTreeMap<LocId, i64> = BTreeMap::new();
    let mut horizon = 0i64;
    for (step, entry) in run.trace.iter().enumerate() {
        match &entry.step.effect {
            Effect::Allocate { owner, locs, .. } => {
                occupancy.extend(locs.iter().map(|(loc, _)| OccupancyEvent {
                    location: *loc,
                    task: *owner,
                    kind: OccupancyKind::Allocate,
                    step,
                }));
            }
            Effect::Release {
                task,
                car,
                loc,
                duration,
            } => {
                occupancy.push(OccupancyEvent {
                    location: *loc,
                    task: *task,
                    kind: OccupancyKind::Release,
                    step,
                });
                let tc = task_clock.entry(*task).or_insert(0);
                let cc = car_clock.entry(*car).or_insert(0);
                let lc = loc_clock.entry(*loc).or_insert(0);
                let end = (*tc).max(*cc).max(*lc) + (*duration).max(0);
                *tc = end;
                *cc = end;
                *lc = end;
                horizon = horizon.max(end);
            }
            _ => {}
        }
    }

    let verdict = match run.outcome {
        Outcome::Terminated if run.state.is_clean() => Verdict::Verified,
        Outcome::Terminated => Verdict::Unclean,
        Outcome::Stuck { reason, stmt } => Verdict::Stuck {
            reason,
            command: stmt,
        },
        Outcome::FuelExhausted => Verdict::FuelExhausted,
    };
    VerificationReport {
        verdict,
        steps: run.trace.len(),
        terminal_state: run.state,
        occupancy,
        simulated_makespan: horizon as Slice,
        scheme_makespan: None,
    }
}

/// Compiles and verifies a complete scheme, and checks that the retimed
/// program reproduces the scheme makespan.
pub fn check_scheme(
    scheme: &SchedulingScheme,
    scenario: &ScenarioConfig,
    fuel: Option<usize>,
) -> Result<VerificationReport, VerifyError> {
    let expected = makespan(scheme, scenario)?;
    let program = compile_scheme(scheme, Some(scenario))?;
    let mut report = verify(&program.program, fuel);
    report.scheme_makespan = Some(expected);
    if report.is_verified() && report.simulated_makespan != expected {
        return Err(VerifyError::MakespanMismatch {
            scheme: expected,
            simulated: report.simulated_makespan,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests;
