//! Small-step operational semantics.

use std::collections::BTreeSet;
use std::fmt;
use std::mem;

use thiserror::Error;

use super::ast::*;
use super::state::{MachineState, TaskVal};
use crate::ids::LocId;

/// A command paired with the state it runs in.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Config {
    pub command: Command,
    pub state: MachineState,
}

impl Config {
    pub fn new(command: Command, state: MachineState) -> Self {
        Config { command, state }
    }

    pub fn is_terminal(&self) -> bool {
        self.command.is_skip()
    }
}

/// Name of the rule that fired.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Rule {
    Assign,
    SeqSkip,
    IfTrue,
    IfFalse,
    WhileUnfold,
    Asgn,
    Att,
    Free,
    Comp,
    Plan,
    Add,
    Locate,
    Exec1,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rule::Assign => "assign",
            Rule::SeqSkip => "seq-skip",
            Rule::IfTrue => "if-true",
            Rule::IfFalse => "if-false",
            Rule::WhileUnfold => "while",
            Rule::Asgn => "asgn",
            Rule::Att => "att",
            Rule::Free => "free",
            Rule::Comp => "comp",
            Rule::Plan => "plan",
            Rule::Add => "add",
            Rule::Locate => "locate",
            Rule::Exec1 => "exec1",
        };
        f.write_str(s)
    }
}

/// Resource effect of a step, for replaying occupancy outside the machine.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Effect {
    None,
    /// New location cells queued on `car` on behalf of `owner`.
    Allocate {
        owner: TaskVar,
        car: CarRes,
        locs: Vec<(LocId, i64)>,
    },
    /// The head location of `car` was executed and released.
    Release {
        task: TaskVar,
        car: CarRes,
        loc: LocId,
        duration: i64,
    },
    Bind { task: TaskVar, cars: Vec<CarRes> },
    Dispose { task: TaskVar, car: CarRes },
    Complete { task: TaskVar },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step {
    pub rule: Rule,
    pub effect: Effect,
}

impl Step {
    fn plain(rule: Rule) -> Self {
        Step {
            rule,
            effect: Effect::None,
        }
    }
}

/// Why no rule applies.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Stuck {
    #[error("variable `{0}` is unbound")]
    UnboundVariable(String),
    #[error("task {0} is unbound")]
    UnboundTask(TaskVar),
    #[error("car variable {0} is unbound")]
    UnboundCar(CarVar),
    #[error("freshness: {0} is already allocated")]
    CarInUse(CarRes),
    #[error("freshness: {0} is already allocated")]
    LocationInUse(LocId),
    #[error("{0} is not allocated")]
    DanglingCar(CarRes),
    #[error("{car} already works for {owner}")]
    CarOwned { car: CarRes, owner: TaskVar },
    #[error("{0} listed twice")]
    DuplicateCar(CarRes),
    #[error("task {0} is not null")]
    TaskNotNull(TaskVar),
    #[error("task {0} is finished")]
    TaskFinished(TaskVar),
    #[error("a finished task cannot take more cars")]
    ExtendFin,
    #[error("task {task} has no car at index {index}")]
    IndexOutOfRange { task: TaskVar, index: i64 },
    #[error("null car has no locations")]
    NullCar,
    #[error("{car} has no location at index {index}")]
    LocationIndex { car: CarRes, index: i64 },
    #[error("{0} has nothing left to execute")]
    EmptyCar(CarRes),
    #[error("non-empty car: {0} still has queued locations")]
    NonEmptyCar(CarRes),
    #[error("{0} has no heap cell")]
    MissingLocation(LocId),
    #[error("arithmetic overflow")]
    Overflow,
}

type SResult<T> = Result<T, Stuck>;

fn task_val(s: &MachineState, t: TaskVar) -> SResult<&TaskVal> {
    s.tasks.get(&t).ok_or(Stuck::UnboundTask(t))
}

fn heap_cell(s: &MachineState, car: CarRes) -> SResult<&Vec<LocId>> {
    s.car_heap.get(&car).ok_or(Stuck::DanglingCar(car))
}

fn task_car(s: &MachineState, t: TaskVar, index: i64) -> SResult<CarRes> {
    let cars = task_val(s, t)?.cars();
    usize::try_from(index)
        .ok()
        .and_then(|i| cars.get(i).copied())
        .ok_or(Stuck::IndexOutOfRange { task: t, index })
}

pub fn eval_car(ce: &CarExpr, s: &MachineState) -> SResult<Option<CarRes>> {
    match ce {
        CarExpr::Null => Ok(None),
        CarExpr::Res(c) => Ok(Some(*c)),
        CarExpr::Var(v) => s.cars.get(v).copied().map(Some).ok_or(Stuck::UnboundCar(*v)),
        CarExpr::Index(t, e) => {
            let i = eval_expr(e, s)?;
            task_car(s, *t, i).map(Some)
        }
    }
}

pub fn eval_task(te: &TaskExpr, s: &MachineState) -> SResult<TaskVal> {
    let open = |v: TaskVal| match v {
        TaskVal::Fin => Err(Stuck::ExtendFin),
        TaskVal::Null => Ok(Vec::new()),
        TaskVal::Cars(c) => Ok(c),
    };
    match te {
        TaskExpr::Null => Ok(TaskVal::Null),
        TaskExpr::Fin => Ok(TaskVal::Fin),
        TaskExpr::Var(t) => task_val(s, *t).cloned(),
        TaskExpr::Append(inner, ce) => {
            let mut cars = open(eval_task(inner, s)?)?;
            cars.extend(eval_car(ce, s)?);
            Ok(TaskVal::from_cars(cars))
        }
        TaskExpr::Concat(a, b) => {
            let mut cars = open(eval_task(a, s)?)?;
            cars.extend(open(eval_task(b, s)?)?);
            Ok(TaskVal::from_cars(cars))
        }
    }
}

pub fn eval_expr(e: &Expr, s: &MachineState) -> SResult<i64> {
    match e {
        Expr::Num(n) => Ok(*n),
        Expr::Var(x) => s
            .locals
            .get(x)
            .copied()
            .ok_or_else(|| Stuck::UnboundVariable(x.clone())),
        Expr::Add(a, b) => eval_expr(a, s)?
            .checked_add(eval_expr(b, s)?)
            .ok_or(Stuck::Overflow),
        Expr::Sub(a, b) => eval_expr(a, s)?
            .checked_sub(eval_expr(b, s)?)
            .ok_or(Stuck::Overflow),
        Expr::Mul(a, b) => eval_expr(a, s)?
            .checked_mul(eval_expr(b, s)?)
            .ok_or(Stuck::Overflow),
        Expr::CarLen(ce) => match eval_car(ce, s)? {
            None => Ok(0),
            Some(c) => Ok(heap_cell(s, c)?.len() as i64),
        },
        Expr::TaskLen(te) => {
            let mut n = 0i64;
            for c in eval_task(te, s)?.cars() {
                n += heap_cell(s, *c)?.len() as i64;
            }
            Ok(n)
        }
    }
}

pub fn eval_bool(b: &BoolExpr, s: &MachineState) -> SResult<bool> {
    Ok(match b {
        BoolExpr::True => true,
        BoolExpr::False => false,
        BoolExpr::Eq(x, y) => eval_expr(x, s)? == eval_expr(y, s)?,
        BoolExpr::Le(x, y) => eval_expr(x, s)? <= eval_expr(y, s)?,
        BoolExpr::Not(x) => !eval_bool(x, s)?,
        BoolExpr::And(x, y) => eval_bool(x, s)? && eval_bool(y, s)?,
        BoolExpr::Or(x, y) => eval_bool(x, s)? || eval_bool(y, s)?,
    })
}

/// Resolves and checks the cars handed to `asgn`/`att`.
fn claim_cars(s: &MachineState, ces: &[CarExpr]) -> SResult<Vec<CarRes>> {
    let mut out: Vec<CarRes> = Vec::new();
    for ce in ces {
        let Some(car) = eval_car(ce, s)? else {
            continue;
        };
        heap_cell(s, car)?;
        if out.contains(&car) {
            return Err(Stuck::DuplicateCar(car));
        }
        if let Some(owner) = s.owner_of(car) {
            return Err(Stuck::CarOwned { car, owner });
        }
        out.push(car);
    }
    Ok(out)
}

fn fresh_locations(s: &MachineState, items: &[(i64, Option<LocId>)]) -> SResult<Vec<LocId>> {
    let mut taken: BTreeSet<LocId> = s.loc_heap.keys().copied().collect();
    for (_, at) in items {
        if let Some(l) = at {
            if !taken.insert(*l) {
                return Err(Stuck::LocationInUse(*l));
            }
        }
    }
    let mut next = 0u32;
    let mut out = Vec::with_capacity(items.len());
    for (_, at) in items {
        match at {
            Some(l) => out.push(*l),
            None => {
                while taken.contains(&LocId(next)) {
                    next += 1;
                }
                taken.insert(LocId(next));
                out.push(LocId(next));
            }
        }
    }
    Ok(out)
}

fn eval_items(items: &[PlanItem], s: &MachineState) -> SResult<Vec<(i64, Option<LocId>)>> {
    items
        .iter()
        .map(|i| Ok((eval_expr(&i.duration, s)?, i.at)))
        .collect()
}

/// Performs one step in place. On `Err` the configuration is unchanged.
pub fn step_mut(cfg: &mut Config) -> SResult<Step> {
    step_command(&mut cfg.command, &mut cfg.state)
}

/// Functional form of [`step_mut`].
pub fn step(cfg: &Config) -> SResult<(Step, Config)> {
    let mut next = cfg.clone();
    let s = step_mut(&mut next)?;
    Ok((s, next))
}

fn step_command(c: &mut Command, s: &mut MachineState) -> SResult<Step> {
    match c {
        Command::Skip => unreachable!("terminal configurations do not step"),
        Command::Seq(first, _) if !first.is_skip() => step_command(first, s),
        Command::Seq(_, rest) => {
            let rest = mem::replace(rest.as_mut(), Command::Skip);
            *c = rest;
            Ok(Step::plain(Rule::SeqSkip))
        }
        Command::If(b, x, y) => {
            let taken = eval_bool(b, s)?;
            let branch = if taken { x } else { y };
            *c = mem::replace(branch.as_mut(), Command::Skip);
            Ok(Step::plain(if taken { Rule::IfTrue } else { Rule::IfFalse }))
        }
        Command::While(b, body) => {
            let b = b.clone();
            let body = (**body).clone();
            let again = mem::replace(c, Command::Skip);
            *c = Command::If(
                b,
                Box::new(Command::Seq(Box::new(body), Box::new(again))),
                Box::new(Command::Skip),
            );
            Ok(Step::plain(Rule::WhileUnfold))
        }
        _ => {
            let step = atomic(c, s)?;
            *c = Command::Skip;
            Ok(step)
        }
    }
}

fn atomic(c: &Command, s: &mut MachineState) -> SResult<Step> {
    match c {
        Command::Assign(x, e) => {
            let v = eval_expr(e, s)?;
            s.locals.insert(x.clone(), v);
            Ok(Step::plain(Rule::Assign))
        }
        Command::Asgn(t, ces) => {
            match s.tasks.get(t) {
                None | Some(TaskVal::Null) => {}
                Some(_) => return Err(Stuck::TaskNotNull(*t)),
            }
            let cars = claim_cars(s, ces)?;
            s.tasks.insert(*t, TaskVal::from_cars(cars.clone()));
            Ok(Step {
                rule: Rule::Asgn,
                effect: Effect::Bind { task: *t, cars },
            })
        }
        Command::Att(t, ces) => {
            let mut held = match task_val(s, *t)? {
                TaskVal::Fin => return Err(Stuck::TaskFinished(*t)),
                v => v.cars().to_vec(),
            };
            let cars = claim_cars(s, ces)?;
            held.extend(cars.iter().copied());
            s.tasks.insert(*t, TaskVal::from_cars(held));
            Ok(Step {
                rule: Rule::Att,
                effect: Effect::Bind { task: *t, cars },
            })
        }
        Command::Free(t, e) => {
            let i = eval_expr(e, s)?;
            let car = task_car(s, *t, i)?;
            if !heap_cell(s, car)?.is_empty() {
                return Err(Stuck::NonEmptyCar(car));
            }
            s.car_heap.remove(&car);
            let mut cars = s.tasks[t].cars().to_vec();
            cars.remove(i as usize);
            s.tasks.insert(*t, TaskVal::from_cars(cars));
            Ok(Step {
                rule: Rule::Free,
                effect: Effect::Dispose { task: *t, car },
            })
        }
        Command::Comp(t) => {
            match task_val(s, *t)? {
                TaskVal::Null => {}
                TaskVal::Fin => return Err(Stuck::TaskFinished(*t)),
                TaskVal::Cars(_) => return Err(Stuck::TaskNotNull(*t)),
            }
            s.tasks.insert(*t, TaskVal::Fin);
            Ok(Step {
                rule: Rule::Comp,
                effect: Effect::Complete { task: *t },
            })
        }
        Command::Plan(cv, items) => {
            let car = cv.resource();
            if s.car_heap.contains_key(&car) {
                return Err(Stuck::CarInUse(car));
            }
            let items = eval_items(items, s)?;
            let locs = fresh_locations(s, &items)?;
            for (loc, (d, _)) in locs.iter().zip(&items) {
                s.loc_heap.insert(*loc, *d);
            }
            s.car_heap.insert(car, locs.clone());
            s.cars.insert(*cv, car);
            Ok(Step {
                rule: Rule::Plan,
                effect: Effect::Allocate {
                    owner: TaskVar(cv.owner),
                    car,
                    locs: locs.into_iter().zip(items.iter().map(|i| i.0)).collect(),
                },
            })
        }
        Command::Add(cv, item) => {
            let car = *s.cars.get(cv).ok_or(Stuck::UnboundCar(*cv))?;
            heap_cell(s, car)?;
            let items = eval_items(std::slice::from_ref(item), s)?;
            let locs = fresh_locations(s, &items)?;
            s.loc_heap.insert(locs[0], items[0].0);
            s.car_heap.get_mut(&car).expect("checked above").push(locs[0]);
            Ok(Step {
                rule: Rule::Add,
                effect: Effect::Allocate {
                    owner: TaskVar(cv.owner),
                    car,
                    locs: vec![(locs[0], items[0].0)],
                },
            })
        }
        Command::Locate(x, ce, e) => {
            let car = eval_car(ce, s)?.ok_or(Stuck::NullCar)?;
            let i = eval_expr(e, s)?;
            let loc = usize::try_from(i)
                .ok()
                .and_then(|k| heap_cell(s, car).ok()?.get(k).copied());
            let loc = match loc {
                Some(l) => l,
                None => {
                    heap_cell(s, car)?;
                    return Err(Stuck::LocationIndex { car, index: i });
                }
            };
            s.locals.insert(x.clone(), i64::from(loc.0));
            Ok(Step::plain(Rule::Locate))
        }
        Command::Exec1(t, e) => {
            let i = eval_expr(e, s)?;
            let car = task_car(s, *t, i)?;
            let loc = *heap_cell(s, car)?.first().ok_or(Stuck::EmptyCar(car))?;
            let duration = s.loc_heap.remove(&loc).ok_or(Stuck::MissingLocation(loc))?;
            s.car_heap.get_mut(&car).expect("checked above").remove(0);
            Ok(Step {
                rule: Rule::Exec1,
                effect: Effect::Release {
                    task: *t,
                    car,
                    loc,
                    duration,
                },
            })
        }
        Command::Skip | Command::Seq(..) | Command::If(..) | Command::While(..) => {
            unreachable!("structural commands are handled by step_command")
        }
    }
}

/// How a run ended.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Terminated,
    /// No rule applies inside top-level statement `stmt`.
    Stuck { reason: Stuck, stmt: usize },
    FuelExhausted,
}

impl Outcome {
    pub fn is_terminated(&self) -> bool {
        matches!(self, Outcome::Terminated)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceEntry {
    /// Index of the top-level statement being executed.
    pub stmt: usize,
    pub step: Step,
    /// Configuration after the step, when snapshots were requested.
    pub snapshot: Option<Config>,
}

#[derive(Clone, Debug)]
pub struct Run {
    pub outcome: Outcome,
    pub trace: Vec<TraceEntry>,
    pub state: MachineState,
}

impl Run {
    pub fn steps(&self) -> usize {
        self.trace.len()
    }

    pub fn effects(&self) -> impl Iterator<Item = &Effect> {
        self.trace.iter().map(|e| &e.step.effect)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RunOptions {
    pub fuel: usize,
    pub snapshots: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            fuel: 1_000_000,
            snapshots: false,
        }
    }
}

/// Runs a single command to completion.
pub fn run(command: Command, state: MachineState, opts: RunOptions) -> Run {
    run_statements(std::iter::once(command), state, opts)
}

/// Runs the top-level statements of `program` in order.
pub fn run_program(program: &Program, state: MachineState, opts: RunOptions) -> Run {
    run_statements(program.stmts.iter().map(|s| s.command.clone()), state, opts)
}

fn run_statements(
    stmts: impl IntoIterator<Item = Command>,
    state: MachineState,
    opts: RunOptions,
) -> Run {
    let mut cfg = Config::new(Command::Skip, state);
    let mut trace = Vec::new();
    for (stmt, command) in stmts.into_iter().enumerate() {
        cfg.command = command;
        while !cfg.is_terminal() {
            if trace.len() >= opts.fuel {
                return Run {
                    outcome: Outcome::FuelExhausted,
                    trace,
                    state: cfg.state,
                };
            }
            match step_mut(&mut cfg) {
                Ok(step) => trace.push(TraceEntry {
                    stmt,
                    step,
                    snapshot: opts.snapshots.then(|| cfg.clone()),
                }),
                Err(reason) => {
                    return Run {
                        outcome: Outcome::Stuck { reason, stmt },
                        trace,
                        state: cfg.state,
                    }
                }
            }
        }
    }
    Run {
        outcome: Outcome::Terminated,
        trace,
        state: cfg.state,
    }
}
