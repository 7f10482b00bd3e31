//! Abstract syntax of the modeling language.

use std::fmt;

use crate::ids::LocId;

/// A task variable `tN`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TaskVar(pub u32);

impl fmt::Display for TaskVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

/// A car variable `cI@A`: car `I` annotated with its owning task `A`.
///
/// Planning through `cI@A` claims the car resource `ccI`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CarVar {
    pub index: u32,
    pub owner: u32,
}

impl CarVar {
    pub fn new(index: u32, owner: u32) -> Self {
        CarVar { index, owner }
    }

    pub fn resource(self) -> CarRes {
        CarRes(self.index)
    }
}

impl fmt::Display for CarVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}@{}", self.index, self.owner)
    }
}

/// A car resource `ccN` in the car heap.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CarRes(pub u32);

impl fmt::Display for CarRes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cc{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expr {
    /// Non-negative literal.
    Num(i64),
    Var(String),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    /// `#ce`: number of locations still queued on a car.
    CarLen(Box<CarExpr>),
    /// `#te`: locations still queued on all cars of a task.
    TaskLen(Box<TaskExpr>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BoolExpr {
    Eq(Expr, Expr),
    Le(Expr, Expr),
    True,
    False,
    Not(Box<BoolExpr>),
    Or(Box<BoolExpr>, Box<BoolExpr>),
    And(Box<BoolExpr>, Box<BoolExpr>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TaskExpr {
    Null,
    Fin,
    Var(TaskVar),
    /// `te.ce`
    Append(Box<TaskExpr>, CarExpr),
    /// `te.te`
    Concat(Box<TaskExpr>, Box<TaskExpr>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CarExpr {
    Null,
    Res(CarRes),
    Var(CarVar),
    /// `t.e`: the e-th car of task `t`.
    Index(TaskVar, Box<Expr>),
}

/// One planned operation: its duration and, optionally, the location it
/// must occupy. Unpinned items take the least unused location id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlanItem {
    pub duration: Expr,
    pub at: Option<LocId>,
}

impl PlanItem {
    pub fn pinned(duration: i64, at: LocId) -> Self {
        PlanItem {
            duration: Expr::Num(duration),
            at: Some(at),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Command {
    Skip,
    Assign(String, Expr),
    Seq(Box<Command>, Box<Command>),
    If(BoolExpr, Box<Command>, Box<Command>),
    While(BoolExpr, Box<Command>),
    /// `asgn t (ce, ...)`
    Asgn(TaskVar, Vec<CarExpr>),
    /// `att t (ce, ...)`
    Att(TaskVar, Vec<CarExpr>),
    /// `free t.e`
    Free(TaskVar, Expr),
    /// `comp t`
    Comp(TaskVar),
    /// `plan cI@A [e @ loc, ...]`
    Plan(CarVar, Vec<PlanItem>),
    /// `add cI@A [e @ loc]`
    Add(CarVar, PlanItem),
    /// `x := {ce.e}`
    Locate(String, CarExpr, Expr),
    /// `exec1 t.e`
    Exec1(TaskVar, Expr),
}

impl Command {
    /// Right-nested sequence of `commands` (`Skip` when empty).
    pub fn seq(commands: impl IntoIterator<Item = Command>) -> Command {
        let mut items: Vec<Command> = commands.into_iter().collect();
        let Some(mut acc) = items.pop() else {
            return Command::Skip;
        };
        while let Some(c) = items.pop() {
            acc = Command::Seq(Box::new(c), Box::new(acc));
        }
        acc
    }

    /// Flattens top-level sequencing into a list of commands.
    pub fn flatten(&self) -> Vec<&Command> {
        let mut out = Vec::new();
        let mut cur = self;
        loop {
            match cur {
                Command::Seq(a, b) => {
                    out.extend(a.flatten());
                    cur = b;
                }
                other => {
                    out.push(other);
                    return out;
                }
            }
        }
    }

    pub fn is_skip(&self) -> bool {
        matches!(self, Command::Skip)
    }

    /// Number of non-sequence command nodes.
    pub fn size(&self) -> usize {
        match self {
            Command::Seq(a, b) => a.size() + b.size(),
            Command::If(_, a, b) => 1 + a.size() + b.size(),
            Command::While(_, body) => 1 + body.size(),
            _ => 1,
        }
    }
}

/// One top-level command with the source line it starts on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stmt {
    pub command: Command,
    pub line: usize,
}

/// A parsed program file: its top-level commands in order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Program {
    pub stmts: Vec<Stmt>,
}

impl Program {
    pub fn from_commands(commands: impl IntoIterator<Item = Command>) -> Self {
        Program {
            stmts: commands
                .into_iter()
                .enumerate()
                .map(|(i, command)| Stmt { command, line: i + 1 })
                .collect(),
        }
    }

    pub fn to_command(&self) -> Command {
        Command::seq(self.stmts.iter().map(|s| s.command.clone()))
    }

    pub fn len(&self) -> usize {
        self.stmts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stmts.is_empty()
    }

    /// Index of the statement starting on `line`, if any.
    pub fn stmt_at_line(&self, line: usize) -> Option<usize> {
        self.stmts.iter().position(|s| s.line == line)
    }
}
