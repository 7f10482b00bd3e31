//! The modeling language: syntax, printer and small-step interpreter.
//!
//! Programs manipulate tasks (`t0`), cars (`c1@0` owned by task 0, backed
//! by resource `cc1`) and locations (`loc11`). A car plans a queue of
//! locations, a task attaches cars, and `exec1` pops one location.
//!
//! ```
//! use pdcl::lang::{parse_program, run_program, RunOptions, MachineState};
//!
//! let p = parse_program("plan c1@0 [4 @ loc11]; asgn t0 (c1@0); exec1 t0.0; free t0.0; comp t0;")?;
//! let run = run_program(&p, MachineState::new(), RunOptions::default());
//! assert!(run.outcome.is_terminated());
//! assert!(run.state.is_clean());
//! # Ok::<(), pdcl::lang::ParseError>(())
//! ```

mod ast;
mod parser;
mod printer;
mod semantics;
mod state;

pub use ast::*;
pub use parser::{is_keyword, parse_bexpr, parse_command, parse_expr, parse_program, ParseError};
pub use semantics::{
    eval_bool, eval_car, eval_expr, eval_task, run, run_program, step, step_mut, Config, Effect,
    Outcome, Rule, Run, RunOptions, Step, Stuck, TraceEntry,
};
pub use state::{MachineState, SeparationViolation, TaskVal};
