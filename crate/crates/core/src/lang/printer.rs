//! Pretty printer. Output parses back to the same tree.

use std::fmt::{self, Display, Formatter, Write};

use super::ast::*;

fn expr_prec(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => 1,
        Expr::Mul(..) => 2,
        _ => 3,
    }
}

fn write_expr(f: &mut impl Write, e: &Expr, min: u8) -> fmt::Result {
    if expr_prec(e) < min {
        f.write_char('(')?;
        write_expr(f, e, 0)?;
        return f.write_char(')');
    }
    match e {
        Expr::Num(n) => write!(f, "{n}"),
        Expr::Var(x) => f.write_str(x),
        Expr::Add(a, b) => {
            write_expr(f, a, 1)?;
            f.write_str(" + ")?;
            write_expr(f, b, 2)
        }
        Expr::Sub(a, b) => {
            write_expr(f, a, 1)?;
            f.write_str(" - ")?;
            write_expr(f, b, 2)
        }
        Expr::Mul(a, b) => {
            write_expr(f, a, 2)?;
            f.write_str(" * ")?;
            write_expr(f, b, 3)
        }
        Expr::CarLen(ce) => write!(f, "#{ce}"),
        Expr::TaskLen(te) => match te.as_ref() {
            TaskExpr::Var(t) => write!(f, "#{t}"),
            TaskExpr::Fin => f.write_str("#fin"),
            other => write!(f, "#({other})"),
        },
    }
}

/// Index position after `t.`: atoms print bare, the rest in parentheses.
fn write_index(f: &mut impl Write, e: &Expr) -> fmt::Result {
    match e {
        Expr::Num(_) | Expr::Var(_) => write_expr(f, e, 0),
        _ => {
            f.write_char('(')?;
            write_expr(f, e, 0)?;
            f.write_char(')')
        }
    }
}

impl Display for Expr {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write_expr(f, self, 0)
    }
}

impl Display for CarExpr {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            CarExpr::Null => f.write_str("null"),
            CarExpr::Res(c) => write!(f, "{c}"),
            CarExpr::Var(c) => write!(f, "{c}"),
            CarExpr::Index(t, e) => {
                write!(f, "{t}.")?;
                write_index(f, e)
            }
        }
    }
}

impl Display for TaskExpr {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            TaskExpr::Null => f.write_str("null"),
            TaskExpr::Fin => f.write_str("fin"),
            TaskExpr::Var(t) => write!(f, "{t}"),
            TaskExpr::Append(te, ce) => write!(f, "{te}.{ce}"),
            TaskExpr::Concat(a, b) => write!(f, "{a}.({b})"),
        }
    }
}

fn bool_prec(b: &BoolExpr) -> u8 {
    match b {
        BoolExpr::Or(..) => 1,
        BoolExpr::And(..) => 2,
        _ => 3,
    }
}

fn write_bool(f: &mut impl Write, b: &BoolExpr, min: u8) -> fmt::Result {
    if bool_prec(b) < min {
        f.write_char('(')?;
        write_bool(f, b, 0)?;
        return f.write_char(')');
    }
    match b {
        BoolExpr::True => f.write_str("true"),
        BoolExpr::False => f.write_str("false"),
        BoolExpr::Eq(a, c) => write!(f, "{a} = {c}"),
        BoolExpr::Le(a, c) => write!(f, "{a} <= {c}"),
        BoolExpr::Not(inner) => {
            f.write_str("not ")?;
            write_bool(f, inner, 3)
        }
        BoolExpr::Or(a, c) => {
            write_bool(f, a, 1)?;
            f.write_str(" or ")?;
            write_bool(f, c, 2)
        }
        BoolExpr::And(a, c) => {
            write_bool(f, a, 2)?;
            f.write_str(" and ")?;
            write_bool(f, c, 3)
        }
    }
}

impl Display for BoolExpr {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write_bool(f, self, 0)
    }
}

impl Display for PlanItem {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.duration)?;
        if let Some(at) = self.at {
            write!(f, " @ {at}")?;
        }
        Ok(())
    }
}

fn join<T: Display>(items: &[T]) -> String {
    items
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

fn write_block(f: &mut impl Write, c: &Command, depth: usize) -> fmt::Result {
    if c.is_skip() {
        return f.write_str("{}");
    }
    f.write_str("{\n")?;
    write_stmts(f, c, depth + 1)?;
    write!(f, "{}}}", "    ".repeat(depth))
}

fn write_stmts(f: &mut impl Write, c: &Command, depth: usize) -> fmt::Result {
    for stmt in c.flatten() {
        f.write_str(&"    ".repeat(depth))?;
        write_command(f, stmt, depth)?;
        f.write_str(";\n")?;
    }
    Ok(())
}

fn write_command(f: &mut impl Write, c: &Command, depth: usize) -> fmt::Result {
    match c {
        Command::Skip => f.write_str("skip"),
        Command::Assign(x, e) => write!(f, "{x} := {e}"),
        Command::Seq(..) => {
            // Only reached when printing a bare sequence inline.
            let parts: Vec<String> = c.flatten().iter().map(|s| s.to_string()).collect();
            f.write_str(&parts.join("; "))
        }
        Command::If(b, x, y) => {
            write!(f, "if {b} then ")?;
            write_block(f, x, depth)?;
            f.write_str(" else ")?;
            write_block(f, y, depth)
        }
        Command::While(b, body) => {
            write!(f, "while {b} do ")?;
            write_block(f, body, depth)
        }
        Command::Asgn(t, cars) => write!(f, "asgn {t} ({})", join(cars)),
        Command::Att(t, cars) => write!(f, "att {t} ({})", join(cars)),
        Command::Free(t, e) => {
            write!(f, "free {t}.")?;
            write_index(f, e)
        }
        Command::Exec1(t, e) => {
            write!(f, "exec1 {t}.")?;
            write_index(f, e)
        }
        Command::Comp(t) => write!(f, "comp {t}"),
        Command::Plan(c, items) => write!(f, "plan {c} [{}]", join(items)),
        Command::Add(c, item) => write!(f, "add {c} [{item}]"),
        Command::Locate(x, ce, e) => {
            write!(f, "{x} := {{{ce}.")?;
            write_index(f, e)?;
            f.write_char('}')
        }
    }
}

impl Display for Command {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write_command(f, self, 0)
    }
}

impl Command {
    /// Renders the command as program text, one statement per line.
    pub fn to_source(&self) -> String {
        let mut s = String::new();
        write_stmts(&mut s, self, 0).expect("writing to a String");
        s
    }
}

impl Display for Program {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        for stmt in &self.stmts {
            write_stmts(f, &stmt.command, 0)?;
        }
        Ok(())
    }
}
