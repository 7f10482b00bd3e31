//! Lexer and recursive-descent parser for program files.

use thiserror::Error;

use super::ast::*;
use crate::ids::LocId;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

const KEYWORDS: &[&str] = &[
    "skip", "if", "then", "else", "while", "do", "true", "false", "not", "and", "or", "null",
    "fin", "asgn", "att", "free", "comp", "plan", "add", "exec1",
];

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Num(i64),
    Ident(String),
    Task(u32),
    CarVar(u32, u32),
    CarRes(u32),
    Loc(u32),
    Assign,
    Semi,
    Plus,
    Minus,
    Star,
    Eq,
    Le,
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Dot,
    At,
    Hash,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(n) => format!("number `{n}`"),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Task(n) => format!("`t{n}`"),
            Tok::CarVar(i, a) => format!("`c{i}@{a}`"),
            Tok::CarRes(n) => format!("`cc{n}`"),
            Tok::Loc(n) => format!("`loc{n}`"),
            Tok::Eof => "end of input".into(),
            other => format!("`{}`", other.symbol()),
        }
    }

    fn symbol(&self) -> &'static str {
        match self {
            Tok::Assign => ":=",
            Tok::Semi => ";",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Eq => "=",
            Tok::Le => "<=",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::Comma => ",",
            Tok::Dot => ".",
            Tok::At => "@",
            Tok::Hash => "#",
            _ => "?",
        }
    }
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn digits_suffix(word: &str, prefix: &str) -> Option<u32> {
    let rest = word.strip_prefix(prefix)?;
    if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    rest.parse().ok()
}

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, column, message: String| ParseError {
        line,
        column,
        message,
    };
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let mut push = |tok: Tok, len: usize, i: &mut usize, col: &mut usize| {
            out.push(Token {
                tok,
                line: tl,
                column: tc,
            });
            *i += len;
            *col += len;
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                i += 1;
                col += 1;
            }
            '#' => {
                let next = chars.get(i + 1).copied();
                if next.is_none_or(|n| n.is_whitespace() || n == '#') {
                    while i < chars.len() && chars[i] != '\n' {
                        i += 1;
                        col += 1;
                    }
                } else {
                    push(Tok::Hash, 1, &mut i, &mut col);
                }
            }
            ':' if chars.get(i + 1) == Some(&'=') => push(Tok::Assign, 2, &mut i, &mut col),
            '<' if chars.get(i + 1) == Some(&'=') => push(Tok::Le, 2, &mut i, &mut col),
            ';' => push(Tok::Semi, 1, &mut i, &mut col),
            '+' => push(Tok::Plus, 1, &mut i, &mut col),
            '-' => push(Tok::Minus, 1, &mut i, &mut col),
            '*' => push(Tok::Star, 1, &mut i, &mut col),
            '=' => push(Tok::Eq, 1, &mut i, &mut col),
            '(' => push(Tok::LParen, 1, &mut i, &mut col),
            ')' => push(Tok::RParen, 1, &mut i, &mut col),
            '[' => push(Tok::LBracket, 1, &mut i, &mut col),
            ']' => push(Tok::RBracket, 1, &mut i, &mut col),
            '{' => push(Tok::LBrace, 1, &mut i, &mut col),
            '}' => push(Tok::RBrace, 1, &mut i, &mut col),
            ',' => push(Tok::Comma, 1, &mut i, &mut col),
            '.' => push(Tok::Dot, 1, &mut i, &mut col),
            '@' => push(Tok::At, 1, &mut i, &mut col),
            c if c.is_ascii_digit() => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                let n = text
                    .parse::<i64>()
                    .map_err(|_| err(tl, tc, format!("number `{text}` is too large")))?;
                out.push(Token {
                    tok: Tok::Num(n),
                    line: tl,
                    column: tc,
                });
                col += i - start;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                let mut tok = if let Some(n) = digits_suffix(&word, "cc") {
                    Tok::CarRes(n)
                } else if let Some(n) = digits_suffix(&word, "loc") {
                    Tok::Loc(n)
                } else if let Some(n) = digits_suffix(&word, "t") {
                    Tok::Task(n)
                } else {
                    Tok::Ident(word.clone())
                };
                // `cI@A` is a single token when written without spaces.
                if let Some(index) = digits_suffix(&word, "c") {
                    if chars.get(i) == Some(&'@')
                        && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())
                    {
                        let mut j = i + 1;
                        while j < chars.len() && chars[j].is_ascii_digit() {
                            j += 1;
                        }
                        let owner: String = chars[i + 1..j].iter().collect();
                        let owner = owner
                            .parse()
                            .map_err(|_| err(tl, tc, format!("owner `{owner}` is too large")))?;
                        tok = Tok::CarVar(index, owner);
                        i = j;
                    }
                }
                col += i - start;
                out.push(Token {
                    tok,
                    line: tl,
                    column: tc,
                });
            }
            other => return Err(err(tl, tc, format!("unexpected character `{other}`"))),
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        column: col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> PResult<T> {
        let t = &self.toks[self.pos];
        Err(ParseError {
            line: t.line,
            column: t.column,
            message: message.into(),
        })
    }

    fn unexpected<T>(&self, wanted: &str) -> PResult<T> {
        self.error(format!("expected {wanted}, found {}", self.peek().describe()))
    }

    fn expect(&mut self, tok: Tok) -> PResult<()> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.unexpected(&format!("`{}`", tok.symbol()))
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.is_kw(kw) {
            self.bump();
            Ok(())
        } else {
            self.unexpected(&format!("`{kw}`"))
        }
    }

    fn task(&mut self) -> PResult<TaskVar> {
        match self.peek() {
            Tok::Task(n) => {
                let n = *n;
                self.bump();
                Ok(TaskVar(n))
            }
            _ => self.unexpected("a task variable"),
        }
    }

    fn car_var(&mut self) -> PResult<CarVar> {
        match self.peek() {
            Tok::CarVar(i, a) => {
                let v = CarVar::new(*i, *a);
                self.bump();
                Ok(v)
            }
            _ => self.unexpected("a car variable `cI@A`"),
        }
    }

    fn statements(&mut self, until: &Tok) -> PResult<Vec<Stmt>> {
        let mut out = Vec::new();
        while self.peek() != until {
            if *self.peek() == Tok::Eof {
                return self.unexpected(&format!("`{}`", until.symbol()));
            }
            let line = self.toks[self.pos].line;
            let command = self.command()?;
            self.expect(Tok::Semi)?;
            out.push(Stmt { command, line });
        }
        Ok(out)
    }

    fn block(&mut self) -> PResult<Command> {
        self.expect(Tok::LBrace)?;
        let stmts = self.statements(&Tok::RBrace)?;
        self.expect(Tok::RBrace)?;
        Ok(Command::seq(stmts.into_iter().map(|s| s.command)))
    }

    fn command(&mut self) -> PResult<Command> {
        let Tok::Ident(word) = self.peek().clone() else {
            return self.unexpected("a command");
        };
        match word.as_str() {
            "skip" => {
                self.bump();
                Ok(Command::Skip)
            }
            "if" => {
                self.bump();
                let cond = self.bexpr()?;
                self.expect_kw("then")?;
                let a = self.block()?;
                self.expect_kw("else")?;
                let b = self.block()?;
                Ok(Command::If(cond, Box::new(a), Box::new(b)))
            }
            "while" => {
                self.bump();
                let cond = self.bexpr()?;
                self.expect_kw("do")?;
                let body = self.block()?;
                Ok(Command::While(cond, Box::new(body)))
            }
            "asgn" | "att" => {
                self.bump();
                let t = self.task()?;
                self.expect(Tok::LParen)?;
                let mut cars = Vec::new();
                if *self.peek() != Tok::RParen {
                    cars.push(self.car_expr()?);
                    while *self.peek() == Tok::Comma {
                        self.bump();
                        cars.push(self.car_expr()?);
                    }
                }
                self.expect(Tok::RParen)?;
                Ok(if word == "asgn" {
                    Command::Asgn(t, cars)
                } else {
                    Command::Att(t, cars)
                })
            }
            "free" | "exec1" => {
                self.bump();
                let t = self.task()?;
                self.expect(Tok::Dot)?;
                let e = self.index_atom()?;
                Ok(if word == "free" {
                    Command::Free(t, e)
                } else {
                    Command::Exec1(t, e)
                })
            }
            "comp" => {
                self.bump();
                Ok(Command::Comp(self.task()?))
            }
            "plan" => {
                self.bump();
                let c = self.car_var()?;
                self.expect(Tok::LBracket)?;
                let mut items = Vec::new();
                if *self.peek() != Tok::RBracket {
                    items.push(self.plan_item()?);
                    while *self.peek() == Tok::Comma {
                        self.bump();
                        items.push(self.plan_item()?);
                    }
                }
                self.expect(Tok::RBracket)?;
                Ok(Command::Plan(c, items))
            }
            "add" => {
                self.bump();
                let c = self.car_var()?;
                self.expect(Tok::LBracket)?;
                let item = self.plan_item()?;
                self.expect(Tok::RBracket)?;
                Ok(Command::Add(c, item))
            }
            w if is_keyword(w) => self.unexpected("a command"),
            _ => {
                if *self.peek_at(1) != Tok::Assign {
                    return self.error(format!("unknown command `{word}`"));
                }
                self.bump();
                self.bump();
                if *self.peek() == Tok::LBrace {
                    self.bump();
                    let ce = self.car_expr()?;
                    self.expect(Tok::Dot)?;
                    let e = self.index_atom()?;
                    self.expect(Tok::RBrace)?;
                    Ok(Command::Locate(word, ce, e))
                } else {
                    Ok(Command::Assign(word, self.expr()?))
                }
            }
        }
    }

    fn plan_item(&mut self) -> PResult<PlanItem> {
        let duration = self.expr()?;
        let at = if *self.peek() == Tok::At {
            self.bump();
            match self.peek() {
                Tok::Loc(n) => {
                    let id = LocId(*n);
                    self.bump();
                    Some(id)
                }
                _ => return self.unexpected("a location `locN`"),
            }
        } else {
            None
        };
        Ok(PlanItem { duration, at })
    }

    /// Index after `t.`: a number, a variable or a parenthesised expression.
    fn index_atom(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Num(n) => {
                self.bump();
                Ok(Expr::Num(n))
            }
            Tok::Ident(s) if !is_keyword(&s) => {
                self.bump();
                Ok(Expr::Var(s))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            _ => self.unexpected("an index"),
        }
    }

    fn starts_index(&self, k: usize) -> bool {
        matches!(self.peek_at(k), Tok::Num(_) | Tok::LParen)
            || matches!(self.peek_at(k), Tok::Ident(s) if !is_keyword(s))
    }

    fn car_expr(&mut self) -> PResult<CarExpr> {
        match self.peek().clone() {
            Tok::Ident(s) if s == "null" => {
                self.bump();
                Ok(CarExpr::Null)
            }
            Tok::CarRes(n) => {
                self.bump();
                Ok(CarExpr::Res(CarRes(n)))
            }
            Tok::CarVar(i, a) => {
                self.bump();
                Ok(CarExpr::Var(CarVar::new(i, a)))
            }
            Tok::Task(n) => {
                self.bump();
                self.expect(Tok::Dot)?;
                let e = self.index_atom()?;
                Ok(CarExpr::Index(TaskVar(n), Box::new(e)))
            }
            _ => self.unexpected("a car expression"),
        }
    }

    fn task_primary(&mut self) -> PResult<TaskExpr> {
        match self.peek().clone() {
            Tok::Ident(s) if s == "null" => {
                self.bump();
                Ok(TaskExpr::Null)
            }
            Tok::Ident(s) if s == "fin" => {
                self.bump();
                Ok(TaskExpr::Fin)
            }
            Tok::Task(n) => {
                self.bump();
                Ok(TaskExpr::Var(TaskVar(n)))
            }
            Tok::LParen => {
                self.bump();
                let te = self.task_expr()?;
                self.expect(Tok::RParen)?;
                Ok(te)
            }
            _ => self.unexpected("a task expression"),
        }
    }

    fn task_expr(&mut self) -> PResult<TaskExpr> {
        let mut te = self.task_primary()?;
        while *self.peek() == Tok::Dot {
            self.bump();
            te = match self.peek().clone() {
                Tok::Task(_) if *self.peek_at(1) == Tok::Dot && self.starts_index(2) => {
                    TaskExpr::Append(Box::new(te), self.car_expr()?)
                }
                Tok::CarRes(_) | Tok::CarVar(..) => {
                    TaskExpr::Append(Box::new(te), self.car_expr()?)
                }
                Tok::Ident(s) if s == "null" => {
                    self.bump();
                    TaskExpr::Append(Box::new(te), CarExpr::Null)
                }
                Tok::Task(_) | Tok::LParen => {
                    TaskExpr::Concat(Box::new(te), Box::new(self.task_primary()?))
                }
                Tok::Ident(s) if s == "fin" => {
                    TaskExpr::Concat(Box::new(te), Box::new(self.task_primary()?))
                }
                _ => return self.unexpected("a car or task expression"),
            };
        }
        Ok(te)
    }

    fn length(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Task(_) if *self.peek_at(1) == Tok::Dot && self.starts_index(2) => {
                Ok(Expr::CarLen(Box::new(self.car_expr()?)))
            }
            Tok::Task(n) => {
                self.bump();
                Ok(Expr::TaskLen(Box::new(TaskExpr::Var(TaskVar(n)))))
            }
            Tok::CarRes(_) | Tok::CarVar(..) => Ok(Expr::CarLen(Box::new(self.car_expr()?))),
            Tok::Ident(s) if s == "null" => {
                self.bump();
                Ok(Expr::CarLen(Box::new(CarExpr::Null)))
            }
            Tok::Ident(s) if s == "fin" => {
                self.bump();
                Ok(Expr::TaskLen(Box::new(TaskExpr::Fin)))
            }
            Tok::LParen => {
                self.bump();
                let te = self.task_expr()?;
                self.expect(Tok::RParen)?;
                Ok(Expr::TaskLen(Box::new(te)))
            }
            _ => self.unexpected("a car or task after `#`"),
        }
    }

    fn expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> PResult<Expr> {
        let mut lhs = self.factor()?;
        while *self.peek() == Tok::Star {
            self.bump();
            lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Num(n) => {
                self.bump();
                Ok(Expr::Num(n))
            }
            Tok::Ident(s) if !is_keyword(&s) => {
                self.bump();
                Ok(Expr::Var(s))
            }
            Tok::Hash => {
                self.bump();
                self.length()
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            _ => self.unexpected("an expression"),
        }
    }

    fn bexpr(&mut self) -> PResult<BoolExpr> {
        let mut lhs = self.bconj()?;
        while self.is_kw("or") {
            self.bump();
            lhs = BoolExpr::Or(Box::new(lhs), Box::new(self.bconj()?));
        }
        Ok(lhs)
    }

    fn bconj(&mut self) -> PResult<BoolExpr> {
        let mut lhs = self.bunary()?;
        while self.is_kw("and") {
            self.bump();
            lhs = BoolExpr::And(Box::new(lhs), Box::new(self.bunary()?));
        }
        Ok(lhs)
    }

    fn bunary(&mut self) -> PResult<BoolExpr> {
        if self.is_kw("not") {
            self.bump();
            return Ok(BoolExpr::Not(Box::new(self.bunary()?)));
        }
        if self.is_kw("true") {
            self.bump();
            return Ok(BoolExpr::True);
        }
        if self.is_kw("false") {
            self.bump();
            return Ok(BoolExpr::False);
        }
        // A parenthesis may open either a boolean group or an arithmetic
        // operand; try the boolean reading first and backtrack.
        if *self.peek() == Tok::LParen {
            let save = self.pos;
            self.bump();
            if let Ok(b) = self.bexpr() {
                if *self.peek() == Tok::RParen {
                    self.bump();
                    return Ok(b);
                }
            }
            self.pos = save;
        }
        let lhs = self.expr()?;
        match self.peek() {
            Tok::Eq => {
                self.bump();
                Ok(BoolExpr::Eq(lhs, self.expr()?))
            }
            Tok::Le => {
                self.bump();
                Ok(BoolExpr::Le(lhs, self.expr()?))
            }
            _ => self.unexpected("`=` or `<=`"),
        }
    }
}

/// Parses a program file into its top-level statements.
pub fn parse_program(src: &str) -> Result<Program, ParseError> {
    let mut p = Parser {
        toks: lex(src)?,
        pos: 0,
    };
    let stmts = p.statements(&Tok::Eof)?;
    Ok(Program { stmts })
}

/// Parses a command sequence, discarding line information.
pub fn parse_command(src: &str) -> Result<Command, ParseError> {
    Ok(parse_program(src)?.to_command())
}

pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    let mut p = Parser {
        toks: lex(src)?,
        pos: 0,
    };
    let e = p.expr()?;
    p.expect(Tok::Eof)?;
    Ok(e)
}

pub fn parse_bexpr(src: &str) -> Result<BoolExpr, ParseError> {
    let mut p = Parser {
        toks: lex(src)?,
        pos: 0,
    };
    let e = p.bexpr()?;
    p.expect(Tok::Eof)?;
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexes_variables_by_shape() {
        let toks: Vec<Tok> = lex("t8 c1@0 cc3 loc11 n1 c2 #t0 # note")
            .unwrap()
            .into_iter()
            .map(|t| t.tok)
            .collect();
        assert_eq!(
            toks,
            vec![
                Tok::Task(8),
                Tok::CarVar(1, 0),
                Tok::CarRes(3),
                Tok::Loc(11),
                Tok::Ident("n1".into()),
                Tok::Ident("c2".into()),
                Tok::Hash,
                Tok::Task(0),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn parses_resource_commands() {
        let p = parse_program(
            "plan c1@0 [5, 3 @ loc11];\nasgn t0 (c1@0);\nexec1 t0.0;\nfree t0.0;\ncomp t0;",
        )
        .unwrap();
        assert_eq!(p.len(), 5);
        assert_eq!(p.stmts[1].line, 2);
        assert_eq!(
            p.stmts[0].command,
            Command::Plan(
                CarVar::new(1, 0),
                vec![
                    PlanItem {
                        duration: Expr::Num(5),
                        at: None
                    },
                    PlanItem::pinned(3, LocId(11))
                ]
            )
        );
        assert_eq!(
            p.stmts[1].command,
            Command::Asgn(TaskVar(0), vec![CarExpr::Var(CarVar::new(1, 0))])
        );
    }

    #[test]
    fn length_of_indexed_car_and_task() {
        assert_eq!(
            parse_expr("#t8.0").unwrap(),
            Expr::CarLen(Box::new(CarExpr::Index(TaskVar(8), Box::new(Expr::Num(0)))))
        );
        assert_eq!(
            parse_expr("#t8").unwrap(),
            Expr::TaskLen(Box::new(TaskExpr::Var(TaskVar(8))))
        );
    }

    #[test]
    fn locate_and_control_flow() {
        let c = parse_command("x := {c1@0.2}; while 1 <= #t8 do { exec1 t8.0; };").unwrap();
        let items = c.flatten();
        assert!(matches!(items[0], Command::Locate(..)));
        assert!(matches!(items[1], Command::While(..)));
    }

    #[test]
    fn reports_positions() {
        let e = parse_program("skip;\nplan c1@0 [5 @ x];").unwrap_err();
        assert_eq!((e.line, e.column), (2, 16));
        let e = parse_program("frob t0;").unwrap_err();
        assert!(e.message.contains("unknown command"), "{e}");
        let e = parse_program("skip").unwrap_err();
        assert!(e.message.contains("`;`"), "{e}");
    }

    #[test]
    fn boolean_grouping_backtracks() {
        let b = parse_bexpr("(1 + 2) <= 3 and not (x = 1 or true)").unwrap();
        assert!(matches!(b, BoolExpr::And(..)));
    }
}
