//! Closed-form coefficient expressions.
//!
//! Operator coefficients are given as expressions in a small grammar so that
//! configurations stay serializable and every evaluation is exactly
//! reproducible:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | primary
//! primary := NUMBER | 'pi' | VAR | FUNC '(' expr (',' expr)* ')' | '(' expr ')'
//! VAR     := x1, x2, ... | y1, y2, ... | a1, a2, ... | b1, b2, ...
//! FUNC    := sin | cos | exp | abs | min | max
//! ```
//!
//! `x*` are slow/state components, `y*` fast-variable components, `a*`/`b*`
//! components of the two control points. `min`/`max` take two or more
//! arguments. Numbers are ordinary decimal literals (`1`, `0.25`, `1e-3`).
//! Parse errors carry 1-based line/column positions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Variable families available to coefficient expressions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Var {
    /// State (slow) component, 0-based.
    X(usize),
    /// Fast component, 0-based.
    Y(usize),
    /// First-player control component, 0-based.
    A(usize),
    /// Second-player control component, 0-based.
    B(usize),
}

/// Parsed expression tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Num(f64),
    Pi,
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
    Abs(Box<Expr>),
    Min(Vec<Expr>),
    Max(Vec<Expr>),
}

/// Evaluation context: slices for each variable family.
#[derive(Debug, Clone, Copy, Default)]
pub struct EvalCtx<'a> {
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub a: &'a [f64],
    pub b: &'a [f64],
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        Parser::new(src).parse()
    }

    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn add(self, rhs: Expr) -> Expr {
        Expr::Add(Box::new(self), Box::new(rhs))
    }

    pub fn sub(self, rhs: Expr) -> Expr {
        Expr::Sub(Box::new(self), Box::new(rhs))
    }

    pub fn mul(self, rhs: Expr) -> Expr {
        Expr::Mul(Box::new(self), Box::new(rhs))
    }

    pub fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }

    pub fn eval(&self, ctx: &EvalCtx) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Pi => std::f64::consts::PI,
            Expr::Var(Var::X(i)) => ctx.x[*i],
            Expr::Var(Var::Y(i)) => ctx.y[*i],
            Expr::Var(Var::A(i)) => ctx.a[*i],
            Expr::Var(Var::B(i)) => ctx.b[*i],
            Expr::Neg(e) => -e.eval(ctx),
            Expr::Add(l, r) => l.eval(ctx) + r.eval(ctx),
            Expr::Sub(l, r) => l.eval(ctx) - r.eval(ctx),
            Expr::Mul(l, r) => l.eval(ctx) * r.eval(ctx),
            Expr::Div(l, r) => l.eval(ctx) / r.eval(ctx),
            Expr::Sin(e) => e.eval(ctx).sin(),
            Expr::Cos(e) => e.eval(ctx).cos(),
            Expr::Exp(e) => e.eval(ctx).exp(),
            Expr::Abs(e) => e.eval(ctx).abs(),
            Expr::Min(es) => es.iter().map(|e| e.eval(ctx)).fold(f64::INFINITY, f64::min),
            Expr::Max(es) => es
                .iter()
                .map(|e| e.eval(ctx))
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Largest 1-based index used per variable family `(x, y, a, b)`.
    pub fn var_extents(&self) -> (usize, usize, usize, usize) {
        let mut ext = (0, 0, 0, 0);
        self.visit_vars(&mut |v| match v {
            Var::X(i) => ext.0 = ext.0.max(i + 1),
            Var::Y(i) => ext.1 = ext.1.max(i + 1),
            Var::A(i) => ext.2 = ext.2.max(i + 1),
            Var::B(i) => ext.3 = ext.3.max(i + 1),
        });
        ext
    }

    fn visit_vars(&self, f: &mut impl FnMut(Var)) {
        match self {
            Expr::Num(_) | Expr::Pi => {}
            Expr::Var(v) => f(*v),
            Expr::Neg(e) | Expr::Sin(e) | Expr::Cos(e) | Expr::Exp(e) | Expr::Abs(e) => {
                e.visit_vars(f)
            }
            Expr::Add(l, r) | Expr::Sub(l, r) | Expr::Mul(l, r) | Expr::Div(l, r) => {
                l.visit_vars(f);
                r.visit_vars(f);
            }
            Expr::Min(es) | Expr::Max(es) => es.iter().for_each(|e| e.visit_vars(f)),
        }
    }

    /// Replaces every `x`-variable by a literal. Used to freeze the slow
    /// point when building cell problems.
    pub fn substitute_x(&self, values: &[f64]) -> Expr {
        self.map(&|e| match e {
            Expr::Var(Var::X(i)) => Some(Expr::Num(values[*i])),
            _ => None,
        })
    }

    /// Renames `y`-variables to `x`-variables (fast variable becomes the
    /// state of a cell operator).
    pub fn rename_y_to_x(&self) -> Expr {
        self.map(&|e| match e {
            Expr::Var(Var::Y(i)) => Some(Expr::Var(Var::X(*i))),
            _ => None,
        })
    }

    fn map(&self, f: &dyn Fn(&Expr) -> Option<Expr>) -> Expr {
        if let Some(replaced) = f(self) {
            return replaced;
        }
        match self {
            Expr::Num(_) | Expr::Pi | Expr::Var(_) => self.clone(),
            Expr::Neg(e) => Expr::Neg(Box::new(e.map(f))),
            Expr::Sin(e) => Expr::Sin(Box::new(e.map(f))),
            Expr::Cos(e) => Expr::Cos(Box::new(e.map(f))),
            Expr::Exp(e) => Expr::Exp(Box::new(e.map(f))),
            Expr::Abs(e) => Expr::Abs(Box::new(e.map(f))),
            Expr::Add(l, r) => Expr::Add(Box::new(l.map(f)), Box::new(r.map(f))),
            Expr::Sub(l, r) => Expr::Sub(Box::new(l.map(f)), Box::new(r.map(f))),
            Expr::Mul(l, r) => Expr::Mul(Box::new(l.map(f)), Box::new(r.map(f))),
            Expr::Div(l, r) => Expr::Div(Box::new(l.map(f)), Box::new(r.map(f))),
            Expr::Min(es) => Expr::Min(es.iter().map(|e| e.map(f)).collect()),
            Expr::Max(es) => Expr::Max(es.iter().map(|e| e.map(f)).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
    Comma,
    Eof,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            column: self.col,
            message: msg.into(),
        }
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.src.get(self.pos).copied()?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn next_tok(&mut self) -> Result<(Tok, usize, usize)> {
        while matches!(self.peek(), Some(c) if c.is_ascii_whitespace()) {
            self.bump();
        }
        let (line, col) = (self.line, self.col);
        let Some(c) = self.peek() else {
            return Ok((Tok::Eof, line, col));
        };
        let tok = match c {
            b'+' => {
                self.bump();
                Tok::Plus
            }
            b'-' => {
                self.bump();
                Tok::Minus
            }
            b'*' => {
                self.bump();
                Tok::Star
            }
            b'/' => {
                self.bump();
                Tok::Slash
            }
            b'(' => {
                self.bump();
                Tok::LParen
            }
            b')' => {
                self.bump();
                Tok::RParen
            }
            b',' => {
                self.bump();
                Tok::Comma
            }
            b'0'..=b'9' | b'.' => {
                let start = self.pos;
                while matches!(self.peek(), Some(c) if c.is_ascii_digit() || c == b'.') {
                    self.bump();
                }
                if matches!(self.peek(), Some(b'e') | Some(b'E')) {
                    let mark = self.pos;
                    self.bump();
                    if matches!(self.peek(), Some(b'+') | Some(b'-')) {
                        self.bump();
                    }
                    if matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                            self.bump();
                        }
                    } else {
                        // not an exponent after all (e.g. "2*exp(x1)")
                        self.pos = mark;
                    }
                }
                let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                let v: f64 = text
                    .parse()
                    .map_err(|_| self.err(format!("invalid number literal `{text}`")))?;
                Tok::Num(v)
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
                    self.bump();
                }
                Tok::Ident(std::str::from_utf8(&self.src[start..self.pos]).unwrap().to_string())
            }
            other => {
                return Err(self.err(format!("unexpected character `{}`", other as char)));
            }
        };
        Ok((tok, line, col))
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    line: usize,
    col: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser {
            lexer: Lexer::new(src),
            tok: Tok::Eof,
            line: 1,
            col: 1,
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            column: self.col,
            message: msg.into(),
        }
    }

    fn advance(&mut self) -> Result<()> {
        let (tok, line, col) = self.lexer.next_tok()?;
        self.tok = tok;
        self.line = line;
        self.col = col;
        Ok(())
    }

    fn parse(mut self) -> Result<Expr> {
        self.advance()?;
        let e = self.expr()?;
        if self.tok != Tok::Eof {
            return Err(self.err(format!("unexpected trailing token {:?}", self.tok)));
        }
        Ok(e)
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.tok {
                Tok::Plus => {
                    self.advance()?;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.advance()?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.tok {
                Tok::Star => {
                    self.advance()?;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Slash => {
                    self.advance()?;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.tok == Tok::Minus {
            self.advance()?;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr> {
        match self.tok.clone() {
            Tok::Num(v) => {
                self.advance()?;
                Ok(Expr::Num(v))
            }
            Tok::LParen => {
                self.advance()?;
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.advance()?;
                match name.as_str() {
                    "pi" => Ok(Expr::Pi),
                    "sin" | "cos" | "exp" | "abs" => {
                        let args = self.call_args()?;
                        if args.len() != 1 {
                            return Err(
                                self.err(format!("`{name}` takes exactly one argument"))
                            );
                        }
                        let arg = Box::new(args.into_iter().next().unwrap());
                        Ok(match name.as_str() {
                            "sin" => Expr::Sin(arg),
                            "cos" => Expr::Cos(arg),
                            "exp" => Expr::Exp(arg),
                            _ => Expr::Abs(arg),
                        })
                    }
                    "min" | "max" => {
                        let args = self.call_args()?;
                        if args.len() < 2 {
                            return Err(
                                self.err(format!("`{name}` takes at least two arguments"))
                            );
                        }
                        Ok(if name == "min" {
                            Expr::Min(args)
                        } else {
                            Expr::Max(args)
                        })
                    }
                    _ => self.variable(&name),
                }
            }
            other => Err(self.err(format!("expected expression, found {other:?}"))),
        }
    }

    fn variable(&self, name: &str) -> Result<Expr> {
        let (family, digits) = name.split_at(1);
        let index: usize = digits
            .parse()
            .ok()
            .filter(|i| *i >= 1)
            .ok_or_else(|| self.err(format!("unknown identifier `{name}`")))?;
        let var = match family {
            "x" => Var::X(index - 1),
            "y" => Var::Y(index - 1),
            "a" => Var::A(index - 1),
            "b" => Var::B(index - 1),
            _ => return Err(self.err(format!("unknown identifier `{name}`"))),
        };
        Ok(Expr::Var(var))
    }

    fn call_args(&mut self) -> Result<Vec<Expr>> {
        if self.tok != Tok::LParen {
            return Err(self.err("expected `(`"));
        }
        self.advance()?;
        let mut args = vec![self.expr()?];
        while self.tok == Tok::Comma {
            self.advance()?;
            args.push(self.expr()?);
        }
        self.expect_rparen()?;
        Ok(args)
    }

    fn expect_rparen(&mut self) -> Result<()> {
        if self.tok != Tok::RParen {
            return Err(self.err("expected `)`"));
        }
        self.advance()
    }
}
