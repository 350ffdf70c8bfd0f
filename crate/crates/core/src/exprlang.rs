//! Nonlinearities `f(t, u, v)` as small arithmetic expressions.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//!   expr    := term (('+' | '-') term)*
//!   term    := unary (('*' | '/') unary)*
//!   unary   := '-' unary | power
//!   power   := primary ('^' unary)?          right-associative
//!   primary := number | 't' | 'u' | 'v' | func '(' expr (',' expr)* ')' | '(' expr ')'
//!   func    := abs | sqrt | exp | log | sin | cos | min | max
//! ```
//!
//! `-2^2` is `-4`, `2^3^2` is `512` and `2^-1` is `0.5`.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::certify::Box3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("`{func}` at byte {offset} takes {expected} argument(s), got {found}")]
    Arity {
        offset: usize,
        func: &'static str,
        expected: usize,
        found: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("{0} argument outside its domain")]
    Domain(&'static str),
    #[error("result is not finite")]
    Overflow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    T,
    U,
    V,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Abs,
    Sqrt,
    Exp,
    Log,
    Sin,
    Cos,
    Min,
    Max,
}

impl Func {
    fn lookup(name: &str) -> Option<Self> {
        Some(match name {
            "abs" => Self::Abs,
            "sqrt" => Self::Sqrt,
            "exp" => Self::Exp,
            "log" => Self::Log,
            "sin" => Self::Sin,
            "cos" => Self::Cos,
            "min" => Self::Min,
            "max" => Self::Max,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Abs => "abs",
            Self::Sqrt => "sqrt",
            Self::Exp => "exp",
            Self::Log => "log",
            Self::Sin => "sin",
            Self::Cos => "cos",
            Self::Min => "min",
            Self::Max => "max",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Self::Min | Self::Max => 2,
            _ => 1,
        }
    }
}

/// Parsed expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl Expr {
    pub fn eval(&self, t: f64, u: f64, v: f64) -> Result<f64, EvalError> {
        let x = match self {
            Expr::Num(x) => *x,
            Expr::Var(Var::T) => t,
            Expr::Var(Var::U) => u,
            Expr::Var(Var::V) => v,
            Expr::Neg(e) => -e.eval(t, u, v)?,
            Expr::Bin(op, a, b) => {
                let a = a.eval(t, u, v)?;
                let b = b.eval(t, u, v)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(EvalError::DivisionByZero);
                        }
                        a / b
                    }
                    BinOp::Pow => power(a, b)?,
                }
            }
            Expr::Call(func, args) => {
                let a = args[0].eval(t, u, v)?;
                match func {
                    Func::Abs => a.abs(),
                    Func::Sqrt if a < 0.0 => return Err(EvalError::Domain("sqrt")),
                    Func::Sqrt => a.sqrt(),
                    Func::Exp => a.exp(),
                    Func::Log if a <= 0.0 => return Err(EvalError::Domain("log")),
                    Func::Log => a.ln(),
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Min => a.min(args[1].eval(t, u, v)?),
                    Func::Max => a.max(args[1].eval(t, u, v)?),
                }
            }
        };
        if x.is_finite() {
            Ok(x)
        } else {
            Err(EvalError::Overflow)
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Var(_) => 1,
            Expr::Neg(e) => 1 + e.size(),
            Expr::Bin(_, a, b) => 1 + a.size() + b.size(),
            Expr::Call(_, args) => 1 + args.iter().map(Expr::size).sum::<usize>(),
        }
    }
}

fn power(base: f64, exp: f64) -> Result<f64, EvalError> {
    if base < 0.0 && exp.fract() != 0.0 {
        return Err(EvalError::Domain("power"));
    }
    if base == 0.0 && exp < 0.0 {
        return Err(EvalError::DivisionByZero);
    }
    Ok(base.powf(exp))
}

impl fmt::Display for Expr {
    /// Fully parenthesized form; reparses to an identical tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(x) => write!(f, "{x:?}"),
            Expr::Var(Var::T) => f.write_str("t"),
            Expr::Var(Var::U) => f.write_str("u"),
            Expr::Var(Var::V) => f.write_str("v"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Bin(op, a, b) => {
                let op = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                write!(f, "({a} {op} {b})")
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_expr(s)
    }
}

impl Serialize for Expr {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
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
    Caret,
    LParen,
    RParen,
    Comma,
    End,
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let tok = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b',' => Tok::Comma,
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &src[start..i];
                let value = text.parse::<f64>().map_err(|_| ParseError::Syntax {
                    offset: start,
                    message: format!("malformed number `{text}`"),
                })?;
                out.push((Tok::Num(value), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_string()), start));
                continue;
            }
            _ => {
                let ch = src[start..].chars().next().unwrap_or('?');
                return Err(ParseError::Syntax {
                    offset: start,
                    message: format!("unexpected character `{ch}`"),
                });
            }
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn syntax<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            offset: self.offset(),
            message: message.into(),
        })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.syntax(format!("expected {what}"))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let (tok, offset) = self.bump();
        match tok {
            Tok::Num(x) => Ok(Expr::Num(x)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => match name.as_str() {
                "t" => Ok(Expr::Var(Var::T)),
                "u" => Ok(Expr::Var(Var::U)),
                "v" => Ok(Expr::Var(Var::V)),
                _ => {
                    let Some(func) = Func::lookup(&name) else {
                        return Err(ParseError::UnknownIdentifier { offset, name });
                    };
                    self.expect(Tok::LParen, &format!("`(` after `{name}`"))?;
                    let mut args = vec![self.expr()?];
                    while *self.peek() == Tok::Comma {
                        self.bump();
                        args.push(self.expr()?);
                    }
                    self.expect(Tok::RParen, "`)` or `,`")?;
                    if args.len() != func.arity() {
                        return Err(ParseError::Arity {
                            offset,
                            func: func.name(),
                            expected: func.arity(),
                            found: args.len(),
                        });
                    }
                    Ok(Expr::Call(func, args))
                }
            },
            Tok::End => Err(ParseError::Syntax {
                offset,
                message: "unexpected end of input".into(),
            }),
            other => Err(ParseError::Syntax {
                offset,
                message: format!("unexpected token {other:?}"),
            }),
        }
    }
}

/// Parses `text` into an [`Expr`].
pub fn parse_expr(text: &str) -> Result<Expr, ParseError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
    };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return p.syntax("trailing input");
    }
    Ok(e)
}

/// Outcome of a sampled nonnegativity check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NonnegReport {
    pub min: f64,
    pub location: (f64, f64, f64),
    pub samples: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("{error} at (t, u, v) = ({}, {}, {})", .at.0, .at.1, .at.2)]
pub struct LocatedEvalError {
    pub error: EvalError,
    pub at: (f64, f64, f64),
}

/// Scans `n` points per axis of `bx` and reports the smallest value of `e`.
pub fn check_nonnegative_sampled(e: &Expr, bx: &Box3, n: usize) -> Result<NonnegReport, LocatedEvalError> {
    assert!(n >= 2, "need at least two samples per axis");
    let mut min = f64::INFINITY;
    let mut location = (0.0, 0.0, 0.0);
    let mut samples = 0;
    for (t, u, v) in bx.grid(n) {
        let y = e
            .eval(t, u, v)
            .map_err(|error| LocatedEvalError { error, at: (t, u, v) })?;
        samples += 1;
        if y < min {
            min = y;
            location = (t, u, v);
        }
    }
    Ok(NonnegReport {
        min,
        location,
        samples,
        passed: min >= 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(src: &str, t: f64, u: f64, v: f64) -> Result<f64, EvalError> {
        parse_expr(src).unwrap().eval(t, u, v)
    }

    #[test]
    fn spec_examples() {
        assert_eq!(ev("t + u*v", 1.0, 2.0, 3.0), Ok(7.0));
        assert_eq!(ev("2+3*4", 0.0, 0.0, 0.0), Ok(14.0));
        assert_eq!(ev("exp(0)+abs(0-2)^2", 0.0, 0.0, 0.0), Ok(5.0));
        assert_eq!(ev("u^2+v^2", 0.0, 3.0, 4.0), Ok(25.0));
        assert_eq!(ev("1/u", 0.0, 0.0, 1.0), Err(EvalError::DivisionByZero));
        assert_eq!(ev("min(t, max(u, v))", 0.5, -1.0, 0.2), Ok(0.2));
    }

    #[test]
    fn whitespace_insensitive() {
        assert_eq!(parse_expr(" t\t+\nu * v ").unwrap(), parse_expr("t+u*v").unwrap());
    }

    #[test]
    fn error_positions() {
        assert_eq!(
            parse_expr("u + * v"),
            Err(ParseError::Syntax {
                offset: 4,
                message: "unexpected token Star".into()
            })
        );
        assert_eq!(
            parse_expr("u + w"),
            Err(ParseError::UnknownIdentifier {
                offset: 4,
                name: "w".into()
            })
        );
        assert!(matches!(
            parse_expr("min(u)"),
            Err(ParseError::Arity {
                offset: 0,
                func: "min",
                expected: 2,
                found: 1
            })
        ));
        assert!(matches!(
            parse_expr("(u + v"),
            Err(ParseError::Syntax { offset: 6, .. })
        ));
        assert!(matches!(parse_expr("u v"), Err(ParseError::Syntax { offset: 2, .. })));
        assert!(matches!(parse_expr("u # v"), Err(ParseError::Syntax { offset: 2, .. })));
        assert!(matches!(parse_expr(""), Err(ParseError::Syntax { offset: 0, .. })));
    }

    #[test]
    fn unknown_identifiers_error() {
        for name in ["a", "x", "pi", "tt", "uv", "sinh"] {
            assert!(
                matches!(parse_expr(name), Err(ParseError::UnknownIdentifier { .. })),
                "{name}"
            );
        }
    }

    #[test]
    fn domain_errors() {
        assert_eq!(ev("sqrt(u)", 0.0, -1.0, 0.0), Err(EvalError::Domain("sqrt")));
        assert_eq!(ev("log(u)", 0.0, 0.0, 0.0), Err(EvalError::Domain("log")));
        assert_eq!(ev("u^0.5", 0.0, -4.0, 0.0), Err(EvalError::Domain("power")));
        assert_eq!(ev("u^3", 0.0, -2.0, 0.0), Ok(-8.0));
        assert_eq!(ev("u^-1", 0.0, 0.0, 0.0), Err(EvalError::DivisionByZero));
        assert_eq!(ev("exp(u)", 0.0, 1000.0, 0.0), Err(EvalError::Overflow));
    }

    #[test]
    fn nonnegative_sampling() {
        let unit = Box3::new((0.0, 1.0), (0.0, 1.0), (0.0, 1.0)).unwrap();
        let r = check_nonnegative_sampled(&parse_expr("u^2").unwrap(), &unit, 5).unwrap();
        assert_eq!((r.min, r.passed, r.samples), (0.0, true, 125));

        let sym = Box3::new((-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0)).unwrap();
        let r = check_nonnegative_sampled(&parse_expr("u").unwrap(), &sym, 5).unwrap();
        assert_eq!((r.min, r.passed), (-1.0, false));
        assert_eq!(r.location.1, -1.0);

        let wide = Box3::new((-2.0, 2.0), (-2.0, 2.0), (-2.0, 2.0)).unwrap();
        let r = check_nonnegative_sampled(&parse_expr("abs(u)+abs(v)").unwrap(), &wide, 9).unwrap();
        assert_eq!((r.min, r.passed), (0.0, true));

        let err = check_nonnegative_sampled(&parse_expr("log(u)").unwrap(), &unit, 3).unwrap_err();
        assert_eq!(err.error, EvalError::Domain("log"));
        assert_eq!(err.at.1, 0.0);
    }

    fn leaf() -> impl Strategy<Value = Expr> {
        prop_oneof![
            (0.0f64..1e3).prop_map(Expr::Num),
            Just(Expr::Var(Var::T)),
            Just(Expr::Var(Var::U)),
            Just(Expr::Var(Var::V)),
        ]
    }

    fn tree() -> impl Strategy<Value = Expr> {
        leaf().prop_recursive(5, 48, 2, |inner| {
            let ops = prop_oneof![
                Just(BinOp::Add),
                Just(BinOp::Sub),
                Just(BinOp::Mul),
                Just(BinOp::Div),
                Just(BinOp::Pow)
            ];
            let funcs = prop_oneof![
                Just(Func::Abs),
                Just(Func::Sqrt),
                Just(Func::Exp),
                Just(Func::Log),
                Just(Func::Sin),
                Just(Func::Cos)
            ];
            prop_oneof![
                inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                (ops, inner.clone(), inner.clone()).prop_map(|(op, a, b)| Expr::Bin(op, Box::new(a), Box::new(b))),
                (funcs, inner.clone()).prop_map(|(f, a)| Expr::Call(f, vec![a])),
                (prop_oneof![Just(Func::Min), Just(Func::Max)], inner.clone(), inner)
                    .prop_map(|(f, a, b)| Expr::Call(f, vec![a, b])),
            ]
        })
    }

    proptest! {
        #[test]
        fn display_round_trips(e in tree()) {
            let text = e.to_string();
            prop_assert_eq!(parse_expr(&text).unwrap(), e);
        }

        #[test]
        fn evaluation_is_deterministic(e in tree(), t in 0.0f64..1.0, u in -5.0f64..5.0, v in -5.0f64..5.0) {
            let a = e.eval(t, u, v);
            let b = e.eval(t, u, v);
            match (a, b) {
                (Ok(x), Ok(y)) => prop_assert_eq!(x.to_bits(), y.to_bits()),
                (x, y) => prop_assert_eq!(x, y),
            }
        }
    }
}
