//! Arithmetic expressions for potentials and data functions.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?          right associative
//! atom  := number | 'pi' | var | func '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Variables are `x1`, `x2`, `t`, and `y1`, `y2` (the fast variable of
//! boundary data). Functions: `sin cos exp sqrt abs` (one argument), `min max`
//! (two), `smoothstep(e0, e1, x)` (three).

use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Var {
    X1,
    X2,
    T,
    Y1,
    Y2,
}

impl Var {
    fn name(self) -> &'static str {
        match self {
            Var::X1 => "x1",
            Var::X2 => "x2",
            Var::T => "t",
            Var::Y1 => "y1",
            Var::Y2 => "y2",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Abs,
    Min,
    Max,
    Smoothstep,
}

impl Func {
    fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "min" => Func::Min,
            "max" => Func::Max,
            "smoothstep" => Func::Smoothstep,
            _ => return None,
        })
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            Func::Smoothstep => 3,
            _ => 1,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
            Func::Smoothstep => "smoothstep",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Pi,
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

/// Standard cubic smoothstep: 0 below `e0`, 1 above `e1`.
pub fn smoothstep(e0: f64, e1: f64, x: f64) -> f64 {
    let s = ((x - e0) / (e1 - e0)).clamp(0.0, 1.0);
    s * s * (3.0 - 2.0 * s)
}

/// Values of the free variables.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Env {
    pub x1: f64,
    pub x2: f64,
    pub t: f64,
    pub y1: f64,
    pub y2: f64,
}

impl Env {
    pub fn xy(x: [f64; 2]) -> Self {
        Env { x1: x[0], x2: x[1], ..Default::default() }
    }

    fn get(&self, v: Var) -> f64 {
        match v {
            Var::X1 => self.x1,
            Var::X2 => self.x2,
            Var::T => self.t,
            Var::Y1 => self.y1,
            Var::Y2 => self.y2,
        }
    }
}

impl Expr {
    pub fn eval(&self, env: &Env) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Pi => std::f64::consts::PI,
            Expr::Var(v) => env.get(*v),
            Expr::Neg(e) => -e.eval(env),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(env), b.eval(env));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => pow(a, b),
                }
            }
            Expr::Call(f, args) => {
                let a = |i: usize| args[i].eval(env);
                match f {
                    Func::Sin => a(0).sin(),
                    Func::Cos => a(0).cos(),
                    Func::Exp => a(0).exp(),
                    Func::Sqrt => a(0).sqrt(),
                    Func::Abs => a(0).abs(),
                    Func::Min => a(0).min(a(1)),
                    Func::Max => a(0).max(a(1)),
                    Func::Smoothstep => smoothstep(a(0), a(1), a(2)),
                }
            }
        }
    }

    /// True when the expression mentions `v`.
    pub fn uses(&self, v: Var) -> bool {
        match self {
            Expr::Var(w) => *w == v,
            Expr::Num(_) | Expr::Pi => false,
            Expr::Neg(e) => e.uses(v),
            Expr::Bin(_, a, b) => a.uses(v) || b.uses(v),
            Expr::Call(_, args) => args.iter().any(|a| a.uses(v)),
        }
    }

    /// Fully parenthesized text that parses back to the same tree.
    pub fn unparse(&self) -> String {
        self.to_string()
    }

    /// Conservative range of the expression over a box of variable values.
    /// Fails when a division by an interval containing zero, an even root of
    /// a negative number, or a similar partial operation is possible.
    pub fn screen(&self, domain: &Domain) -> Result<Interval> {
        self.interval(domain)
    }

    fn interval(&self, d: &Domain) -> Result<Interval> {
        let fail = |m: String| Err(Error::Expression { offset: 0, message: m });
        Ok(match self {
            Expr::Num(v) => Interval::point(*v),
            Expr::Pi => Interval::point(std::f64::consts::PI),
            Expr::Var(v) => d.get(*v),
            Expr::Neg(e) => {
                let i = e.interval(d)?;
                Interval::new(-i.hi, -i.lo)
            }
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.interval(d)?, b.interval(d)?);
                match op {
                    BinOp::Add => Interval::new(a.lo + b.lo, a.hi + b.hi),
                    BinOp::Sub => Interval::new(a.lo - b.hi, a.hi - b.lo),
                    BinOp::Mul => Interval::hull(&[a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi]),
                    BinOp::Div => {
                        if b.lo <= 0.0 && b.hi >= 0.0 {
                            return fail(format!("possible division by zero: divisor ranges over [{}, {}]", b.lo, b.hi));
                        }
                        Interval::hull(&[a.lo / b.lo, a.lo / b.hi, a.hi / b.lo, a.hi / b.hi])
                    }
                    BinOp::Pow => pow_interval(a, b)?,
                }
            }
            Expr::Call(f, args) => {
                let i = args.iter().map(|a| a.interval(d)).collect::<Result<Vec<_>>>()?;
                match f {
                    Func::Sin | Func::Cos => trig_interval(*f, i[0]),
                    Func::Exp => Interval::new(i[0].lo.exp(), i[0].hi.exp()),
                    Func::Sqrt => {
                        if i[0].lo < 0.0 {
                            return fail(format!("square root of a possibly negative value [{}, {}]", i[0].lo, i[0].hi));
                        }
                        Interval::new(i[0].lo.sqrt(), i[0].hi.sqrt())
                    }
                    Func::Abs => {
                        let a = i[0];
                        if a.lo >= 0.0 {
                            a
                        } else if a.hi <= 0.0 {
                            Interval::new(-a.hi, -a.lo)
                        } else {
                            Interval::new(0.0, a.hi.max(-a.lo))
                        }
                    }
                    Func::Min => Interval::new(i[0].lo.min(i[1].lo), i[0].hi.min(i[1].hi)),
                    Func::Max => Interval::new(i[0].lo.max(i[1].lo), i[0].hi.max(i[1].hi)),
                    Func::Smoothstep => {
                        let (e0, e1) = (i[0], i[1]);
                        if e0.hi >= e1.lo && e1.hi >= e0.lo {
                            return fail("smoothstep edges may coincide".into());
                        }
                        Interval::new(0.0, 1.0)
                    }
                }
            }
        })
    }
}

fn pow(a: f64, b: f64) -> f64 {
    if b.fract() == 0.0 && b.abs() <= 64.0 {
        a.powi(b as i32)
    } else {
        a.powf(b)
    }
}

fn pow_interval(a: Interval, b: Interval) -> Result<Interval> {
    if b.lo == b.hi && b.lo.fract() == 0.0 {
        let n = b.lo;
        if n < 0.0 && a.lo <= 0.0 && a.hi >= 0.0 {
            return Err(Error::Expression {
                offset: 0,
                message: "negative power of a value that may vanish".into(),
            });
        }
        let ends = [pow(a.lo, n), pow(a.hi, n)];
        let mut r = Interval::hull(&ends);
        if n > 0.0 && (n as i64) % 2 == 0 && a.lo < 0.0 && a.hi > 0.0 {
            r.lo = 0.0;
        }
        return Ok(r);
    }
    if a.lo < 0.0 || (a.lo == 0.0 && b.lo < 0.0) {
        return Err(Error::Expression {
            offset: 0,
            message: format!("non-integer power of a possibly negative base [{}, {}]", a.lo, a.hi),
        });
    }
    Ok(Interval::hull(&[
        a.lo.powf(b.lo),
        a.lo.powf(b.hi),
        a.hi.powf(b.lo),
        a.hi.powf(b.hi),
    ]))
}

fn trig_interval(f: Func, a: Interval) -> Interval {
    use std::f64::consts::{FRAC_PI_2, PI, TAU};
    if a.hi - a.lo >= TAU {
        return Interval::new(-1.0, 1.0);
    }
    // Shift cosine onto sine.
    let (lo, hi) = match f {
        Func::Cos => (a.lo + FRAC_PI_2, a.hi + FRAC_PI_2),
        _ => (a.lo, a.hi),
    };
    let mut r = Interval::hull(&[lo.sin(), hi.sin()]);
    // Extremes of sin at pi/2 + k*pi.
    let k0 = ((lo - FRAC_PI_2) / PI).ceil() as i64;
    let k1 = ((hi - FRAC_PI_2) / PI).floor() as i64;
    for k in k0..=k1 {
        if k.rem_euclid(2) == 0 {
            r.hi = 1.0;
        } else {
            r.lo = -1.0;
        }
    }
    r
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    fn hull(vals: &[f64]) -> Self {
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Interval { lo, hi }
    }
}

/// Box of variable values used for load-time screening.
#[derive(Clone, Copy, Debug)]
pub struct Domain {
    pub x: Interval,
    pub t: Interval,
    pub y: Interval,
}

impl Domain {
    /// `x` in `[-r, r]^2`, `t` in `[0, horizon]`, `y` in the unit cell.
    pub fn new(r: f64, horizon: f64) -> Self {
        Domain {
            x: Interval::new(-r, r),
            t: Interval::new(0.0, horizon),
            y: Interval::new(-0.5, 1.0),
        }
    }

    fn get(&self, v: Var) -> Interval {
        match v {
            Var::X1 | Var::X2 => self.x,
            Var::T => self.t,
            Var::Y1 | Var::Y2 => self.y,
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Pi => f.write_str("pi"),
            Expr::Var(v) => f.write_str(v.name()),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
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

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == '.' {
            while i < bytes.len() && ((bytes[i] as char).is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && (bytes[j] as char).is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let v: f64 = text.parse().map_err(|_| Error::Expression {
                offset: start,
                message: format!("malformed number '{text}'"),
            })?;
            out.push((Tok::Num(v), start));
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), start));
        } else {
            let tok = match c {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                ',' => Tok::Comma,
                _ => {
                    return Err(Error::Expression {
                        offset: start,
                        message: format!("unexpected character '{c}'"),
                    })
                }
            };
            out.push((tok, start));
            i += 1;
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|(_, o)| *o).unwrap_or(self.len)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Expression { offset: self.offset(), message: message.into() })
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.term()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(c @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.unary()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if let Some(Tok::Op('-')) = self.peek() {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let at = self.offset();
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.expr()?;
                match self.peek() {
                    Some(Tok::RParen) => {
                        self.pos += 1;
                        Ok(e)
                    }
                    _ => Err(Error::Expression {
                        offset: at,
                        message: "unbalanced parentheses: '(' is never closed".into(),
                    }),
                }
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                let var = match name.as_str() {
                    "x1" => Some(Var::X1),
                    "x2" => Some(Var::X2),
                    "t" => Some(Var::T),
                    "y1" => Some(Var::Y1),
                    "y2" => Some(Var::Y2),
                    _ => None,
                };
                if let Some(v) = var {
                    return Ok(Expr::Var(v));
                }
                if name == "pi" {
                    return Ok(Expr::Pi);
                }
                let Some(func) = Func::lookup(&name) else {
                    return Err(Error::Expression { offset: at, message: format!("unknown identifier '{name}'") });
                };
                if self.peek() != Some(&Tok::LParen) {
                    return self.err(format!("'{name}' must be followed by '('"));
                }
                self.pos += 1;
                let mut args = vec![self.expr()?];
                while self.peek() == Some(&Tok::Comma) {
                    self.pos += 1;
                    args.push(self.expr()?);
                }
                match self.peek() {
                    Some(Tok::RParen) => self.pos += 1,
                    None => {
                        return Err(Error::Expression {
                            offset: at,
                            message: format!("unbalanced parentheses in call to '{name}'"),
                        })
                    }
                    _ => return self.err("expected ',' or ')'"),
                }
                if args.len() != func.arity() {
                    return Err(Error::Expression {
                        offset: at,
                        message: format!(
                            "arity mismatch: '{name}' takes {} argument(s), got {}",
                            func.arity(),
                            args.len()
                        ),
                    });
                }
                Ok(Expr::Call(func, args))
            }
            Some(Tok::RParen) => self.err("unbalanced parentheses: unexpected ')'"),
            Some(t) => self.err(format!("unexpected token {t:?}")),
            None => self.err("unexpected end of expression"),
        }
    }
}

pub fn parse_expression(src: &str) -> Result<Expr> {
    if src.trim().is_empty() {
        return Err(Error::Expression { offset: 0, message: "empty expression".into() });
    }
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0, len: src.len() };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return match p.peek() {
            Some(Tok::RParen) => p.err("unbalanced parentheses: unexpected ')'"),
            _ => p.err("trailing input"),
        };
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn at(e: &Expr, x1: f64, x2: f64) -> f64 {
        e.eval(&Env { x1, x2, ..Default::default() })
    }

    #[test]
    fn evaluates_quadratic() {
        let e = parse_expression("x1^2/2 + x2^2/2").unwrap();
        assert_eq!(at(&e, 1.0, 2.0), 2.5);
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(at(&parse_expression("2^3^2").unwrap(), 0.0, 0.0), 512.0);
        assert_eq!(at(&parse_expression("-2^2").unwrap(), 0.0, 0.0), -4.0);
        assert_eq!(at(&parse_expression("1 - 2 - 3").unwrap(), 0.0, 0.0), -4.0);
        assert_eq!(at(&parse_expression("8 / 4 / 2").unwrap(), 0.0, 0.0), 1.0);
        assert_eq!(at(&parse_expression("2 * (3 + 4) ^ 2").unwrap(), 0.0, 0.0), 98.0);
        assert_eq!(at(&parse_expression("2^-1").unwrap(), 0.0, 0.0), 0.5);
    }

    #[test]
    fn bump_profile() {
        // 1 - smoothstep on the radius about (1/2, 1/2).
        let src = "1 - smoothstep(1/8, 1/4, sqrt((x1-1/2)^2+(x2-1/2)^2))";
        let e = parse_expression(src).unwrap();
        let closed = |r: f64| {
            let s = ((r - 0.125) / 0.125).clamp(0.0, 1.0);
            1.0 - s * s * (3.0 - 2.0 * s)
        };
        for r in [0.0, 0.125, 0.1875, 0.25, 0.5] {
            let v = at(&e, 0.5 + r, 0.5);
            assert!((v - closed(r)).abs() < 1e-15, "r = {r}");
        }
        assert_eq!(at(&e, 0.5, 0.5), 1.0);
        assert_eq!(at(&e, 0.5 + 0.125, 0.5), 1.0);
        assert_eq!(at(&e, 0.75, 0.5), 0.0);
        assert_eq!(at(&e, 1.0, 0.5), 0.0);
    }

    #[test]
    fn error_offsets() {
        match parse_expression("min(x1, x2, 3)") {
            Err(Error::Expression { offset, message }) => {
                assert_eq!(offset, 0);
                assert!(message.contains("arity"));
            }
            other => panic!("{other:?}"),
        }
        match parse_expression("x1 + foo") {
            Err(Error::Expression { offset, message }) => {
                assert_eq!(offset, 5);
                assert!(message.contains("unknown identifier"));
            }
            other => panic!("{other:?}"),
        }
        match parse_expression("(x1 + 2") {
            Err(Error::Expression { offset, message }) => {
                assert_eq!(offset, 0);
                assert!(message.contains("unbalanced"));
            }
            other => panic!("{other:?}"),
        }
        match parse_expression("x1 + 2)") {
            Err(Error::Expression { offset, message }) => {
                assert_eq!(offset, 6);
                assert!(message.contains("unbalanced"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn screening() {
        let d = Domain::new(1.0, 1.0);
        assert!(parse_expression("1 / x1").unwrap().screen(&d).is_err());
        assert!(parse_expression("1 / (2 + x1)").unwrap().screen(&d).is_ok());
        assert!(parse_expression("sqrt(x1)").unwrap().screen(&d).is_err());
        assert!(parse_expression("sqrt(x1^2 + x2^2)").unwrap().screen(&d).is_ok());
        assert!(parse_expression("x1 ^ 0.5").unwrap().screen(&d).is_err());
        let r = parse_expression("2 + sin(2*pi*y1)").unwrap().screen(&d).unwrap();
        assert!(r.lo >= 1.0 - 1e-12 && r.hi <= 3.0 + 1e-12);
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0u32..1000).prop_map(|n| Expr::Num(n as f64 / 8.0)),
            Just(Expr::Pi),
            prop_oneof![Just(Var::X1), Just(Var::X2), Just(Var::T)].prop_map(Expr::Var),
        ];
        leaf.prop_recursive(4, 32, 3, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                (
                    prop_oneof![
                        Just(BinOp::Add),
                        Just(BinOp::Sub),
                        Just(BinOp::Mul),
                        Just(BinOp::Div),
                        Just(BinOp::Pow)
                    ],
                    inner.clone(),
                    inner.clone()
                )
                    .prop_map(|(op, a, b)| Expr::Bin(op, Box::new(a), Box::new(b))),
                (prop_oneof![Just(Func::Sin), Just(Func::Exp), Just(Func::Abs)], inner.clone())
                    .prop_map(|(f, a)| Expr::Call(f, vec![a])),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Call(Func::Max, vec![a, b])),
                (inner.clone(), inner.clone(), inner)
                    .prop_map(|(a, b, c)| Expr::Call(Func::Smoothstep, vec![a, b, c])),
            ]
        })
    }

    proptest! {
        #[test]
        fn unparse_round_trip(e in arb_expr()) {
            let text = e.unparse();
            let back = parse_expression(&text).unwrap();
            prop_assert_eq!(&back, &e);
            prop_assert_eq!(back.unparse(), text);
        }

        #[test]
        fn sum_of_products_precedence(a in 0u32..50, b in 0u32..50, c in 1u32..50) {
            let (a, b, c) = (a as f64, b as f64, c as f64);
            let e = parse_expression(&format!("{a} + {b} * {c} ^ 2 - {b} / {c}")).unwrap();
            let want = a + b * c.powi(2) - b / c;
            prop_assert_eq!(at(&e, 0.0, 0.0), want);
        }
    }
}
