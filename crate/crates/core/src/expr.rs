//! A small arithmetic expression language for PDE coefficients.
//!
//! Grammar:
//!
//! ```text
//! expr    := term (("+" | "-") term)*
//! term    := unary (("*" | "/") unary)*
//! unary   := "-" unary | power
//! power   := primary ("^" integer)?
//! primary := number | "pi" | variable | func "(" expr ")" | "(" expr ")"
//! func    := exp | sin | cos | sqrt | tanh
//! ```
//!
//! Variables are `x1 .. xd` (1-based). The same tree is evaluated at points
//! and over boxes.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::{Interval, IntervalBox, Rounding, TRANSCENDENTAL_ULPS};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Exp,
    Sin,
    Cos,
    Sqrt,
    Tanh,
}

impl Func {
    fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "exp" => Func::Exp,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            "tanh" => Func::Tanh,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
            Func::Tanh => "tanh",
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Func::Exp => x.exp(),
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Sqrt => x.sqrt(),
            Func::Tanh => x.tanh(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Const(f64),
    /// Zero-based variable index.
    Var(usize),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Pow(Box<Node>, u32),
    Call(Func, Box<Node>),
}

/// Parsed expression together with its source text.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Expr {
    source: String,
    root: Node,
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let root = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Parse(format!(
                "unexpected {} in expression `{src}`",
                p.tokens[p.pos]
            )));
        }
        Ok(Expr {
            source: src.to_string(),
            root,
        })
    }

    pub fn constant(c: f64) -> Self {
        Expr {
            source: format!("{c:?}"),
            root: Node::Const(c),
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    /// Number of variables referenced, i.e. the largest index used.
    pub fn arity(&self) -> usize {
        fn walk(n: &Node) -> usize {
            match n {
                Node::Const(_) => 0,
                Node::Var(i) => i + 1,
                Node::Neg(a) | Node::Pow(a, _) | Node::Call(_, a) => walk(a),
                Node::Bin(_, a, b) => walk(a).max(walk(b)),
            }
        }
        walk(&self.root)
    }

    pub fn is_constant(&self) -> bool {
        self.arity() == 0
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() < self.arity() {
            return Err(Error::DimensionMismatch {
                expected: self.arity(),
                got: x.len(),
            });
        }
        let v = eval_point(&self.root, x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Evaluator(format!(
                "`{}` is not finite at {x:?}",
                self.source
            )))
        }
    }

    pub fn enclose(&self, k: &IntervalBox, r: Rounding) -> Result<Interval> {
        if k.dim() < self.arity() {
            return Err(Error::DimensionMismatch {
                expected: self.arity(),
                got: k.dim(),
            });
        }
        eval_interval(&self.root, k.axes(), r)
            .map_err(|e| Error::CoefficientEnclosure(format!("`{}`: {e}", self.source)))
    }

    /// Constant `L` with `w(enclose(K)) <= L·w(K)` for every box `K ⊆ Ω`,
    /// built bottom-up from the ranges over `Ω`.
    pub fn lipschitz(&self, omega: &IntervalBox, r: Rounding) -> Result<f64> {
        let (_, l) = lipschitz(&self.root, omega.axes(), r)
            .map_err(|e| Error::CoefficientEnclosure(format!("`{}`: {e}", self.source)))?;
        Ok(l)
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({:?})", self.source)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl FromStr for Expr {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Expr::parse(s)
    }
}

impl TryFrom<String> for Expr {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        Expr::parse(&s)
    }
}

impl From<Expr> for String {
    fn from(e: Expr) -> Self {
        e.source
    }
}

fn eval_point(n: &Node, x: &[f64]) -> f64 {
    match n {
        Node::Const(c) => *c,
        Node::Var(i) => x[*i],
        Node::Neg(a) => -eval_point(a, x),
        Node::Bin(op, a, b) => {
            let (a, b) = (eval_point(a, x), eval_point(b, x));
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => a / b,
            }
        }
        Node::Pow(a, k) => eval_point(a, x).powi(*k as i32),
        Node::Call(f, a) => f.apply(eval_point(a, x)),
    }
}

fn eval_interval(n: &Node, x: &[Interval], r: Rounding) -> Result<Interval> {
    Ok(match n {
        Node::Const(c) => Interval::point(*c),
        Node::Var(i) => x[*i],
        Node::Neg(a) => r.neg(eval_interval(a, x, r)?),
        Node::Bin(op, a, b) => {
            let (a, b) = (eval_interval(a, x, r)?, eval_interval(b, x, r)?);
            match op {
                BinOp::Add => r.add(a, b),
                BinOp::Sub => r.sub(a, b),
                BinOp::Mul => r.mul(a, b),
                BinOp::Div => r.div(a, b)?,
            }
        }
        Node::Pow(a, k) => int_pow(eval_interval(a, x, r)?, *k, r),
        Node::Call(f, a) => call_interval(*f, eval_interval(a, x, r)?, r)?,
    })
}

fn int_pow(a: Interval, k: u32, r: Rounding) -> Interval {
    match k {
        0 => Interval::ONE,
        1 => a,
        _ if k % 2 == 0 => a.abs_pow(k as f64, r),
        _ => {
            // odd powers are monotone
            let lo = r.down_n(a.lo().powi(k as i32), TRANSCENDENTAL_ULPS);
            let hi = r.up_n(a.hi().powi(k as i32), TRANSCENDENTAL_ULPS);
            Interval::raw(lo, hi)
        }
    }
}

fn call_interval(f: Func, a: Interval, r: Rounding) -> Result<Interval> {
    let (lo, hi) = (a.lo(), a.hi());
    let v = match f {
        Func::Exp => {
            let v = r.widen(Interval::raw(lo.exp(), hi.exp()), TRANSCENDENTAL_ULPS);
            Interval::raw(v.lo().max(0.0), v.hi())
        }
        Func::Tanh => {
            let v = r.widen(Interval::raw(lo.tanh(), hi.tanh()), TRANSCENDENTAL_ULPS);
            Interval::raw(v.lo().max(-1.0), v.hi().min(1.0))
        }
        Func::Sqrt => {
            if lo < 0.0 {
                return Err(Error::Evaluator(format!("sqrt of {a}")));
            }
            let v = r.widen(Interval::raw(lo.sqrt(), hi.sqrt()), TRANSCENDENTAL_ULPS);
            Interval::raw(v.lo().max(0.0), v.hi())
        }
        Func::Sin => periodic_range(a, FRAC_PI_2, r, f64::sin),
        Func::Cos => periodic_range(a, 0.0, r, f64::cos),
    };
    if v.lo().is_finite() && v.hi().is_finite() {
        Ok(v)
    } else {
        Err(Error::Evaluator(format!("{}({a}) overflows", f.name())))
    }
}

/// Range of `sin`/`cos` over `a`, where `peak` is the phase of a maximum
/// (minima sit at `peak + π`).
fn periodic_range(a: Interval, peak: f64, r: Rounding, f: fn(f64) -> f64) -> Interval {
    if a.width() >= TAU {
        return Interval::raw(-1.0, 1.0);
    }
    // a little slack so rounded turning points are never missed
    let slack = 1e-12 * (1.0 + a.magnitude());
    let hits = |phase: f64| {
        let k = ((a.lo() - slack - phase) / TAU).ceil();
        phase + k * TAU <= a.hi() + slack
    };
    let (fa, fb) = (f(a.lo()), f(a.hi()));
    let v = r.widen(Interval::spanning(fa, fb), TRANSCENDENTAL_ULPS);
    let hi = if hits(peak) { 1.0 } else { v.hi().min(1.0) };
    let lo = if hits(peak + PI) { -1.0 } else { v.lo().max(-1.0) };
    Interval::raw(lo, hi)
}

/// Returns (range over Ω, Lipschitz constant of the interval evaluation).
fn lipschitz(n: &Node, x: &[Interval], r: Rounding) -> Result<(Interval, f64)> {
    Ok(match n {
        Node::Const(c) => (Interval::point(*c), 0.0),
        Node::Var(i) => (x[*i], 1.0),
        Node::Neg(a) => {
            let (v, l) = lipschitz(a, x, r)?;
            (r.neg(v), l)
        }
        Node::Bin(op, a, b) => {
            let (va, la) = lipschitz(a, x, r)?;
            let (vb, lb) = lipschitz(b, x, r)?;
            match op {
                BinOp::Add => (r.add(va, vb), la + lb),
                BinOp::Sub => (r.sub(va, vb), la + lb),
                BinOp::Mul => (r.mul(va, vb), va.magnitude() * lb + vb.magnitude() * la),
                BinOp::Div => {
                    let v = r.div(va, vb)?;
                    let mig = vb.lo().abs().min(vb.hi().abs());
                    let recip_mag = 1.0 / mig;
                    (v, recip_mag * la + va.magnitude() * lb * recip_mag * recip_mag)
                }
            }
        }
        Node::Pow(a, k) => {
            let (v, l) = lipschitz(a, x, r)?;
            let m = v.magnitude();
            let dk = if *k == 0 {
                0.0
            } else {
                *k as f64 * m.powi(*k as i32 - 1)
            };
            (int_pow(v, *k, r), dk * l)
        }
        Node::Call(f, a) => {
            let (v, l) = lipschitz(a, x, r)?;
            let out = call_interval(*f, v, r)?;
            let slope = match f {
                Func::Exp => out.hi(),
                Func::Sin | Func::Cos | Func::Tanh => 1.0,
                Func::Sqrt => {
                    if v.lo() <= 0.0 {
                        return Err(Error::Evaluator(
                            "sqrt is not Lipschitz near zero".to_string(),
                        ));
                    }
                    0.5 / v.lo().sqrt()
                }
            };
            (out, slope * l)
        }
    })
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Sym(char),
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Num(v) => write!(f, "number {v}"),
            Token::Ident(s) => write!(f, "`{s}`"),
            Token::Sym(c) => write!(f, "`{c}`"),
        }
    }
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v = s
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad number `{s}`")))?;
            out.push(Token::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^()".contains(c) {
            out.push(Token::Sym(c));
            i += 1;
        } else {
            return Err(Error::Parse(format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Token::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(Error::Parse(match self.peek() {
                Some(t) => format!("expected `{c}`, found {t}"),
                None => format!("expected `{c}`, found end of input"),
            }))
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat('+') {
                BinOp::Add
            } else if self.eat('-') {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.term()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat('*') {
                BinOp::Mul
            } else if self.eat('/') {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat('-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        let base = self.primary()?;
        if self.eat('^') {
            match self.tokens.get(self.pos) {
                Some(Token::Num(v)) if v.fract() == 0.0 && *v >= 0.0 && *v <= 64.0 => {
                    let k = *v as u32;
                    self.pos += 1;
                    return Ok(Node::Pow(Box::new(base), k));
                }
                _ => {
                    return Err(Error::Parse(
                        "exponent must be a non-negative integer literal".into(),
                    ))
                }
            }
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Node> {
        let tok = self
            .tokens
            .get(self.pos)
            .cloned()
            .ok_or_else(|| Error::Parse("unexpected end of expression".into()))?;
        self.pos += 1;
        match tok {
            Token::Num(v) => Ok(Node::Const(v)),
            Token::Sym('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Token::Ident(name) => {
                if name == "pi" {
                    return Ok(Node::Const(PI));
                }
                if let Some(f) = Func::from_name(&name) {
                    self.expect('(')?;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    return Ok(Node::Call(f, Box::new(arg)));
                }
                if let Some(idx) = name.strip_prefix('x').and_then(|s| s.parse::<usize>().ok()) {
                    if idx >= 1 {
                        return Ok(Node::Var(idx - 1));
                    }
                }
                Err(Error::Parse(format!("unknown identifier `{name}`")))
            }
            other => Err(Error::Parse(format!("unexpected {other}"))),
        }
    }
}
