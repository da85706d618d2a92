//! Scalar coefficient expressions over chart coordinates.
//!
//! Foliation families and chart-coordinate differential forms carry their
//! coefficient functions as small expression trees. Trees are built either
//! programmatically or parsed from config-file strings, evaluate on a slot
//! vector of variable values, and differentiate symbolically — so exterior
//! derivatives of expression-backed forms are exact, not finite-differenced.
//!
//! Grammar: `+ - * /`, `^` with an integer literal exponent, unary minus,
//! `sin cos exp log sqrt`, the constant `pi`, numeric literals, and the
//! variable names supplied by the caller.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Expr(Arc<Node>);

#[derive(Debug)]
enum Node {
    Const(f64),
    Var(usize),
    Add(Expr, Expr),
    Sub(Expr, Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    /// Integer power of a subexpression.
    Pow(Expr, i32),
    Neg(Expr),
    Sin(Expr),
    Cos(Expr),
    Exp(Expr),
    Log(Expr),
    Sqrt(Expr),
}

impl Expr {
    pub fn constant(c: f64) -> Self {
        Expr(Arc::new(Node::Const(c)))
    }

    pub fn var(slot: usize) -> Self {
        Expr(Arc::new(Node::Var(slot)))
    }

    pub fn zero() -> Self {
        Expr::constant(0.0)
    }

    pub fn one() -> Self {
        Expr::constant(1.0)
    }

    fn as_const(&self) -> Option<f64> {
        match *self.0 {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(*self.0, Node::Const(c) if c == 0.0)
    }

    fn is_one(&self) -> bool {
        matches!(*self.0, Node::Const(c) if c == 1.0)
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::constant(x + y),
            (Some(0.0), _) => b,
            (_, Some(0.0)) => a,
            _ => Expr(Arc::new(Node::Add(a, b))),
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::constant(x - y),
            (_, Some(0.0)) => a,
            (Some(0.0), _) => Expr::neg(b),
            _ => Expr(Arc::new(Node::Sub(a, b))),
        }
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::constant(x * y),
            (Some(0.0), _) | (_, Some(0.0)) => Expr::zero(),
            (Some(1.0), _) => b,
            (_, Some(1.0)) => a,
            _ => Expr(Arc::new(Node::Mul(a, b))),
        }
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        if a.is_zero() {
            return Expr::zero();
        }
        if b.is_one() {
            return a;
        }
        if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
            return Expr::constant(x / y);
        }
        Expr(Arc::new(Node::Div(a, b)))
    }

    pub fn pow(a: Expr, n: i32) -> Expr {
        match n {
            0 => Expr::one(),
            1 => a,
            _ => match a.as_const() {
                Some(c) => Expr::constant(c.powi(n)),
                None => Expr(Arc::new(Node::Pow(a, n))),
            },
        }
    }

    pub fn neg(a: Expr) -> Expr {
        match a.as_const() {
            Some(c) => Expr::constant(-c),
            None => Expr(Arc::new(Node::Neg(a))),
        }
    }

    pub fn sin(a: Expr) -> Expr {
        Expr(Arc::new(Node::Sin(a)))
    }
    pub fn cos(a: Expr) -> Expr {
        Expr(Arc::new(Node::Cos(a)))
    }
    pub fn exp(a: Expr) -> Expr {
        Expr(Arc::new(Node::Exp(a)))
    }
    pub fn log(a: Expr) -> Expr {
        Expr(Arc::new(Node::Log(a)))
    }
    pub fn sqrt(a: Expr) -> Expr {
        Expr(Arc::new(Node::Sqrt(a)))
    }

    /// Evaluate with variable slot `i` bound to `vars[i]`.
    pub fn eval(&self, vars: &[f64]) -> f64 {
        match &*self.0 {
            Node::Const(c) => *c,
            Node::Var(i) => vars[*i],
            Node::Add(a, b) => a.eval(vars) + b.eval(vars),
            Node::Sub(a, b) => a.eval(vars) - b.eval(vars),
            Node::Mul(a, b) => a.eval(vars) * b.eval(vars),
            Node::Div(a, b) => a.eval(vars) / b.eval(vars),
            Node::Pow(a, n) => a.eval(vars).powi(*n),
            Node::Neg(a) => -a.eval(vars),
            Node::Sin(a) => a.eval(vars).sin(),
            Node::Cos(a) => a.eval(vars).cos(),
            Node::Exp(a) => a.eval(vars).exp(),
            Node::Log(a) => a.eval(vars).ln(),
            Node::Sqrt(a) => a.eval(vars).sqrt(),
        }
    }

    /// Symbolic partial derivative with respect to variable slot `var`.
    pub fn diff(&self, var: usize) -> Expr {
        match &*self.0 {
            Node::Const(_) => Expr::zero(),
            Node::Var(i) => {
                if *i == var {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Node::Add(a, b) => Expr::add(a.diff(var), b.diff(var)),
            Node::Sub(a, b) => Expr::sub(a.diff(var), b.diff(var)),
            Node::Mul(a, b) => Expr::add(
                Expr::mul(a.diff(var), b.clone()),
                Expr::mul(a.clone(), b.diff(var)),
            ),
            Node::Div(a, b) => Expr::div(
                Expr::sub(
                    Expr::mul(a.diff(var), b.clone()),
                    Expr::mul(a.clone(), b.diff(var)),
                ),
                Expr::pow(b.clone(), 2),
            ),
            Node::Pow(a, n) => Expr::mul(
                Expr::mul(Expr::constant(f64::from(*n)), Expr::pow(a.clone(), n - 1)),
                a.diff(var),
            ),
            Node::Neg(a) => Expr::neg(a.diff(var)),
            Node::Sin(a) => Expr::mul(Expr::cos(a.clone()), a.diff(var)),
            Node::Cos(a) => Expr::neg(Expr::mul(Expr::sin(a.clone()), a.diff(var))),
            Node::Exp(a) => Expr::mul(Expr::exp(a.clone()), a.diff(var)),
            Node::Log(a) => Expr::div(a.diff(var), a.clone()),
            Node::Sqrt(a) => Expr::div(
                a.diff(var),
                Expr::mul(Expr::constant(2.0), Expr::sqrt(a.clone())),
            ),
        }
    }

    /// Parse `src` with the given variable names bound to slots `0..names.len()`.
    pub fn parse(src: &str, names: &[&str]) -> Result<Expr> {
        let tokens = lex(src)?;
        let mut p = Parser {
            tokens,
            pos: 0,
            names,
            src,
        };
        let e = p.expr(0)?;
        if p.pos != p.tokens.len() {
            return Err(Error::ExprParse(format!(
                "unexpected trailing input at token {} in `{}`",
                p.pos, src
            )));
        }
        Ok(e)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.0 {
            Node::Const(c) => write!(f, "{c}"),
            Node::Var(i) => write!(f, "x{i}"),
            Node::Add(a, b) => write!(f, "({a} + {b})"),
            Node::Sub(a, b) => write!(f, "({a} - {b})"),
            Node::Mul(a, b) => write!(f, "({a} * {b})"),
            Node::Div(a, b) => write!(f, "({a} / {b})"),
            Node::Pow(a, n) => write!(f, "{a}^{n}"),
            Node::Neg(a) => write!(f, "(-{a})"),
            Node::Sin(a) => write!(f, "sin({a})"),
            Node::Cos(a) => write!(f, "cos({a})"),
            Node::Exp(a) => write!(f, "exp({a})"),
            Node::Log(a) => write!(f, "log({a})"),
            Node::Sqrt(a) => write!(f, "sqrt({a})"),
        }
    }
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::add(self, rhs)
    }
}
impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::sub(self, rhs)
    }
}
impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::mul(self, rhs)
    }
}
impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
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
}

fn lex(src: &str) -> Result<Vec<Tok>> {
    let mut out = Vec::new();
    let bytes = src.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                out.push(Tok::Plus);
                i += 1;
            }
            '-' => {
                out.push(Tok::Minus);
                i += 1;
            }
            '*' => {
                out.push(Tok::Star);
                i += 1;
            }
            '/' => {
                out.push(Tok::Slash);
                i += 1;
            }
            '^' => {
                out.push(Tok::Caret);
                i += 1;
            }
            '(' => {
                out.push(Tok::LParen);
                i += 1;
            }
            ')' => {
                out.push(Tok::RParen);
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_digit()
                        || bytes[i] == b'.'
                        || bytes[i] == b'e'
                        || bytes[i] == b'E'
                        || ((bytes[i] == b'+' || bytes[i] == b'-')
                            && i > start
                            && (bytes[i - 1] == b'e' || bytes[i - 1] == b'E')))
                {
                    i += 1;
                }
                let s = &src[start..i];
                let v: f64 = s
                    .parse()
                    .map_err(|_| Error::ExprParse(format!("bad number `{s}`")))?;
                out.push(Tok::Num(v));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                out.push(Tok::Ident(src[start..i].to_string()));
            }
            _ => return Err(Error::ExprParse(format!("unexpected character `{c}`"))),
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Tok>,
    pos: usize,
    names: &'a [&'a str],
    src: &'a str,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, t: &Tok) -> Result<()> {
        match self.bump() {
            Some(ref got) if got == t => Ok(()),
            other => Err(Error::ExprParse(format!(
                "expected {t:?}, found {other:?} in `{}`",
                self.src
            ))),
        }
    }

    // Precedence climbing: 0 = additive, 1 = multiplicative, 2 = unary/power.
    fn expr(&mut self, min_prec: u8) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let (prec, tok) = match self.peek() {
                Some(Tok::Plus) => (0, Tok::Plus),
                Some(Tok::Minus) => (0, Tok::Minus),
                Some(Tok::Star) => (1, Tok::Star),
                Some(Tok::Slash) => (1, Tok::Slash),
                _ => break,
            };
            if prec < min_prec {
                break;
            }
            self.bump();
            let rhs = self.expr(prec + 1)?;
            lhs = match tok {
                Tok::Plus => Expr::add(lhs, rhs),
                Tok::Minus => Expr::sub(lhs, rhs),
                Tok::Star => Expr::mul(lhs, rhs),
                Tok::Slash => Expr::div(lhs, rhs),
                _ => unreachable!(),
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if matches!(self.peek(), Some(Tok::Minus)) {
            self.bump();
            return Ok(Expr::neg(self.unary()?));
        }
        let mut base = self.atom()?;
        if matches!(self.peek(), Some(Tok::Caret)) {
            self.bump();
            let n = self.int_exponent()?;
            base = Expr::pow(base, n);
        }
        Ok(base)
    }

    fn int_exponent(&mut self) -> Result<i32> {
        let neg = if matches!(self.peek(), Some(Tok::Minus)) {
            self.bump();
            true
        } else {
            false
        };
        match self.bump() {
            Some(Tok::Num(v)) if v.fract() == 0.0 => {
                let n = v as i32;
                Ok(if neg { -n } else { n })
            }
            other => Err(Error::ExprParse(format!(
                "exponent must be an integer literal, found {other:?} in `{}`",
                self.src
            ))),
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.bump() {
            Some(Tok::Num(v)) => Ok(Expr::constant(v)),
            Some(Tok::LParen) => {
                let e = self.expr(0)?;
                self.expect(&Tok::RParen)?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                if matches!(self.peek(), Some(Tok::LParen)) {
                    self.bump();
                    let arg = self.expr(0)?;
                    self.expect(&Tok::RParen)?;
                    match name.as_str() {
                        "sin" => Ok(Expr::sin(arg)),
                        "cos" => Ok(Expr::cos(arg)),
                        "exp" => Ok(Expr::exp(arg)),
                        "log" => Ok(Expr::log(arg)),
                        "sqrt" => Ok(Expr::sqrt(arg)),
                        _ => Err(Error::ExprParse(format!("unknown function `{name}`"))),
                    }
                } else if name == "pi" {
                    Ok(Expr::constant(std::f64::consts::PI))
                } else if let Some(slot) = self.names.iter().position(|n| *n == name) {
                    Ok(Expr::var(slot))
                } else {
                    Err(Error::ExprParse(format!(
                        "unknown variable `{name}` (known: {:?})",
                        self.names
                    )))
                }
            }
            other => Err(Error::ExprParse(format!(
                "unexpected token {other:?} in `{}`",
                self.src
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const VARS: &[&str] = &["x", "y", "z", "t"];

    fn ev(src: &str, vals: &[f64]) -> f64 {
        Expr::parse(src, VARS).unwrap().eval(vals)
    }

    #[test]
    fn parse_and_eval() {
        assert_eq!(ev("1 + 2*3", &[0.0; 4]), 7.0);
        assert_eq!(ev("2^3", &[0.0; 4]), 8.0);
        assert_eq!(ev("(1+x)^-2", &[1.0, 0.0, 0.0, 0.0]), 0.25);
        assert!((ev("sin(pi/2)", &[0.0; 4]) - 1.0).abs() < 1e-15);
        assert!((ev("exp(log(3.5))", &[0.0; 4]) - 3.5).abs() < 1e-14);
        assert_eq!(ev("x - y - z", &[5.0, 2.0, 1.0, 0.0]), 2.0);
        assert_eq!(ev("-x^2", &[3.0, 0.0, 0.0, 0.0]), -9.0);
        assert_eq!(ev("6/3/2", &[0.0; 4]), 1.0);
    }

    #[test]
    fn parse_errors() {
        assert!(Expr::parse("x +", VARS).is_err());
        assert!(Expr::parse("foo(x)", VARS).is_err());
        assert!(Expr::parse("w", VARS).is_err());
        assert!(Expr::parse("x^y", VARS).is_err());
        assert!(Expr::parse("x) ", VARS).is_err());
    }

    /// Symbolic derivatives agree with central differences on random probes.
    #[test]
    fn diff_matches_finite_differences() {
        let exprs = [
            "sin(x)*cos(y) + exp(z*t)",
            "(1 + x^2 + y^2)^-3",
            "sqrt(1 + x^2) / (2 + sin(z))",
            "log(2 + cos(x*y)) - t^3",
            "x*y*z*t + x^4 - y/(1+z^2)",
        ];
        let probes = [
            [0.3, -0.7, 1.1, 0.5],
            [-1.2, 0.4, -0.3, 0.9],
            [0.0, 1.0, 2.0, -0.5],
        ];
        let h = 1e-5;
        for src in exprs {
            let e = Expr::parse(src, VARS).unwrap();
            for p in probes {
                for v in 0..4 {
                    let sym = e.diff(v).eval(&p);
                    let mut hi = p;
                    let mut lo = p;
                    hi[v] += h;
                    lo[v] -= h;
                    let fd = (e.eval(&hi) - e.eval(&lo)) / (2.0 * h);
                    assert!(
                        (sym - fd).abs() < 1e-7 * (1.0 + sym.abs()),
                        "{src} d/d{v}: sym {sym} vs fd {fd}"
                    );
                }
            }
        }
    }

    #[test]
    fn second_derivatives_are_exact() {
        let e = Expr::parse("sin(x)*exp(y)", VARS).unwrap();
        let dxx = e.diff(0).diff(0);
        let p = [0.7, 0.2, 0.0, 0.0];
        assert!((dxx.eval(&p) + 0.7f64.sin() * 0.2f64.exp()).abs() < 1e-15);
    }
}
