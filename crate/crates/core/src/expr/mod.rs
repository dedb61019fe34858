//! Symbolic scalar expressions.
//!
//! Trees are immutable and cheaply cloneable (`Arc` children). The smart
//! constructors (`add`, `mul`, `pow`, ...) perform constant folding and
//! identity elimination only; there is no canonical form. Equality of two
//! expressions is decided numerically by [`sample::equivalent`].

mod diff;
mod eval;
mod parse;
pub mod sample;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

pub use diff::Dependencies;
pub use eval::Bindings;
pub use parse::parse;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown function `{name}` at byte {offset}")]
    UnknownFunction { name: String, offset: usize },
    #[error("unbound symbol `{0}`")]
    Unbound(String),
    #[error("no sampling range declared for symbol `{0}`")]
    UndeclaredSymbol(String),
    #[error("no admissible sample: every trial produced a non-finite value")]
    NoAdmissibleSample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Ln,
    Abs,
    Arctan,
    Sign,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Abs => "abs",
            Func::Arctan => "arctan",
            Func::Sign => "sign",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "abs" => Func::Abs,
            "arctan" => Func::Arctan,
            "sign" => Func::Sign,
            _ => return None,
        })
    }

    pub fn apply(self, v: f64) -> f64 {
        match self {
            Func::Exp => v.exp(),
            Func::Ln => v.ln(),
            Func::Abs => v.abs(),
            Func::Arctan => v.atan(),
            Func::Sign => {
                if v > 0.0 {
                    1.0
                } else if v < 0.0 {
                    -1.0
                } else if v == 0.0 {
                    0.0
                } else {
                    f64::NAN
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => " + ",
            BinOp::Sub => " - ",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }

    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            BinOp::Add => a + b,
            BinOp::Sub => a - b,
            BinOp::Mul => a * b,
            BinOp::Div => a / b,
            BinOp::Pow => a.powf(b),
        }
    }
}

/// A node of an expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Sym(Arc<str>),
    Neg(Arc<Expr>),
    Func(Func, Arc<Expr>),
    Bin(BinOp, Arc<Expr>, Arc<Expr>),
}

pub fn num(v: f64) -> Expr {
    Expr::Num(v)
}

/// `v` as an unfolded ratio `a/b` with `b <= 12` when it is one to 1e-12,
/// otherwise as a literal.
pub fn rational(v: f64) -> Expr {
    if !v.is_finite() || (v - v.round()).abs() <= 1e-12 * (1.0 + v.abs()) {
        return Expr::Num(if v.is_finite() { v.round() } else { v });
    }
    for b in 2..=12 {
        let a = (v * b as f64).round();
        if (v - a / b as f64).abs() <= 1e-12 * (1.0 + v.abs()) {
            let ratio = raw(BinOp::Div, Expr::Num(a.abs()), Expr::Num(b as f64));
            return if a < 0.0 { neg(ratio) } else { ratio };
        }
    }
    Expr::Num(v)
}

pub fn sym(name: &str) -> Expr {
    Expr::Sym(Arc::from(name))
}

pub fn neg(e: Expr) -> Expr {
    match e {
        Expr::Num(v) => Expr::Num(-v),
        Expr::Neg(inner) => (*inner).clone(),
        e => Expr::Neg(Arc::new(e)),
    }
}

pub fn func(f: Func, e: Expr) -> Expr {
    if let Expr::Num(v) = e {
        let r = f.apply(v);
        if r.is_finite() {
            return Expr::Num(r);
        }
    }
    Expr::Func(f, Arc::new(e))
}

pub fn exp(e: Expr) -> Expr {
    func(Func::Exp, e)
}

pub fn ln(e: Expr) -> Expr {
    func(Func::Ln, e)
}

pub fn abs(e: Expr) -> Expr {
    func(Func::Abs, e)
}

pub fn arctan(e: Expr) -> Expr {
    func(Func::Arctan, e)
}

pub fn sign(e: Expr) -> Expr {
    func(Func::Sign, e)
}

fn raw(op: BinOp, a: Expr, b: Expr) -> Expr {
    Expr::Bin(op, Arc::new(a), Arc::new(b))
}

fn fold(op: BinOp, a: &Expr, b: &Expr) -> Option<Expr> {
    if let (Expr::Num(x), Expr::Num(y)) = (a, b) {
        let r = op.apply(*x, *y);
        // keep ratios of integers such as 1/3 exact in print
        if op == BinOp::Div && x.fract() == 0.0 && y.fract() == 0.0 && r.fract() != 0.0 {
            return None;
        }
        if r.is_finite() {
            return Some(Expr::Num(r));
        }
    }
    None
}

/// `-e` when `e` visibly carries a leading minus sign (negative literal,
/// negation, or a product/quotient whose left factor does).
fn strip_leading_minus(e: &Expr) -> Option<Expr> {
    match e {
        Expr::Num(v) if *v < 0.0 => Some(Expr::Num(-v)),
        Expr::Neg(inner) => Some((**inner).clone()),
        Expr::Bin(op @ (BinOp::Mul | BinOp::Div), l, r) => {
            strip_leading_minus(l).map(|l| raw(*op, l, (**r).clone()))
        }
        _ => None,
    }
}

pub fn add(a: Expr, b: Expr) -> Expr {
    if let Some(r) = fold(BinOp::Add, &a, &b) {
        return r;
    }
    if a.is_zero() {
        return b;
    }
    if b.is_zero() {
        return a;
    }
    if let Some(pos) = strip_leading_minus(&b) {
        return raw(BinOp::Sub, a, pos);
    }
    raw(BinOp::Add, a, b)
}

pub fn sub(a: Expr, b: Expr) -> Expr {
    if let Some(r) = fold(BinOp::Sub, &a, &b) {
        return r;
    }
    if b.is_zero() {
        return a;
    }
    if a.is_zero() {
        return neg(b);
    }
    if let Some(pos) = strip_leading_minus(&b) {
        return raw(BinOp::Add, a, pos);
    }
    raw(BinOp::Sub, a, b)
}

pub fn mul(a: Expr, b: Expr) -> Expr {
    if let Some(r) = fold(BinOp::Mul, &a, &b) {
        return r;
    }
    if a.is_zero() || b.is_zero() {
        return num(0.0);
    }
    if a.is_one() {
        return b;
    }
    if b.is_one() {
        return a;
    }
    if a.is_minus_one() {
        return neg(b);
    }
    if b.is_minus_one() {
        return neg(a);
    }
    raw(BinOp::Mul, a, b)
}

pub fn div(a: Expr, b: Expr) -> Expr {
    if let Some(r) = fold(BinOp::Div, &a, &b) {
        return r;
    }
    if a.is_zero() {
        return num(0.0);
    }
    if b.is_one() {
        return a;
    }
    raw(BinOp::Div, a, b)
}

pub fn pow(a: Expr, b: Expr) -> Expr {
    if let Some(r) = fold(BinOp::Pow, &a, &b) {
        return r;
    }
    if b.is_zero() {
        return num(1.0);
    }
    if b.is_one() {
        return a;
    }
    raw(BinOp::Pow, a, b)
}

/// Builds a binary node through the folding constructors.
pub fn binary(op: BinOp, a: Expr, b: Expr) -> Expr {
    match op {
        BinOp::Add => add(a, b),
        BinOp::Sub => sub(a, b),
        BinOp::Mul => mul(a, b),
        BinOp::Div => div(a, b),
        BinOp::Pow => pow(a, b),
    }
}

impl Expr {
    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Num(v) if *v == 0.0)
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Expr::Num(v) if *v == 1.0)
    }

    fn is_minus_one(&self) -> bool {
        matches!(self, Expr::Num(v) if *v == -1.0)
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            Expr::Num(v) => Some(*v),
            _ => None,
        }
    }

    /// All symbol names occurring in the tree.
    pub fn symbols(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_symbols(&mut out);
        out
    }

    fn collect_symbols(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Num(_) => {}
            Expr::Sym(s) => {
                out.insert(s.to_string());
            }
            Expr::Neg(e) | Expr::Func(_, e) => e.collect_symbols(out),
            Expr::Bin(_, a, b) => {
                a.collect_symbols(out);
                b.collect_symbols(out);
            }
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Sym(s) => &**s == name,
            Expr::Neg(e) | Expr::Func(_, e) => e.contains(name),
            Expr::Bin(_, a, b) => a.contains(name) || b.contains(name),
        }
    }

    /// Simultaneous substitution of symbols, rebuilt through the folding
    /// constructors.
    pub fn substitute(&self, map: &BTreeMap<String, Expr>) -> Expr {
        match self {
            Expr::Num(v) => Expr::Num(*v),
            Expr::Sym(s) => match map.get(&**s) {
                Some(rep) => rep.clone(),
                None => self.clone(),
            },
            Expr::Neg(e) => neg(e.substitute(map)),
            Expr::Func(f, e) => func(*f, e.substitute(map)),
            Expr::Bin(op, a, b) => binary(*op, a.substitute(map), b.substitute(map)),
        }
    }

    pub fn subs(&self, name: &str, rep: &Expr) -> Expr {
        let mut map = BTreeMap::new();
        map.insert(name.to_string(), rep.clone());
        self.substitute(&map)
    }

    /// Substitutes numeric values for the given symbols and folds constants.
    pub fn bind(&self, values: &[(&str, f64)]) -> Expr {
        let map = values
            .iter()
            .map(|(k, v)| (k.to_string(), num(*v)))
            .collect();
        self.substitute(&map)
    }

    /// Rebuilds the tree bottom-up through the folding constructors.
    pub fn simplify(&self) -> Expr {
        self.substitute(&BTreeMap::new())
    }

    /// The top-level additive terms, with signs pushed into the terms.
    pub fn additive_terms(&self) -> Vec<Expr> {
        let mut out = Vec::new();
        self.push_terms(false, &mut out);
        out
    }

    fn push_terms(&self, negated: bool, out: &mut Vec<Expr>) {
        match self {
            Expr::Bin(BinOp::Add, a, b) => {
                a.push_terms(negated, out);
                b.push_terms(negated, out);
            }
            Expr::Bin(BinOp::Sub, a, b) => {
                a.push_terms(negated, out);
                b.push_terms(!negated, out);
            }
            Expr::Neg(e) => e.push_terms(!negated, out),
            e if negated => out.push(neg(e.clone())),
            e => out.push(e.clone()),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Num(v) if v.is_sign_negative() => PREC_UNARY,
            Expr::Num(_) | Expr::Sym(_) | Expr::Func(..) => PREC_ATOM,
            Expr::Neg(_) => PREC_UNARY,
            Expr::Bin(BinOp::Add | BinOp::Sub, ..) => PREC_ADD,
            Expr::Bin(BinOp::Mul | BinOp::Div, ..) => PREC_MUL,
            Expr::Bin(BinOp::Pow, ..) => PREC_POW,
        }
    }
}

const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_UNARY: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

fn write_child(f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
    if e.precedence() < min_prec {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => {
                if v.is_nan() {
                    write!(f, "nan")
                } else {
                    write!(f, "{v}")
                }
            }
            Expr::Sym(s) => write!(f, "{s}"),
            Expr::Neg(e) => {
                write!(f, "-")?;
                match &**e {
                    Expr::Bin(BinOp::Div, a, b) if matches!((&**a, &**b), (Expr::Num(_), Expr::Num(_))) => {
                        write!(f, "{e}")
                    }
                    _ => write_child(f, e, PREC_UNARY),
                }
            }
            Expr::Func(func, e) => write!(f, "{}({e})", func.name()),
            Expr::Bin(op, a, b) => {
                let p = self.precedence();
                match op {
                    BinOp::Pow => {
                        write_child(f, a, PREC_ATOM)?;
                        write!(f, "^")?;
                        match &**b {
                            Expr::Neg(inner) if inner.precedence() < PREC_UNARY => write!(f, "({b})"),
                            _ => write_child(f, b, PREC_UNARY),
                        }
                    }
                    _ => {
                        write_child(f, a, p)?;
                        write!(f, "{}", op.symbol())?;
                        write_child(f, b, p + 1)
                    }
                }
            }
        }
    }
}

impl std::str::FromStr for Expr {
    type Err = ExprError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

impl serde::Serialize for Expr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for Expr {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        parse(&text).map_err(serde::de::Error::custom)
    }
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        add(self, rhs)
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        sub(self, rhs)
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        mul(self, rhs)
    }
}

impl std::ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        div(self, rhs)
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        neg(self)
    }
}
