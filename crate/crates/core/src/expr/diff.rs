use std::collections::BTreeMap;

use super::{add, div, exp, ln, mul, neg, num, pow, sign, sub, sym, BinOp, Expr, Func};

/// Declares which symbols are functions of which variables.
///
/// Differentiating a dependent symbol `u` with respect to one of its
/// variables `x` yields the fresh symbol `u_x`; derivative symbols inherit
/// the dependencies of their base, so `u_x` differentiates to `u_xx`, and
/// mixed suffixes are kept sorted (`u_tx`).
#[derive(Debug, Clone, Default)]
pub struct Dependencies {
    map: BTreeMap<String, Vec<String>>,
}

impl Dependencies {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, symbol: &str, vars: &[&str]) -> Self {
        self.map
            .insert(symbol.to_string(), vars.iter().map(|v| v.to_string()).collect());
        self
    }

    fn vars_of(&self, symbol: &str) -> Option<&[String]> {
        if let Some(v) = self.map.get(symbol) {
            return Some(v);
        }
        let (base, _) = symbol.split_once('_')?;
        self.map.get(base).map(|v| v.as_slice())
    }

    fn derivative_name(&self, symbol: &str, var: &str) -> String {
        match symbol.split_once('_') {
            Some((base, suffix)) if self.map.contains_key(base) && !self.map.contains_key(symbol) => {
                if var.len() == 1 && suffix.chars().all(|c| c.is_ascii_alphabetic()) {
                    let mut chars: Vec<char> = suffix.chars().chain(var.chars()).collect();
                    chars.sort_unstable();
                    format!("{base}_{}", chars.into_iter().collect::<String>())
                } else {
                    format!("{symbol}{var}")
                }
            }
            _ => format!("{symbol}_{var}"),
        }
    }
}

impl Expr {
    /// Partial derivative with every other symbol held constant.
    pub fn diff(&self, var: &str) -> Expr {
        self.diff_with(var, &Dependencies::default())
    }

    /// Total derivative: dependent symbols contribute chain-rule terms.
    pub fn diff_with(&self, var: &str, deps: &Dependencies) -> Expr {
        match self {
            Expr::Num(_) => num(0.0),
            Expr::Sym(s) => {
                if &**s == var {
                    num(1.0)
                } else if deps
                    .vars_of(s)
                    .is_some_and(|vs| vs.iter().any(|v| v == var))
                {
                    sym(&deps.derivative_name(s, var))
                } else {
                    num(0.0)
                }
            }
            Expr::Neg(e) => neg(e.diff_with(var, deps)),
            Expr::Func(f, e) => {
                let inner = (**e).clone();
                let de = e.diff_with(var, deps);
                if de.is_zero() {
                    return num(0.0);
                }
                let outer = match f {
                    Func::Exp => exp(inner),
                    Func::Ln => div(num(1.0), inner),
                    Func::Abs => sign(inner),
                    Func::Arctan => div(num(1.0), add(num(1.0), pow(inner, num(2.0)))),
                    Func::Sign => return num(0.0),
                };
                mul(outer, de)
            }
            Expr::Bin(op, a, b) => {
                let (a, b) = ((**a).clone(), (**b).clone());
                let da = a.diff_with(var, deps);
                let db = b.diff_with(var, deps);
                match op {
                    BinOp::Add => add(da, db),
                    BinOp::Sub => sub(da, db),
                    BinOp::Mul => add(mul(da, b), mul(a, db)),
                    BinOp::Div => {
                        if db.is_zero() {
                            div(da, b)
                        } else {
                            div(sub(mul(da, b.clone()), mul(a, db)), pow(b, num(2.0)))
                        }
                    }
                    BinOp::Pow => {
                        if db.is_zero() {
                            // b * a^(b-1) * a'
                            if da.is_zero() {
                                return num(0.0);
                            }
                            let lowered = match b.as_num() {
                                Some(v) => num(v - 1.0),
                                None => sub(b.clone(), num(1.0)),
                            };
                            mul(mul(b, pow(a, lowered)), da)
                        } else if da.is_zero() {
                            // a^b * ln(a) * b'
                            mul(mul(pow(a.clone(), b), ln(a)), db)
                        } else {
                            let whole = pow(a.clone(), b.clone());
                            let rate = add(mul(db, ln(a.clone())), div(mul(b, da), a));
                            mul(whole, rate)
                        }
                    }
                }
            }
        }
    }
}
