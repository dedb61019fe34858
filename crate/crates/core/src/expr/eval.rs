use std::collections::HashMap;

use super::{Expr, ExprError};

pub type Bindings = HashMap<String, f64>;

impl Expr {
    /// IEEE double evaluation. NaN and infinities propagate; the only error
    /// is an unbound symbol.
    pub fn eval(&self, env: &Bindings) -> Result<f64, ExprError> {
        Ok(match self {
            Expr::Num(v) => *v,
            Expr::Sym(s) => *env
                .get(&**s)
                .ok_or_else(|| ExprError::Unbound(s.to_string()))?,
            Expr::Neg(e) => -e.eval(env)?,
            Expr::Func(f, e) => f.apply(e.eval(env)?),
            Expr::Bin(op, a, b) => op.apply(a.eval(env)?, b.eval(env)?),
        })
    }

    /// Evaluation against a slice of pairs, convenient in tests.
    pub fn eval_at(&self, values: &[(&str, f64)]) -> Result<f64, ExprError> {
        let env = values.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        self.eval(&env)
    }
}
