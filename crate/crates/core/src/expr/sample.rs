//! Seeded randomized zero-testing.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Bindings, Expr, ExprError};

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_TRIALS: usize = 50;
/// Resampling budget for non-finite points, as a multiple of the trial count.
const RETRY_FACTOR: usize = 20;

/// Sampling ranges per symbol. The default covers `t`, `x`, `u` away from the
/// singular sets at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSpace {
    ranges: BTreeMap<String, (f64, f64)>,
}

impl Default for SampleSpace {
    fn default() -> Self {
        Self::empty()
            .with("t", 0.1, 2.0)
            .with("x", 0.5, 3.0)
            .with("u", 0.5, 3.0)
    }
}

impl SampleSpace {
    pub fn empty() -> Self {
        Self {
            ranges: BTreeMap::new(),
        }
    }

    pub fn with(mut self, symbol: &str, lo: f64, hi: f64) -> Self {
        self.ranges.insert(symbol.to_string(), (lo, hi));
        self
    }

    /// Adds the first-jet and second-jet coordinates used by the invariance
    /// checks.
    pub fn with_jet(self) -> Self {
        self.with("u_t", -2.0, 2.0)
            .with("u_x", -2.0, 2.0)
            .with("u_xx", -2.0, 2.0)
            .with("u_tx", -2.0, 2.0)
    }

    pub fn range(&self, symbol: &str) -> Option<(f64, f64)> {
        self.ranges.get(symbol).copied()
    }

    fn check_declared<'a>(&self, exprs: impl IntoIterator<Item = &'a Expr>) -> Result<Vec<String>, ExprError> {
        let mut names = std::collections::BTreeSet::new();
        for e in exprs {
            names.extend(e.symbols());
        }
        for n in &names {
            if !self.ranges.contains_key(n) {
                return Err(ExprError::UndeclaredSymbol(n.clone()));
            }
        }
        Ok(names.into_iter().collect())
    }

    fn draw(&self, names: &[String], rng: &mut ChaCha8Rng) -> Bindings {
        names
            .iter()
            .map(|n| {
                let (lo, hi) = self.ranges[n];
                let v = if hi > lo { rng.gen_range(lo..hi) } else { lo };
                (n.clone(), v)
            })
            .collect()
    }

    /// Draws admissible points: every expression must evaluate finite.
    /// Returns at most `trials` points, fewer only if the retry budget runs
    /// out, and an error if none was found.
    pub fn points(
        &self,
        exprs: &[&Expr],
        seed: u64,
        trials: usize,
    ) -> Result<Vec<Bindings>, ExprError> {
        self.points_with(exprs, &[], seed, trials)
    }

    /// Like [`points`](Self::points), additionally drawing the `required`
    /// symbols even when no expression mentions them.
    pub fn points_with(
        &self,
        exprs: &[&Expr],
        required: &[&str],
        seed: u64,
        trials: usize,
    ) -> Result<Vec<Bindings>, ExprError> {
        let mut names = self.check_declared(exprs.iter().copied())?;
        for r in required {
            if !self.ranges.contains_key(*r) {
                return Err(ExprError::UndeclaredSymbol(r.to_string()));
            }
            if !names.iter().any(|n| n == r) {
                names.push(r.to_string());
            }
        }
        names.sort();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(trials);
        let mut attempts = 0;
        while out.len() < trials && attempts < trials.max(1) * RETRY_FACTOR {
            attempts += 1;
            let env = self.draw(&names, &mut rng);
            let ok = exprs
                .iter()
                .all(|e| e.eval(&env).map(f64::is_finite).unwrap_or(false));
            if ok {
                out.push(env);
            }
        }
        if out.is_empty() {
            return Err(ExprError::NoAdmissibleSample);
        }
        Ok(out)
    }
}

/// Randomized equality: `|a-b| <= tol*(1+|a|+|b|)` at every sampled point.
pub fn equivalent(
    a: &Expr,
    b: &Expr,
    space: &SampleSpace,
    seed: u64,
    trials: usize,
    tol: f64,
) -> Result<bool, ExprError> {
    let pts = space.points(&[a, b], seed, trials)?;
    for env in &pts {
        let (va, vb) = (a.eval(env)?, b.eval(env)?);
        if (va - vb).abs() > tol * (1.0 + va.abs() + vb.abs()) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Relative size of an expression that is expected to vanish: the value
/// divided by one plus the largest of its top-level additive terms.
pub fn relative_value(terms: &[Expr], env: &Bindings) -> Result<f64, ExprError> {
    let mut total = 0.0;
    let mut scale: f64 = 0.0;
    for t in terms {
        let v = t.eval(env)?;
        total += v;
        scale = scale.max(v.abs());
    }
    Ok(total.abs() / (1.0 + scale))
}

/// Largest relative residual of `e` over seeded admissible samples.
pub fn max_relative_residual(
    e: &Expr,
    space: &SampleSpace,
    seed: u64,
    trials: usize,
) -> Result<f64, ExprError> {
    let terms = e.additive_terms();
    let pts = space.points(&[e], seed, trials)?;
    let mut worst: f64 = 0.0;
    for env in &pts {
        worst = worst.max(relative_value(&terms, env)?);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn space() -> SampleSpace {
        SampleSpace::default().with("p", 1.0, 1.0).with("q", 0.5, 2.0).with("eps", 1.0, 1.0)
    }

    #[test]
    fn derivative_matches_closed_form() {
        let a = parse("2*x").unwrap();
        let b = parse("x^2").unwrap().diff("x");
        assert!(equivalent(&a, &b, &space(), 1, 50, 1e-9).unwrap());
    }

    #[test]
    fn distinct_functions_differ() {
        let a = parse("(x-1)/(x+1)").unwrap();
        let b = parse("x").unwrap();
        assert!(!equivalent(&a, &b, &space(), 1, 50, 1e-9).unwrap());
    }

    #[test]
    fn h1_defining_relation() {
        // (x^2+p) h' = q h for the p = 1 branch
        let h = parse("eps*exp(q*arctan(x))").unwrap();
        let lhs = parse("x^2+p").unwrap() * h.diff("x");
        let rhs = parse("q").unwrap() * h;
        assert!(equivalent(&lhs, &rhs, &space(), 7, 50, 1e-9).unwrap());
    }

    #[test]
    fn undeclared_and_inadmissible() {
        let a = parse("y").unwrap();
        assert_eq!(
            equivalent(&a, &a, &space(), 0, 5, 1e-9),
            Err(ExprError::UndeclaredSymbol("y".into()))
        );
        let bad = parse("ln(-x)").unwrap();
        assert_eq!(
            equivalent(&bad, &bad, &space(), 0, 5, 1e-9),
            Err(ExprError::NoAdmissibleSample)
        );
    }

    #[test]
    fn sampling_is_reproducible() {
        let e = parse("x*u + t").unwrap();
        let s = SampleSpace::default();
        let p1 = s.points(&[&e], 42, 10).unwrap();
        let p2 = s.points(&[&e], 42, 10).unwrap();
        assert_eq!(p1, p2);
    }
}
