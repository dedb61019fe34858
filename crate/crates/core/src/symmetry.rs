//! Second prolongation of point vector fields and the invariance criterion
//! for fin equations, classical and conditional.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::expr::sample::{self, SampleSpace};
use crate::expr::{num, pow, sym, Dependencies, Expr};
use crate::model::{CoefficientSpec, FinEquation, VectorField};

pub const DEFAULT_SAMPLES: usize = 50;

/// An expression on jet space that vanishes identically exactly when the
/// tested invariance holds.
#[derive(Debug, Clone, PartialEq)]
pub struct JetResidual {
    pub residual: Expr,
}

/// Outcome of a randomized zero test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdict {
    pub holds: bool,
    pub max_residual: f64,
}

fn jet_deps() -> Dependencies {
    Dependencies::new().with("u", &["t", "x"])
}

/// `D u_xx + D_u u_x^2 + h u`: the value of `u_t` on solutions.
pub fn evolution_rhs(eq: &FinEquation) -> Expr {
    let d = eq.diffusion();
    let dd = d.diff("u");
    d * sym("u_xx") + dd * pow(sym("u_x"), num(2.0)) + eq.source() * sym("u")
}

fn equation_lhs(eq: &FinEquation) -> Expr {
    sym("u_t") - evolution_rhs(eq)
}

/// Sampling region for invariance checks: the default `(t, x, u)` box plus
/// independent jet coordinates. The `p = -1` branch of `h1` is sampled on
/// `x > 1`.
pub fn jet_space(eq: &FinEquation) -> SampleSpace {
    let space = SampleSpace::default().with_jet();
    match eq.h {
        CoefficientSpec::H1 { p: -1, .. } => space.with("x", 1.2, 3.0),
        _ => space,
    }
}

/// Coefficients of the second prolongation on `(u_t, u_x, u_xx)`.
struct Prolongation {
    eta_t: Expr,
    eta_x: Expr,
    eta_xx: Expr,
}

fn prolong(v: &VectorField) -> Prolongation {
    let deps = jet_deps();
    let dt = |e: &Expr| e.diff_with("t", &deps);
    let dx = |e: &Expr| e.diff_with("x", &deps);
    let (ut, ux, uxx, utx) = (sym("u_t"), sym("u_x"), sym("u_xx"), sym("u_tx"));
    let eta_t = dt(&v.eta) - ut.clone() * dt(&v.tau) - ux.clone() * dt(&v.xi);
    let eta_x = dx(&v.eta) - ut * dx(&v.tau) - ux * dx(&v.xi);
    let eta_xx = dx(&eta_x) - utx * dx(&v.tau) - uxx * dx(&v.xi);
    Prolongation {
        eta_t,
        eta_x,
        eta_xx,
    }
}

/// `pr X (Delta)` before restriction to any manifold.
fn prolonged_action(eq: &FinEquation, v: &VectorField) -> Expr {
    let delta = equation_lhs(eq);
    let pr = prolong(v);
    v.tau.clone() * delta.diff("t")
        + v.xi.clone() * delta.diff("x")
        + v.eta.clone() * delta.diff("u")
        + pr.eta_t * delta.diff("u_t")
        + pr.eta_x * delta.diff("u_x")
        + pr.eta_xx * delta.diff("u_xx")
}

fn check_shape(v: &VectorField) -> Result<()> {
    if v.tau.contains("x") || v.tau.contains("u") {
        return Err(Error::Precondition(format!(
            "the d_t coefficient `{}` must depend on t only",
            v.tau
        )));
    }
    if v.xi.contains("u") {
        return Err(Error::Precondition(format!(
            "the d_x coefficient `{}` must not depend on u",
            v.xi
        )));
    }
    Ok(())
}

/// Prolonged action restricted to solutions by `u_t := D u_xx + D_u u_x^2 + h u`.
pub fn prolonged_residual(eq: &FinEquation, v: &VectorField) -> Result<JetResidual> {
    check_shape(v)?;
    let action = prolonged_action(eq, v);
    let residual = action.subs("u_t", &evolution_rhs(eq));
    Ok(JetResidual { residual })
}

impl JetResidual {
    pub fn max_relative(&self, space: &SampleSpace, seed: u64, samples: usize) -> Result<f64> {
        Ok(sample::max_relative_residual(
            &self.residual,
            space,
            seed,
            samples,
        )?)
    }

    pub fn verdict(&self, space: &SampleSpace, seed: u64, samples: usize, tol: f64) -> Result<Verdict> {
        let worst = self.max_relative(space, seed, samples)?;
        Ok(Verdict {
            holds: worst <= tol,
            max_residual: worst,
        })
    }
}

pub fn check_lie_symmetry(eq: &FinEquation, v: &VectorField, seed: u64, tol: f64) -> Result<Verdict> {
    prolonged_residual(eq, v)?.verdict(&jet_space(eq), seed, DEFAULT_SAMPLES, tol)
}

pub fn is_lie_symmetry(eq: &FinEquation, v: &VectorField, seed: u64, tol: f64) -> Result<bool> {
    Ok(check_lie_symmetry(eq, v, seed, tol)?.holds)
}

/// Prolonged action restricted jointly to the equation and to the invariant
/// surface `eta - tau u_t - xi u_x = 0` with its differential consequences.
/// Supported shapes: `tau = 1`, or `tau = 0` with `xi != 0`.
pub fn conditional_residual(eq: &FinEquation, v: &VectorField) -> Result<JetResidual> {
    check_shape(v)?;
    let action = prolonged_action(eq, v);
    let d = eq.diffusion();
    let dd = d.diff("u");
    let h = eq.source();
    let u = sym("u");
    let mut rules = BTreeMap::new();
    if v.tau.is_one() {
        let ut = v.eta.clone() - v.xi.clone() * sym("u_x");
        let uxx = (ut.clone() - dd * pow(sym("u_x"), num(2.0)) - h * u) / d;
        rules.insert("u_t".to_string(), ut);
        rules.insert("u_xx".to_string(), uxx);
    } else if v.tau.is_zero() {
        if v.xi.is_zero() {
            return Err(Error::Unsupported(
                "conditional invariance needs a nonzero d_x coefficient when tau = 0".into(),
            ));
        }
        let ux = v.eta.clone() / v.xi.clone();
        let uxx = ux.diff_with("x", &jet_deps()).subs("u_x", &ux);
        let ut = d * uxx.clone() + dd * pow(ux.clone(), num(2.0)) + h * u;
        rules.insert("u_x".to_string(), ux);
        rules.insert("u_xx".to_string(), uxx);
        rules.insert("u_t".to_string(), ut);
    } else {
        return Err(Error::Unsupported(format!(
            "conditional invariance is checked for tau = 1 or tau = 0, got tau = {}",
            v.tau
        )));
    }
    Ok(JetResidual {
        residual: action.substitute(&rules),
    })
}

pub fn check_conditional_symmetry(
    eq: &FinEquation,
    v: &VectorField,
    seed: u64,
    tol: f64,
) -> Result<Verdict> {
    conditional_residual(eq, v)?.verdict(&jet_space(eq), seed, DEFAULT_SAMPLES, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::sample::DEFAULT_TOL;
    use crate::model::NEG_FOUR_THIRDS;
    use CoefficientSpec::*;

    fn field(tau: &str, xi: &str, eta: &str) -> VectorField {
        VectorField::from_strs(tau, xi, eta).unwrap()
    }

    fn fin_minus_one_x() -> FinEquation {
        FinEquation::new(PowerU { n: -1.0 }, PowerX { q: 1.0, eps: 1.0 })
    }

    #[test]
    fn translations_in_case_2() {
        let eq = FinEquation::new(CoefficientSpec::free("u^2+1").unwrap(), ConstantH { c: 1.0 });
        let r = prolonged_residual(&eq, &VectorField::d_x()).unwrap();
        assert!(r.residual.is_zero() || r.max_relative(&jet_space(&eq), 1, 50).unwrap() < 1e-12);
    }

    #[test]
    fn time_translation_is_always_a_symmetry() {
        for eq in [
            fin_minus_one_x(),
            FinEquation::new(CoefficientSpec::free("u^3+u").unwrap(), CoefficientSpec::free("x + ln(x)").unwrap()),
        ] {
            assert!(is_lie_symmetry(&eq, &VectorField::d_t(), 3, DEFAULT_TOL).unwrap());
        }
    }

    #[test]
    fn scaling_is_not_a_symmetry_of_case_4() {
        let eq = FinEquation::new(PowerU { n: 1.0 }, PowerX { q: 1.0, eps: 1.0 });
        let r = prolonged_residual(&eq, &field("0", "0", "u")).unwrap();
        let at = r
            .residual
            .eval_at(&[("t", 1.0), ("x", 1.0), ("u", 1.0), ("u_x", 1.0), ("u_xx", 1.0)])
            .unwrap();
        assert!(at.abs() > 1e-3);
        assert!(!is_lie_symmetry(&eq, &field("0", "0", "u"), 1, DEFAULT_TOL).unwrap());
    }

    #[test]
    fn listed_generators_are_symmetries() {
        let case6 = FinEquation::new(PowerU { n: NEG_FOUR_THIRDS }, H1 { p: 1, q: 1.0, eps: 1.0 });
        assert!(is_lie_symmetry(&case6, &field("-4*t", "4*(x^2+1)", "-3*(4*x+1)*u"), 5, DEFAULT_TOL).unwrap());
        let case9 = FinEquation::new(ExpU, ConstantH { c: 0.0 });
        assert!(is_lie_symmetry(&case9, &field("0", "x", "2"), 5, DEFAULT_TOL).unwrap());
        let case3 = FinEquation::new(CoefficientSpec::free("u^2").unwrap(), InverseSquareX);
        assert!(is_lie_symmetry(&case3, &field("2*t", "x", "0"), 5, DEFAULT_TOL).unwrap());
    }

    #[test]
    fn nonclassical_operators() {
        let eq = fin_minus_one_x();
        let a = check_conditional_symmetry(&eq, &field("0", "1", "t*u"), 1, DEFAULT_TOL).unwrap();
        assert!(a.holds, "{a:?}");
        let b = check_conditional_symmetry(&eq, &field("1", "0", "x*u"), 1, DEFAULT_TOL).unwrap();
        assert!(b.holds, "{b:?}");
        // neither is a classical symmetry
        assert!(!is_lie_symmetry(&eq, &field("0", "1", "t*u"), 1, DEFAULT_TOL).unwrap());
        assert!(!is_lie_symmetry(&eq, &field("1", "0", "x*u"), 1, DEFAULT_TOL).unwrap());
        let c = conditional_residual(&eq, &VectorField::d_x()).unwrap();
        let at = c.residual.eval_at(&[("t", 1.0), ("x", 1.0), ("u", 1.0)]).unwrap();
        assert!(at.abs() > 1e-3);
    }

    #[test]
    fn shape_preconditions() {
        let eq = fin_minus_one_x();
        assert!(prolonged_residual(&eq, &field("x", "0", "0")).is_err());
        assert!(prolonged_residual(&eq, &field("1", "u", "0")).is_err());
        assert!(conditional_residual(&eq, &field("2*t", "x", "0")).is_err());
        assert!(conditional_residual(&eq, &field("0", "0", "u")).is_err());
    }
}
