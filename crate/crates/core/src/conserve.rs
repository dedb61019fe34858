//! Local conservation laws for constant `h`.

use serde::ser::SerializeStruct;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{self, ln, num, pow, rational, sym, Dependencies, Expr};
use crate::model::{CoefficientSpec, FinEquation};
use crate::symmetry::{jet_space, JetResidual, Verdict, DEFAULT_SAMPLES};

/// `D_t density + D_x flux = characteristic * (u_t - (D u_x)_x - h u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConservationLaw {
    pub density: Expr,
    pub flux: Expr,
    pub characteristic: Expr,
}

impl Serialize for ConservationLaw {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("ConservationLaw", 3)?;
        st.serialize_field("density", &self.density.to_string())?;
        st.serialize_field("flux", &self.flux.to_string())?;
        st.serialize_field("characteristic", &self.characteristic.to_string())?;
        st.end()
    }
}

/// Antiderivative of `D` in `u` with zero integration constant.
pub fn antiderivative(d: &CoefficientSpec) -> Result<Expr> {
    use CoefficientSpec::*;
    let power = |base: Expr, n: f64| {
        if n == -1.0 {
            ln(base)
        } else {
            expr::mul(rational(1.0 / (n + 1.0)), pow(base, rational(n + 1.0)))
        }
    };
    match d {
        PowerU { n } => Ok(power(sym("u"), *n)),
        ShiftedPowerU { n, alpha } => Ok(power(sym("u") + num(*alpha), *n)),
        ExpU => Ok(expr::exp(sym("u"))),
        ReciprocalShift => Ok(ln(sym("u") + num(1.0))),
        Free { expr } => Err(Error::Unsupported(format!(
            "antiderivative unavailable for the free diffusion coefficient `{expr}`"
        ))),
        other => Err(Error::InvalidSpec(format!("{other:?} is not a diffusion coefficient"))),
    }
}

/// The two basis laws when `h` is constant, otherwise none.
pub fn conservation_laws(eq: &FinEquation) -> Result<Vec<ConservationLaw>> {
    let Some(h) = eq.constant_source() else {
        return Ok(Vec::new());
    };
    let int_d = antiderivative(&eq.d)?;
    let d = eq.diffusion();
    let weight = expr::exp(expr::mul(num(-h), sym("t")));
    let (x, u, ux) = (sym("x"), sym("u"), sym("u_x"));
    let first = ConservationLaw {
        density: x.clone() * weight.clone() * u.clone(),
        flux: weight.clone() * (int_d - x.clone() * d.clone() * ux.clone()),
        characteristic: x * weight.clone(),
    };
    let second = ConservationLaw {
        density: weight.clone() * u,
        flux: -weight.clone() * d * ux,
        characteristic: weight,
    };
    Ok(vec![first, second].into_iter().map(simplified).collect())
}

fn simplified(cl: ConservationLaw) -> ConservationLaw {
    ConservationLaw {
        density: cl.density.simplify(),
        flux: cl.flux.simplify(),
        characteristic: cl.characteristic.simplify(),
    }
}

/// `D_t density + D_x flux - characteristic * Delta` on jet space.
pub fn divergence_expr(cl: &ConservationLaw, eq: &FinEquation) -> JetResidual {
    let deps = Dependencies::new().with("u", &["t", "x"]);
    let delta = sym("u_t") - crate::symmetry::evolution_rhs(eq);
    let residual = cl.density.diff_with("t", &deps) + cl.flux.diff_with("x", &deps)
        - cl.characteristic.clone() * delta;
    JetResidual { residual }
}

pub fn divergence_residual(cl: &ConservationLaw, eq: &FinEquation, seed: u64, tol: f64) -> Result<(JetResidual, Verdict)> {
    let r = divergence_expr(cl, eq);
    let verdict = r.verdict(&jet_space(eq), seed, DEFAULT_SAMPLES, tol)?;
    Ok((r, verdict))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::sample::DEFAULT_TOL;
    use crate::model::NEG_FOUR_THIRDS;
    use CoefficientSpec::*;

    #[test]
    fn linear_diffusion_with_unit_source() {
        let eq = FinEquation::new(PowerU { n: 1.0 }, ConstantH { c: 1.0 });
        let laws = conservation_laws(&eq).unwrap();
        assert_eq!(laws.len(), 2);
        assert_eq!(
            serde_json::to_string(&laws[1]).unwrap(),
            r#"{"density":"exp(-t)*u","flux":"-exp(-t)*u*u_x","characteristic":"exp(-t)"}"#
        );
        assert_eq!(laws[0].flux.to_string(), "exp(-t)*(1/2*u^2 - x*u*u_x)");
        for cl in &laws {
            assert!(divergence_residual(cl, &eq, 1, DEFAULT_TOL).unwrap().1.holds);
        }
    }

    #[test]
    fn exponential_diffusion_without_source() {
        let eq = FinEquation::new(ExpU, ConstantH { c: 0.0 });
        let laws = conservation_laws(&eq).unwrap();
        assert_eq!(laws[0].density.to_string(), "x*u");
        assert_eq!(laws[0].flux.to_string(), "exp(u) - x*exp(u)*u_x");
    }

    #[test]
    fn minus_four_thirds() {
        let eq = FinEquation::new(PowerU { n: NEG_FOUR_THIRDS }, ConstantH { c: -1.0 });
        let int_d = antiderivative(&eq.d).unwrap();
        assert_eq!(int_d.to_string(), "-3*u^(-1/3)");
        for cl in conservation_laws(&eq).unwrap() {
            assert!(divergence_residual(&cl, &eq, 2, DEFAULT_TOL).unwrap().1.holds);
        }
    }

    #[test]
    fn flipped_flux_fails() {
        let eq = FinEquation::new(PowerU { n: 1.0 }, ConstantH { c: 1.0 });
        let mut cl = conservation_laws(&eq).unwrap().remove(1);
        cl.flux = -cl.flux;
        assert!(!divergence_residual(&cl, &eq, 1, DEFAULT_TOL).unwrap().1.holds);
    }

    #[test]
    fn nonconstant_source_and_free_diffusion() {
        let eq = FinEquation::new(PowerU { n: 2.0 }, PowerX { q: 1.0, eps: 1.0 });
        assert!(conservation_laws(&eq).unwrap().is_empty());
        let eq = FinEquation::new(CoefficientSpec::free("u^2+1").unwrap(), ConstantH { c: 1.0 });
        assert!(matches!(conservation_laws(&eq), Err(Error::Unsupported(_))));
        let eq = FinEquation::new(ReciprocalShift, ConstantH { c: 2.0 });
        assert_eq!(antiderivative(&eq.d).unwrap().to_string(), "ln(u + 1)");
        for cl in conservation_laws(&eq).unwrap() {
            assert!(divergence_residual(&cl, &eq, 4, DEFAULT_TOL).unwrap().1.holds);
        }
    }
}
