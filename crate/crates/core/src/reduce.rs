//! Lie reductions of Cases 4, 5 and 6, the exact solutions they produce,
//! and the order reduction of the stationary Case 6 equation.
//!
//! Reduced ODEs are written in `w` (the similarity variable), `phi`, `phi_w`,
//! `phi_ww`; algebraic reductions are written in `C`. Equations are stored
//! as `lhs - rhs`.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::classify::h1_closed_form;
use crate::error::{Error, Result};
use crate::expr::{parse, Dependencies, Expr};
use crate::model::{CoefficientSpec, FinEquation, Solution, VectorField, NEG_FOUR_THIRDS};

pub const DEFAULT_TOL: f64 = 1e-8;
const TEST_FUNCTIONS: usize = 3;
const POINTS: usize = 40;

pub type Params = BTreeMap<String, f64>;

/// Sign of `t` in the reductions that use `|t|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimeBranch {
    #[default]
    Positive,
    Negative,
}

impl TimeBranch {
    fn sign(self) -> f64 {
        match self {
            TimeBranch::Positive => 1.0,
            TimeBranch::Negative => -1.0,
        }
    }

    fn range(self) -> (f64, f64) {
        match self {
            TimeBranch::Positive => (0.1, 2.0),
            TimeBranch::Negative => (-2.0, -0.1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Reduced {
    /// ODE in `w, phi, phi_w, phi_ww`.
    Ode(Expr),
    /// Algebraic equation in `C`.
    Algebraic(Expr),
}

impl fmt::Display for Reduced {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reduced::Ode(e) | Reduced::Algebraic(e) => write!(f, "{e} = 0"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reduction {
    pub label: String,
    pub case_id: u8,
    /// `u` in terms of `t, x` and `phi` (or `C`).
    pub ansatz: Expr,
    /// Similarity variable; `None` for algebraic reductions.
    pub omega: Option<Expr>,
    pub reduced: Reduced,
    pub subalgebra: Vec<VectorField>,
    pub equation: FinEquation,
    pub branch: TimeBranch,
}

impl Serialize for Reduction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("Reduction", 6)?;
        st.serialize_field("label", &self.label)?;
        st.serialize_field("ansatz", &format!("u = {}", self.ansatz))?;
        st.serialize_field("omega", &self.omega.as_ref().map(|w| w.to_string()))?;
        st.serialize_field("reduced", &self.reduced.to_string())?;
        st.serialize_field("subalgebra", &self.subalgebra)?;
        st.serialize_field("equation", &self.equation)?;
        st.end()
    }
}

fn lit(v: f64) -> String {
    format!("({v})")
}

fn ex(text: &str) -> Result<Expr> {
    Ok(parse(text)?.simplify())
}

fn param(params: &Params, name: &str) -> Result<f64> {
    let v = params
        .get(name)
        .copied()
        .ok_or_else(|| Error::Precondition(format!("missing parameter `{name}`")))?;
    if !v.is_finite() {
        return Err(Error::Precondition(format!("{name} must be finite")));
    }
    Ok(v)
}

fn nonzero(params: &Params, name: &str) -> Result<f64> {
    let v = param(params, name)?;
    if v == 0.0 {
        return Err(Error::Precondition(format!("{name} must be nonzero")));
    }
    Ok(v)
}

fn case6_params(params: &Params) -> Result<(i8, f64, f64)> {
    let p = param(params, "p")?;
    if ![-1.0, 0.0, 1.0].contains(&p) {
        return Err(Error::Precondition(format!("p must be -1, 0 or 1, got {p}")));
    }
    let q = nonzero(params, "q")?;
    let eps = param(params, "eps")?;
    if eps != 1.0 && eps != -1.0 {
        return Err(Error::Precondition("eps must be +1 or -1".into()));
    }
    Ok((p as i8, q, eps))
}

/// The member of Case 4, 5 or 6 with the given parameters.
pub fn case_equation(case_id: u8, params: &Params) -> Result<FinEquation> {
    use CoefficientSpec::*;
    match case_id {
        4 => Ok(FinEquation::new(
            PowerU { n: nonzero(params, "n")? },
            PowerX { q: nonzero(params, "q")?, eps: nonzero(params, "eps")? },
        )),
        5 => Ok(FinEquation::new(
            PowerU { n: nonzero(params, "n")? },
            ExpX { eps: nonzero(params, "eps")? },
        )),
        6 => {
            let (p, q, eps) = case6_params(params)?;
            Ok(FinEquation::new(PowerU { n: NEG_FOUR_THIRDS }, H1 { p, q, eps }))
        }
        other => Err(Error::Unsupported(format!("reductions are built for cases 4, 5, 6, not {other}"))),
    }
}

fn second_generator(case_id: u8, params: &Params) -> Result<VectorField> {
    let g = |a: String, b: String, c: String| VectorField::from_strs(&a, &b, &c);
    match case_id {
        4 => {
            let (n, q) = (lit(param(params, "n")?), lit(param(params, "q")?));
            g(format!("-{q}*{n}*t"), format!("{n}*x"), format!("({q}+2)*u"))
        }
        5 => {
            let n = lit(param(params, "n")?);
            g(format!("-{n}*t"), n.clone(), "u".into())
        }
        _ => {
            let (p, q) = (lit(param(params, "p")?), lit(param(params, "q")?));
            g(format!("-4*{q}*t"), format!("4*(x^2+{p})"), format!("-3*(4*x+{q})*u"))
        }
    }
}

/// `(phi^n phi_w)_w` written out.
fn nonlinear_flux(n: f64) -> Result<Expr> {
    let deps = Dependencies::new().with("phi", &["w"]);
    Ok(ex(&format!("phi^{}*phi_w", lit(n)))?.diff_with("w", &deps).simplify())
}

/// Builds reduction `label` = `"{case}.{sub}"` with `sub` in `0, 1, 2`.
pub fn build_reduction(case_id: u8, sub: &str, params: &Params, branch: TimeBranch) -> Result<Reduction> {
    let equation = case_equation(case_id, params)?;
    let x1 = VectorField::d_t();
    let x2 = second_generator(case_id, params)?;
    let eps_prime = lit(branch.sign());
    let (ansatz, omega, reduced, subalgebra): (String, Option<String>, Reduced, Vec<VectorField>) =
        match (case_id, sub) {
            (4, "0") => {
                let (n, q, eps) = (lit(param(params, "n")?), lit(param(params, "q")?), lit(param(params, "eps")?));
                (
                    format!("C*x^(({q}+2)/{n})"),
                    None,
                    Reduced::Algebraic(ex(&format!(
                        "({q}+2)*({n}*{q}+{n}+{q}+2)*C^({n}+1) + {eps}*{n}^2*C"
                    ))?),
                    vec![x1, x2],
                )
            }
            (5, "0") => {
                let (n, eps) = (lit(param(params, "n")?), lit(param(params, "eps")?));
                (
                    format!("C*exp(x/{n})"),
                    None,
                    Reduced::Algebraic(ex(&format!("({n}+1)*C^({n}+1) + {eps}*{n}^2*C"))?),
                    vec![x1, x2],
                )
            }
            (6, "0") => {
                let (p, q, eps) = case6_params(params)?;
                let h = h1_closed_form(p, q, eps)?;
                (
                    format!("C*(x^2+{})^(-3/2)*({h})^(-3/4)", lit(p as f64)),
                    None,
                    Reduced::Algebraic(ex(&format!(
                        "C^(4/3) - 3/16*({}^2+16*{})",
                        lit(q),
                        lit(p as f64)
                    ))?),
                    vec![x1, x2],
                )
            }
            (4 | 5, "1") => {
                let n = param(params, "n")?;
                let eps = lit(param(params, "eps")?);
                let weight = if case_id == 4 {
                    format!("w^{}", lit(param(params, "q")?))
                } else {
                    "exp(w)".to_string()
                };
                if n == -1.0 {
                    let reduced = if case_id == 4 {
                        format!("phi_ww + {eps}*{weight}*exp(phi)")
                    } else {
                        format!("phi_ww + {eps}*exp(phi+w)")
                    };
                    ("exp(phi)".into(), Some("x".into()), Reduced::Ode(ex(&reduced)?), vec![x1])
                } else {
                    let n = lit(n);
                    (
                        format!("phi^(1/({n}+1))"),
                        Some("x".into()),
                        Reduced::Ode(ex(&format!("phi_ww + {eps}*({n}+1)*{weight}*phi^(1/({n}+1))"))?),
                        vec![x1],
                    )
                }
            }
            (4, "2") => {
                let n = nonzero(params, "n")?;
                let (nl, q, eps) = (lit(n), lit(nonzero(params, "q")?), lit(param(params, "eps")?));
                let flux = nonlinear_flux(n)?;
                (
                    format!("abs(t)^(-({q}+2)/({nl}*{q}))*phi"),
                    Some(format!("abs(t)^(1/{q})*x")),
                    Reduced::Ode(ex(&format!(
                        "{flux} + {eps}*w^{q}*phi + {eps_prime}*({q}+2)/({nl}*{q})*phi - {eps_prime}/{q}*w*phi_w"
                    ))?),
                    vec![x2],
                )
            }
            (5, "2") => {
                let n = nonzero(params, "n")?;
                let (nl, eps) = (lit(n), lit(param(params, "eps")?));
                let flux = nonlinear_flux(n)?;
                (
                    format!("abs(t)^(-1/{nl})*phi"),
                    Some("x + ln(abs(t))".into()),
                    Reduced::Ode(ex(&format!(
                        "{flux} + {eps}*exp(w)*phi + {eps_prime}/{nl}*phi - {eps_prime}*phi_w"
                    ))?),
                    vec![x2],
                )
            }
            (6, "1") => {
                let (p, q, eps) = case6_params(params)?;
                let hw = h1_closed_form(p, q, eps)?.subs("x", &crate::expr::sym("w"));
                ("phi^(-3)".into(), Some("x".into()), Reduced::Ode(ex(&format!("3*phi_ww - ({hw})*phi^(-3)"))?), vec![x1])
            }
            (6, "2") => {
                let (p, q, eps) = case6_params(params)?;
                let h = h1_closed_form(p, q, eps)?;
                let (pl, ql, el) = (lit(p as f64), lit(q), lit(eps));
                (
                    format!("((x^2+{pl})^(1/2)*({h})^(1/4)*phi)^(-3)"),
                    Some(format!("t*({h})")),
                    Reduced::Ode(ex(&format!(
                        "3*{ql}^2*w^2*phi_ww + 9/2*{ql}^2*w*phi_w - 3*phi^(-4)*phi_w + 3/16*({ql}^2+16*{pl})*phi - {el}*phi^(-3)"
                    ))?),
                    vec![x2],
                )
            }
            _ => {
                return Err(Error::Unsupported(format!(
                    "unknown reduction {case_id}.{sub}; available: 4.0-4.2, 5.0-5.2, 6.0-6.2"
                )))
            }
        };
    let branch = if matches!(sub, "2") && case_id != 6 { branch } else { TimeBranch::Positive };
    Ok(Reduction {
        label: format!("{case_id}.{sub}"),
        case_id,
        ansatz: ex(&ansatz)?,
        omega: omega.map(|w| ex(&w)).transpose()?,
        reduced,
        subalgebra,
        equation,
        branch,
    })
}

/// Exact solutions: `"4"`, `"5"`, `"6"` and `"nonclassical"`. Case 6 takes an
/// optional `sign` (default `+1`); the nonclassical solution takes `C`.
pub fn exact_solution(case: &str, params: &Params) -> Result<(FinEquation, Solution)> {
    match case {
        "4" => {
            let (n, q, eps) = (nonzero(params, "n")?, nonzero(params, "q")?, nonzero(params, "eps")?);
            let a = (q + 2.0) * (n * q + n + q + 2.0);
            if a == 0.0 {
                return Err(Error::Reality("(q+2)(nq+n+q+2) vanishes".into()));
            }
            let base = -a / (eps * n * n);
            let integral = (1.0 / n).fract() == 0.0;
            if base <= 0.0 && !integral {
                return Err(Error::Reality(format!(
                    "-(q+2)(nq+n+q+2)/(eps n^2) = {base} must be positive for the power -1/n"
                )));
            }
            let k = base.powf(-1.0 / n);
            let u = ex(&format!("{}*x^(({}+2)/{})", lit(k), lit(q), lit(n)))?;
            Ok((case_equation(4, params)?, Solution::new(u, "x > 0")))
        }
        "5" => {
            let (n, eps) = (nonzero(params, "n")?, nonzero(params, "eps")?);
            if n == -1.0 {
                return Err(Error::Reality("n + 1 = 0 leaves no nonzero constant".into()));
            }
            let base = -(n + 1.0) / (eps * n * n);
            if base <= 0.0 && (1.0 / n).fract() != 0.0 {
                return Err(Error::Reality(format!(
                    "-(n+1)/(eps n^2) = {base} must be positive for the power -1/n"
                )));
            }
            let k = base.powf(-1.0 / n);
            let u = ex(&format!("{}*exp(x/{})", lit(k), lit(n)))?;
            Ok((case_equation(5, params)?, Solution::new(u, "all x")))
        }
        "6" => {
            let (p, q, eps) = case6_params(params)?;
            let sign = params.get("sign").copied().unwrap_or(1.0);
            if sign != 1.0 && sign != -1.0 {
                return Err(Error::Precondition("sign must be +1 or -1".into()));
            }
            let disc = q * q + 16.0 * p as f64;
            if disc <= 0.0 {
                return Err(Error::Reality(format!("q^2 + 16p = {disc} must be positive")));
            }
            if eps < 0.0 {
                return Err(Error::Reality("h1 < 0 makes (h1)^(-3/4) complex; eps = -1 has no real solution of this form".into()));
            }
            let c = sign * 3f64.powf(0.75) / 8.0 * disc.powf(0.75);
            let h = h1_closed_form(p, q, eps)?;
            let u = ex(&format!("{}*(x^2+{})^(-3/2)*({h})^(-3/4)", lit(c), lit(p as f64)))?;
            let domain = if p == -1 { "x > 1" } else { "x > 0" };
            Ok((case_equation(6, params)?, Solution::new(u, domain)))
        }
        "nonclassical" => {
            let eq = FinEquation::new(
                CoefficientSpec::PowerU { n: -1.0 },
                CoefficientSpec::PowerX { q: 1.0, eps: 1.0 },
            );
            let s = Solution::new(ex("C*exp(t*x)")?, "C > 0").with_parameter("C", 1e-6, 1e6);
            match params.get("C") {
                Some(c) => Ok((eq, s.bind("C", *c)?)),
                None => Ok((eq, s)),
            }
        }
        other => Err(Error::Unsupported(format!(
            "exact solutions exist for 4, 5, 6, nonclassical; got `{other}`"
        ))),
    }
}

/// Nonzero real roots of an algebraic reduction, positive roots first.
pub fn solve_algebraic(r: &Reduction) -> Result<Vec<f64>> {
    let Reduced::Algebraic(e) = &r.reduced else {
        return Err(Error::Precondition(format!("{} is not algebraic", r.label)));
    };
    let f = |c: f64| -> Option<f64> {
        let v = e.eval_at(&[("C", c)]).ok()? / c;
        v.is_finite().then_some(v)
    };
    let mut roots: Vec<f64> = Vec::new();
    for sign in [1.0, -1.0] {
        let grid: Vec<f64> = (0..=1200).map(|i| sign * 10f64.powf(-6.0 + i as f64 * 0.01)).collect();
        for w in grid.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (Some(fa), Some(fb)) = (f(a), f(b)) else { continue };
            if fa == 0.0 {
                roots.push(a);
                continue;
            }
            if fa.signum() == fb.signum() {
                continue;
            }
            let (mut lo, mut hi, mut flo) = (a, b, fa);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid == lo || mid == hi {
                    break;
                }
                let Some(fm) = f(mid) else { break };
                if fm.signum() == flo.signum() {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
    }
    if roots.is_empty() {
        return Err(Error::Reality(format!("{}: no nonzero real root", r.label)));
    }
    Ok(roots)
}

/// The ansatz with the constant `C` fixed.
pub fn substitute_constant(r: &Reduction, c: f64) -> Expr {
    r.ansatz.bind(&[("C", c)]).simplify()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReductionReport {
    pub label: String,
    /// Largest relative spread of `R_pde / R_reduced` across test functions
    /// at a common point.
    pub max_deviation: f64,
    /// The ratio at the first point and test function.
    pub multiplier: f64,
    /// Whether that ratio is also the same at every point.
    pub constant_multiplier: bool,
    pub points: usize,
    pub passed: bool,
}

/// Random cubic `c0 + c1 w + c2 w^2 + c3 w^3`, shifted to stay above `0.5` on
/// the window.
fn test_cubic(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> [f64; 4] {
    let mut c = [0.0, rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
    let scale = lo.abs().max(hi.abs()).max(1.0);
    for (k, ck) in c.iter_mut().enumerate().skip(1) {
        *ck /= scale.powi(k as i32);
    }
    let min = (0..=400)
        .map(|i| lo + (hi - lo) * i as f64 / 400.0)
        .map(|w| c[1] * w + c[2] * w * w + c[3] * w * w * w)
        .fold(f64::INFINITY, f64::min);
    c[0] = 0.5 - min + rng.gen_range(0.0..1.0);
    c
}

fn cubic_expr(c: &[f64; 4], var: &Expr) -> Expr {
    let s = format!("{} + {}*w + {}*w^2 + {}*w^3", lit(c[0]), lit(c[1]), lit(c[2]), lit(c[3]));
    parse(&s).expect("cubic").subs("w", var)
}

fn cubic_jet(c: &[f64; 4], w: f64) -> (f64, f64, f64) {
    (
        c[0] + c[1] * w + c[2] * w * w + c[3] * w * w * w,
        c[1] + 2.0 * c[2] * w + 3.0 * c[3] * w * w,
        2.0 * c[2] + 6.0 * c[3] * w,
    )
}

fn x_range(eq: &FinEquation) -> (f64, f64) {
    match eq.h {
        CoefficientSpec::H1 { p: -1, .. } => (1.2, 3.0),
        _ => (0.5, 3.0),
    }
}

/// Value and scale (largest additive term) of `e` at `env`.
fn value_and_scale(e: &Expr, terms: &[Expr], env: &crate::expr::Bindings) -> Option<(f64, f64)> {
    let v = e.eval(env).ok()?;
    let scale = terms
        .iter()
        .map(|t| t.eval(env).map(f64::abs).unwrap_or(f64::NAN))
        .fold(0.0, f64::max);
    (v.is_finite() && scale.is_finite()).then_some((v, scale))
}

/// Ratio-constancy test of a reduction against `eq`.
pub fn verify_reduction(eq: &FinEquation, r: &Reduction, seed: u64, tol: f64) -> Result<ReductionReport> {
    let space = crate::expr::sample::SampleSpace::default();
    if !eq.same_coefficients(&r.equation, &space.clone().with("x", x_range(eq).0, x_range(eq).1), seed, 1e-9)? {
        return Err(Error::Precondition(format!(
            "{} belongs to `{}`, not `{eq}`",
            r.label, r.equation
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (tlo, thi) = r.branch.range();
    let (xlo, xhi) = x_range(eq);
    let grid: Vec<(f64, f64)> = (0..POINTS)
        .map(|_| (rng.gen_range(tlo..thi), rng.gen_range(xlo..xhi)))
        .collect();

    // test functions and the corresponding explicit u(t, x)
    let pde_of = |u: &Expr| eq.residual_of(u);
    let mut cases: Vec<(Expr, Box<dyn Fn(f64) -> crate::expr::Bindings>)> = Vec::new();
    match (&r.omega, &r.reduced) {
        (Some(omega), Reduced::Ode(_)) => {
            let ws: Vec<f64> = grid
                .iter()
                .filter_map(|&(t, x)| omega.eval_at(&[("t", t), ("x", x)]).ok())
                .filter(|w| w.is_finite())
                .collect();
            if ws.is_empty() {
                return Err(Error::Numerical(format!("{}: similarity variable is never finite", r.label)));
            }
            let (wlo, whi) = ws.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &w| (a.min(w), b.max(w)));
            for _ in 0..TEST_FUNCTIONS {
                let c = test_cubic(&mut rng, wlo, whi);
                let u = r.ansatz.subs("phi", &cubic_expr(&c, omega));
                let jet = move |w: f64| -> crate::expr::Bindings {
                    let (p, pw, pww) = cubic_jet(&c, w);
                    [("w", w), ("phi", p), ("phi_w", pw), ("phi_ww", pww)]
                        .into_iter()
                        .map(|(k, v)| (k.to_string(), v))
                        .collect()
                };
                cases.push((pde_of(&u), Box::new(jet)));
            }
        }
        (_, Reduced::Algebraic(_)) => {
            for _ in 0..TEST_FUNCTIONS {
                let c: f64 = rng.gen_range(0.5..2.0);
                let u = r.ansatz.bind(&[("C", c)]);
                let env = move |_: f64| -> crate::expr::Bindings { [("C".to_string(), c)].into_iter().collect() };
                cases.push((pde_of(&u.simplify()), Box::new(env)));
            }
        }
        _ => return Err(Error::Precondition(format!("{}: missing similarity variable", r.label))),
    }
    let (Reduced::Ode(red) | Reduced::Algebraic(red)) = &r.reduced;
    let red_terms = red.additive_terms();

    // For algebraic reductions the multiplier may depend on C; ratios are
    // then compared after dividing by their values at a reference point.
    let algebraic = matches!(r.reduced, Reduced::Algebraic(_));
    let mut reference: Option<Vec<f64>> = None;
    let mut max_dev: f64 = 0.0;
    let mut used = 0;
    let mut first: Option<f64> = None;
    let mut constant = true;
    for &(t, x) in &grid {
        let w = match &r.omega {
            Some(o) => match o.eval_at(&[("t", t), ("x", x)]) {
                Ok(w) if w.is_finite() => w,
                _ => continue,
            },
            None => 0.0,
        };
        let mut ratios = Vec::with_capacity(cases.len());
        for (pde, jet) in &cases {
            let pv = pde.eval_at(&[("t", t), ("x", x)]).ok().filter(|v| v.is_finite());
            let rv = value_and_scale(red, &red_terms, &jet(w));
            match (pv, rv) {
                (Some(p), Some((rv, scale))) if rv.abs() > 1e-8 * (1.0 + scale) => ratios.push(p / rv),
                _ => break,
            }
        }
        if ratios.len() != cases.len() {
            continue;
        }
        used += 1;
        let raw_first = ratios[0];
        if algebraic {
            let base = reference.get_or_insert_with(|| ratios.clone());
            if base.iter().any(|b| b.abs() < 1e-300) {
                continue;
            }
            for (r, b) in ratios.iter_mut().zip(base.iter()) {
                *r /= b;
            }
        }
        let big = ratios.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        if big > 1e-14 {
            let dev = ratios.iter().map(|r| (r - ratios[0]).abs()).fold(0.0, f64::max) / big;
            max_dev = max_dev.max(dev);
        }
        match first {
            None => first = Some(raw_first),
            Some(m) => {
                if (raw_first - m).abs() > tol * (1.0 + m.abs()) {
                    constant = false;
                }
            }
        }
    }
    if used == 0 {
        return Err(Error::Numerical(format!("{}: no admissible sample point", r.label)));
    }
    Ok(ReductionReport {
        label: r.label.clone(),
        max_deviation: max_dev,
        multiplier: first.unwrap_or(f64::NAN),
        constant_multiplier: constant,
        points: used,
        passed: max_dev <= tol,
    })
}

/// Largest value of `X(u - ansatz)` on the ansatz surface over random test
/// functions, relative to the size of its terms.
pub fn ansatz_invariance(r: &Reduction, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (tlo, thi) = r.branch.range();
    let (xlo, xhi) = x_range(&r.equation);
    let mut worst: f64 = 0.0;
    for _ in 0..TEST_FUNCTIONS {
        let u = match &r.omega {
            Some(o) => {
                let c = test_cubic(&mut rng, -10.0, 10.0);
                r.ansatz.subs("phi", &cubic_expr(&c, o))
            }
            None => r.ansatz.bind(&[("C", rng.gen_range(0.5..2.0))]),
        };
        for v in &r.subalgebra {
            let e = v.eta.subs("u", &u) - v.tau.clone() * u.diff("t") - v.xi.clone() * u.diff("x");
            let terms = e.additive_terms();
            for _ in 0..10 {
                let env: crate::expr::Bindings = [("t", rng.gen_range(tlo..thi)), ("x", rng.gen_range(xlo..xhi))]
                    .into_iter()
                    .map(|(k, v)| (k.to_string(), v))
                    .collect();
                if let Ok(rel) = crate::expr::sample::relative_value(&terms, &env) {
                    if rel.is_finite() {
                        worst = worst.max(rel);
                    }
                }
            }
        }
    }
    Ok(worst)
}

/// First-order form of the stationary Case 6 equation.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderReduction {
    /// `y` in terms of `w, phi`.
    pub y: Expr,
    /// `psi` in terms of `w, phi, phi_w`.
    pub psi: Expr,
    /// ODE in `y, psi, psi_y`.
    pub ode: Expr,
}

/// The variables `y, psi` use `|h1|^(-1/4)`, which is `h1^(-1/4)` for
/// `eps = 1`.
pub fn order_reduce_61(p: i8, q: f64, eps: f64) -> Result<OrderReduction> {
    let mut params = Params::new();
    params.insert("p".into(), p as f64);
    params.insert("q".into(), q);
    params.insert("eps".into(), eps);
    case6_params(&params)?;
    let habs = h1_closed_form(p, q, 1.0)?.subs("x", &crate::expr::sym("w"));
    let (pl, ql) = (lit(p as f64), lit(q));
    let g = format!("(w^2+{pl})^(-1/2)*({habs})^(-1/4)");
    Ok(OrderReduction {
        y: ex(&format!("{g}*phi"))?,
        psi: ex(&format!("{g}*((w^2+{pl})*phi_w - w*phi)"))?,
        ode: ex(&format!(
            "(4*psi - {ql}*y)*psi_y + {ql}*psi + 4*{pl}*y - 4/3*{}*y^(-3)",
            lit(eps)
        ))?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderReductionReport {
    /// Largest relative value of the first-order ODE on jets satisfying the
    /// second-order one.
    pub on_solutions: f64,
    /// Smallest relative value off that manifold (negative control).
    pub off_solutions: f64,
    pub passed: bool,
}

/// Fixes random `(w, phi, phi_w)`, sets `phi_ww` from the second-order equation,
/// pushes the jet through the change of variables and evaluates the
/// first-order ODE.
pub fn verify_order_reduction(p: i8, q: f64, eps: f64, seed: u64, tol: f64) -> Result<OrderReductionReport> {
    let red = order_reduce_61(p, q, eps)?;
    let deps = Dependencies::new().with("phi", &["w"]);
    let dy = red.y.diff_with("w", &deps);
    let dpsi = red.psi.diff_with("w", &deps);
    let h = h1_closed_form(p, q, eps)?.subs("x", &crate::expr::sym("w"));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (wlo, whi) = if p == -1 { (1.2, 3.0) } else { (0.5, 3.0) };
    let ode_terms = red.ode.additive_terms();
    let mut on: f64 = 0.0;
    let mut off = f64::INFINITY;
    let mut count = 0;
    for _ in 0..50 {
        let w: f64 = rng.gen_range(wlo..whi);
        let phi: f64 = rng.gen_range(0.5..2.0);
        let phi_w: f64 = rng.gen_range(-1.0..1.0);
        let hv = h.eval_at(&[("w", w)])?;
        for (shift, slot) in [(0.0, 0), (rng.gen_range(0.5..1.5), 1)] {
            let phi_ww = hv * phi.powi(-3) / 3.0 + shift;
            let env: crate::expr::Bindings = [("w", w), ("phi", phi), ("phi_w", phi_w), ("phi_ww", phi_ww)]
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect();
            let y = red.y.eval(&env)?;
            let psi = red.psi.eval(&env)?;
            let psi_y = dpsi.eval(&env)? / dy.eval(&env)?;
            let jet: crate::expr::Bindings = [("y", y), ("psi", psi), ("psi_y", psi_y)]
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect();
            let rel = crate::expr::sample::relative_value(&ode_terms, &jet)?;
            if !rel.is_finite() {
                continue;
            }
            if slot == 0 {
                on = on.max(rel);
                count += 1;
            } else {
                off = off.min(rel);
            }
        }
    }
    if count == 0 {
        return Err(Error::Numerical("order reduction: no admissible sample".into()));
    }
    Ok(OrderReductionReport {
        on_solutions: on,
        off_solutions: off,
        passed: on <= tol && off > tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::sample::{max_relative_residual, SampleSpace};

    fn params(pairs: &[(&str, f64)]) -> Params {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn run(case_id: u8, sub: &str, p: &[(&str, f64)]) -> ReductionReport {
        let r = build_reduction(case_id, sub, &params(p), TimeBranch::Positive).unwrap();
        verify_reduction(&r.equation.clone(), &r, 7, DEFAULT_TOL).unwrap()
    }

    #[test]
    fn printed_forms() {
        let r = build_reduction(4, "1", &params(&[("n", 2.0), ("q", 1.0), ("eps", 1.0)]), TimeBranch::Positive).unwrap();
        assert_eq!(r.ansatz.to_string(), "phi^(1/3)");
        assert_eq!(r.reduced.to_string(), "phi_ww + 3*w*phi^(1/3) = 0");
        let r = build_reduction(6, "0", &params(&[("p", 1.0), ("q", 1.0), ("eps", 1.0)]), TimeBranch::Positive).unwrap();
        assert_eq!(r.reduced.to_string(), "C^(4/3) - 3/16*17 = 0");
        assert!(build_reduction(4, "3", &params(&[("n", 2.0), ("q", 1.0), ("eps", 1.0)]), TimeBranch::Positive).is_err());
        assert!(build_reduction(4, "1", &params(&[("n", 0.0), ("q", 1.0), ("eps", 1.0)]), TimeBranch::Positive).is_err());
    }

    #[test]
    fn reductions_of_case_4_and_5() {
        for (c, s, p) in [
            (4, "1", vec![("n", 2.0), ("q", 1.0), ("eps", 1.0)]),
            (4, "1", vec![("n", -1.0), ("q", 2.0), ("eps", -1.0)]),
            (4, "2", vec![("n", 2.0), ("q", 1.0), ("eps", 1.0)]),
            (5, "1", vec![("n", 3.0), ("eps", 1.0)]),
            (5, "1", vec![("n", -1.0), ("eps", 1.0)]),
            (5, "2", vec![("n", 1.0), ("eps", 1.0)]),
            (4, "0", vec![("n", 1.0), ("q", 1.0), ("eps", -1.0)]),
            (5, "0", vec![("n", 2.0), ("eps", -1.0)]),
        ] {
            let rep = run(c, s, &p);
            assert!(rep.passed, "{c}.{s}: {rep:?}");
        }
    }

    #[test]
    fn negative_time_branch() {
        let p = params(&[("n", 2.0), ("q", 1.0), ("eps", 1.0)]);
        let r = build_reduction(4, "2", &p, TimeBranch::Negative).unwrap();
        assert!(verify_reduction(&r.equation.clone(), &r, 3, DEFAULT_TOL).unwrap().passed);
    }

    #[test]
    fn reductions_of_case_6() {
        let p = [("p", 1.0), ("q", 1.0), ("eps", 1.0)];
        assert!(run(6, "1", &p).passed);
        assert!(run(6, "0", &p).passed);
        assert!(run(6, "2", &p).passed);
        let mut r = build_reduction(6, "2", &params(&p), TimeBranch::Positive).unwrap();
        r.reduced = Reduced::Ode(
            ex("3*w^2*phi_ww + 9/2*w*phi_w + 3*phi^(-4)*phi_w + 3/16*17*phi - phi^(-3)").unwrap(),
        );
        assert!(!verify_reduction(&r.equation.clone(), &r, 7, DEFAULT_TOL).unwrap().passed);
    }

    #[test]
    fn corrupted_reduction_fails() {
        let p = params(&[("p", 1.0), ("q", 1.0), ("eps", 1.0)]);
        let mut r = build_reduction(6, "1", &p, TimeBranch::Positive).unwrap();
        let hw = h1_closed_form(1, 1.0, 1.0).unwrap().subs("x", &crate::expr::sym("w"));
        r.reduced = Reduced::Ode(ex(&format!("3*phi_ww + ({hw})*phi^(-3)")).unwrap());
        assert!(!verify_reduction(&r.equation.clone(), &r, 7, DEFAULT_TOL).unwrap().passed);
    }

    #[test]
    fn ansatzes_are_invariant() {
        for (c, s, p) in [
            (4, "0", vec![("n", 2.0), ("q", 1.0), ("eps", 1.0)]),
            (4, "2", vec![("n", 2.0), ("q", 1.0), ("eps", 1.0)]),
            (5, "2", vec![("n", 1.0), ("eps", 1.0)]),
            (6, "0", vec![("p", 1.0), ("q", 1.0), ("eps", 1.0)]),
            (6, "2", vec![("p", 1.0), ("q", 1.0), ("eps", 1.0)]),
        ] {
            let r = build_reduction(c, s, &params(&p), TimeBranch::Positive).unwrap();
            let worst = ansatz_invariance(&r, 5).unwrap();
            assert!(worst < 1e-9, "{c}.{s}: {worst}");
        }
    }

    #[test]
    fn exact_solutions_solve_their_equations() {
        for (case, p, expect) in [
            ("4", vec![("n", 1.0), ("q", 1.0), ("eps", -1.0)], Some("x^3/15")),
            ("5", vec![("n", 1.0), ("eps", -1.0)], Some("exp(x)/2")),
            ("6", vec![("p", 0.0), ("q", 4.0), ("eps", 1.0)], Some("3^(3/4)*x^(-3)*exp(3/x)")),
            ("6", vec![("p", 1.0), ("q", 1.0), ("eps", 1.0)], None),
            ("nonclassical", vec![("C", 2.0)], Some("2*exp(t*x)")),
        ] {
            let (eq, s) = exact_solution(case, &params(&p)).unwrap();
            let space = SampleSpace::default();
            if let Some(e) = expect {
                assert!(crate::expr::sample::equivalent(&s.u, &ex(e).unwrap(), &space, 1, 50, 1e-12).unwrap(), "{case}: {}", s.u);
            }
            let worst = max_relative_residual(&eq.residual_of(&s.u), &space, 3, 100).unwrap();
            assert!(worst <= 1e-10, "{case}: {worst}");
        }
    }

    #[test]
    fn reality_conditions() {
        assert!(matches!(exact_solution("4", &params(&[("n", 2.0), ("q", 1.0), ("eps", 1.0)])), Err(Error::Reality(_))));
        assert!(matches!(exact_solution("6", &params(&[("p", -1.0), ("q", 2.0), ("eps", 1.0)])), Err(Error::Reality(_))));
    }

    #[test]
    fn algebraic_chain() {
        for (c, p) in [
            (4, vec![("n", 1.0), ("q", 1.0), ("eps", -1.0)]),
            (5, vec![("n", 1.0), ("eps", -1.0)]),
            (6, vec![("p", 1.0), ("q", 1.0), ("eps", 1.0)]),
        ] {
            let pm = params(&p);
            let r = build_reduction(c, "0", &pm, TimeBranch::Positive).unwrap();
            let root = solve_algebraic(&r).unwrap()[0];
            let (_, s) = exact_solution(&c.to_string(), &pm).unwrap();
            let u = substitute_constant(&r, root);
            assert!(crate::expr::sample::equivalent(&u, &s.u, &SampleSpace::default(), 2, 50, 1e-12).unwrap());
        }
    }

    #[test]
    fn order_reduction() {
        let r = order_reduce_61(1, 1.0, 1.0).unwrap();
        assert_eq!(r.ode.to_string(), "(4*psi - y)*psi_y + psi + 4*y - 4/3*y^-3");
        let r = order_reduce_61(0, 2.0, -1.0).unwrap();
        assert_eq!(r.ode.to_string(), "(4*psi - 2*y)*psi_y + 2*psi + 4/3*y^-3");
        for (p, q, eps) in [(1, 1.0, 1.0), (0, 2.0, -1.0), (-1, 3.0, 1.0)] {
            let rep = verify_order_reduction(p, q, eps, 9, 1e-9).unwrap();
            assert!(rep.passed, "{p} {q} {eps}: {rep:?}");
        }
    }
}
