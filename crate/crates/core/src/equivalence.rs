//! Equivalence transformations of the class: the group `G~`, the
//! conditional groups for `D = u^(-4/3)` and `h = 0`, the generalized group
//! for constant `h`, and the additional maps between classification cases.
//!
//! A transformation acts by `t~ = T(t)`, `x~ = X(x)`, `u~ = A(t,x) u + B(t,x)`.
//! Inverse relations are stored with the new variables written `t, x, u`.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::expr::sample::{self, SampleSpace};
use crate::expr::{parse, Expr};
use crate::model::{is_neg_four_thirds, CoefficientSpec, FinEquation, Solution, VectorField};

const TAG_TOL: f64 = 1e-12;
const CHECK_SEED: u64 = 11;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GroupFamily {
    /// `G~`, five deltas.
    Gsim,
    /// Conditional group of `D = u^(-4/3)`: six deltas and the sign of `u~`.
    G1 { sign: f64 },
    /// Conditional group of `h = 0`, six deltas.
    G2,
    /// Generalized group of constant `h = c` with `D` homogeneous of degree
    /// `n`: the exponential reparametrization followed by a `G~` element.
    G3 { c: f64, n: f64 },
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Gsim([f64; 5]),
    G1([f64; 6], f64),
    G2([f64; 6]),
    G3([f64; 5], f64, f64),
    G3Inverse([f64; 5], f64, f64),
    Case8(f64),
}

/// Subclass on which a transformation is an equivalence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Condition {
    None,
    /// `D = u^(-4/3)`
    MinusFourThirds,
    /// `h = 0`
    ZeroSource,
    /// `h = c` with `D` homogeneous of degree `n`
    ConstantSource { c: f64, n: f64 },
    /// `h = 0` with `D` homogeneous of degree `n`
    ZeroSourceHomogeneous { n: f64 },
    /// `D = (u+1)^-1`, `h = eps`
    ReciprocalShift { eps: f64 },
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::None => f.write_str("none"),
            Condition::MinusFourThirds => f.write_str("D = u^(-4/3)"),
            Condition::ZeroSource => f.write_str("h = 0"),
            Condition::ConstantSource { c, n } => {
                write!(f, "h constant (h = {c}, D homogeneous of degree {n})")
            }
            Condition::ZeroSourceHomogeneous { n } => {
                write!(f, "h = 0, D homogeneous of degree {n}")
            }
            Condition::ReciprocalShift { eps } => write!(f, "D = (u + 1)^-1, h = {eps}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointTransformation {
    pub label: String,
    kind: Kind,
    pub t_new: Expr,
    pub x_new: Expr,
    /// `A(t, x)` in `u~ = A u + B`.
    pub u_factor: Expr,
    /// `B(t, x)` in `u~ = A u + B`.
    pub u_shift: Expr,
    /// `t` as a function of the new `t`.
    pub t_old: Expr,
    /// `x` as a function of the new `x`.
    pub x_old: Expr,
    /// `u` as a function of the new `(t, x, u)`.
    pub u_old: Expr,
    pub condition: Condition,
    pub domain: String,
}

/// Result of acting on an equation.
#[derive(Debug, Clone, PartialEq)]
pub enum Transformed {
    InClass(FinEquation),
    OutsideClass { equation: String },
}

impl Transformed {
    pub fn in_class(self) -> Result<FinEquation> {
        match self {
            Transformed::InClass(eq) => Ok(eq),
            Transformed::OutsideClass { equation } => Err(Error::Unsupported(format!(
                "the image `{equation}` is not in the class of fin equations"
            ))),
        }
    }
}

fn lit(v: f64) -> String {
    format!("({v})")
}

fn ex(text: &str) -> Expr {
    parse(text)
        .unwrap_or_else(|e| panic!("internal expression `{text}`: {e}"))
        .simplify()
}

fn nonzero(name: &str, v: f64) -> Result<()> {
    if v == 0.0 || !v.is_finite() {
        return Err(Error::Precondition(format!("{name} must be finite and nonzero, got {v}")));
    }
    Ok(())
}

fn deltas<const N: usize>(d: &[f64]) -> Result<[f64; N]> {
    let arr: [f64; N] = d.try_into().map_err(|_| {
        Error::Precondition(format!("expected {N} deltas, got {}", d.len()))
    })?;
    if arr.iter().any(|v| !v.is_finite()) {
        return Err(Error::Precondition("deltas must be finite".into()));
    }
    Ok(arr)
}

/// Builds an element of one of the groups from its parameters.
pub fn make_group_element(family: GroupFamily, d: &[f64]) -> Result<PointTransformation> {
    match family {
        GroupFamily::Gsim => {
            let d = deltas::<5>(d)?;
            nonzero("delta1*delta3*delta5", d[0] * d[2] * d[4])?;
            Ok(build(Kind::Gsim(d), "Gsim"))
        }
        GroupFamily::G1 { sign } => {
            let d = deltas::<6>(d)?;
            if d[0] <= 0.0 {
                return Err(Error::Precondition("G1 requires delta1 > 0".into()));
            }
            let det = d[2] * d[5] - d[3] * d[4];
            if (det.abs() - 1.0).abs() > 1e-12 {
                return Err(Error::Precondition(format!(
                    "G1 requires delta3*delta6 - delta4*delta5 = +1 or -1, got {det}"
                )));
            }
            if sign != 1.0 && sign != -1.0 {
                return Err(Error::Precondition("G1 sign must be +1 or -1".into()));
            }
            Ok(build(Kind::G1(d, sign), "G1"))
        }
        GroupFamily::G2 => {
            let d = deltas::<6>(d)?;
            nonzero("delta1*delta3*delta5", d[0] * d[2] * d[4])?;
            Ok(build(Kind::G2(d), "G2"))
        }
        GroupFamily::G3 { c, n } => {
            let d = deltas::<5>(d)?;
            nonzero("delta1*delta3*delta5", d[0] * d[2] * d[4])?;
            nonzero("h*n", c * n)?;
            Ok(build(Kind::G3(d, c, n), "G3"))
        }
    }
}

/// The generalized-group element for the constant source of `eq`.
pub fn g3_for(eq: &FinEquation, d: &[f64]) -> Result<PointTransformation> {
    let c = eq
        .constant_source()
        .ok_or_else(|| Error::ConditionViolated("G3 needs a constant source".into()))?;
    let n = homogeneity_degree(&eq.diffusion()).ok_or_else(|| {
        Error::ConditionViolated("G3 needs a homogeneous diffusion coefficient".into())
    })?;
    make_group_element(GroupFamily::G3 { c, n }, d)
}

fn build(kind: Kind, label: &str) -> PointTransformation {
    let (t_new, x_new, a, b, t_old, x_old, condition, domain) = match &kind {
        Kind::Gsim(d) => {
            let [d1, d2, d3, d4, d5] = d.map(lit);
            (
                format!("{d1}*t + {d2}"),
                format!("{d3}*x + {d4}"),
                d5,
                "0".to_string(),
                format!("(t - {d2})/{d1}"),
                format!("(x - {d4})/{d3}"),
                Condition::None,
                "all (t, x, u)".to_string(),
            )
        }
        Kind::G2(d) => {
            let [d1, d2, d3, d4, d5, d6] = d.map(lit);
            (
                format!("{d1}*t + {d2}"),
                format!("{d3}*x + {d4}"),
                d5,
                d6,
                format!("(t - {d2})/{d1}"),
                format!("(x - {d4})/{d3}"),
                Condition::ZeroSource,
                "all (t, x, u)".to_string(),
            )
        }
        Kind::G1(d, sign) => {
            let [d1, d2, d3, d4, d5, d6] = d.map(lit);
            let pole = if d[4] == 0.0 {
                "all (t, x, u)".to_string()
            } else {
                format!("x != {}", -d[5] / d[4])
            };
            (
                format!("{d1}*t + {d2}"),
                format!("({d3}*x + {d4})/({d5}*x + {d6})"),
                format!("{}*{d1}^(3/4)*({d5}*x + {d6})^3", lit(*sign)),
                "0".to_string(),
                format!("(t - {d2})/{d1}"),
                format!("({d6}*x - {d4})/({d3} - {d5}*x)"),
                Condition::MinusFourThirds,
                pole,
            )
        }
        Kind::G3(d, c, n) => {
            let [d1, d2, d3, d4, d5] = d.map(lit);
            let cn = lit(c * n);
            let cl = lit(*c);
            (
                format!("{d1}*exp({cn}*t)/{cn} + {d2}"),
                format!("{d3}*x + {d4}"),
                format!("{d5}*exp(-{cl}*t)"),
                "0".to_string(),
                format!("ln({cn}*(t - {d2})/{d1})/{cn}"),
                format!("(x - {d4})/{d3}"),
                Condition::ConstantSource { c: *c, n: *n },
                "all (t, x, u)".to_string(),
            )
        }
        Kind::G3Inverse(d, c, n) => {
            let [d1, d2, d3, d4, d5] = d.map(lit);
            let cn = lit(c * n);
            (
                format!("ln({cn}*(t - {d2})/{d1})/{cn}"),
                format!("(x - {d4})/{d3}"),
                format!("({cn}*(t - {d2})/{d1})^(1/{})/{d5}", lit(*n)),
                "0".to_string(),
                format!("{d1}*exp({cn}*t)/{cn} + {d2}"),
                format!("{d3}*x + {d4}"),
                Condition::ZeroSourceHomogeneous { n: *n },
                format!("{cn}*(t - {d2})/{d1} > 0"),
            )
        }
        Kind::Case8(eps) => {
            let e = lit(*eps);
            (
                format!("-exp(-{e}*t)/{e}"),
                "x".to_string(),
                format!("exp(-{e}*t)"),
                format!("exp(-{e}*t)"),
                format!("-ln(-{e}*t)/{e}"),
                "x".to_string(),
                Condition::ReciprocalShift { eps: *eps },
                "all (t, x, u)".to_string(),
            )
        }
    };
    let (t_new, x_new, u_factor, u_shift) = (ex(&t_new), ex(&x_new), ex(&a), ex(&b));
    let (t_old, x_old) = (ex(&t_old), ex(&x_old));
    let mut back = BTreeMap::new();
    back.insert("t".to_string(), t_old.clone());
    back.insert("x".to_string(), x_old.clone());
    let u_old = ((crate::expr::sym("u") - u_shift.substitute(&back)) / u_factor.substitute(&back))
        .simplify();
    PointTransformation {
        label: label.to_string(),
        kind,
        t_new,
        x_new,
        u_factor,
        u_shift,
        t_old,
        x_old,
        u_old,
        condition,
        domain,
    }
}

/// `n` such that `u D'(u) = n D(u)` at every sample, if any.
pub fn homogeneity_degree(d: &Expr) -> Option<f64> {
    let dd = d.diff("u");
    let space = SampleSpace::empty().with("u", 0.5, 3.0);
    let pts = space.points_with(&[d, &dd], &["u"], CHECK_SEED, 20).ok()?;
    let ratio = |env: &crate::expr::Bindings| -> Option<f64> {
        let u = env["u"];
        Some(u * dd.eval(env).ok()? / d.eval(env).ok()?)
    };
    let n = ratio(&pts[0])?;
    pts.iter()
        .all(|env| ratio(env).is_some_and(|r| (r - n).abs() <= 1e-9 * (1.0 + n.abs())))
        .then_some(snap(n))
}

fn snap(v: f64) -> f64 {
    let twelfths = (v * 12.0).round() / 12.0;
    if (v - twelfths).abs() < 1e-9 {
        if (twelfths * 3.0).fract() == 0.0 || twelfths.fract() == 0.0 {
            return twelfths;
        }
        if is_neg_four_thirds(v) {
            return crate::model::NEG_FOUR_THIRDS;
        }
        twelfths
    } else {
        v
    }
}

impl PointTransformation {
    pub fn inverse(&self) -> Result<PointTransformation> {
        let label = format!("{}^-1", self.label);
        Ok(match &self.kind {
            Kind::Gsim([d1, d2, d3, d4, d5]) => build(
                Kind::Gsim([1.0 / d1, -d2 / d1, 1.0 / d3, -d4 / d3, 1.0 / d5]),
                &label,
            ),
            Kind::G2([d1, d2, d3, d4, d5, d6]) => build(
                Kind::G2([1.0 / d1, -d2 / d1, 1.0 / d3, -d4 / d3, 1.0 / d5, -d6 / d5]),
                &label,
            ),
            Kind::G1([d1, d2, d3, d4, d5, d6], sign) => {
                let det = d3 * d6 - d4 * d5;
                build(
                    Kind::G1(
                        [1.0 / d1, -d2 / d1, d6 / det, -d4 / det, -d5 / det, d3 / det],
                        *sign,
                    ),
                    &label,
                )
            }
            Kind::G3(d, c, n) => build(Kind::G3Inverse(*d, *c, *n), &label),
            Kind::G3Inverse(d, c, n) => build(Kind::G3(*d, *c, *n), &label),
            Kind::Case8(_) => {
                return Err(Error::Unsupported(
                    "the Case 8 map leaves the class; its inverse acts outside it".into(),
                ))
            }
        })
    }

    fn back_substitution(&self) -> BTreeMap<String, Expr> {
        let mut m = BTreeMap::new();
        m.insert("t".to_string(), self.t_old.clone());
        m.insert("x".to_string(), self.x_old.clone());
        m.insert("u".to_string(), self.u_old.clone());
        m
    }

    /// `u~ = A u + B` as an expression in `(t, x, u)`.
    pub fn u_new(&self) -> Expr {
        (self.u_factor.clone() * crate::expr::sym("u") + self.u_shift.clone()).simplify()
    }
}

impl fmt::Display for PointTransformation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "t~ = {}, x~ = {}, u~ = {}",
            self.t_new,
            self.x_new,
            self.u_new()
        )
    }
}

/// Relative closeness used when deciding whether a family tag survives.
fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TAG_TOL * (1.0 + b.abs())
}

fn source_x_range(h: &CoefficientSpec) -> (f64, f64) {
    match h {
        CoefficientSpec::H1 { p: -1, .. } => (1.2, 3.0),
        _ => (0.5, 3.0),
    }
}

fn agrees(a: &Expr, b: &Expr, var: &str, lo: f64, hi: f64) -> bool {
    let space = SampleSpace::empty().with(var, lo, hi);
    sample::equivalent(a, b, &space, CHECK_SEED, sample::DEFAULT_TRIALS, 1e-9).unwrap_or(false)
}

/// `+1` if `D = u^(-4/3)` on `u > 0`, `-1` if `D = (-u)^(-4/3)` on `u < 0`.
fn minus_four_thirds_branch(d: &CoefficientSpec) -> Option<f64> {
    match d {
        CoefficientSpec::PowerU { n } | CoefficientSpec::ShiftedPowerU { n, alpha: 0.0 }
            if is_neg_four_thirds(*n) =>
        {
            Some(1.0)
        }
        CoefficientSpec::Free { expr } => {
            if agrees(expr, &ex("u^(-4/3)"), "u", 0.5, 3.0) {
                Some(1.0)
            } else if agrees(expr, &ex("(-u)^(-4/3)"), "u", -3.0, -0.5) {
                Some(-1.0)
            } else {
                None
            }
        }
        _ => None,
    }
}

fn is_zero_source(eq: &FinEquation) -> bool {
    eq.constant_source() == Some(0.0)
}

fn check_condition(cond: Condition, eq: &FinEquation) -> Result<()> {
    let ok = match cond {
        Condition::None => true,
        Condition::MinusFourThirds => minus_four_thirds_branch(&eq.d).is_some(),
        Condition::ZeroSource => is_zero_source(eq),
        Condition::ConstantSource { c, n } => {
            eq.constant_source().is_some_and(|h| close(h, c))
                && homogeneity_degree(&eq.diffusion()).is_some_and(|m| close(m, n))
        }
        Condition::ZeroSourceHomogeneous { n } => {
            is_zero_source(eq) && homogeneity_degree(&eq.diffusion()).is_some_and(|m| close(m, n))
        }
        Condition::ReciprocalShift { eps } => {
            agrees(&eq.diffusion(), &ex("(u+1)^(-1)"), "u", 0.5, 3.0)
                && eq.constant_source().is_some_and(|h| close(h, eps))
        }
    };
    if ok {
        Ok(())
    } else {
        Err(Error::ConditionViolated(format!(
            "the transformation requires {cond}, got {eq}"
        )))
    }
}

/// `D~(u) = factor * D((u - shift)/scale)`.
fn compose_diffusion(d: &CoefficientSpec, factor: f64, scale: f64, shift: f64) -> CoefficientSpec {
    use CoefficientSpec::*;
    let shifted = match d {
        PowerU { n } => Some((*n, 0.0, false)),
        ShiftedPowerU { n, alpha } => Some((*n, *alpha, false)),
        ReciprocalShift => Some((-1.0, 1.0, true)),
        _ => None,
    };
    if let Some((n, alpha, reciprocal)) = shifted {
        let alpha_new = scale * alpha - shift;
        if scale > 0.0 && close(factor * scale.powf(-n), 1.0) {
            if close(alpha_new, 0.0) {
                return PowerU { n };
            }
            if close(alpha_new, 1.0) {
                return if reciprocal { ReciprocalShift } else { ShiftedPowerU { n, alpha: 1.0 } };
            }
        }
    }
    if *d == ExpU && scale == 1.0 && close(factor * (-shift).exp(), 1.0) {
        return ExpU;
    }
    let arg = ex(&format!("(u - {})/{}", lit(shift), lit(scale)));
    let body = d.to_expr().subs("u", &arg);
    Free {
        expr: (crate::expr::num(factor) * body).simplify(),
    }
}

/// `h~(x) = factor * h(a x + b)` when closed in the family.
fn affine_source(h: &CoefficientSpec, factor: f64, a: f64, b: f64) -> Option<CoefficientSpec> {
    use CoefficientSpec::*;
    if factor == 1.0 && a == 1.0 && b == 0.0 {
        return Some(h.clone());
    }
    match h {
        ConstantH { c } => Some(ConstantH { c: factor * c }),
        PowerX { q, eps } if b == 0.0 && (a > 0.0 || q.fract() == 0.0) => Some(PowerX {
            q: *q,
            eps: factor * eps * a.powf(*q),
        }),
        InverseSquareX if b == 0.0 => {
            let k = factor * a.powi(-2);
            Some(if close(k, 1.0) { InverseSquareX } else { PowerX { q: -2.0, eps: k } })
        }
        ExpX { eps } if a == 1.0 => Some(ExpX {
            eps: factor * eps * b.exp(),
        }),
        _ => None,
    }
}

/// Looks for a constant, exponential or power law through the samples.
fn recognize_source(e: &Expr, xs: &[f64]) -> Option<CoefficientSpec> {
    let vals: Vec<f64> = xs.iter().map(|&x| e.eval_at(&[("x", x)]).ok()).collect::<Option<_>>()?;
    if vals.len() < 2 || vals.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let fits = |model: &dyn Fn(f64) -> f64| {
        xs.iter()
            .zip(&vals)
            .all(|(&x, &v)| (model(x) - v).abs() <= 1e-9 * (1.0 + v.abs()))
    };
    let (x0, v0) = (xs[0], vals[0]);
    if fits(&|_| v0) {
        return Some(CoefficientSpec::ConstantH { c: v0 });
    }
    let eps = v0 * (-x0).exp();
    if fits(&|x| eps * x.exp()) {
        return Some(CoefficientSpec::ExpX { eps });
    }
    let (x1, v1) = (xs[xs.len() - 1], vals[vals.len() - 1]);
    if xs.iter().all(|&x| x > 0.0) && vals.iter().all(|v| v.signum() == v0.signum() && *v != 0.0) {
        let q = snap((v1 / v0).ln() / (x1 / x0).ln());
        let eps = v0 / x0.powf(q);
        if q != 0.0 && fits(&|x| eps * x.powf(q)) {
            return Some(CoefficientSpec::PowerX { q, eps });
        }
    }
    None
}

impl PointTransformation {
    fn transform_source(&self, h: &CoefficientSpec, factor: f64) -> CoefficientSpec {
        if let Kind::Gsim([_, _, d3, d4, _]) = &self.kind {
            if let Some(spec) = affine_source(h, factor, 1.0 / d3, -d4 / d3) {
                return spec;
            }
        }
        let expr = (crate::expr::num(factor) * h.to_expr().subs("x", &self.x_old)).simplify();
        if matches!(h, CoefficientSpec::Free { .. }) {
            return CoefficientSpec::Free { expr };
        }
        let (lo, hi) = source_x_range(h);
        let xs: Vec<f64> = (0..24)
            .map(|i| lo + (hi - lo) * i as f64 / 23.0)
            .filter_map(|x| self.x_new.eval_at(&[("x", x)]).ok())
            .filter(|x| x.is_finite())
            .collect();
        recognize_source(&expr, &xs).unwrap_or(CoefficientSpec::Free { expr })
    }
}

/// Rewrites the arbitrary elements of `eq` under `t`.
pub fn apply_to_equation(t: &PointTransformation, eq: &FinEquation) -> Result<Transformed> {
    check_condition(t.condition, eq)?;
    let zero = CoefficientSpec::ConstantH { c: 0.0 };
    let (d, h) = match &t.kind {
        Kind::Gsim([d1, _, d3, _, d5]) => (
            compose_diffusion(&eq.d, d3 * d3 / d1, *d5, 0.0),
            t.transform_source(&eq.h, 1.0 / d1),
        ),
        Kind::G2([d1, _, d3, _, d5, d6]) => (compose_diffusion(&eq.d, d3 * d3 / d1, *d5, *d6), zero),
        Kind::G1([d1, ..], sign) => {
            let branch = minus_four_thirds_branch(&eq.d).unwrap_or(1.0) * sign;
            let d = if branch > 0.0 {
                CoefficientSpec::PowerU {
                    n: crate::model::NEG_FOUR_THIRDS,
                }
            } else {
                CoefficientSpec::Free {
                    expr: ex("(-u)^(-4/3)"),
                }
            };
            (d, t.transform_source(&eq.h, 1.0 / d1))
        }
        Kind::G3([d1, _, d3, _, d5], ..) => (compose_diffusion(&eq.d, d3 * d3 / d1, *d5, 0.0), zero),
        Kind::G3Inverse([d1, _, d3, _, d5], c, _) => (
            compose_diffusion(&eq.d, d1 / (d3 * d3), 1.0 / d5, 0.0),
            CoefficientSpec::ConstantH { c: *c },
        ),
        Kind::Case8(eps) => {
            let tail = if *eps >= 0.0 {
                format!("- {eps}")
            } else {
                format!("+ {}", -eps)
            };
            return Ok(Transformed::OutsideClass {
                equation: format!("u_t = (u^(-1)*u_x)_x {tail}"),
            });
        }
    };
    Ok(Transformed::InClass(FinEquation::new(d, h)))
}

/// Image of a generator under `t`, written in the new variables.
pub fn push_forward_field(t: &PointTransformation, v: &VectorField) -> VectorField {
    let u = crate::expr::sym("u");
    let tau = v.tau.clone() * t.t_new.diff("t");
    let xi = v.xi.clone() * t.x_new.diff("x");
    let eta = v.tau.clone() * (t.u_factor.diff("t") * u.clone() + t.u_shift.diff("t"))
        + v.xi.clone() * (t.u_factor.diff("x") * u + t.u_shift.diff("x"))
        + v.eta.clone() * t.u_factor.clone();
    let back = t.back_substitution();
    VectorField::new(
        tau.substitute(&back).simplify(),
        xi.substitute(&back).simplify(),
        eta.substitute(&back).simplify(),
    )
}

/// Image of a solution under `t`, written in the new variables.
pub fn push_forward_solution(t: &PointTransformation, s: &Solution) -> Solution {
    let mut back = t.back_substitution();
    back.remove("u");
    let image = t.u_new().subs("u", &s.u).substitute(&back).simplify();
    Solution {
        u: image,
        parameters: s.parameters.clone(),
        domain: format!("image of ({}) under {}", s.domain, t.label),
    }
}

/// Named additional maps between classification cases.
pub const ADDITIONAL_MAPS: [&str; 7] = [
    "6p0-to-5",
    "6pm1-to-4",
    "11a-to-11",
    "13a-to-13",
    "10-to-11",
    "12-to-13",
    "case8-out",
];

#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Case { case_id: u8, params: BTreeMap<String, f64> },
    OutsideClass { equation: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdditionalEquivalence {
    pub label: &'static str,
    pub source_case: u8,
    pub transform: PointTransformation,
    pub target: Target,
}

fn need(params: &BTreeMap<String, f64>, name: &str, label: &str) -> Result<f64> {
    params
        .get(name)
        .copied()
        .ok_or_else(|| Error::Precondition(format!("map {label} needs parameter `{name}`")))
}

fn target(case_id: u8, params: &[(&str, f64)]) -> Target {
    Target::Case {
        case_id,
        params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
    }
}

/// Builds the named map from the source case parameters. Constant-source
/// maps read `c` when present and fall back to `eps`.
pub fn additional_map(label: &str, params: &BTreeMap<String, f64>) -> Result<AdditionalEquivalence> {
    let n43 = crate::model::NEG_FOUR_THIRDS;
    let (label, source_case, transform, tgt) = match label {
        "6p0-to-5" => {
            let q = need(params, "q", label)?;
            let eps = need(params, "eps", label)?;
            nonzero("q", q)?;
            let r = q.abs().sqrt();
            let mut t = make_group_element(GroupFamily::G1 { sign: 1.0 }, &[1.0, 0.0, 0.0, -q / r, 1.0 / r, 0.0])?;
            t.label = "6p0-to-5".into();
            ("6p0-to-5", 6, t, target(5, &[("n", n43), ("eps", eps)]))
        }
        "6pm1-to-4" => {
            let q = need(params, "q", label)?;
            let eps = need(params, "eps", label)?;
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let mut t = make_group_element(GroupFamily::G1 { sign: 1.0 }, &[1.0, 0.0, s, -s, s, s])?;
            t.label = "6pm1-to-4".into();
            t.domain = "x > 1".into();
            ("6pm1-to-4", 6, t, target(4, &[("n", n43), ("q", q / 2.0), ("eps", eps)]))
        }
        "11a-to-11" | "13a-to-13" => {
            let alpha = params.get("alpha").copied().unwrap_or(1.0);
            let mut t = make_group_element(GroupFamily::G2, &[1.0, 0.0, 1.0, 0.0, 1.0, alpha])?;
            if label == "11a-to-11" {
                let n = need(params, "n", label)?;
                t.label = "11a-to-11".into();
                ("11a-to-11", 11, t, target(11, &[("alpha", 0.0), ("n", n)]))
            } else {
                t.label = "13a-to-13".into();
                ("13a-to-13", 13, t, target(13, &[("alpha", 0.0)]))
            }
        }
        "10-to-11" | "12-to-13" => {
            let c = match params.get("c") {
                Some(c) => *c,
                None => need(params, "eps", label)?,
            };
            let identity = [1.0, 0.0, 1.0, 0.0, 1.0];
            if label == "10-to-11" {
                let n = need(params, "n", label)?;
                let mut t = make_group_element(GroupFamily::G3 { c, n }, &identity)?;
                t.label = "10-to-11".into();
                ("10-to-11", 10, t, target(11, &[("alpha", 0.0), ("n", n)]))
            } else {
                let mut t = make_group_element(GroupFamily::G3 { c, n: n43 }, &identity)?;
                t.label = "12-to-13".into();
                ("12-to-13", 12, t, target(13, &[("alpha", 0.0)]))
            }
        }
        "case8-out" => {
            let eps = match params.get("c") {
                Some(c) => *c,
                None => need(params, "eps", label)?,
            };
            nonzero("eps", eps)?;
            let t = build(Kind::Case8(eps), "case8-out");
            let Transformed::OutsideClass { equation } =
                apply_to_equation(&t, &FinEquation::new(CoefficientSpec::ReciprocalShift, CoefficientSpec::ConstantH { c: eps }))?
            else {
                unreachable!("the Case 8 map always leaves the class")
            };
            ("case8-out", 8, t, Target::OutsideClass { equation })
        }
        other => {
            return Err(Error::Unsupported(format!(
                "unknown additional map `{other}`; known maps: {}",
                ADDITIONAL_MAPS.join(", ")
            )))
        }
    };
    Ok(AdditionalEquivalence {
        label,
        source_case,
        transform,
        target: tgt,
    })
}

/// The additional map whose source is the given classification case.
pub fn additional_equivalence(case_id: u8, params: &BTreeMap<String, f64>) -> Result<AdditionalEquivalence> {
    let alpha = params.get("alpha").copied().unwrap_or(0.0);
    let label = match case_id {
        6 => match params.get("p").copied() {
            Some(p) if p == 0.0 => "6p0-to-5",
            Some(p) if p == -1.0 => "6pm1-to-4",
            Some(p) if p == 1.0 => {
                return Err(Error::Unsupported(
                    "complex field only: Case 6 with p = 1 reduces to Case 4 only over the complex field".into(),
                ))
            }
            _ => return Err(Error::Precondition("Case 6 needs p in {-1, 0, 1}".into())),
        },
        11 if alpha != 0.0 => "11a-to-11",
        13 if alpha != 0.0 => "13a-to-13",
        10 => "10-to-11",
        12 => "12-to-13",
        8 => "case8-out",
        _ => {
            return Err(Error::Unsupported(format!(
                "no additional equivalence transformation starts at case {case_id}"
            )))
        }
    };
    additional_map(label, params)
}

/// Classifies `eq`, checks it is the source of `label`, and builds the map
/// with the equation's own constants.
pub fn additional_map_for(label: &str, eq: &FinEquation) -> Result<AdditionalEquivalence> {
    let class = crate::classify::classify(eq)?;
    let mut params = class.params.clone();
    if let Some(c) = eq.constant_source() {
        params.insert("c".into(), c);
    }
    let map = additional_map(label, &params)?;
    let p_ok = match label {
        "6p0-to-5" => class.param("p") == Some(0.0),
        "6pm1-to-4" => class.param("p") == Some(-1.0),
        "11a-to-11" | "13a-to-13" => class.param("alpha").is_some_and(|a| a != 0.0),
        _ => true,
    };
    if class.case_id != map.source_case || !p_ok {
        return Err(Error::ConditionViolated(format!(
            "map {label} starts at case {}, the equation is case {}",
            map.source_case,
            class.label()
        )));
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::classify;
    use crate::model::NEG_FOUR_THIRDS;
    use CoefficientSpec::*;

    fn at(e: &Expr, vals: &[(&str, f64)]) -> f64 {
        e.eval_at(vals).unwrap()
    }

    fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn gsim_time_scaling() {
        let t = make_group_element(GroupFamily::Gsim, &[2.0, 0.0, 1.0, 0.0, 1.0]).unwrap();
        assert_eq!(t.t_new.to_string(), "2*t");
        let eq = FinEquation::new(PowerU { n: 2.0 }, InverseSquareX);
        let out = apply_to_equation(&t, &eq).unwrap().in_class().unwrap();
        assert!(agrees(&out.diffusion(), &ex("u^2/2"), "u", 0.5, 3.0));
        assert_eq!(out.h, PowerX { q: -2.0, eps: 0.5 });
    }

    #[test]
    fn gsim_identity() {
        let t = make_group_element(GroupFamily::Gsim, &[1.0, 0.0, 1.0, 0.0, 1.0]).unwrap();
        assert_eq!(t.to_string(), "t~ = t, x~ = x, u~ = u");
        let eq = FinEquation::new(ExpU, ExpX { eps: -1.0 });
        assert_eq!(apply_to_equation(&t, &eq).unwrap(), Transformed::InClass(eq));
    }

    #[test]
    fn g1_inversion_element() {
        let t = make_group_element(GroupFamily::G1 { sign: 1.0 }, &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(t.x_new.to_string(), "1/x");
        assert!((at(&t.u_new(), &[("x", 2.0), ("u", 3.0)]) - 24.0).abs() < 1e-12);
        assert_eq!(t.condition.to_string(), "D = u^(-4/3)");
        let bad = FinEquation::new(PowerU { n: 2.0 }, ConstantH { c: 1.0 });
        assert!(matches!(apply_to_equation(&t, &bad), Err(Error::ConditionViolated(_))));
    }

    #[test]
    fn group_constraints() {
        assert!(make_group_element(GroupFamily::Gsim, &[0.0, 0.0, 1.0, 0.0, 1.0]).is_err());
        assert!(make_group_element(GroupFamily::Gsim, &[1.0, 0.0, 1.0]).is_err());
        assert!(make_group_element(GroupFamily::G1 { sign: 1.0 }, &[1.0, 0.0, 2.0, 0.0, 0.0, 1.0]).is_err());
        assert!(make_group_element(GroupFamily::G1 { sign: 1.0 }, &[-1.0, 0.0, 1.0, 0.0, 0.0, 1.0]).is_err());
        let g2 = make_group_element(GroupFamily::G2, &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0]).unwrap();
        let with_source = FinEquation::new(PowerU { n: 2.0 }, ConstantH { c: 1.0 });
        assert!(apply_to_equation(&g2, &with_source).is_err());
    }

    #[test]
    fn map_6p0_to_5() {
        let m = additional_equivalence(6, &params(&[("p", 0.0), ("q", -1.0), ("eps", 1.0)])).unwrap();
        assert_eq!(m.transform.x_new.to_string(), "1/x");
        assert!((at(&m.transform.u_new(), &[("x", 2.0), ("u", 1.0)]) - 8.0).abs() < 1e-12);
        for q in [-1.0, 2.0] {
            let eq = FinEquation::new(PowerU { n: NEG_FOUR_THIRDS }, H1 { p: 0, q, eps: 1.0 });
            let m = additional_equivalence(6, &params(&[("p", 0.0), ("q", q), ("eps", 1.0)])).unwrap();
            let out = apply_to_equation(&m.transform, &eq).unwrap().in_class().unwrap();
            let c = classify(&out).unwrap();
            assert_eq!(Target::Case { case_id: c.case_id, params: c.params }, m.target);
        }
    }

    #[test]
    fn map_10_to_11() {
        let m = additional_equivalence(10, &params(&[("n", 2.0), ("eps", 1.0)])).unwrap();
        assert!((at(&m.transform.t_new, &[("t", 0.5)]) - 0.5 * 1f64.exp()).abs() < 1e-12);
        assert!((at(&m.transform.u_new(), &[("t", 1.0), ("u", 1.0)]) - (-1f64).exp()).abs() < 1e-12);
        let eq = FinEquation::new(PowerU { n: 2.0 }, ConstantH { c: 1.0 });
        let out = apply_to_equation(&m.transform, &eq).unwrap().in_class().unwrap();
        assert_eq!(out, FinEquation::new(PowerU { n: 2.0 }, ConstantH { c: 0.0 }));
        let back = apply_to_equation(&m.transform.inverse().unwrap(), &out).unwrap();
        assert_eq!(back, Transformed::InClass(eq));
    }

    #[test]
    fn case_6_p1_is_unavailable() {
        let err = additional_equivalence(6, &params(&[("p", 1.0), ("q", 1.0), ("eps", 1.0)])).unwrap_err();
        assert!(err.to_string().contains("complex field only"));
        assert!(additional_equivalence(4, &params(&[])).is_err());
    }

    #[test]
    fn case_8_leaves_the_class() {
        let m = additional_equivalence(8, &params(&[("eps", 1.0)])).unwrap();
        assert_eq!(
            m.target,
            Target::OutsideClass {
                equation: "u_t = (u^(-1)*u_x)_x - 1".into()
            }
        );
        assert!(m.transform.inverse().is_err());
    }

    #[test]
    fn shift_maps() {
        let m = additional_equivalence(11, &params(&[("alpha", 1.0), ("n", 3.0)])).unwrap();
        let eq = FinEquation::new(ShiftedPowerU { n: 3.0, alpha: 1.0 }, ConstantH { c: 0.0 });
        let out = apply_to_equation(&m.transform, &eq).unwrap().in_class().unwrap();
        assert_eq!(out.d, PowerU { n: 3.0 });
    }

    #[test]
    fn solution_push_forward() {
        let t = make_group_element(GroupFamily::Gsim, &[1.0, 0.0, 1.0, 0.0, 2.0]).unwrap();
        let s = Solution::new(ex("x^3/15"), "x > 0");
        let image = push_forward_solution(&t, &s);
        assert!(agrees(&image.u, &ex("2*x^3/15"), "x", 0.5, 3.0));
        let id = make_group_element(GroupFamily::Gsim, &[1.0, 0.0, 1.0, 0.0, 1.0]).unwrap();
        assert!(agrees(&push_forward_solution(&id, &s).u, &s.u, "x", 0.5, 3.0));
    }

    #[test]
    fn field_push_forward_under_scaling() {
        let t = make_group_element(GroupFamily::Gsim, &[2.0, 0.0, 3.0, 0.0, 5.0]).unwrap();
        let v = VectorField::from_strs("t", "x", "u").unwrap();
        let w = push_forward_field(&t, &v);
        let env = [("t", 1.3), ("x", 0.7), ("u", 1.1)];
        assert!((at(&w.tau, &env) - 1.3).abs() < 1e-12);
        assert!((at(&w.xi, &env) - 0.7).abs() < 1e-12);
        assert!((at(&w.eta, &env) - 1.1).abs() < 1e-12);
    }

    #[test]
    fn homogeneity() {
        assert_eq!(homogeneity_degree(&ex("3*u^2")), Some(2.0));
        assert_eq!(homogeneity_degree(&ex("u^(-4/3)")), Some(NEG_FOUR_THIRDS));
        assert_eq!(homogeneity_degree(&ex("u^2 + 1")), None);
    }
}
