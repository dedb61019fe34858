//! Group classification: map an equation to its row of the classification
//! table and instantiate the basis of its maximal Lie invariance algebra.

use std::collections::BTreeMap;

use serde::ser::SerializeStruct;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::sample::SampleSpace;
use crate::expr::{self, num, parse, Expr};
use crate::model::{is_neg_four_thirds, json_number, CoefficientSpec, FinEquation, VectorField};

pub const DEFAULT_SEED: u64 = 42;
const FIT_SAMPLES: usize = 50;
const FIT_TOL: f64 = 1e-8;

/// Closed form of `h1 = eps exp(int q/(x^2+p) dx)` for each `p`.
pub fn h1_closed_form(p: i8, q: f64, eps: f64) -> Result<Expr> {
    let body = match p {
        -1 => format!("abs((x-1)/(x+1))^({q}/2)"),
        0 => format!("exp(-{q}/x)"),
        1 => format!("exp({q}*arctan(x))"),
        _ => {
            return Err(Error::Precondition(format!(
                "h1 is defined for p in {{-1, 0, 1}}, got {p}"
            )))
        }
    };
    if q == 0.0 {
        return Err(Error::Precondition("h1 requires q != 0".into()));
    }
    Ok(expr::mul(num(eps), parse(&body)?.simplify()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationResult {
    pub case_id: u8,
    pub params: BTreeMap<String, f64>,
    pub basis: Vec<VectorField>,
    pub note: Option<String>,
}

impl ClassificationResult {
    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.get(name).copied()
    }

    /// Case label with its sub-annotation, e.g. `6(p=0)` or `11(alpha=1)`.
    pub fn label(&self) -> String {
        match self.case_id {
            6 => format!("6(p={})", self.param("p").unwrap_or(f64::NAN)),
            11 | 13 => format!("{}(alpha={})", self.case_id, self.param("alpha").unwrap_or(0.0)),
            c => c.to_string(),
        }
    }
}

impl Serialize for ClassificationResult {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let params: serde_json::Map<String, serde_json::Value> = self
            .params
            .iter()
            .map(|(k, v)| (k.clone(), json_number(*v)))
            .collect();
        let mut st = s.serialize_struct("ClassificationResult", 4)?;
        st.serialize_field("case", &self.case_id)?;
        st.serialize_field("params", &params)?;
        st.serialize_field("basis", &self.basis)?;
        st.serialize_field("note", &self.note)?;
        st.end()
    }
}

/// Normalized diffusion shape. A positive constant factor never changes the
/// generators, so free specs of the form `k F(u)` match `F`.
#[derive(Debug, Clone, Copy, PartialEq)]
enum DShape {
    Power { n: f64 },
    /// `(u + 1)^n`
    Shifted { n: f64 },
    Exp,
    Arbitrary,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum HShape {
    Constant { c: f64 },
    Power { q: f64, eps: f64 },
    Exp { eps: f64 },
    H1 { p: i8, q: f64, eps: f64 },
    Arbitrary,
}

pub fn classify(eq: &FinEquation) -> Result<ClassificationResult> {
    classify_with_seed(eq, DEFAULT_SEED)
}

pub fn classify_with_seed(eq: &FinEquation, seed: u64) -> Result<ClassificationResult> {
    let eq = eq.validate()?;
    let mut notes = Vec::new();
    let d = diffusion_shape(&eq.d, seed, &mut notes)?;
    let h = source_shape(&eq.h, seed, &mut notes)?;
    let mut params = BTreeMap::new();
    let dt = VectorField::d_t();
    let dx = VectorField::d_x();
    let field = |tau: String, xi: String, eta: String| -> Result<VectorField> {
        VectorField::from_strs(&tau, &xi, &eta).map(|v| {
            VectorField::new(v.tau.simplify(), v.xi.simplify(), v.eta.simplify())
        })
    };
    let dilation = || field("2*t".into(), "x".into(), "0".into());
    let const_note = |c: f64, notes: &mut Vec<String>| {
        if c.abs() != 1.0 {
            notes.push(format!(
                "h = {c} normalized to eps = {} by the equivalence scaling t -> {}*t; generators are given in the original variables",
                c.signum(),
                c.abs()
            ));
        }
    };

    let (case_id, basis) = match (d, h) {
        (DShape::Shifted { n }, HShape::Constant { c }) if n == -1.0 && c != 0.0 => {
            const_note(c, &mut notes);
            params.insert("eps".into(), c.signum());
            let x3 = field(
                format!("exp({c}*t)"),
                "0".into(),
                format!("{c}*exp({c}*t)*(u+1)"),
            )?;
            (8, vec![dt, dx, x3])
        }
        (DShape::Exp, HShape::Constant { c }) if c == 0.0 => {
            let x4 = field("0".into(), "x".into(), "2".into())?;
            (9, vec![dt, dx, dilation()?, x4])
        }
        (DShape::Power { n }, HShape::Constant { c }) if c != 0.0 => {
            const_note(c, &mut notes);
            params.insert("eps".into(), c.signum());
            if is_neg_four_thirds(n) {
                let x3 = field(
                    format!("exp(4/3*{c}*t)"),
                    "0".into(),
                    format!("{c}*exp(4/3*{c}*t)*u"),
                )?;
                let x4 = field("0".into(), "2*x".into(), "-3*u".into())?;
                let x5 = field("0".into(), "x^2".into(), "-3*x*u".into())?;
                (12, vec![dt, dx, x3, x4, x5])
            } else {
                params.insert("n".into(), n);
                let x3 = field(
                    format!("exp(-{c}*{n}*t)"),
                    "0".into(),
                    format!("{c}*exp(-{c}*{n}*t)*u"),
                )?;
                let x4 = field("0".into(), format!("{n}*x"), "2*u".into())?;
                (10, vec![dt, dx, x3, x4])
            }
        }
        (DShape::Power { n } | DShape::Shifted { n }, HShape::Constant { c }) if c == 0.0 => {
            let alpha = if matches!(d, DShape::Shifted { .. }) { 1.0 } else { 0.0 };
            params.insert("alpha".into(), alpha);
            let w = format!("(u+{alpha})");
            if is_neg_four_thirds(n) {
                let x4 = field("0".into(), "2*x".into(), format!("-3*{w}"))?;
                let x5 = field("0".into(), "x^2".into(), format!("-3*x*{w}"))?;
                (13, vec![dt, dx, dilation()?, x4, x5])
            } else {
                params.insert("n".into(), n);
                let x4 = field("0".into(), format!("{n}*x"), format!("2*{w}"))?;
                (11, vec![dt, dx, dilation()?, x4])
            }
        }
        (DShape::Power { n }, HShape::Power { q, eps }) if q != 0.0 => {
            params.insert("n".into(), n);
            params.insert("q".into(), q);
            params.insert("eps".into(), eps.signum());
            if eps.abs() != 1.0 {
                notes.push(format!(
                    "eps = {eps} normalized to {} by the equivalence scaling of t",
                    eps.signum()
                ));
            }
            let x2 = field(
                format!("-{q}*{n}*t"),
                format!("{n}*x"),
                format!("({q}+2)*u"),
            )?;
            (4, vec![dt, x2])
        }
        (DShape::Power { n }, HShape::Exp { eps }) => {
            params.insert("n".into(), n);
            params.insert("eps".into(), eps.signum());
            if eps.abs() != 1.0 {
                notes.push(format!(
                    "eps = {eps} normalized to {} by the equivalence scaling of t",
                    eps.signum()
                ));
            }
            let x2 = field(format!("-{n}*t"), format!("{n}"), "u".into())?;
            (5, vec![dt, x2])
        }
        (DShape::Power { n }, HShape::H1 { p, q, eps }) if is_neg_four_thirds(n) => {
            params.insert("p".into(), p as f64);
            params.insert("q".into(), q);
            params.insert("eps".into(), eps.signum());
            if eps.abs() != 1.0 {
                notes.push(format!(
                    "h1 factor {eps} normalized to {} by the equivalence scaling of t",
                    eps.signum()
                ));
            }
            let x2 = field(
                format!("-4*{q}*t"),
                format!("4*(x^2+{p})"),
                format!("-3*(4*x+{q})*u"),
            )?;
            (6, vec![dt, x2])
        }
        (_, HShape::Constant { c }) if c == 0.0 => (7, vec![dt, dx, dilation()?]),
        (_, HShape::Constant { c }) => {
            params.insert("eps".into(), c.signum());
            const_note(c, &mut notes);
            (2, vec![dt, dx])
        }
        (_, HShape::Power { q, .. }) if q == -2.0 => (3, vec![dt, dilation()?]),
        _ => (1, vec![dt]),
    };

    Ok(ClassificationResult {
        case_id,
        params,
        basis,
        note: if notes.is_empty() {
            None
        } else {
            Some(notes.join("; "))
        },
    })
}

fn diffusion_shape(spec: &CoefficientSpec, seed: u64, notes: &mut Vec<String>) -> Result<DShape> {
    use CoefficientSpec::*;
    Ok(match spec {
        PowerU { n } => DShape::Power { n: *n },
        ShiftedPowerU { n, alpha } if *alpha == 0.0 => DShape::Power { n: *n },
        ShiftedPowerU { n, .. } => DShape::Shifted { n: *n },
        ReciprocalShift => DShape::Shifted { n: -1.0 },
        ExpU => DShape::Exp,
        Free { expr } => {
            let shape = fit_diffusion(expr, seed)?;
            if let Some((shape, k)) = shape {
                notes.push(format!(
                    "free D matched {} with factor {}",
                    describe_d(shape),
                    snap(k)
                ));
                shape
            } else {
                DShape::Arbitrary
            }
        }
        _ => DShape::Arbitrary,
    })
}

fn describe_d(shape: DShape) -> String {
    match shape {
        DShape::Power { n } => format!("u^{n}"),
        DShape::Shifted { n } => format!("(u+1)^{n}"),
        DShape::Exp => "exp(u)".into(),
        DShape::Arbitrary => "arbitrary".into(),
    }
}

fn source_shape(spec: &CoefficientSpec, seed: u64, notes: &mut Vec<String>) -> Result<HShape> {
    use CoefficientSpec::*;
    Ok(match spec {
        ConstantH { c } => HShape::Constant { c: *c },
        PowerX { q, eps } if *q == 0.0 => HShape::Constant { c: *eps },
        PowerX { q, eps } => HShape::Power { q: *q, eps: *eps },
        InverseSquareX => HShape::Power { q: -2.0, eps: 1.0 },
        ExpX { eps } => HShape::Exp { eps: *eps },
        H1 { p, q, eps } => HShape::H1 {
            p: *p,
            q: *q,
            eps: *eps,
        },
        Free { expr } => {
            let shape = fit_source(expr, seed)?;
            if shape != HShape::Arbitrary {
                notes.push(format!("free h matched {shape:?}"));
            }
            shape
        }
        _ => HShape::Arbitrary,
    })
}

/// Rounds fitted values that sit within 1e-9 of an integer or of -4/3.
fn snap(v: f64) -> f64 {
    if (v - v.round()).abs() < 1e-9 {
        v.round()
    } else if is_neg_four_thirds_loose(v) {
        crate::model::NEG_FOUR_THIRDS
    } else {
        v
    }
}

fn is_neg_four_thirds_loose(v: f64) -> bool {
    (v - crate::model::NEG_FOUR_THIRDS).abs() < 1e-9
}

struct Samples {
    at: Vec<f64>,
    values: Vec<f64>,
}

fn sample(e: &Expr, var: &str, lo: f64, hi: f64, seed: u64) -> Result<Option<Samples>> {
    let space = SampleSpace::empty().with(var, lo, hi);
    let pts = match space.points_with(&[e], &[var], seed, FIT_SAMPLES) {
        Ok(p) => p,
        Err(crate::expr::ExprError::NoAdmissibleSample) => return Ok(None),
        Err(err) => return Err(err.into()),
    };
    let mut s = Samples {
        at: Vec::new(),
        values: Vec::new(),
    };
    for env in &pts {
        s.at.push(env[var]);
        s.values.push(e.eval(env)?);
    }
    Ok(Some(s))
}

fn max_rel_error(s: &Samples, model: impl Fn(f64) -> f64) -> f64 {
    s.at.iter()
        .zip(&s.values)
        .map(|(&v, &f)| (f - model(v)).abs() / f.abs().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

/// Least-squares fit of `ln|f| = a + b ln(v + shift)`; returns `(k, b)` with
/// `f ~ k (v+shift)^b` when the relative residual is below the threshold.
fn fit_power_law(s: &Samples, shift: f64) -> Option<(f64, f64)> {
    let sign = s.values[0].signum();
    if sign == 0.0 || s.values.iter().any(|v| v.signum() != sign) {
        return None;
    }
    let zs: Vec<f64> = s.at.iter().map(|v| (v + shift).ln()).collect();
    let ys: Vec<f64> = s.values.iter().map(|v| v.abs().ln()).collect();
    let m = zs.len() as f64;
    let (mz, my) = (zs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let szz: f64 = zs.iter().map(|z| (z - mz).powi(2)).sum();
    if szz == 0.0 {
        return None;
    }
    let szy: f64 = zs.iter().zip(&ys).map(|(z, y)| (z - mz) * (y - my)).sum();
    let b = snap(szy / szz);
    let k = sign * (my - b * mz).exp();
    let k = if (k - k.round()).abs() < 1e-9 { k.round() } else { k };
    (max_rel_error(s, |v| k * (v + shift).powf(b)) <= FIT_TOL).then_some((k, b))
}

fn fit_diffusion(e: &Expr, seed: u64) -> Result<Option<(DShape, f64)>> {
    let Some(s) = sample(e, "u", 0.5, 3.0, seed)? else {
        return Ok(None);
    };
    if let Some((k, n)) = fit_power_law(&s, 0.0) {
        if k > 0.0 && n != 0.0 {
            return Ok(Some((DShape::Power { n }, k)));
        }
    }
    if let Some((k, n)) = fit_power_law(&s, 1.0) {
        if k > 0.0 && n != 0.0 {
            return Ok(Some((DShape::Shifted { n }, k)));
        }
    }
    let k = s.values[0] / s.at[0].exp();
    if k > 0.0 && max_rel_error(&s, |v| k * v.exp()) <= FIT_TOL {
        return Ok(Some((DShape::Exp, k)));
    }
    Ok(None)
}

fn fit_source(e: &Expr, seed: u64) -> Result<HShape> {
    let Some(s) = sample(e, "x", 0.5, 3.0, seed)? else {
        return Ok(HShape::Arbitrary);
    };
    let c = s.values[0];
    let constant = s
        .values
        .iter()
        .all(|v| (v - c).abs() <= FIT_TOL * (1.0 + c.abs()));
    if constant {
        return Ok(HShape::Constant { c: snap(c) });
    }
    if let Some((eps, q)) = fit_power_law(&s, 0.0) {
        return Ok(HShape::Power { q, eps });
    }
    let k = c / s.at[0].exp();
    if k != 0.0 && max_rel_error(&s, |v| k * v.exp()) <= FIT_TOL {
        return Ok(HShape::Exp { eps: snap(k) });
    }
    let slope = e.diff("x");
    for p in [1i8, 0, -1] {
        let lo = if p == -1 { 1.2 } else { 0.5 };
        let Some(s) = sample(e, "x", lo, 3.0, seed ^ 0x5eed)? else {
            continue;
        };
        let pf = p as f64;
        let mut qs = Vec::with_capacity(s.at.len());
        for (&x, &h) in s.at.iter().zip(&s.values) {
            let dh = slope.eval_at(&[("x", x)])?;
            qs.push(dh / h * (x * x + pf));
        }
        let q = snap(qs[0]);
        if q == 0.0 || !q.is_finite() {
            continue;
        }
        if qs.iter().any(|v| (v - q).abs() > FIT_TOL * (1.0 + q.abs())) {
            continue;
        }
        let base = h1_closed_form(p, q, 1.0)?;
        let k = s.values[0] / base.eval_at(&[("x", s.at[0])])?;
        let k = snap(k);
        let fits = s.at.iter().zip(&s.values).all(|(&x, &h)| {
            base.eval_at(&[("x", x)])
                .map(|b| (h - k * b).abs() <= FIT_TOL * h.abs())
                .unwrap_or(false)
        });
        if fits {
            return Ok(HShape::H1 { p, q, eps: k });
        }
    }
    Ok(HShape::Arbitrary)
}
