//! Fin equations `u_t = (D(u) u_x)_x + h(x) u` and the objects attached to them.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::classify::h1_closed_form;
use crate::error::{Error, Result};
use crate::expr::sample::SampleSpace;
use crate::expr::{self, mul, num, parse, sym, Expr};

/// The exponent singled out by the classification.
pub const NEG_FOUR_THIRDS: f64 = -4.0 / 3.0;
const SPECIAL_EXPONENT_TOL: f64 = 1e-12;

pub fn is_neg_four_thirds(n: f64) -> bool {
    (n - NEG_FOUR_THIRDS).abs() <= SPECIAL_EXPONENT_TOL
}

/// Diffusion (`D(u)`) or source (`h(x)`) coefficient.
#[derive(Debug, Clone, PartialEq)]
pub enum CoefficientSpec {
    /// `D = u^n`
    PowerU { n: f64 },
    /// `D = (u + alpha)^n`, `alpha` in {0, 1}
    ShiftedPowerU { n: f64, alpha: f64 },
    /// `D = e^u`
    ExpU,
    /// `D = (u + 1)^-1`
    ReciprocalShift,
    /// `h = eps x^q`
    PowerX { q: f64, eps: f64 },
    /// `h = eps e^x`
    ExpX { eps: f64 },
    /// `h = x^-2`
    InverseSquareX,
    /// `h = c`
    ConstantH { c: f64 },
    /// `h = eps exp(int q/(x^2+p) dx)` in closed form
    H1 { p: i8, q: f64, eps: f64 },
    Free { expr: Expr },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpecKind {
    Diffusion,
    Source,
}

impl fmt::Display for SpecKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpecKind::Diffusion => "D(u)",
            SpecKind::Source => "h(x)",
        })
    }
}

impl CoefficientSpec {
    pub fn free(text: &str) -> Result<Self> {
        Ok(CoefficientSpec::Free { expr: parse(text)? })
    }

    /// Whether the spec may stand in the given slot.
    pub fn fits(&self, kind: SpecKind) -> bool {
        use CoefficientSpec::*;
        match self {
            PowerU { .. } | ShiftedPowerU { .. } | ExpU | ReciprocalShift => {
                kind == SpecKind::Diffusion
            }
            PowerX { .. } | ExpX { .. } | InverseSquareX | ConstantH { .. } | H1 { .. } => {
                kind == SpecKind::Source
            }
            Free { expr } => {
                let var = match kind {
                    SpecKind::Diffusion => "u",
                    SpecKind::Source => "x",
                };
                expr.symbols().iter().all(|s| s == var)
            }
        }
    }

    /// The coefficient as an expression in `u` (diffusion) or `x` (source).
    pub fn to_expr(&self) -> Expr {
        use CoefficientSpec::*;
        match self {
            PowerU { n } => expr::pow(sym("u"), num(*n)),
            ShiftedPowerU { n, alpha } => expr::pow(sym("u") + num(*alpha), num(*n)),
            ExpU => expr::exp(sym("u")),
            ReciprocalShift => expr::pow(sym("u") + num(1.0), num(-1.0)),
            PowerX { q, eps } => mul(num(*eps), expr::pow(sym("x"), num(*q))),
            ExpX { eps } => mul(num(*eps), expr::exp(sym("x"))),
            InverseSquareX => expr::pow(sym("x"), num(-2.0)),
            ConstantH { c } => num(*c),
            H1 { p, q, eps } => {
                h1_closed_form(*p, *q, *eps).expect("validated h1 parameters")
            }
            Free { expr } => expr.clone(),
        }
    }

    fn check_params(&self) -> Result<()> {
        use CoefficientSpec::*;
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidSpec(format!("{name} must be finite")))
            }
        };
        match self {
            PowerU { n } | ShiftedPowerU { n, .. } => {
                finite("n", *n)?;
                if *n == 0.0 {
                    return Err(Error::InvalidSpec("n = 0 gives a linear equation".into()));
                }
                if let ShiftedPowerU { alpha, .. } = self {
                    if *alpha != 0.0 && *alpha != 1.0 {
                        return Err(Error::InvalidSpec("alpha must be 0 or 1".into()));
                    }
                }
            }
            PowerX { q, eps } => {
                finite("q", *q)?;
                finite("eps", *eps)?;
                if *eps == 0.0 {
                    return Err(Error::InvalidSpec("eps must be nonzero".into()));
                }
            }
            ExpX { eps } => {
                finite("eps", *eps)?;
                if *eps == 0.0 {
                    return Err(Error::InvalidSpec("eps must be nonzero".into()));
                }
            }
            ConstantH { c } => finite("c", *c)?,
            H1 { p, q, eps } => {
                if !(-1..=1).contains(p) {
                    return Err(Error::InvalidSpec("h1 requires p in {-1, 0, 1}".into()));
                }
                finite("q", *q)?;
                if *q == 0.0 {
                    return Err(Error::InvalidSpec("h1 requires q != 0".into()));
                }
                if *eps != 1.0 && *eps != -1.0 {
                    return Err(Error::InvalidSpec("h1 requires eps = +1 or -1".into()));
                }
            }
            ExpU | ReciprocalShift | InverseSquareX | Free { .. } => {}
        }
        Ok(())
    }
}

/// One member of the class of fin equations.
#[derive(Debug, Clone, PartialEq)]
pub struct FinEquation {
    pub d: CoefficientSpec,
    pub h: CoefficientSpec,
}

impl FinEquation {
    pub fn new(d: CoefficientSpec, h: CoefficientSpec) -> Self {
        Self { d, h }
    }

    /// Checks class membership and returns the equation unchanged.
    pub fn validate(&self) -> Result<FinEquation> {
        if !self.d.fits(SpecKind::Diffusion) {
            return Err(Error::InvalidSpec(format!(
                "{:?} cannot be used as {}",
                self.d,
                SpecKind::Diffusion
            )));
        }
        if !self.h.fits(SpecKind::Source) {
            return Err(Error::InvalidSpec(format!(
                "{:?} cannot be used as {}",
                self.h,
                SpecKind::Source
            )));
        }
        self.d.check_params()?;
        self.h.check_params()?;
        if let CoefficientSpec::Free { expr } = &self.d {
            let dd = expr.diff("u");
            let space = SampleSpace::empty().with("u", 0.5, 3.0);
            let pts = space.points_with(&[expr, &dd], &["u"], 20, 20)?;
            let mut varies = false;
            for env in &pts {
                let (d, slope) = (expr.eval(env)?, dd.eval(env)?);
                if slope.abs() > 1e-12 * (1.0 + d.abs()) {
                    varies = true;
                }
            }
            if !varies {
                return Err(Error::LinearCase);
            }
        }
        Ok(self.clone())
    }

    pub fn diffusion(&self) -> Expr {
        self.d.to_expr()
    }

    /// `u_t - (D(u) u_x)_x - h u` for an explicit `u(t, x)`.
    pub fn residual_of(&self, u: &Expr) -> Expr {
        let ux = u.diff("x");
        let flux = self.diffusion().subs("u", u) * ux;
        u.diff("t") - flux.diff("x") - self.source() * u.clone()
    }

    pub fn source(&self) -> Expr {
        self.h.to_expr()
    }

    /// `Some(c)` when `h` is the constant `c`, decided by a randomized test of
    /// `h' = 0` for free specs.
    pub fn constant_source(&self) -> Option<f64> {
        match &self.h {
            CoefficientSpec::ConstantH { c } => Some(*c),
            CoefficientSpec::PowerX { q, eps } if *q == 0.0 => Some(*eps),
            CoefficientSpec::Free { expr } => {
                let space = SampleSpace::empty().with("x", 0.5, 3.0);
                let slope = expr.diff("x");
                let pts = space.points_with(&[expr, &slope], &["x"], 3, 20).ok()?;
                let c = expr.eval(&pts[0]).ok()?;
                let constant = pts.iter().all(|env| {
                    slope.eval(env).map(|s| s.abs() <= 1e-12 * (1.0 + c.abs())).unwrap_or(false)
                });
                constant.then_some(c)
            }
            _ => None,
        }
    }

    /// Functional equality of coefficients at randomized points.
    pub fn same_coefficients(
        &self,
        other: &FinEquation,
        space: &SampleSpace,
        seed: u64,
        tol: f64,
    ) -> Result<bool> {
        let d = expr::sample::equivalent(
            &self.diffusion(),
            &other.diffusion(),
            space,
            seed,
            expr::sample::DEFAULT_TRIALS,
            tol,
        )?;
        let h = expr::sample::equivalent(
            &self.source(),
            &other.source(),
            space,
            seed.wrapping_add(1),
            expr::sample::DEFAULT_TRIALS,
            tol,
        )?;
        Ok(d && h)
    }
}

impl fmt::Display for FinEquation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "u_t = (({})*u_x)_x + ({})*u", self.diffusion(), self.source())
    }
}

/// Generator `tau d_t + xi d_x + eta d_u`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub tau: Expr,
    pub xi: Expr,
    pub eta: Expr,
}

impl VectorField {
    pub fn new(tau: Expr, xi: Expr, eta: Expr) -> Self {
        Self { tau, xi, eta }
    }

    /// Parses three coefficient expressions.
    pub fn from_strs(tau: &str, xi: &str, eta: &str) -> Result<Self> {
        Ok(Self::new(parse(tau)?, parse(xi)?, parse(eta)?))
    }

    /// Parses the command-line form `tau; xi; eta`.
    pub fn parse_components(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(';').collect();
        if parts.len() != 3 {
            return Err(Error::Precondition(format!(
                "a vector field needs three `;`-separated coefficients, got {}",
                parts.len()
            )));
        }
        Self::from_strs(parts[0], parts[1], parts[2])
    }

    /// Parses operator notation such as `-6*t*d_t + 2*x*d_x + 5*u*d_u`.
    /// Coefficients are read off as derivatives with respect to `d_t`,
    /// `d_x`, `d_u`.
    pub fn parse_operator(text: &str) -> Result<Self> {
        let e = parse(text)?;
        let tau = e.diff("d_t");
        let xi = e.diff("d_x");
        let eta = e.diff("d_u");
        for c in [&tau, &xi, &eta] {
            if c.symbols().iter().any(|s| s.starts_with("d_")) {
                return Err(Error::Precondition(format!(
                    "`{text}` is not linear in d_t, d_x, d_u"
                )));
            }
        }
        Ok(Self::new(tau, xi, eta))
    }

    pub fn d_t() -> Self {
        Self::new(num(1.0), num(0.0), num(0.0))
    }

    pub fn d_x() -> Self {
        Self::new(num(0.0), num(1.0), num(0.0))
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::new(
            mul(num(c), self.tau.clone()),
            mul(num(c), self.xi.clone()),
            mul(num(c), self.eta.clone()),
        )
    }

    pub fn plus(&self, other: &VectorField) -> Self {
        Self::new(
            self.tau.clone() + other.tau.clone(),
            self.xi.clone() + other.xi.clone(),
            self.eta.clone() + other.eta.clone(),
        )
    }

    /// Divides every coefficient by `tau`.
    pub fn normalized_by_tau(&self) -> Self {
        Self::new(
            num(1.0),
            self.xi.clone() / self.tau.clone(),
            self.eta.clone() / self.tau.clone(),
        )
    }

    pub fn bind(&self, values: &[(&str, f64)]) -> Self {
        Self::new(self.tau.bind(values), self.xi.bind(values), self.eta.bind(values))
    }

    fn as_operator(&self) -> Expr {
        mul(self.tau.clone(), sym("d_t"))
            + mul(self.xi.clone(), sym("d_x"))
            + mul(self.eta.clone(), sym("d_u"))
    }
}

impl fmt::Display for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = self.as_operator();
        if op.is_zero() {
            f.write_str("0")
        } else {
            write!(f, "{op}")
        }
    }
}

impl Serialize for VectorField {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for VectorField {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        VectorField::parse_operator(&text).map_err(serde::de::Error::custom)
    }
}

/// A free parameter of a solution with its admissible range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
}

/// An exact solution `u(t, x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub u: Expr,
    #[serde(default)]
    pub parameters: Vec<Parameter>,
    /// Where the expression is real and finite.
    pub domain: String,
}

impl Solution {
    pub fn new(u: Expr, domain: impl Into<String>) -> Self {
        Self {
            u,
            parameters: Vec::new(),
            domain: domain.into(),
        }
    }

    pub fn with_parameter(mut self, name: &str, lo: f64, hi: f64) -> Self {
        self.parameters.push(Parameter {
            name: name.to_string(),
            lo,
            hi,
        });
        self
    }

    /// Fixes a parameter value, removing it from the free list.
    pub fn bind(&self, name: &str, value: f64) -> Result<Solution> {
        let p = self
            .parameters
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| Error::Precondition(format!("no parameter `{name}`")))?;
        if value < p.lo || value > p.hi {
            return Err(Error::Precondition(format!(
                "{name} = {value} outside [{}, {}]",
                p.lo, p.hi
            )));
        }
        Ok(Solution {
            u: self.u.bind(&[(name, value)]),
            parameters: self
                .parameters
                .iter()
                .filter(|p| p.name != name)
                .cloned()
                .collect(),
            domain: self.domain.clone(),
        })
    }
}

/// JSON number that prints integers without a fractional part.
pub fn json_number(v: f64) -> Value {
    if v.is_finite() && v.fract() == 0.0 && v.abs() < 9.0e15 {
        Value::from(v as i64)
    } else {
        serde_json::Number::from_f64(v)
            .map(Value::Number)
            .unwrap_or(Value::Null)
    }
}

impl Serialize for CoefficientSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use CoefficientSpec::*;
        let mut m = Map::new();
        let family = |name: &str, m: &mut Map<String, Value>| {
            m.insert("family".into(), Value::from(name));
        };
        match self {
            PowerU { n } => {
                family("power_u", &mut m);
                m.insert("n".into(), json_number(*n));
            }
            ShiftedPowerU { n, alpha } => {
                family("shifted_power_u", &mut m);
                m.insert("n".into(), json_number(*n));
                m.insert("alpha".into(), json_number(*alpha));
            }
            ExpU => family("exp_u", &mut m),
            ReciprocalShift => family("reciprocal_shift", &mut m),
            PowerX { q, eps } => {
                family("power_x", &mut m);
                m.insert("q".into(), json_number(*q));
                m.insert("eps".into(), json_number(*eps));
            }
            ExpX { eps } => {
                family("exp_x", &mut m);
                m.insert("eps".into(), json_number(*eps));
            }
            InverseSquareX => family("inverse_square_x", &mut m),
            ConstantH { c } => {
                family("constant", &mut m);
                m.insert("c".into(), json_number(*c));
            }
            H1 { p, q, eps } => {
                family("h1", &mut m);
                m.insert("p".into(), Value::from(*p));
                m.insert("q".into(), json_number(*q));
                m.insert("eps".into(), json_number(*eps));
            }
            Free { expr } => {
                m.insert("expr".into(), Value::from(expr.to_string()));
            }
        }
        Value::Object(m).serialize(s)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecRecord {
    family: Option<String>,
    expr: Option<String>,
    n: Option<f64>,
    alpha: Option<f64>,
    q: Option<f64>,
    eps: Option<f64>,
    p: Option<f64>,
    c: Option<f64>,
}

impl SpecRecord {
    fn into_spec(self) -> std::result::Result<CoefficientSpec, String> {
        use CoefficientSpec::*;
        let present: Vec<&str> = [
            ("n", self.n.is_some()),
            ("alpha", self.alpha.is_some()),
            ("q", self.q.is_some()),
            ("eps", self.eps.is_some()),
            ("p", self.p.is_some()),
            ("c", self.c.is_some()),
        ]
        .into_iter()
        .filter_map(|(k, on)| on.then_some(k))
        .collect();
        let expect = |allowed: &[&str]| -> std::result::Result<(), String> {
            for k in &present {
                if !allowed.contains(k) {
                    return Err(format!("field `{k}` does not belong to this family"));
                }
            }
            Ok(())
        };
        let need = |v: Option<f64>, k: &str| v.ok_or_else(|| format!("missing field `{k}`"));
        match (self.family.as_deref(), self.expr) {
            (None, Some(text)) => {
                expect(&[])?;
                Ok(Free {
                    expr: parse(&text).map_err(|e| e.to_string())?,
                })
            }
            (Some(_), Some(_)) => Err("give either `family` or `expr`, not both".into()),
            (None, None) => Err("missing `family` or `expr`".into()),
            (Some(fam), None) => match fam {
                "power_u" => {
                    expect(&["n"])?;
                    Ok(PowerU { n: need(self.n, "n")? })
                }
                "shifted_power_u" => {
                    expect(&["n", "alpha"])?;
                    Ok(ShiftedPowerU {
                        n: need(self.n, "n")?,
                        alpha: need(self.alpha, "alpha")?,
                    })
                }
                "exp_u" => expect(&[]).map(|_| ExpU),
                "reciprocal_shift" => expect(&[]).map(|_| ReciprocalShift),
                "power_x" => {
                    expect(&["q", "eps"])?;
                    Ok(PowerX {
                        q: need(self.q, "q")?,
                        eps: self.eps.unwrap_or(1.0),
                    })
                }
                "exp_x" => {
                    expect(&["eps"])?;
                    Ok(ExpX {
                        eps: self.eps.unwrap_or(1.0),
                    })
                }
                "inverse_square_x" => expect(&[]).map(|_| InverseSquareX),
                "constant" => {
                    expect(&["c"])?;
                    Ok(ConstantH { c: need(self.c, "c")? })
                }
                "h1" => {
                    expect(&["p", "q", "eps"])?;
                    let p = need(self.p, "p")?;
                    if p.fract() != 0.0 || !(-1.0..=1.0).contains(&p) {
                        return Err("h1 requires p in {-1, 0, 1}".into());
                    }
                    Ok(H1 {
                        p: p as i8,
                        q: need(self.q, "q")?,
                        eps: self.eps.unwrap_or(1.0),
                    })
                }
                other => Err(format!("unknown family `{other}`")),
            },
        }
    }
}

impl<'de> Deserialize<'de> for CoefficientSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        SpecRecord::deserialize(d)?
            .into_spec()
            .map_err(serde::de::Error::custom)
    }
}

impl Serialize for FinEquation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("FinEquation", 2)?;
        st.serialize_field("D", &self.d)?;
        st.serialize_field("h", &self.h)?;
        st.end()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EquationRecord {
    #[serde(rename = "D")]
    d: CoefficientSpec,
    h: CoefficientSpec,
}

impl<'de> Deserialize<'de> for FinEquation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = EquationRecord::deserialize(d)?;
        Ok(FinEquation::new(r.d, r.h))
    }
}
