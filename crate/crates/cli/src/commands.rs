use std::collections::BTreeMap;
use std::fmt::Write as _;

use clap::Args;
use finsym::classify::{classify_with_seed, ClassificationResult};
use finsym::conserve::{conservation_laws, divergence_residual};
use finsym::equivalence::{additional_map_for, apply_to_equation, Target, Transformed};
use finsym::model::{json_number, Solution, VectorField};
use finsym::numeric::{pde_residual_grid, solve_pde, Boundary, Field, Grid, Scheme, SolveOptions};
use finsym::reduce::{ansatz_invariance, build_reduction, exact_solution, verify_reduction, TimeBranch};
use finsym::symmetry::{check_conditional_symmetry, check_lie_symmetry};
use serde_json::{json, Value};

use crate::input::{self, Input};
use crate::{Command, Global};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Library(#[from] finsym::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Library(finsym::Error::Numerical(_) | finsym::Error::BlowUp { .. }) => 1,
            _ => 2,
        }
    }
}

pub struct Outcome {
    pub stdout: String,
    /// False when a verification ran and failed.
    pub verified: bool,
}

impl Outcome {
    fn new(stdout: String, verified: bool) -> Self {
        Self { stdout, verified }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Initial data u(0, x).
    #[arg(long)]
    initial: String,
    #[arg(long, default_value = "0,1")]
    x_range: String,
    #[arg(long, default_value_t = 81)]
    nodes: usize,
    #[arg(long, default_value_t = 0.1)]
    t_end: f64,
    /// Time step; default is `cfl * dx^2 / max|D|`.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, default_value_t = 0.4)]
    cfl: f64,
    /// Dirichlet value at the left end as an expression of t; with --right.
    #[arg(long, requires = "right")]
    left: Option<String>,
    #[arg(long, requires = "left")]
    right: Option<String>,
    /// Implicit Euler with Picard iteration instead of explicit Euler.
    #[arg(long)]
    implicit: bool,
    #[arg(long, default_value_t = 1)]
    store_every: usize,
}

pub fn run(cmd: &Command, g: &Global) -> Result<Outcome, CliError> {
    let input = input::load(g.eq.as_deref())?;
    match cmd {
        Command::Classify => classify_cmd(&input, g),
        Command::Symmetries => symmetries(&input, g),
        Command::VerifySymmetry { field, conditional } => verify_symmetry(&input, g, field, *conditional),
        Command::Transform { map } => transform(&input, g, map),
        Command::Reduce { case, sub, negative_time } => reduce(&input, g, *case, sub, *negative_time),
        Command::Exact { kind } => exact(&input, g, kind.as_deref()),
        Command::Conserve => conserve(&input, g),
        Command::Simulate(args) => simulate(&input, g, args),
        Command::Residual { u, t_range, x_range, samples } => residual(&input, g, u, t_range, x_range, *samples),
    }
}

fn pretty(v: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable output");
    s.push('\n');
    s
}

fn params_json(p: &BTreeMap<String, f64>) -> Value {
    Value::Object(p.iter().map(|(k, v)| (k.clone(), json_number(*v))).collect())
}

fn params_text(p: &BTreeMap<String, f64>) -> String {
    p.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(", ")
}

fn classification(input: &Input, g: &Global) -> Result<ClassificationResult, CliError> {
    Ok(classify_with_seed(&input.eq, g.seed)?)
}

fn classify_cmd(input: &Input, g: &Global) -> Result<Outcome, CliError> {
    let r = classification(input, g)?;
    if g.json {
        return Ok(Outcome::new(pretty(&r), true));
    }
    let mut out = format!("equation: {}\ncase: {}\n", input.eq, r.label());
    if !r.params.is_empty() {
        let _ = writeln!(out, "params: {}", params_text(&r.params));
    }
    for (i, v) in r.basis.iter().enumerate() {
        let _ = writeln!(out, "X{} = {}", i + 1, v);
    }
    if let Some(note) = &r.note {
        let _ = writeln!(out, "note: {note}");
    }
    Ok(Outcome::new(out, true))
}

fn symmetries(input: &Input, g: &Global) -> Result<Outcome, CliError> {
    let r = classification(input, g)?;
    if g.json {
        return Ok(Outcome::new(pretty(&r.basis), true));
    }
    let out = r.basis.iter().map(|v| format!("{v}\n")).collect();
    Ok(Outcome::new(out, true))
}

fn verify_symmetry(input: &Input, g: &Global, field: &str, conditional: bool) -> Result<Outcome, CliError> {
    let v = VectorField::parse_components(field).map_err(|e| CliError::Usage(format!("--field: {e}")))?;
    let verdict = if conditional {
        check_conditional_symmetry(&input.eq, &v, g.seed, g.tol)?
    } else {
        check_lie_symmetry(&input.eq, &v, g.seed, g.tol)?
    };
    let kind = if conditional { "conditional" } else { "lie" };
    let out = if g.json {
        pretty(&json!({
            "field": v,
            "kind": kind,
            "holds": verdict.holds,
            "max_residual": verdict.max_residual,
        }))
    } else {
        format!(
            "{}: {v} ({kind}), max residual {:e}\n",
            if verdict.holds { "PASS" } else { "FAIL" },
            verdict.max_residual
        )
    };
    Ok(Outcome::new(out, verdict.holds))
}

fn target_json(t: &Target) -> Value {
    match t {
        Target::Case { case_id, params } => json!({"case": case_id, "params": params_json(params)}),
        Target::OutsideClass { equation } => json!({"outside_class": equation}),
    }
}

fn transform(input: &Input, g: &Global, label: &str) -> Result<Outcome, CliError> {
    let m = additional_map_for(label, &input.eq)?;
    let image = apply_to_equation(&m.transform, &input.eq)?;
    let (equation, classified, matches) = match (&image, &m.target) {
        (Transformed::InClass(eq), Target::Case { case_id, params }) => {
            let r = classify_with_seed(eq, g.seed)?;
            let same_params = params
                .iter()
                .all(|(k, v)| r.param(k).is_some_and(|got| (got - v).abs() <= 1e-9));
            let hit = r.case_id == *case_id && same_params;
            (eq.to_string(), Some(r), hit)
        }
        (Transformed::OutsideClass { equation }, Target::OutsideClass { equation: want }) => {
            (equation.clone(), None, equation == want)
        }
        (Transformed::InClass(eq), _) => (eq.to_string(), None, false),
        (Transformed::OutsideClass { equation }, _) => (equation.clone(), None, false),
    };
    let out = if g.json {
        pretty(&json!({
            "map": m.label,
            "transformation": m.transform.to_string(),
            "equation": equation,
            "target": target_json(&m.target),
            "classified": classified.as_ref().map(|r| r.label()),
            "matches": matches,
        }))
    } else {
        let mut s = format!("map: {}\n{}\nequation: {equation}\n", m.label, m.transform);
        match (&classified, &m.target) {
            (Some(r), _) => {
                let _ = writeln!(s, "case: {} ({})", r.label(), params_text(&r.params));
            }
            (None, Target::OutsideClass { .. }) => s.push_str("outside the class\n"),
            _ => {}
        }
        let _ = writeln!(s, "{}", if matches { "PASS: declared target reached" } else { "FAIL: declared target missed" });
        s
    };
    Ok(Outcome::new(out, matches))
}

fn merged_params(r: &ClassificationResult, input: &Input) -> BTreeMap<String, f64> {
    let mut p = r.params.clone();
    p.extend(input.params.iter().map(|(k, v)| (k.clone(), *v)));
    p
}

fn reduce(input: &Input, g: &Global, case: Option<u8>, sub: &str, negative_time: bool) -> Result<Outcome, CliError> {
    let class = classification(input, g)?;
    if let Some(c) = case {
        if c != class.case_id {
            return Err(CliError::Usage(format!("--case {c} but the equation is case {}", class.label())));
        }
    }
    let branch = if negative_time { TimeBranch::Negative } else { TimeBranch::Positive };
    let r = build_reduction(class.case_id, sub, &merged_params(&class, input), branch)?;
    let report = verify_reduction(&r.equation, &r, g.seed, g.tol.max(finsym::reduce::DEFAULT_TOL))?;
    let invariance = ansatz_invariance(&r, g.seed)?;
    let ok = report.passed && invariance <= g.tol;
    let out = if g.json {
        pretty(&json!({"reduction": r, "verification": report, "ansatz_invariance": invariance}))
    } else {
        let mut s = format!("reduction {}\nu = {}\n", r.label, r.ansatz);
        if let Some(w) = &r.omega {
            let _ = writeln!(s, "w = {w}");
        }
        let _ = writeln!(s, "{}", r.reduced);
        let _ = writeln!(
            s,
            "{}: ratio deviation {:e}, ansatz invariance {:e}",
            if ok { "PASS" } else { "FAIL" },
            report.max_deviation,
            invariance
        );
        s
    };
    Ok(Outcome::new(out, ok))
}

fn exact(input: &Input, g: &Global, kind: Option<&str>) -> Result<Outcome, CliError> {
    let class = classification(input, g)?;
    let kind = match kind {
        Some(k) => k.to_string(),
        None if matches!(class.case_id, 4..=6) => class.case_id.to_string(),
        None => {
            return Err(CliError::Usage(format!(
                "no exact solution for case {}; pass --kind to choose one",
                class.label()
            )))
        }
    };
    let (eq, solution) = exact_solution(&kind, &merged_params(&class, input))?;
    if !eq.same_coefficients(&input.eq, &finsym::expr::sample::SampleSpace::default(), g.seed, 1e-12)? {
        return Err(CliError::Usage(format!("solution `{kind}` belongs to {eq}, not {}", input.eq)));
    }
    let x = if solution.domain.contains("x > 1") { (1.2, 3.0) } else { (0.5, 2.0) };
    let t = (0.0, 1.0);
    let r = pde_residual_grid(&input.eq, &solution, t, x, 100, g.seed)?;
    let ok = r <= g.tol;
    let out = if g.json {
        pretty(&json!({
            "solution": solution,
            "residual": r,
            "region": {"t": [t.0, t.1], "x": [x.0, x.1]},
        }))
    } else {
        format!(
            "u = {}\ndomain: {}\n{}: max relative residual {r:e} on t in [{}, {}], x in [{}, {}]\n",
            solution.u,
            solution.domain,
            if ok { "PASS" } else { "FAIL" },
            t.0,
            t.1,
            x.0,
            x.1
        )
    };
    Ok(Outcome::new(out, ok))
}

fn conserve(input: &Input, g: &Global) -> Result<Outcome, CliError> {
    let laws = conservation_laws(&input.eq)?;
    let mut rows = Vec::new();
    let mut ok = true;
    for cl in &laws {
        let (_, v) = divergence_residual(cl, &input.eq, g.seed, g.tol)?;
        ok &= v.holds;
        rows.push((cl, v));
    }
    let out = if g.json {
        let list: Vec<Value> = rows
            .iter()
            .map(|(cl, v)| json!({"law": cl, "holds": v.holds, "max_residual": v.max_residual}))
            .collect();
        pretty(&json!({ "laws": list }))
    } else if rows.is_empty() {
        "no conservation laws of this form: h is not constant\n".into()
    } else {
        let mut s = String::new();
        for (i, (cl, v)) in rows.iter().enumerate() {
            let _ = writeln!(
                s,
                "law {}: density {}, flux {}, characteristic {}\n  {}: max residual {:e}",
                i + 1,
                cl.density,
                cl.flux,
                cl.characteristic,
                if v.holds { "PASS" } else { "FAIL" },
                v.max_residual
            );
        }
        s
    };
    Ok(Outcome::new(out, ok))
}

fn field_json(f: &Field) -> Value {
    json!({"x": f.x, "t": f.times, "u": f.values})
}

fn simulate(input: &Input, g: &Global, a: &SimulateArgs) -> Result<Outcome, CliError> {
    let initial = input::expr(&a.initial, "--initial")?;
    let (lo, hi) = input::range(&a.x_range, "--x-range")?;
    let grid = match a.dt {
        Some(dt) => Grid::new(lo, hi, a.nodes, a.t_end, dt)?,
        None => Grid::stable(&input.eq, &initial, lo, hi, a.nodes, a.t_end, a.cfl)?,
    };
    let boundary = match (&a.left, &a.right) {
        (Some(l), Some(r)) => Boundary::Dirichlet { left: input::expr(l, "--left")?, right: input::expr(r, "--right")? },
        _ => Boundary::NoFlux,
    };
    let scheme = if a.implicit { Scheme::implicit() } else { Scheme::Explicit };
    let opts = SolveOptions { scheme, store_every: a.store_every };
    let render = |f: &Field| if g.json { pretty(&field_json(f)) } else { f.to_csv() };
    match solve_pde(&input.eq, &initial, &boundary, &grid, &opts) {
        Ok(f) => Ok(Outcome::new(render(&f), true)),
        Err(finsym::Error::BlowUp { t, reason, field }) => {
            eprintln!("finsym: blow-up at t = {t}: {reason}; printing the levels before it");
            Ok(Outcome::new(render(&field), false))
        }
        Err(e) => Err(e.into()),
    }
}

fn residual(input: &Input, g: &Global, u: &str, t: &str, x: &str, samples: usize) -> Result<Outcome, CliError> {
    let s = Solution::new(input::expr(u, "--u")?, "given");
    let (t, x) = (input::range(t, "--t-range")?, input::range(x, "--x-range")?);
    if samples == 0 {
        return Err(CliError::Usage("--samples must be positive".into()));
    }
    let r = pde_residual_grid(&input.eq, &s, t, x, samples, g.seed)?;
    let ok = r <= g.tol;
    let out = if g.json {
        pretty(&json!({"u": s.u, "residual": r, "holds": ok}))
    } else {
        format!("{}: max relative residual {r:e}\n", if ok { "PASS" } else { "FAIL" })
    };
    Ok(Outcome::new(out, ok))
}
