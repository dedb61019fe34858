//! Finite-difference oracle for fin equations and ODE shooting.
//!
//! The space discretization is conservative: with interface coefficients
//! `D_{i+1/2} = D((u_i + u_{i+1})/2)` the node update is
//! `(D_{i+1/2}(u_{i+1}-u_i) - D_{i-1/2}(u_i-u_{i-1}))/dx^2 + h(x_i) u_i`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::expr::sample::{max_relative_residual, SampleSpace};
use crate::expr::Expr;
use crate::model::{CoefficientSpec, FinEquation, Solution};

/// Explicit Euler is stable for `dt <= STABILITY * dx^2 / max|D|`.
pub const STABILITY: f64 = 0.45;
pub const BLOW_UP: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub a: f64,
    pub b: f64,
    /// Node count, endpoints included.
    pub m: usize,
    pub t_end: f64,
    pub dt: f64,
}

impl Grid {
    pub fn new(a: f64, b: f64, m: usize, t_end: f64, dt: f64) -> Result<Self> {
        if !(a < b) {
            return Err(Error::Precondition(format!("empty interval [{a}, {b}]")));
        }
        if m < 8 {
            return Err(Error::Precondition(format!("need at least 8 nodes, got {m}")));
        }
        if !(dt > 0.0) || !(t_end >= 0.0) {
            return Err(Error::Precondition("time step must be positive and horizon nonnegative".into()));
        }
        Ok(Self { a, b, m, t_end, dt })
    }

    /// Grid whose step is `cfl * dx^2 / max|D|` over the initial data.
    pub fn stable(eq: &FinEquation, initial: &Expr, a: f64, b: f64, m: usize, t_end: f64, cfl: f64) -> Result<Self> {
        let g = Grid::new(a, b, m, t_end, 1.0)?;
        let u0 = g.sample_initial(initial)?;
        let d = Diffusion::new(eq);
        let dmax = max_abs_d(&d, &u0)?;
        let dx = g.dx();
        Grid::new(a, b, m, t_end, cfl * dx * dx / dmax)
    }

    pub fn dx(&self) -> f64 {
        (self.b - self.a) / (self.m - 1) as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.m).map(|i| self.a + i as f64 * dx).collect()
    }

    fn sample_initial(&self, initial: &Expr) -> Result<Vec<f64>> {
        self.nodes()
            .into_iter()
            .map(|x| Ok(initial.eval_at(&[("x", x), ("t", 0.0)])?))
            .collect()
    }

    /// The explicit-scheme stability condition over the given data.
    pub fn is_stable(&self, eq: &FinEquation, u: &[f64]) -> Result<bool> {
        let dmax = max_abs_d(&Diffusion::new(eq), u)?;
        let dx = self.dx();
        Ok(self.dt <= STABILITY * dx * dx / dmax * (1.0 + 1e-12))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Boundary {
    /// Values `u(t, a)` and `u(t, b)` as expressions of `t`.
    Dirichlet { left: Expr, right: Expr },
    /// `u_x = 0` at both ends via ghost-node reflection.
    NoFlux,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    Explicit,
    /// Implicit Euler, Picard iteration on the lagged diffusion coefficient.
    Implicit { damping: f64, max_iter: usize, tol: f64 },
}

impl Scheme {
    pub fn implicit() -> Self {
        Scheme::Implicit { damping: 1.0, max_iter: 50, tol: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub scheme: Scheme,
    /// Store every k-th level; the final level is always stored.
    pub store_every: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { scheme: Scheme::Explicit, store_every: 1 }
    }
}

/// Stored time levels of a numerical solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub x: Vec<f64>,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl Field {
    pub fn last(&self) -> &[f64] {
        self.values.last().expect("a field has at least one level")
    }

    pub fn t_final(&self) -> f64 {
        *self.times.last().expect("a field has at least one level")
    }

    /// `t,x,u` rows, one per node per stored level.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x,u\n");
        for (t, level) in self.times.iter().zip(&self.values) {
            for (x, u) in self.x.iter().zip(level) {
                let _ = writeln!(out, "{t},{x},{u}");
            }
        }
        out
    }

    /// Max nodal deviation of the final level from `u(t, x)`.
    pub fn max_error(&self, exact: &Expr) -> Result<f64> {
        let t = self.t_final();
        let mut worst: f64 = 0.0;
        for (x, u) in self.x.iter().zip(self.last()) {
            let e = exact.eval_at(&[("t", t), ("x", *x)])?;
            worst = worst.max((u - e).abs());
        }
        Ok(worst)
    }
}

/// Fast evaluation of the tagged diffusion families, tree walk otherwise.
enum Diffusion {
    Power(f64, f64),
    Exp,
    Expr(Expr),
}

impl Diffusion {
    fn new(eq: &FinEquation) -> Self {
        match &eq.d {
            CoefficientSpec::PowerU { n } => Diffusion::Power(*n, 0.0),
            CoefficientSpec::ShiftedPowerU { n, alpha } => Diffusion::Power(*n, *alpha),
            CoefficientSpec::ReciprocalShift => Diffusion::Power(-1.0, 1.0),
            CoefficientSpec::ExpU => Diffusion::Exp,
            other => Diffusion::Expr(other.to_expr()),
        }
    }

    fn eval(&self, u: f64) -> Result<f64> {
        let v = match self {
            Diffusion::Power(n, alpha) => (u + alpha).powf(*n),
            Diffusion::Exp => u.exp(),
            Diffusion::Expr(e) => e.eval_at(&[("u", u)])?,
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Numerical(format!("D({u}) is not finite")))
        }
    }
}

fn max_abs_d(d: &Diffusion, u: &[f64]) -> Result<f64> {
    let mut m: f64 = 0.0;
    for &v in u {
        m = m.max(d.eval(v)?.abs());
    }
    if m == 0.0 {
        return Err(Error::Numerical("D vanishes on the initial data".into()));
    }
    Ok(m)
}

struct Stepper<'a> {
    d: Diffusion,
    h: Vec<f64>,
    dx: f64,
    boundary: &'a Boundary,
}

impl Stepper<'_> {
    /// Interface coefficients `D_{i+1/2}`, `i = 0..m-1`.
    fn interfaces(&self, u: &[f64]) -> Result<Vec<f64>> {
        u.windows(2).map(|w| self.d.eval(0.5 * (w[0] + w[1]))).collect()
    }

    /// Discrete `(D u_x)_x` at every node; boundary nodes use reflection.
    fn operator(&self, u: &[f64]) -> Result<Vec<f64>> {
        let m = u.len();
        let k = self.interfaces(u)?;
        let inv = 1.0 / (self.dx * self.dx);
        let mut out = vec![0.0; m];
        for i in 1..m - 1 {
            out[i] = (k[i] * (u[i + 1] - u[i]) - k[i - 1] * (u[i] - u[i - 1])) * inv;
        }
        out[0] = 2.0 * k[0] * (u[1] - u[0]) * inv;
        out[m - 1] = -2.0 * k[m - 2] * (u[m - 1] - u[m - 2]) * inv;
        Ok(out)
    }

    fn apply_boundary(&self, u: &mut [f64], t: f64) -> Result<()> {
        if let Boundary::Dirichlet { left, right } = self.boundary {
            let m = u.len();
            u[0] = left.eval_at(&[("t", t)])?;
            u[m - 1] = right.eval_at(&[("t", t)])?;
        }
        Ok(())
    }

    fn explicit(&self, u: &[f64], t_next: f64, dt: f64) -> Result<Vec<f64>> {
        let l = self.operator(u)?;
        let mut next: Vec<f64> = (0..u.len()).map(|i| u[i] + dt * (l[i] + self.h[i] * u[i])).collect();
        self.apply_boundary(&mut next, t_next)?;
        Ok(next)
    }

    /// Solves `(1 - dt h) v - dt L_{D(w)} v = u` for `v`, iterating on `w`.
    fn implicit(&self, u: &[f64], t_next: f64, dt: f64, damping: f64, max_iter: usize, tol: f64) -> Result<Vec<f64>> {
        let m = u.len();
        let r = dt / (self.dx * self.dx);
        let mut w = u.to_vec();
        self.apply_boundary(&mut w, t_next)?;
        let dirichlet = matches!(self.boundary, Boundary::Dirichlet { .. });
        for _ in 0..max_iter {
            let k = self.interfaces(&w)?;
            let (mut lo, mut di, mut up, mut rhs) = (vec![0.0; m], vec![0.0; m], vec![0.0; m], u.to_vec());
            for i in 1..m - 1 {
                lo[i] = -r * k[i - 1];
                up[i] = -r * k[i];
                di[i] = 1.0 - dt * self.h[i] + r * (k[i - 1] + k[i]);
            }
            if dirichlet {
                di[0] = 1.0;
                di[m - 1] = 1.0;
                rhs[0] = w[0];
                rhs[m - 1] = w[m - 1];
            } else {
                di[0] = 1.0 - dt * self.h[0] + 2.0 * r * k[0];
                up[0] = -2.0 * r * k[0];
                di[m - 1] = 1.0 - dt * self.h[m - 1] + 2.0 * r * k[m - 2];
                lo[m - 1] = -2.0 * r * k[m - 2];
            }
            let v = thomas(&lo, &di, &up, &rhs)?;
            let mut change: f64 = 0.0;
            for i in 0..m {
                let updated = (1.0 - damping) * w[i] + damping * v[i];
                change = change.max((updated - w[i]).abs() / (1.0 + updated.abs()));
                w[i] = updated;
            }
            if change <= tol {
                return Ok(w);
            }
        }
        Err(Error::Numerical(format!("fixed-point iteration did not converge at t = {t_next}")))
    }
}

/// Tridiagonal solve, `lo[0]` and `up[m-1]` unused.
fn thomas(lo: &[f64], di: &[f64], up: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let m = di.len();
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    let mut piv = di[0];
    if piv == 0.0 {
        return Err(Error::Numerical("singular tridiagonal system".into()));
    }
    c[0] = up[0] / piv;
    d[0] = rhs[0] / piv;
    for i in 1..m {
        piv = di[i] - lo[i] * c[i - 1];
        if piv == 0.0 {
            return Err(Error::Numerical("singular tridiagonal system".into()));
        }
        c[i] = up[i] / piv;
        d[i] = (rhs[i] - lo[i] * d[i - 1]) / piv;
    }
    for i in (0..m - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

/// Time integration of `eq` from `initial(x)` on `grid`.
///
/// Blow-up past [`BLOW_UP`] or a non-finite value returns
/// [`Error::BlowUp`] carrying the levels computed so far.
pub fn solve_pde(eq: &FinEquation, initial: &Expr, boundary: &Boundary, grid: &Grid, opts: &SolveOptions) -> Result<Field> {
    let x = grid.nodes();
    let source = eq.source();
    let h = x
        .iter()
        .map(|&xi| Ok(source.eval_at(&[("x", xi)])?))
        .collect::<Result<Vec<f64>>>()?;
    let stepper = Stepper { d: Diffusion::new(eq), h, dx: grid.dx(), boundary };
    let mut u = grid.sample_initial(initial)?;
    stepper.apply_boundary(&mut u, 0.0)?;
    if opts.scheme == Scheme::Explicit && !grid.is_stable(eq, &u)? {
        return Err(Error::Precondition(format!(
            "explicit step dt = {} exceeds {STABILITY}*dx^2/max|D|",
            grid.dt
        )));
    }
    let mut field = Field { x, times: vec![0.0], values: vec![u.clone()] };
    let steps = (grid.t_end / grid.dt - 1e-9).ceil().max(0.0) as usize;
    let every = opts.store_every.max(1);
    let mut t = 0.0;
    for n in 1..=steps {
        let dt = (grid.t_end - t).min(grid.dt);
        let t_next = if n == steps { grid.t_end } else { t + dt };
        let next = match opts.scheme {
            Scheme::Explicit => stepper.explicit(&u, t_next, dt),
            Scheme::Implicit { damping, max_iter, tol } => stepper.implicit(&u, t_next, dt, damping, max_iter, tol),
        };
        let next = match next {
            Ok(v) => v,
            Err(Error::Numerical(msg)) => return Err(blow_up(field, t_next, msg)),
            Err(e) => return Err(e),
        };
        if let Some(v) = next.iter().find(|v| !v.is_finite() || v.abs() > BLOW_UP) {
            return Err(blow_up(field, t_next, format!("|u| reached {v}")));
        }
        u = next;
        t = t_next;
        if n % every == 0 || n == steps {
            field.times.push(t);
            field.values.push(u.clone());
        }
    }
    Ok(field)
}

fn blow_up(field: Field, t: f64, reason: String) -> Error {
    Error::BlowUp { t, reason, field: Box::new(field) }
}

/// Max relative residual of `u_t - (D u_x)_x - h u` over seeded samples of
/// the box `t in [t0, t1]`, `x in [x0, x1]`.
pub fn pde_residual_grid(eq: &FinEquation, s: &Solution, t: (f64, f64), x: (f64, f64), samples: usize, seed: u64) -> Result<f64> {
    if let Some(p) = s.parameters.first() {
        return Err(Error::Precondition(format!("parameter `{}` is unbound", p.name)));
    }
    let free: Vec<String> = s.u.symbols().into_iter().filter(|n| n != "t" && n != "x").collect();
    if let Some(n) = free.first() {
        return Err(Error::Precondition(format!("symbol `{n}` is unbound")));
    }
    let space = SampleSpace::empty().with("t", t.0, t.1).with("x", x.0, x.1);
    let residual = eq.residual_of(&s.u);
    Ok(max_relative_residual(&residual, &space, seed, samples)?)
}

/// Trapezoidal `sum w_i f_i dx`.
pub fn trapezoid(f: &[f64], dx: f64) -> f64 {
    let n = f.len();
    let inner: f64 = f[1..n - 1].iter().sum();
    dx * (inner + 0.5 * (f[0] + f[n - 1]))
}

/// Discrete balance of a conservation law on a stored field:
/// `|int rho(T) - int rho(0) + int_0^T (F(b) - F(a)) dt|`, with `u_x`
/// at the ends from one-sided second-order differences. Needs every level
/// stored for the time quadrature to be accurate.
pub fn balance_error(field: &Field, density: &Expr, flux: &Expr) -> Result<f64> {
    let dx = field.x[1] - field.x[0];
    let m = field.x.len();
    let integral = |k: usize| -> Result<f64> {
        let t = field.times[k];
        let rho = field
            .x
            .iter()
            .zip(&field.values[k])
            .map(|(&x, &u)| Ok(density.eval_at(&[("t", t), ("x", x), ("u", u)])?))
            .collect::<Result<Vec<f64>>>()?;
        Ok(trapezoid(&rho, dx))
    };
    let boundary_flux = |k: usize| -> Result<f64> {
        let (t, u) = (field.times[k], &field.values[k]);
        let ux_a = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * dx);
        let ux_b = (3.0 * u[m - 1] - 4.0 * u[m - 2] + u[m - 3]) / (2.0 * dx);
        let fa = flux.eval_at(&[("t", t), ("x", field.x[0]), ("u", u[0]), ("u_x", ux_a)])?;
        let fb = flux.eval_at(&[("t", t), ("x", field.x[m - 1]), ("u", u[m - 1]), ("u_x", ux_b)])?;
        Ok(fb - fa)
    };
    let last = field.times.len() - 1;
    let mut outflow = 0.0;
    let mut prev = boundary_flux(0)?;
    for k in 1..=last {
        let cur = boundary_flux(k)?;
        outflow += 0.5 * (prev + cur) * (field.times[k] - field.times[k - 1]);
        prev = cur;
    }
    Ok((integral(last)? - integral(0)? + outflow).abs())
}

/// Classical RK4 for `y' = f(s, y)` from `s0` to `s1` in `steps` steps.
/// Returns the trajectory including both ends.
pub fn rk4<F>(f: F, s0: f64, y0: &[f64], s1: f64, steps: usize) -> Result<Vec<(f64, Vec<f64>)>>
where
    F: Fn(f64, &[f64]) -> Result<Vec<f64>>,
{
    let steps = steps.max(1);
    let h = (s1 - s0) / steps as f64;
    let mut y = y0.to_vec();
    let mut out = vec![(s0, y.clone())];
    let axpy = |y: &[f64], k: &[f64], c: f64| y.iter().zip(k).map(|(a, b)| a + c * b).collect::<Vec<f64>>();
    for i in 0..steps {
        let s = s0 + i as f64 * h;
        let k1 = f(s, &y)?;
        let k2 = f(s + 0.5 * h, &axpy(&y, &k1, 0.5 * h))?;
        let k3 = f(s + 0.5 * h, &axpy(&y, &k2, 0.5 * h))?;
        let k4 = f(s + h, &axpy(&y, &k3, h))?;
        for j in 0..y.len() {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("integration left the finite range at s = {}", s + h)));
        }
        out.push((s + h, y.clone()));
    }
    Ok(out)
}

/// A reduced ODE in `w, phi, phi_w, phi_ww` as a first-order system in
/// `(phi, phi_w)`. The equation must be linear in `phi_ww`, as all the
/// reduced equations are: `phi_ww = -R(0) / (R(1) - R(0))`.
pub fn second_order_system(ode: &Expr) -> impl Fn(f64, &[f64]) -> Result<Vec<f64>> + '_ {
    move |w, y| {
        let at = |pww: f64| ode.eval_at(&[("w", w), ("phi", y[0]), ("phi_w", y[1]), ("phi_ww", pww)]);
        let (r0, r1) = (at(0.0)?, at(1.0)?);
        let lead = r1 - r0;
        if lead == 0.0 || !lead.is_finite() {
            return Err(Error::Numerical(format!("degenerate leading coefficient at w = {w}")));
        }
        Ok(vec![y[1], -r0 / lead])
    }
}

/// Shooting for `phi(w1) = target` given `phi(w0) = phi0`: bisection on the
/// initial slope within `bracket`, which must enclose a sign change.
pub fn shoot(ode: &Expr, w0: f64, phi0: f64, w1: f64, target: f64, bracket: (f64, f64), steps: usize, tol: f64) -> Result<f64> {
    let f = second_order_system(ode);
    let miss = |slope: f64| -> Result<f64> {
        let path = rk4(&f, w0, &[phi0, slope], w1, steps)?;
        Ok(path.last().expect("nonempty trajectory").1[0] - target)
    };
    let (mut lo, mut hi) = bracket;
    let (mut flo, fhi) = (miss(lo)?, miss(hi)?);
    if flo * fhi > 0.0 {
        return Err(Error::Numerical(format!("slope bracket [{lo}, {hi}] does not straddle the target")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = miss(mid)?;
        if fm.abs() <= tol || (hi - lo) <= tol * (1.0 + mid.abs()) {
            return Ok(mid);
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
