use criterion::{black_box, criterion_group, criterion_main, Criterion};
use finsym::classify::classify;
use finsym::expr::parse;
use finsym::model::{CoefficientSpec, FinEquation, VectorField};
use finsym::numeric::{solve_pde, Boundary, Grid, SolveOptions};
use finsym::symmetry::is_lie_symmetry;

fn case6() -> FinEquation {
    FinEquation::new(
        CoefficientSpec::PowerU { n: -4.0 / 3.0 },
        CoefficientSpec::H1 { p: 1, q: 1.0, eps: 1.0 },
    )
}

fn expressions(c: &mut Criterion) {
    let e = parse("(x^2+1)^(-3/2)*exp(arctan(x))^(-3/4)*u^2").unwrap();
    c.bench_function("parse", |b| b.iter(|| parse(black_box("(x^2+1)^(-3/2)*exp(arctan(x))^(-3/4)"))));
    c.bench_function("diff_x", |b| b.iter(|| black_box(&e).diff("x")));
    c.bench_function("eval", |b| b.iter(|| black_box(&e).eval_at(&[("x", 1.3), ("u", 0.7)])));
}

fn symmetry(c: &mut Criterion) {
    let eq = case6();
    let v = VectorField::from_strs("-4*t", "4*(x^2+1)", "-3*(4*x+1)*u").unwrap();
    c.bench_function("classify_case6", |b| b.iter(|| classify(black_box(&eq))));
    c.bench_function("is_lie_symmetry_case6", |b| b.iter(|| is_lie_symmetry(&eq, black_box(&v), 1, 1e-9)));
}

fn numeric(c: &mut Criterion) {
    let eq = FinEquation::new(
        CoefficientSpec::PowerU { n: 1.0 },
        CoefficientSpec::PowerX { q: 1.0, eps: -1.0 },
    );
    let exact = parse("x^3/15").unwrap();
    let bc = Boundary::Dirichlet { left: parse("1/15").unwrap(), right: parse("8/15").unwrap() };
    let g = Grid::stable(&eq, &exact, 1.0, 2.0, 81, 0.01, 0.4).unwrap();
    let opts = SolveOptions { store_every: usize::MAX, ..Default::default() };
    c.bench_function("solve_pde_m81", |b| b.iter(|| solve_pde(&eq, &exact, &bc, black_box(&g), &opts)));
}

criterion_group!(benches, expressions, symmetry, numeric);
criterion_main!(benches);
