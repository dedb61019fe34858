#![allow(dead_code)]

use std::collections::BTreeMap;

use finsym::expr::{parse, Expr};
use finsym::model::{CoefficientSpec, FinEquation};
use CoefficientSpec::*;

pub fn e(s: &str) -> Expr {
    parse(s).unwrap()
}

pub fn free(s: &str) -> CoefficientSpec {
    CoefficientSpec::free(s).unwrap()
}

pub fn params(p: &[(&str, f64)]) -> BTreeMap<String, f64> {
    p.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

pub fn eq(d: CoefficientSpec, h: CoefficientSpec) -> FinEquation {
    FinEquation::new(d, h)
}

/// Three instances per classification row, tagged with the expected case.
pub fn corpus() -> Vec<(u8, FinEquation)> {
    let ft = -4.0 / 3.0;
    vec![
        (1, eq(free("u^2+1"), free("x^3+x"))),
        (1, eq(free("exp(u)+u"), free("x^2+1"))),
        (1, eq(free("u^3+u"), free("ln(x)+2"))),
        (2, eq(free("u^2+1"), ConstantH { c: 1.0 })),
        (2, eq(free("exp(u)+u"), ConstantH { c: -1.0 })),
        (2, eq(free("u^3+u"), ConstantH { c: 2.5 })),
        (3, eq(free("u^2+1"), InverseSquareX)),
        (3, eq(free("exp(u)+u"), InverseSquareX)),
        (3, eq(free("u^3+u"), free("x^(-2)"))),
        (4, eq(PowerU { n: 1.0 }, PowerX { q: 1.0, eps: -1.0 })),
        (4, eq(PowerU { n: 2.0 }, PowerX { q: 3.0, eps: 1.0 })),
        (4, eq(PowerU { n: 0.5 }, PowerX { q: 2.0, eps: -1.0 })),
        (5, eq(PowerU { n: 1.0 }, ExpX { eps: -1.0 })),
        (5, eq(PowerU { n: 2.0 }, ExpX { eps: 1.0 })),
        (5, eq(PowerU { n: -0.5 }, ExpX { eps: 1.0 })),
        (6, eq(PowerU { n: ft }, H1 { p: 1, q: 1.0, eps: 1.0 })),
        (6, eq(PowerU { n: ft }, H1 { p: 0, q: 2.0, eps: -1.0 })),
        (6, eq(PowerU { n: ft }, H1 { p: -1, q: 3.0, eps: 1.0 })),
        (7, eq(free("u^2+1"), ConstantH { c: 0.0 })),
        (7, eq(free("exp(u)+u"), ConstantH { c: 0.0 })),
        (7, eq(free("u^3+u"), ConstantH { c: 0.0 })),
        (8, eq(ReciprocalShift, ConstantH { c: 1.0 })),
        (8, eq(ReciprocalShift, ConstantH { c: -1.0 })),
        (8, eq(ReciprocalShift, ConstantH { c: 2.0 })),
        (9, eq(ExpU, ConstantH { c: 0.0 })),
        (9, eq(free("exp(u)"), ConstantH { c: 0.0 })),
        (9, eq(free("2*exp(u)"), ConstantH { c: 0.0 })),
        (10, eq(PowerU { n: 1.0 }, ConstantH { c: 1.0 })),
        (10, eq(PowerU { n: 2.0 }, ConstantH { c: -1.0 })),
        (10, eq(PowerU { n: -0.5 }, ConstantH { c: 3.0 })),
        (11, eq(PowerU { n: 2.0 }, ConstantH { c: 0.0 })),
        (11, eq(ShiftedPowerU { n: 1.0, alpha: 1.0 }, ConstantH { c: 0.0 })),
        (11, eq(PowerU { n: -1.0 }, ConstantH { c: 0.0 })),
        (12, eq(PowerU { n: ft }, ConstantH { c: 1.0 })),
        (12, eq(PowerU { n: ft }, ConstantH { c: -1.0 })),
        (12, eq(PowerU { n: ft }, ConstantH { c: 2.0 })),
        (13, eq(PowerU { n: ft }, ConstantH { c: 0.0 })),
        (13, eq(ShiftedPowerU { n: ft, alpha: 1.0 }, ConstantH { c: 0.0 })),
        (13, eq(free("3*u^(-4/3)"), ConstantH { c: 0.0 })),
    ]
}
