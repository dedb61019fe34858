use finsym::expr::sample::{equivalent, SampleSpace};
use finsym::expr::{self, num, parse, sym, Expr};
use finsym::model::{CoefficientSpec, FinEquation, VectorField};
use finsym::symmetry::{jet_space, prolonged_residual};
use proptest::prelude::*;

/// Expressions in `x` and `u` that stay finite for positive arguments.
fn arb_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        Just(sym("x")),
        Just(sym("u")),
        (-3i32..=3).prop_map(|k| num(k as f64)),
        (1i32..=9).prop_map(|k| expr::div(num(k as f64), num(4.0))),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a - b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
            (inner.clone(), 1i32..=3).prop_map(|(a, k)| expr::pow(a, num(k as f64))),
            inner.clone().prop_map(|a| expr::exp(expr::div(a, num(8.0)))),
            inner.clone().prop_map(|a| expr::arctan(a)),
            inner.prop_map(|a| -a),
        ]
    })
}

fn at(e: &Expr, x: f64, u: f64) -> f64 {
    e.eval_at(&[("x", x), ("u", u)]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn derivative_matches_central_difference(e in arb_expr(), x in 0.5f64..2.0, u in 0.5f64..2.0) {
        let d = e.diff("x");
        let h = 1e-5;
        let fd = (at(&e, x + h, u) - at(&e, x - h, u)) / (2.0 * h);
        let exact = at(&d, x, u);
        prop_assume!(exact.is_finite() && fd.is_finite() && exact.abs() < 1e6);
        prop_assert!((exact - fd).abs() <= 1e-4 * (1.0 + exact.abs()), "{e}: {exact} vs {fd}");
    }

    #[test]
    fn printing_is_a_parse_fixed_point(e in arb_expr(), x in 0.5f64..2.0, u in 0.5f64..2.0) {
        let text = e.to_string();
        let back = parse(&text).unwrap();
        prop_assert_eq!(back.to_string(), text.clone());
        let (a, b) = (at(&e, x, u), at(&back, x, u));
        prop_assume!(a.is_finite());
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "{}: {} vs {}", text, a, b);
    }

    #[test]
    fn equivalence_is_reflexive_symmetric_and_separating(a in arb_expr(), b in arb_expr(), seed in 0u64..1000) {
        let space = SampleSpace::default();
        let same = |p: &Expr, q: &Expr| equivalent(p, q, &space, seed, 20, 1e-9);
        if let Ok(r) = same(&a, &a) {
            prop_assert!(r);
            prop_assert!(same(&(a.clone() + num(0.0)), &a).unwrap());
            prop_assert!(!same(&(a.clone() + num(1.0)), &a).unwrap());
            if let (Ok(ab), Ok(ba)) = (same(&a, &b), same(&b, &a)) {
                prop_assert_eq!(ab, ba);
            }
        }
    }

    #[test]
    fn prolonged_residual_is_linear_in_the_field(
        c in proptest::collection::vec(-2.0f64..2.0, 14),
        alpha in -2.0f64..2.0,
        beta in -2.0f64..2.0,
        seed in 0u64..1000,
    ) {
        let eq = FinEquation::new(CoefficientSpec::PowerU { n: 2.0 }, CoefficientSpec::free("x^2+1").unwrap());
        let field = |k: &[f64]| {
            VectorField::from_strs(
                &format!("{} + {}*t", k[0], k[1]),
                &format!("{} + {}*x + {}*t", k[2], k[3], k[4]),
                &format!("{}*u + {}*x*u", k[5], k[6]),
            )
            .unwrap()
        };
        let (v, w) = (field(&c[..7]), field(&c[7..]));
        let combo = v.scaled(alpha).plus(&w.scaled(beta));
        let lhs = prolonged_residual(&eq, &combo).unwrap().residual;
        let rhs = num(alpha) * prolonged_residual(&eq, &v).unwrap().residual
            + num(beta) * prolonged_residual(&eq, &w).unwrap().residual;
        prop_assert!(equivalent(&lhs, &rhs, &jet_space(&eq), seed, 20, 1e-9).unwrap());
    }
}
