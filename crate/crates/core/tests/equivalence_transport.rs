mod common;

use common::{e, eq, free, params};
use finsym::classify::classify;
use finsym::equivalence::{
    additional_map, apply_to_equation, make_group_element, push_forward_field, GroupFamily, Target,
    Transformed, ADDITIONAL_MAPS,
};
use finsym::expr::sample::SampleSpace;
use finsym::model::{CoefficientSpec::*, FinEquation};
use finsym::symmetry::is_lie_symmetry;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sources() -> Vec<(&'static str, Vec<(&'static str, f64)>, FinEquation)> {
    let ft = -4.0 / 3.0;
    vec![
        ("6p0-to-5", vec![("p", 0.0), ("q", -1.0), ("eps", 1.0)], eq(PowerU { n: ft }, H1 { p: 0, q: -1.0, eps: 1.0 })),
        ("6pm1-to-4", vec![("p", -1.0), ("q", 2.0), ("eps", 1.0)], eq(PowerU { n: ft }, H1 { p: -1, q: 2.0, eps: 1.0 })),
        ("11a-to-11", vec![("alpha", 1.0), ("n", 2.0)], eq(ShiftedPowerU { n: 2.0, alpha: 1.0 }, ConstantH { c: 0.0 })),
        ("13a-to-13", vec![("alpha", 1.0)], eq(ShiftedPowerU { n: ft, alpha: 1.0 }, ConstantH { c: 0.0 })),
        ("10-to-11", vec![("n", 2.0), ("eps", 1.0)], eq(PowerU { n: 2.0 }, ConstantH { c: 1.0 })),
        ("12-to-13", vec![("eps", -1.0)], eq(PowerU { n: ft }, ConstantH { c: -1.0 })),
        ("case8-out", vec![("eps", 1.0)], eq(ReciprocalShift, ConstantH { c: 1.0 })),
    ]
}

#[test]
fn additional_maps_hit_their_targets() {
    for (label, p, source) in sources() {
        assert!(ADDITIONAL_MAPS.contains(&label));
        let m = additional_map(label, &params(&p)).unwrap();
        let out = apply_to_equation(&m.transform, &source).unwrap();
        match (&m.target, out) {
            (Target::Case { case_id, params: want }, Transformed::InClass(image)) => {
                let r = classify(&image).unwrap();
                assert_eq!(r.case_id, *case_id, "{label}: {image}");
                for (k, v) in want {
                    assert!((r.param(k).unwrap() - v).abs() < 1e-9, "{label}: {k}");
                }
            }
            (Target::OutsideClass { equation }, Transformed::OutsideClass { equation: got }) => {
                assert_eq!(equation, &got);
            }
            (t, o) => panic!("{label}: {t:?} vs {o:?}"),
        }
    }
}

#[test]
fn symmetries_are_transported() {
    for (label, p, source) in sources().into_iter().filter(|(l, ..)| *l != "case8-out") {
        let m = additional_map(label, &params(&p)).unwrap();
        let image = apply_to_equation(&m.transform, &source).unwrap().in_class().unwrap();
        for v in classify(&source).unwrap().basis {
            let w = push_forward_field(&m.transform, &v);
            assert!(is_lie_symmetry(&image, &w, 3, 1e-8).unwrap(), "{label}: {v} -> {w}");
        }
    }
}

fn same(a: &FinEquation, b: &FinEquation, seed: u64) -> bool {
    a.same_coefficients(b, &SampleSpace::default(), seed, 1e-12).unwrap()
}

#[test]
fn seeded_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let pos = |rng: &mut ChaCha8Rng| rng.gen_range(0.5..2.0);
    for k in 0..100u64 {
        let (t, source) = match k % 3 {
            0 => {
                let d: Vec<f64> = (0..5).map(|_| pos(&mut rng)).collect();
                (make_group_element(GroupFamily::Gsim, &d).unwrap(), eq(PowerU { n: 2.0 }, free("x^2+1")))
            }
            1 => {
                let (d3, d4, d5) = (pos(&mut rng), pos(&mut rng), pos(&mut rng));
                let d = [pos(&mut rng), pos(&mut rng), d3, d4, d5, (1.0 + d4 * d5) / d3];
                let h = H1 { p: 1, q: 1.0, eps: 1.0 };
                (make_group_element(GroupFamily::G1 { sign: 1.0 }, &d).unwrap(), eq(PowerU { n: -4.0 / 3.0 }, h))
            }
            _ => {
                let d: Vec<f64> = (0..6).map(|_| pos(&mut rng)).collect();
                (make_group_element(GroupFamily::G2, &d).unwrap(), eq(free("u^2+1"), ConstantH { c: 0.0 }))
            }
        };
        let image = apply_to_equation(&t, &source).unwrap().in_class().unwrap();
        let back = apply_to_equation(&t.inverse().unwrap(), &image).unwrap().in_class().unwrap();
        assert!(same(&back, &source, k), "{} round trip {k}: {back}", t.label);
    }
}

#[test]
fn gsim_composition_is_a_gsim_element() {
    let a = [2.0, 0.5, 1.5, -0.25, 3.0];
    let b = [0.5, 1.0, 2.0, 0.75, 0.2];
    let ta = make_group_element(GroupFamily::Gsim, &a).unwrap();
    let tb = make_group_element(GroupFamily::Gsim, &b).unwrap();
    // (tb . ta): t -> b1(a1 t + a2) + b2, x -> b3(a3 x + a4) + b4, u -> b5 a5 u
    let c = [b[0] * a[0], b[0] * a[1] + b[1], b[2] * a[2], b[2] * a[3] + b[3], b[4] * a[4]];
    let tc = make_group_element(GroupFamily::Gsim, &c).unwrap();
    let source = eq(PowerU { n: 2.0 }, free("x^2+1"));
    let two = apply_to_equation(&tb, &apply_to_equation(&ta, &source).unwrap().in_class().unwrap())
        .unwrap()
        .in_class()
        .unwrap();
    let one = apply_to_equation(&tc, &source).unwrap().in_class().unwrap();
    assert!(same(&one, &two, 5));
}

#[test]
fn transported_equation_residual() {
    // A solution of the source maps to a solution of the image.
    let t = make_group_element(GroupFamily::Gsim, &[2.0, 0.0, 3.0, 1.0, 5.0]).unwrap();
    let source = eq(PowerU { n: 1.0 }, PowerX { q: 1.0, eps: -1.0 });
    let image = apply_to_equation(&t, &source).unwrap().in_class().unwrap();
    let s = finsym::model::Solution::new(e("x^3/15"), "x > 0");
    let mapped = finsym::equivalence::push_forward_solution(&t, &s);
    let r = finsym::numeric::pde_residual_grid(&image, &mapped, (0.0, 1.0), (4.0, 7.0), 50, 1).unwrap();
    assert!(r <= 1e-10, "{r}");
}
