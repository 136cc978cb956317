use gmid_core::gmid::{normalized_max_mult, synthesize};
use gmid_core::quasipoly::{as_quasipolynomial, normalize};
use gmid_core::rootfinder::{find_roots, winding_number, Rectangle, SearchOptions};
use gmid_core::DelaySystem;
use proptest::prelude::*;
use std::f64::consts::PI;

fn pendulum_like() -> DelaySystem {
    DelaySystem::new(2, 1, vec![1.0, 0.3], vec![-0.5, 0.2], 1.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn winding_is_additive(
        x0 in -8.0..-1.0f64, w in 2.0..10.0f64,
        y0 in 0.3..5.0f64, h in 2.0..30.0f64,
        tx in 0.2..0.8f64, ty in 0.2..0.8f64,
    ) {
        let q = as_quasipolynomial(&pendulum_like());
        let rect = Rectangle::new(x0, x0 + w, y0, y0 + h).unwrap();
        let xm = x0 + tx * w;
        let ym = y0 + ty * h;
        let parts = [
            Rectangle::new(x0, xm, y0, ym).unwrap(),
            Rectangle::new(xm, x0 + w, y0, ym).unwrap(),
            Rectangle::new(x0, xm, ym, y0 + h).unwrap(),
            Rectangle::new(xm, x0 + w, ym, y0 + h).unwrap(),
        ];
        let whole = winding_number(&q, &rect);
        let pieces: Result<Vec<usize>, _> = parts.iter().map(|r| winding_number(&q, r)).collect();
        // a random cut can land on a zero; only compare when all counts exist
        if let (Ok(whole), Ok(pieces)) = (whole, pieces) {
            prop_assert_eq!(whole, pieces.iter().sum::<usize>());
        }
    }
}

#[test]
fn simple_roots_have_small_residuals() {
    let q = as_quasipolynomial(&pendulum_like());
    let rect = Rectangle::new(-10.0, 3.0, -PI / 2.0, 60.0).unwrap();
    let opts = SearchOptions::default();
    let rs = find_roots(&q, &rect, &opts).unwrap();
    assert!(rs.is_complete());
    assert_eq!(rs.roots.iter().map(|r| r.multiplicity).sum::<usize>(), rs.total_winding);
    for r in rs.roots.iter().filter(|r| r.multiplicity == 1) {
        let (v, scale) = q.eval_scaled(r.location(), 0).unwrap();
        assert!(v.norm() < opts.tol * scale, "root {}: |f| = {}", r.location(), v.norm());
    }
}

#[test]
fn upper_half_search_mirrors_the_lower_half() {
    let q = as_quasipolynomial(&pendulum_like());
    let opts = SearchOptions::default();
    let upper = find_roots(&q, &Rectangle::new(-10.0, 3.0, -0.5, 40.0).unwrap(), &opts).unwrap();
    let lower = find_roots(&q, &Rectangle::new(-10.0, 3.0, -40.0, 0.5).unwrap(), &opts).unwrap();
    let full = upper.mirrored(1e-9);
    for r in &lower.roots {
        let hit = full
            .iter()
            .any(|u| (u.location() - r.location()).norm() < 1e-8 && u.multiplicity == r.multiplicity);
        assert!(hit, "lower-half root {} missing from the mirrored set", r.location());
    }
}

#[test]
fn identical_inputs_give_identical_root_sets() {
    let sys = synthesize(3, 1, 1.0, -1.0).unwrap().system;
    let q = as_quasipolynomial(&sys);
    let rect = Rectangle::new(-25.0, 3.0, -PI / 2.0, 40.0).unwrap();
    let a = find_roots(&q, &rect, &SearchOptions::default()).unwrap();
    let b = find_roots(&q, &rect, &SearchOptions::default()).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn synthesis_normalizes_to_the_closed_form() {
    for n in 1..=6 {
        for m in 0..=n {
            let closed = normalized_max_mult(n, m).unwrap();
            for tau in [0.5, 1.0, 2.0] {
                for s0 in [-3.0, -1.0, 0.0, 1.0] {
                    let sys = synthesize(n, m, tau, s0).unwrap().system;
                    let nc = normalize(&sys, s0).unwrap();
                    for (x, y) in nc.b.iter().chain(&nc.beta).zip(closed.b.iter().chain(&closed.beta)) {
                        assert!(
                            (x - y).abs() <= 1e-10 * y.abs().max(1.0),
                            "n={n} m={m} tau={tau} s0={s0}: {x} vs {y}"
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn normal_form_double_root_is_isolated() {
    // s + e^{-s} - 1 has a double root at 0 and nothing else with Re >= -1
    let q = normalized_max_mult(1, 0).unwrap().quasipolynomial();
    let rs = find_roots(&q, &Rectangle::new(-1.0, 2.0, -PI / 2.0, 30.0).unwrap(), &SearchOptions::default()).unwrap();
    assert_eq!(rs.roots.len(), 1);
    assert_eq!(rs.roots[0].multiplicity, 2);
    assert!(rs.roots[0].location().norm() < 1e-8, "{}", rs.roots[0].location());
}
