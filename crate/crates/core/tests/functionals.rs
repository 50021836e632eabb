use proptest::prelude::*;
use tws_core::conditions::{ap_value, doubling_ratio, strengthened_values};
use tws_core::operators::{maximal_fn, t_trunc, TruncationParams};
use tws_core::poisson::{m_sup, poisson_std};
use tws_core::{Atom, Interval, Measure, StepAtomicMeasure, WeightPair};

fn measure() -> impl Strategy<Value = StepAtomicMeasure> {
    (
        prop::collection::vec((-16i64..16, 0.0f64..4.0), 1..10),
        prop::collection::vec((-4.0f64..4.0, 0.1f64..2.0), 0..3),
    )
        .prop_map(|(cells, atoms)| {
            let atoms = atoms.into_iter().map(|(p, m)| Atom { position: p, mass: m }).collect();
            StepAtomicMeasure::new(1, cells, atoms, false).unwrap()
        })
}

fn interval() -> impl Strategy<Value = Interval> {
    (-10.0f64..10.0, 0.05f64..8.0).prop_map(|(a, l)| Interval::new(a, a + l).unwrap())
}

proptest! {
    #[test]
    fn truncated_transform_is_linear(mu in measure(), nu in measure(), c in -3.0f64..3.0, x in -10.0f64..10.0, eps in 0.01f64..1.0, r in 2.0f64..50.0) {
        let p = TruncationParams::centered(eps, r).unwrap();
        let combo: Measure = mu.scaled(c).add(&nu);
        let lhs = t_trunc(&combo, x, &p);
        let rhs = c * t_trunc(&mu, x, &p) + t_trunc(&nu, x, &p);
        let scale = c.abs() * t_trunc(&mu.abs(), x, &p).abs() + t_trunc(&nu.abs(), x, &p).abs() + 1.0;
        prop_assert!((lhs - rhs).abs() <= 1e-9 * scale, "{} vs {}", lhs, rhs);
    }

    #[test]
    fn truncated_transform_is_odd_for_reflected_atoms(pts in prop::collection::vec((0.1f64..5.0, 0.1f64..2.0), 1..6), eps in 0.01f64..1.0) {
        let p = TruncationParams::centered(eps, 20.0).unwrap();
        let a = StepAtomicMeasure::atomic(pts.iter().map(|&(x, m)| Atom { position: x, mass: m }).collect()).unwrap();
        let b = StepAtomicMeasure::atomic(pts.iter().map(|&(x, m)| Atom { position: -x, mass: m }).collect()).unwrap();
        let (u, v) = (t_trunc(&a, 0.0, &p), t_trunc(&b, 0.0, &p));
        prop_assert!((u + v).abs() <= 1e-12 * (1.0 + u.abs()));
    }

    #[test]
    fn maximal_function_dominates_averages(mu in measure(), q in interval(), t in 0.0f64..1.0) {
        prop_assume!(mu.atoms().is_empty());
        let x = q.left + t * q.length();
        let m = maximal_fn(&mu, x).unwrap().value;
        prop_assert!(m >= mu.mass(&q) / q.length() * (1.0 - 1e-12));
    }

    #[test]
    fn poisson_dominates_average_and_is_homogeneous(mu in measure(), q in interval(), c in 0.1f64..10.0) {
        let p = poisson_std(&q, &mu);
        prop_assert!(p >= mu.mass(&q) / q.length() * (1.0 - 1e-12));
        prop_assert!(m_sup(&q, &mu) >= mu.mass(&q) / q.length() * (1.0 - 1e-12));
        prop_assert!(p >= mu.mass(&q.dilate(2.0)) / (4.0 * q.length()) * (1.0 - 1e-12));
        let scaled = poisson_std(&q, &mu.scaled(c));
        prop_assert!((scaled - c * p).abs() <= 1e-12 * c * p.max(1e-300));
    }

    #[test]
    fn poisson_is_monotone_in_the_measure(mu in measure(), nu in measure(), q in interval()) {
        prop_assert!(poisson_std(&q, &mu.add(&nu)) >= poisson_std(&q, &mu) * (1.0 - 1e-12));
    }

    #[test]
    fn strengthened_chain(sigma in measure(), omega in measure(), q in interval(), p in 1.2f64..6.0) {
        let w = WeightPair::new(sigma, omega, p).unwrap();
        let ap = ap_value(&w, &q);
        let (full, half) = strengthened_values(&w, &q).unwrap();
        prop_assert!(ap <= 2.25 * full * (1.0 + 1e-9) + 1e-300);
        prop_assert!(half <= 1.5 * full * (1.0 + 1e-9) + 1e-300);
        prop_assert!(ap <= 1.5 * half * (1.0 + 1e-9) + 1e-300);
    }

    #[test]
    fn doubling_ratio_at_least_one(mu in measure(), q in interval()) {
        let r = doubling_ratio(&mu, &q);
        prop_assert!(r == 0.0 || r >= 1.0);
    }
}

#[test]
fn lebesgue_ap_is_one() {
    let leb = StepAtomicMeasure::lebesgue(-64.0, 64.0, 0).unwrap();
    let w = WeightPair::new(leb.clone(), leb, 3.0).unwrap();
    for (a, l) in [(0.0, 1.0), (-3.5, 7.25), (10.0, 0.125)] {
        let q = Interval::new(a, a + l).unwrap();
        assert!((ap_value(&w, &q) - 1.0).abs() < 1e-12);
    }
}
