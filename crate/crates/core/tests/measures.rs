use proptest::prelude::*;
use tws_core::{Atom, Interval, StepAtomicMeasure};

fn dyadic_measure() -> impl Strategy<Value = StepAtomicMeasure> {
    (
        prop::collection::vec((-32i64..32, 0u32..64), 0..12),
        prop::collection::vec((-64i64..64, 1u32..16), 0..4),
    )
        .prop_map(|(cells, atoms)| {
            let cells = cells.into_iter().map(|(k, w)| (k, w as f64 / 8.0));
            let atoms = atoms
                .into_iter()
                .map(|(k, m)| Atom { position: k as f64 / 8.0, mass: m as f64 / 4.0 })
                .collect();
            StepAtomicMeasure::new(2, cells, atoms, false).unwrap()
        })
}

proptest! {
    #[test]
    fn mass_is_additive_on_dyadic_splits(mu in dyadic_measure(), a in -80i64..80, len in 1i64..40, cut in 0i64..40) {
        let (l, r) = (a as f64 / 16.0, (a + len) as f64 / 16.0);
        let m = l + (cut.min(len - 1).max(1)) as f64 / 16.0;
        prop_assume!(l < m && m < r);
        let whole = mu.mass(&Interval::new(l, r).unwrap());
        let parts = mu.mass(&Interval::new(l, m).unwrap()) + mu.mass(&Interval::new(m, r).unwrap());
        prop_assert_eq!(whole, parts);
    }

    #[test]
    fn mass_is_monotone_and_bounded(mu in dyadic_measure(), a in -20.0f64..20.0, len in 0.01f64..10.0, grow in 0.0f64..5.0) {
        let small = mu.mass(&Interval::new(a, a + len).unwrap());
        let big = mu.mass(&Interval::new(a - grow, a + len + grow).unwrap());
        prop_assert!(0.0 <= small && small <= big && big <= mu.total_mass() * (1.0 + 1e-12));
    }

    #[test]
    fn json_round_trip(mu in dyadic_measure()) {
        let back = StepAtomicMeasure::from_json(&mu.to_json()).unwrap();
        prop_assert_eq!(back.cells(), mu.cells());
        prop_assert_eq!(back.atoms(), mu.atoms());
    }

    #[test]
    fn scaling_and_sum_are_linear(mu in dyadic_measure(), nu in dyadic_measure(), c in 0.0f64..4.0, a in -10.0f64..10.0, len in 0.1f64..8.0) {
        let q = Interval::new(a, a + len).unwrap();
        let lhs = mu.scaled(c).add(&nu).mass(&q);
        let rhs = c * mu.mass(&q) + nu.mass(&q);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
    }

    #[test]
    fn off_support_hilbert_is_odd_under_reflection(pos in prop::collection::vec((0.0f64..1.0, 0.1f64..2.0), 1..6), x in 2.0f64..10.0) {
        let atoms: Vec<Atom> = pos.iter().map(|&(p, m)| Atom { position: p, mass: m }).collect();
        let refl: Vec<Atom> = pos.iter().map(|&(p, m)| Atom { position: -p, mass: m }).collect();
        let h = StepAtomicMeasure::atomic(atoms).unwrap().hilbert_off_support(x, 0.5).unwrap();
        let g = StepAtomicMeasure::atomic(refl).unwrap().hilbert_off_support(-x, 0.5).unwrap();
        prop_assert!((h + g).abs() <= 1e-12 * h.abs());
        prop_assert!(h > 0.0);
    }
}

#[test]
fn negative_density_is_rejected_unless_signed() {
    assert!(StepAtomicMeasure::new(0, [(0, -1.0)], vec![], false).is_err());
    assert!(StepAtomicMeasure::new(0, [(0, -1.0)], vec![], true).is_ok());
}
