use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tws_core::corpus::spread_step_function;
use tws_core::decomp::{cz_split, root_height, verify_cz, verify_whitney, whitney, CellSet, WhitneyParams};
use tws_core::dyadic::Shift;
use tws_core::StepAtomicMeasure;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn whitney_cubes_are_disjoint_and_cover(cells in prop::collection::btree_set(-40i64..40, 1..30), shift in prop::sample::select(Shift::ALL.to_vec())) {
        let omega = CellSet::new(2, cells.into_iter().collect());
        let params = WhitneyParams { shift, ..WhitneyParams::default() };
        let wd = whitney(&omega, 0, &params).unwrap();
        let check = verify_whitney(&wd);
        prop_assert!(check.disjoint);
        prop_assert!(check.cover_defect.abs() <= 1e-12 * omega.measure().max(1.0));
        prop_assert!(check.inner);
        prop_assert!(wd.residual >= 0.0);
    }

    #[test]
    fn cz_split_invariants(seed in any::<u64>(), cells in prop::collection::vec(0.5f64..2.0, 8..32)) {
        let sigma = StepAtomicMeasure::new(3, cells.into_iter().enumerate().map(|(k, w)| (k as i64 - 8, w)), vec![], false).unwrap();
        let gamma = 8.0;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = spread_step_function(&mut rng, &sigma, gamma, 3.0);
        let Ok(low) = root_height(&f, &sigma, gamma, Shift::Zero) else { return Ok(()); };
        prop_assume!(low > i32::MIN);
        let cz = cz_split(&f, &sigma, gamma, low.max(-2), Shift::Zero, 12).unwrap();
        let check = verify_cz(&cz, &f, &sigma);
        prop_assert!(check.split_exact);
        prop_assert!(check.mean_zero_defect <= 1e-12);
        prop_assert!(check.average_bounds);
    }
}
