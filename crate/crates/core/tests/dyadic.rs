use proptest::prelude::*;
use tws_core::dyadic::{besicovitch_maximal, locate, select_shifted_grid, smallest_covering, DyadicInterval, Shift};
use tws_core::Interval;

fn shift() -> impl Strategy<Value = Shift> {
    prop::sample::select(Shift::ALL.to_vec())
}

proptest! {
    #[test]
    fn located_cube_contains_point(s in shift(), x in -100.0f64..100.0, scale in -12i32..6) {
        let q = locate(s, x, scale);
        prop_assert!(q.contains_point(x));
        prop_assert_eq!(q.length(), 2f64.powi(scale));
    }

    #[test]
    fn children_partition_parent(s in shift(), scale in -8i32..8, k in -1000i64..1000) {
        let q = DyadicInterval::new(scale, k, s);
        let [a, b] = q.children();
        prop_assert_eq!(a.left_exact(), q.left_exact());
        prop_assert_eq!(a.right_exact(), b.left_exact());
        prop_assert_eq!(b.right_exact(), q.right_exact());
        prop_assert_eq!(a.parent(), q);
        prop_assert_eq!(b.parent(), q);
        prop_assert!(q.parent().contains(&q));
    }

    #[test]
    fn some_shift_covers_every_interval(lo in -50.0f64..50.0, len in 1e-3f64..20.0) {
        let hi = lo + len;
        let found: Vec<_> = Shift::ALL.iter().filter_map(|&s| smallest_covering(s, lo, hi).ok()).collect();
        prop_assert!(!found.is_empty());
        for q in &found {
            prop_assert!(q.covers_closed(lo, hi));
            for c in q.children() {
                prop_assert!(!c.covers_closed(lo, hi));
            }
        }
        let sel = select_shifted_grid(&Interval::new(lo, hi).unwrap());
        let triple = Interval::new(lo, hi).unwrap().dilate(3.0);
        prop_assert!(sel.hat.covers_closed(triple.left, triple.right));
        prop_assert!(sel.ratio <= 18.0);
    }

    #[test]
    fn besicovitch_selection_covers_and_is_sparse(cubes in prop::collection::vec((-6i32..0, -40i64..40), 1..30), m in prop::sample::select(vec![1u32, 3, 5])) {
        let cubes: Vec<_> = cubes.into_iter().map(|(s, k)| DyadicInterval::new(s, k, Shift::Zero)).collect();
        let sel = besicovitch_maximal(&cubes, m).unwrap();
        for c in &cubes {
            let d = c.dilate(m as f64);
            prop_assert!(sel.iter().any(|s| s.dilate(m as f64).contains_interval(&d)));
        }
        // every point lies in a bounded number of selected dilates
        for s in &sel {
            let x = s.center();
            let depth = sel.iter().filter(|t| t.dilate(m as f64).contains(x)).count();
            prop_assert!(depth <= 2 * m as usize + 2, "depth {}", depth);
        }
    }
}

#[test]
fn even_dilation_is_rejected() {
    assert!(besicovitch_maximal(&[DyadicInterval::new(0, 0, Shift::Zero)], 2).is_err());
}
