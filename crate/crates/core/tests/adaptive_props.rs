use dpmix::adaptive::{
    delta_opt_recursive, delta_opt_recursive_with_argmax, lambda_expansion_delta, worst_case_ordering_check,
    xyz_closed_forms, GridSpec, MechanismSequence, Slot,
};
use dpmix::nonadaptive::{delta_opt_dp, delta_opt_mixed, CompositionQuery};
use proptest::prelude::*;

fn coarse() -> GridSpec {
    GridSpec::new(401, 40).unwrap()
}

fn seq(mask: u32, k: usize, eps: f64) -> MechanismSequence {
    let slots = (0..k).map(|i| if mask >> i & 1 == 1 { Slot::Br } else { Slot::Dp }).collect();
    MechanismSequence::new(slots, eps).unwrap()
}

#[test]
fn all_dp_matches_optimal_dp() {
    for k in 1..=6 {
        for &eg in &[0.0, 0.3, 1.2] {
            let r = delta_opt_recursive(&seq(0, k, 0.5), eg, &coarse()).unwrap();
            let d = delta_opt_dp(k as u64, 0.5, eg).unwrap();
            assert!((r - d).abs() < 1e-12, "k={k} eg={eg}: {r} vs {d}");
            assert!((lambda_expansion_delta(k as u64, 0.5, eg).unwrap() - d).abs() < 1e-12);
        }
    }
}

#[test]
fn top_level_argmax_is_reported() {
    let s = seq(0b11, 2, 1.0);
    let (d, t) = delta_opt_recursive_with_argmax(&s, 0.5, &coarse()).unwrap();
    let t = t.unwrap();
    assert!((0.0..=1.0).contains(&t));
    assert!((d - delta_opt_recursive(&s, 0.5, &coarse()).unwrap()).abs() < 1e-15);
    assert_eq!(delta_opt_recursive_with_argmax(&seq(0b110, 3, 1.0), 0.5, &coarse()).unwrap().1, None);
}

#[test]
fn four_slot_adaptive_dominates_nonadaptive() {
    let s = MechanismSequence::new(vec![Slot::Br, Slot::Dp, Slot::Br, Slot::Dp], 0.6).unwrap();
    let eg = 0.8;
    let adaptive = delta_opt_recursive(&s, eg, &coarse()).unwrap();
    let fixed = delta_opt_mixed(&CompositionQuery::new(4, 2, 0.6, eg).unwrap());
    assert!(adaptive >= fixed - 1e-9, "{adaptive} < {fixed}");
}

#[test]
fn closed_forms_order_the_three_sequences() {
    for &eg in &[0.05, 0.25, 0.45, 0.65, 0.85] {
        let c = xyz_closed_forms(1.0, eg).unwrap();
        assert!(c.delta_dp_br_br() >= c.delta_br_dp_br() - 1e-15);
        assert!(c.delta_br_dp_br() >= c.delta_br_br_dp() - 1e-7);
    }
}

#[test]
fn moving_br_later_never_lowers_delta() {
    let eps = 0.7;
    for &eg in &[0.2, 0.9, 1.6] {
        let a = MechanismSequence::new(vec![Slot::Br, Slot::Dp, Slot::Br, Slot::Dp], eps).unwrap();
        let b = MechanismSequence::new(vec![Slot::Dp, Slot::Br, Slot::Br, Slot::Dp], eps).unwrap();
        assert!(worst_case_ordering_check(&a, &b, eg, &coarse()).unwrap());
    }
    let a = MechanismSequence::new(vec![Slot::Br, Slot::Br], eps).unwrap();
    let b = MechanismSequence::new(vec![Slot::Dp, Slot::Dp], eps).unwrap();
    assert!(worst_case_ordering_check(&a, &b, 0.1, &coarse()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn adaptive_dominates_nonadaptive(k in 1usize..4, mask in 0u32..8, eps in 0.2f64..1.2, f in 0.0f64..1.0) {
        let s = seq(mask & ((1 << k) - 1), k, eps);
        let m = (k - s.br_count()) as u64;
        let eg = f * k as f64 * eps;
        let adaptive = delta_opt_recursive(&s, eg, &coarse()).unwrap();
        let fixed = delta_opt_mixed(&CompositionQuery::new(k as u64, m, eps, eg).unwrap());
        prop_assert!(adaptive >= fixed - 1e-9, "{:?}: {adaptive} < {fixed}", s.slots);
        let dp = delta_opt_dp(k as u64, eps, eg).unwrap();
        prop_assert!(adaptive <= dp + 1e-12);
    }

    #[test]
    fn recursion_is_monotone_in_budget(k in 1usize..4, mask in 0u32..8, eps in 0.2f64..1.2, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let s = seq(mask & ((1 << k) - 1), k, eps);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let top = k as f64 * eps;
        let d_lo = delta_opt_recursive(&s, lo * top, &coarse()).unwrap();
        let d_hi = delta_opt_recursive(&s, hi * top, &coarse()).unwrap();
        prop_assert!(d_hi <= d_lo + 1e-9);
    }
}
