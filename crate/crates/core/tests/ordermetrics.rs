mod common;

use common::oracles::{cut_pair_distance, cut_pair_distance_per_class};
use gosvm::data::{Label, RngSeed};
use gosvm::ordermetrics::{
    empirical_liso, empirical_order_distance, exact_ordinal_loss, loss_balance, shashua_levin_loss,
    OrderingMode,
};
use proptest::prelude::*;
use rand::Rng;

/// Values with deliberate ties: drawn from a small integer range.
fn tied(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(0..6) as f64).collect()
}

#[test]
fn sweep_matches_cut_pair_brute_force() {
    let mut rng = RngSeed::new(11, 0).rng();
    for case in 0..300 {
        let n = rng.random_range(1..=30);
        let (h, t) = if case % 2 == 0 {
            (tied(&mut rng, n), tied(&mut rng, n))
        } else {
            (
                (0..n).map(|_| rng.random::<f64>()).collect(),
                (0..n).map(|_| rng.random::<f64>()).collect(),
            )
        };
        let fast = empirical_order_distance(&h, &t).unwrap();
        assert_eq!(
            fast,
            cut_pair_distance(&h, &t),
            "case {case}: h={h:?} t={t:?}"
        );
    }
}

#[test]
fn per_class_matches_brute_force() {
    let mut rng = RngSeed::new(12, 0).rng();
    for case in 0..100 {
        let n = rng.random_range(2..=20);
        let mut pos: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        pos[0] = true;
        pos[1] = false;
        let labels: Vec<Label> = pos
            .iter()
            .map(|&p| if p { Label::Positive } else { Label::Negative })
            .collect();
        let h = tied(&mut rng, n);
        let t: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let fast = empirical_liso(&h, &t, OrderingMode::PerClass, Some(&labels)).unwrap();
        assert_eq!(
            fast,
            cut_pair_distance_per_class(&h, &t, &pos),
            "case {case}"
        );
    }
}

#[test]
fn three_point_reversal() {
    assert_eq!(
        cut_pair_distance(&[3.0, 2.0, 1.0], &[1.0, 2.0, 3.0]),
        1.0 / 3.0
    );
    assert_eq!(
        empirical_order_distance(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(),
        1.0 / 3.0
    );
}

#[test]
fn per_class_requires_both_classes() {
    let labels = [Label::Positive; 3];
    assert!(empirical_liso(
        &[1.0, 2.0, 3.0],
        &[1.0, 2.0, 3.0],
        OrderingMode::PerClass,
        Some(&labels)
    )
    .is_err());
    assert!(empirical_liso(&[1.0], &[1.0], OrderingMode::PerClass, None).is_err());
}

#[test]
fn balance_weights() {
    let y = [Label::Positive, Label::Negative];
    assert_eq!(loss_balance(&[-1.0, 1.0], &y, 2.0).unwrap(), 0.5);
    assert_eq!(loss_balance(&[-1.0, 1.0], &y, 0.5).unwrap(), -0.5);
    assert!(loss_balance(&[1.0], &[Label::Positive], 0.0).is_err());
}

#[test]
fn shashua_levin_distance_to_slot() {
    // Slots: (-inf, 0], [0, 1], [1, inf) with rho 0.2 shrinking each by 0.1.
    let inf = f64::INFINITY;
    let g = [-inf, 0.0, 1.0, inf];
    let loss = shashua_levin_loss(&[-0.5, 0.5, 0.95], &[0, 1, 1], &g, 0.2).unwrap();
    assert!((loss - 0.05).abs() < 1e-12);
    assert!(shashua_levin_loss(&[0.0], &[1], &[-inf, 1.0, 0.0, inf], 0.2).is_err());
}

#[test]
fn exact_ordinal_loss_is_zero_for_consistent_spread_scores() {
    let oracle = [1.0, 2.0, 3.0, 4.0];
    let h = [0.0, 10.0, 20.0, 30.0];
    assert!(exact_ordinal_loss(&h, &oracle, 1.0).unwrap() < 1e-9);
    // Reversed scores must pay.
    let r: Vec<f64> = h.iter().rev().copied().collect();
    assert!(exact_ordinal_loss(&r, &oracle, 1.0).unwrap() > 1.0);
}

fn increasing_transform(k: u8) -> impl Fn(f64) -> f64 {
    move |x| match k % 4 {
        0 => x.exp(),
        1 => x.powi(3) + x,
        2 => x.atan(),
        _ => 5.0 * x - 7.0,
    }
}

proptest! {
    #[test]
    fn liso_invariant_under_increasing_maps(
        raw in prop::collection::vec((-3i32..3, -20i32..20), 1..25),
        k in 0u8..4,
    ) {
        let h: Vec<f64> = raw.iter().map(|p| p.0 as f64 * 0.5).collect();
        let t: Vec<f64> = raw.iter().map(|p| p.1 as f64 * 0.1).collect();
        let m = increasing_transform(k);
        let mh: Vec<f64> = h.iter().map(|&v| m(v)).collect();
        let mt: Vec<f64> = t.iter().map(|&v| m(v)).collect();
        let base = empirical_order_distance(&h, &t).unwrap();
        prop_assert_eq!(base, empirical_order_distance(&mh, &t).unwrap());
        prop_assert_eq!(base, empirical_order_distance(&h, &mt).unwrap());
        prop_assert_eq!(base, empirical_liso(&mh, &mt, OrderingMode::Global, None).unwrap());
    }

    #[test]
    fn distance_in_unit_interval_and_zero_on_self(h in prop::collection::vec(-5.0f64..5.0, 0..30)) {
        prop_assert_eq!(empirical_order_distance(&h, &h).unwrap(), 0.0);
        let r: Vec<f64> = h.iter().map(|v| -v).collect();
        let d = empirical_order_distance(&h, &r).unwrap();
        prop_assert!((0.0..=1.0).contains(&d));
    }
}
