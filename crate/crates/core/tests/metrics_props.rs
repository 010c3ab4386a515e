mod common;

use proptest::prelude::*;
use qcredit::metrics::{auc, roc_curve};

/// Scores drawn from a small grid so ties are common.
fn scored_labels() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    (2usize..=200, 1u32..=20).prop_flat_map(|(n, levels)| {
        (
            prop::collection::vec((0..levels).prop_map(move |k| k as f64 / levels as f64), n),
            prop::collection::vec(0u8..=1, n),
        )
            .prop_filter("both classes", |(_, y)| y.contains(&0) && y.contains(&1))
    })
}

fn continuous() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    (2usize..=200).prop_flat_map(|n| {
        (
            prop::collection::vec(-1e3f64..1e3, n),
            prop::collection::vec(0u8..=1, n),
        )
            .prop_filter("both classes", |(_, y)| y.contains(&0) && y.contains(&1))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn rank_auc_equals_pairwise_count((s, y) in scored_labels()) {
        let a = auc(&s, &y).unwrap();
        let (twice, pairs) = common::pairwise_auc_parts(&s, &y);
        prop_assert_eq!(pairs, (a.n_pos * a.n_neg) as u64);
        prop_assert!((a.value - common::pairwise_auc(&s, &y)).abs() < 1e-12);
        // exact: value * 2 * pairs is the integer favourable count
        prop_assert_eq!((a.value * 2.0 * pairs as f64).round() as u64, twice);
    }

    #[test]
    fn rank_auc_on_continuous_scores((s, y) in continuous()) {
        prop_assert!((auc(&s, &y).unwrap().value - common::pairwise_auc(&s, &y)).abs() < 1e-12);
    }

    #[test]
    fn flipping_labels_complements((s, y) in scored_labels()) {
        let flipped: Vec<u8> = y.iter().map(|v| 1 - v).collect();
        let total = auc(&s, &y).unwrap().value + auc(&s, &flipped).unwrap().value;
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn negating_scores_complements((s, y) in scored_labels()) {
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        let total = auc(&s, &y).unwrap().value + auc(&neg, &y).unwrap().value;
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invariant_under_monotone_maps((s, y) in scored_labels()) {
        let mapped: Vec<f64> = s.iter().map(|v| (3.0 * v).exp() + 7.0).collect();
        prop_assert_eq!(auc(&s, &y).unwrap().value, auc(&mapped, &y).unwrap().value);
    }

    #[test]
    fn roc_area_equals_auc((s, y) in scored_labels()) {
        let roc = roc_curve(&s, &y).unwrap();
        prop_assert!((roc.area() - auc(&s, &y).unwrap().value).abs() < 1e-12);
        prop_assert_eq!((roc.fpr[0], roc.tpr[0]), (0.0, 0.0));
        prop_assert_eq!((*roc.fpr.last().unwrap(), *roc.tpr.last().unwrap()), (1.0, 1.0));
        for w in roc.fpr.windows(2).zip(roc.tpr.windows(2)) {
            prop_assert!(w.0[1] >= w.0[0] && w.1[1] >= w.1[0]);
        }
        for t in roc.thresholds.windows(2) {
            prop_assert!(t[1] < t[0]);
        }
    }

    #[test]
    fn permutation_invariant((s, y) in scored_labels(), rot in 0usize..200) {
        let k = rot % s.len();
        let (mut s2, mut y2) = (s.clone(), y.clone());
        s2.rotate_left(k);
        y2.rotate_left(k);
        prop_assert_eq!(auc(&s, &y).unwrap().value, auc(&s2, &y2).unwrap().value);
    }
}

#[test]
fn worked_example() {
    assert_eq!(
        auc(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]).unwrap().value,
        0.75
    );
}

#[test]
fn perfect_scores_pass_through_top_left() {
    let roc = roc_curve(&[0.9, 0.8, 0.2, 0.1], &[1, 1, 0, 0]).unwrap();
    assert!(roc
        .fpr
        .iter()
        .zip(&roc.tpr)
        .any(|(&f, &t)| f == 0.0 && t == 1.0));
    assert_eq!(roc.area(), 1.0);
}

#[test]
fn ties_only_gives_diagonal_endpoints() {
    let roc = roc_curve(&[0.5; 6], &[0, 1, 1, 0, 0, 1]).unwrap();
    assert_eq!(roc.fpr, vec![0.0, 1.0]);
    assert_eq!(roc.tpr, vec![0.0, 1.0]);
    assert_eq!(roc.area(), 0.5);
}
