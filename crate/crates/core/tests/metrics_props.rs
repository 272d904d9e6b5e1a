// SPDX-License-Identifier: Apache-2.0

mod common;

use common::pairwise_auc;
use forgebench::dataset::Label;
use forgebench::metrics::{auc, LabeledScores};
use forgebench::scorer::aggregate_video_score;
use proptest::prelude::*;

/// Scores drawn from a small grid so ties are common, or from the unit
/// interval.
fn scores(max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop_oneof![
        proptest::collection::vec((0u8..6).prop_map(|v| v as f64 / 5.0), 1..max),
        proptest::collection::vec(0.0f64..=1.0, 1..max),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn auc_matches_pair_count(fakes in scores(25), reals in scores(25)) {
        let data = LabeledScores::from_classes(&fakes, &reals).unwrap();
        let a = auc(&data).unwrap();
        prop_assert!((a - pairwise_auc(&fakes, &reals)).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn complement_symmetry_is_exact(fakes in scores(25), reals in scores(25)) {
        let data = LabeledScores::from_classes(&fakes, &reals).unwrap();
        prop_assert_eq!(auc(&data).unwrap() + auc(&data.inverted()).unwrap(), 1.0);
    }

    #[test]
    fn invariant_under_monotone_maps(fakes in scores(20), reals in scores(20)) {
        let data = LabeledScores::from_classes(&fakes, &reals).unwrap();
        // scaling by a power of two is exact, so no new ties appear
        let map = |v: &Vec<f64>| v.iter().map(|x| 8.0 * x).collect::<Vec<_>>();
        let mapped = LabeledScores::from_classes(&map(&fakes), &map(&reals)).unwrap();
        prop_assert_eq!(auc(&data).unwrap(), auc(&mapped).unwrap());
    }

    #[test]
    fn invariant_under_input_order(fakes in scores(20), reals in scores(20), seed in any::<u64>()) {
        let data = LabeledScores::from_classes(&fakes, &reals).unwrap();
        let mut pairs = data.pairs().to_vec();
        let mut rng = forgebench::rng::Xoshiro256pp::from_seed(seed);
        for i in (1..pairs.len()).rev() {
            pairs.swap(i, rng.below(i as u64 + 1) as usize);
        }
        prop_assert_eq!(auc(&data).unwrap(), auc(&LabeledScores::new(pairs).unwrap()).unwrap());
    }

    #[test]
    fn aggregate_is_bounded_and_order_free(mut v in proptest::collection::vec(0.0f64..=1.0, 1..40)) {
        let a = aggregate_video_score(&v).unwrap();
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(a >= lo - 1e-12 && a <= hi + 1e-12);
        v.reverse();
        prop_assert!((aggregate_video_score(&v).unwrap() - a).abs() <= 1e-12);
    }
}

#[test]
fn single_class_is_degenerate() {
    let d = LabeledScores::new(vec![(0.1, Label::Fake), (0.2, Label::Fake)]).unwrap();
    assert!(auc(&d).is_err());
}

#[test]
fn non_finite_scores_rejected() {
    assert!(LabeledScores::new(vec![(f64::NAN, Label::Fake), (0.2, Label::Real)]).is_err());
}
