mod common;

use common::oracles;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use volnorm::mlkit::*;

#[test]
fn auroc_matches_pairwise_oracle() {
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(4..40);
        // coarse scores force ties
        let scores: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..8u8)) / 8.0).collect();
        let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2u8)).collect();
        labels[0] = 0;
        labels[1] = 1;
        let got = auroc(&scores, &labels).unwrap();
        assert!((got - oracles::auroc_pairwise(&scores, &labels)).abs() < 1e-12, "seed {seed}");
    }
}

#[test]
fn hand_confusion_metrics() {
    let m = binary_metrics(&Confusion { tp: 7, fp: 3, fn_: 2, tn: 8 });
    assert_eq!(m.accuracy, Some(0.75));
    assert!((m.sensitivity.unwrap() - 7.0 / 9.0).abs() < 1e-15);
    assert!((m.specificity.unwrap() - 8.0 / 11.0).abs() < 1e-15);
    assert!((m.ppv.unwrap() - 0.7).abs() < 1e-15);
    assert!((m.npv.unwrap() - 0.8).abs() < 1e-15);
    assert_eq!(binary_metrics(&Confusion { tp: 0, fp: 4, fn_: 0, tn: 6 }).sensitivity, None);
}

#[test]
fn anova_matches_textbook_oracle() {
    for seed in 0..10 {
        let design = common::random_design(seed);
        let t = anova_two_way(&design, 0.05).unwrap();
        let (f, dfw) = oracles::anova_f(&design);
        assert_eq!(t.within_df, dfw);
        for (got, want) in [t.a.f, t.b.f, t.interaction.f].iter().zip(f) {
            let got = got.unwrap();
            assert!((got - want).abs() <= 1e-6 * want.abs().max(1.0), "seed {seed}: {got} vs {want}");
        }
    }
}

#[test]
fn f_quantile_matches_reference_critical_value() {
    assert!((volnorm::stats::f_cdf(4.0427, 1.0, 40.0) - 0.948_862_284).abs() < 1e-8);
    assert!((volnorm::stats::f_crit(0.05, 1.0, 40.0) - 4.084_746).abs() < 1e-4);
    assert!((volnorm::stats::f_crit(0.05, 1.0, 48.0) - 4.042_652_129).abs() < 1e-6);
}

#[test]
fn forest_separates_blobs() {
    let data = common::separable_blobs(200, 3);
    let report = kfold_cv(&data, &ForestConfig::default(), 5, 0).unwrap();
    assert!(report.mean.accuracy.unwrap() >= 0.95);
    for f in &report.folds {
        assert_eq!(f.confusion.total(), f.test_indices.len());
    }
}

#[test]
fn shallow_forest_never_beats_deep_on_depth_two_concept() {
    // label = XOR of two thresholds: a depth-2 concept
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x: Vec<Vec<f64>> = (0..160).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
    let y = x.iter().map(|r| u8::from((r[0] > 0.0) ^ (r[1] > 0.0))).collect();
    let data = Dataset::new(x, y).unwrap();
    let grid = ParamGrid { max_depth: vec![Some(1), None], ..ParamGrid::single(&ForestConfig::default()) };
    let g = grid_search(&data, &grid, &ForestConfig::default(), 5, 1).unwrap();
    assert_eq!(g.best().max_depth, None);
    assert!(g.rows[0].mean_accuracy < g.rows[1].mean_accuracy);
}

fn dataset_strategy() -> impl Strategy<Value = Dataset> {
    (3usize..30, 1usize..4).prop_flat_map(|(n, d)| {
        (proptest::collection::vec(proptest::collection::vec(-5i32..5, d), n), proptest::collection::vec(0u8..2, n)).prop_map(|(x, y)| {
            // dedupe rows so the labeling is consistent
            let mut seen = std::collections::BTreeMap::new();
            for (r, l) in x.into_iter().zip(y) {
                seen.entry(r).or_insert(l);
            }
            let (x, y): (Vec<_>, Vec<_>) = seen.into_iter().map(|(r, l)| (r.into_iter().map(f64::from).collect::<Vec<_>>(), l)).unzip();
            Dataset::new(x, y).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rates_are_complementary(tp in 0usize..50, fp in 0usize..50, fn_ in 0usize..50, tn in 0usize..50) {
        let c = Confusion { tp, fp, fn_, tn };
        let m = binary_metrics(&c);
        if let (Some(s), Some(r)) = (m.sensitivity, c.false_negative_rate()) {
            prop_assert_eq!(s + r, 1.0);
        }
        if let (Some(s), Some(r)) = (m.specificity, c.false_positive_rate()) {
            prop_assert_eq!(s + r, 1.0);
        }
        for v in [m.accuracy, m.sensitivity, m.specificity, m.ppv, m.npv].into_iter().flatten() {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn auroc_invariant_under_monotone_maps(scores in proptest::collection::vec(-10.0f64..10.0, 2..40), seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut labels: Vec<u8> = scores.iter().map(|_| rng.random_range(0..2u8)).collect();
        labels[0] = 0;
        labels[1] = 1;
        let a = auroc(&scores, &labels).unwrap();
        let mapped: Vec<f64> = scores.iter().map(|s| (0.3 * s).exp() * 5.0 + s.powi(3)).collect();
        prop_assert_eq!(a, auroc(&mapped, &labels).unwrap());
    }

    #[test]
    fn folds_partition_the_data(n in 2usize..200, k in 2usize..10, seed in 0u64..100) {
        prop_assume!(k <= n);
        let folds = fold_indices(n, k, seed).unwrap();
        prop_assert_eq!(folds.len(), k);
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        prop_assert!(sizes.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn unrestricted_single_tree_fits_consistent_data(data in dataset_strategy(), crit in prop_oneof![Just(Criterion::Gini), Just(Criterion::Entropy)]) {
        let cfg = ForestConfig { n_estimators: 1, bootstrap: false, max_depth: None, min_samples_split: 2, criterion: crit, ..ForestConfig::default() };
        let forest = fit_forest(&data, &cfg).unwrap();
        for (x, &y) in data.x().iter().zip(data.y()) {
            prop_assert_eq!(u8::from(predict_proba(&forest, x).unwrap() > 0.5), y);
        }
    }

    #[test]
    fn forest_is_deterministic(data in dataset_strategy(), seed in 0u64..50) {
        let cfg = ForestConfig { n_estimators: 7, seed, ..ForestConfig::default() };
        let a = fit_forest(&data, &cfg).unwrap();
        let b = fit_forest(&data, &cfg).unwrap();
        for x in data.x() {
            prop_assert_eq!(predict_proba(&a, x).unwrap(), predict_proba(&b, x).unwrap());
        }
    }

    #[test]
    fn impact_trivial_cases(pop in 0u64..1_000_000, prev in 0.0f64..=1.0) {
        let full = impact_extrapolation(pop, prev, 1.0, 1.0).unwrap();
        prop_assert_eq!(full.correctly_recommended, (pop as f64 * prev).round() as u64);
        prop_assert_eq!(full.correctly_discouraged, (pop as f64 * (1.0 - prev)).round() as u64);
        let none = impact_extrapolation(pop, prev, 0.0, 0.0).unwrap();
        prop_assert_eq!((none.correctly_recommended, none.correctly_discouraged), (0, 0));
    }
}
