use dronelight_core::forest::{
    best_split, forest_fit, forest_fit_rows, gini, grow_tree, model_from_json, model_to_json, stratified_kfold,
    stratified_split, ForestParams, Row,
};
use dronelight_core::signal::{FeatureVector, FEATURE_LEN};
use dronelight_core::synth::{Dataset, LabeledSample, Origin};
use dronelight_core::{Label, NUM_CLASSES};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn gini_formula(counts: &[u32; NUM_CLASSES]) -> f64 {
    let n: u32 = counts.iter().sum();
    1.0 - counts.iter().map(|&c| (c as f64 / n as f64).powi(2)).sum::<f64>()
}

#[test]
fn gini_matches_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let mut counts = [0u32; NUM_CLASSES];
        for c in &mut counts {
            *c = rng.random_range(0..50);
        }
        if counts.iter().sum::<u32>() == 0 {
            counts[rng.random_range(0..NUM_CLASSES)] = 1;
        }
        assert!((gini(&counts).unwrap() - gini_formula(&counts)).abs() < 1e-12, "{counts:?}");
    }
    assert!(gini(&[0; NUM_CLASSES]).is_err());
}

/// Tries every feature and every midpoint; keeps the first strictly best.
fn brute_force(x: &[Vec<f64>], y: &[usize], n_features: usize) -> Option<(usize, f64, f64)> {
    let mut parent = [0u32; NUM_CLASSES];
    for &c in y {
        parent[c] += 1;
    }
    let g0 = gini_formula(&parent);
    let mut best: Option<(usize, f64, f64)> = None;
    for f in 0..n_features {
        let mut values: Vec<f64> = x.iter().map(|r| r[f]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let t = w[0] + (w[1] - w[0]) / 2.0;
            let (mut l, mut r) = ([0u32; NUM_CLASSES], [0u32; NUM_CLASSES]);
            for (row, &c) in x.iter().zip(y) {
                if row[f] <= t {
                    l[c] += 1;
                } else {
                    r[c] += 1;
                }
            }
            let (nl, nr) = (l.iter().sum::<u32>() as f64, r.iter().sum::<u32>() as f64);
            let n = nl + nr;
            let decrease = g0 - nl / n * gini_formula(&l) - nr / n * gini_formula(&r);
            if decrease > 1e-12 && best.is_none_or(|b| decrease > b.2 + 1e-12) {
                best = Some((f, t, decrease));
            }
        }
    }
    best
}

#[test]
fn best_split_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for trial in 0..200 {
        let n = rng.random_range(2..=12);
        let n_features = rng.random_range(1..=3);
        // Small integer grid so ties and duplicate values are common.
        let x: Vec<Vec<f64>> =
            (0..n).map(|_| (0..n_features).map(|_| rng.random_range(0..6) as f64 * 0.5).collect()).collect();
        let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let rows: Vec<Row> = x.iter().zip(&y).map(|(r, &c)| Row::new(r, c)).collect();
        let candidates: Vec<usize> = (0..n_features).collect();

        let got = best_split(&rows, &candidates);
        let want = brute_force(&x, &y, n_features);
        match (got, want) {
            (None, None) => {}
            (Some(g), Some((f, t, d))) => {
                assert!((g.decrease - d).abs() < 1e-12, "trial {trial}: {} vs {d}", g.decrease);
                assert_eq!((g.feature, g.threshold), (f, t), "trial {trial}");
            }
            (g, w) => panic!("trial {trial}: {g:?} vs {w:?}"),
        }
    }
}

fn dataset(per_class: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = Label::ALL
        .iter()
        .flat_map(|&label| std::iter::repeat_n(label, per_class))
        .map(|label| {
            let mut v = [0.0; FEATURE_LEN];
            for (j, x) in v.iter_mut().enumerate() {
                *x = rng.random_range(-1.0..1.0) + if j % NUM_CLASSES == label.index() { 2.0 } else { 0.0 };
            }
            LabeledSample { label, origin: Origin::Synthetic, features: FeatureVector(v) }
        })
        .collect();
    Dataset::new(samples)
}

#[test]
fn folds_partition_and_stratify() {
    for trial in 0..100u64 {
        let ds = dataset(15, trial);
        let folds = stratified_kfold(&ds, 5, trial).unwrap();
        assert_eq!(folds.len(), 5);
        let mut seen = vec![false; ds.len()];
        for fold in &folds {
            let mut per_class = [0; NUM_CLASSES];
            for &i in fold {
                assert!(!seen[i], "index {i} in two folds");
                seen[i] = true;
                per_class[ds.samples[i].label.index()] += 1;
            }
            assert_eq!(per_class, [3; NUM_CLASSES], "trial {trial}");
        }
        assert!(seen.iter().all(|&s| s));
    }
}

#[test]
fn split_is_stratified_partition() {
    let ds = dataset(25, 3);
    let (train, test) = stratified_split(&ds, 75, 42).unwrap();
    assert_eq!((train.len(), test.len()), (75, 50));
    let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..125).collect::<Vec<_>>());
    assert_eq!(ds.subset(&train).class_counts(), [15; NUM_CLASSES]);
}

#[test]
fn forest_determinism_and_persistence() {
    let ds = dataset(10, 5);
    let params = ForestParams::new(20, 4, 8);
    let a = forest_fit(&ds, &params).unwrap();
    let b = forest_fit(&ds, &params).unwrap();
    assert_eq!(a, b);
    let back = model_from_json(&model_to_json(&a)).unwrap();
    for s in &ds.samples {
        assert_eq!(a.predict(s.features.as_slice()), back.predict(s.features.as_slice()));
    }
    let c = forest_fit(&ds, &ForestParams::new(20, 4, 9)).unwrap();
    assert_ne!(a, c);
}

#[test]
fn ensemble_of_one_matches_its_tree() {
    let ds = dataset(8, 21);
    let params = ForestParams::new(1, 3, 4);
    let model = forest_fit(&ds, &params).unwrap();
    assert_eq!(model.trees.len(), 1);
    for s in &ds.samples {
        let p = model.predict(s.features.as_slice());
        assert_eq!(p.label.index(), model.trees[0].vote(s.features.as_slice()));
        assert_eq!(p.posteriors[p.label.index()], 1.0);
    }
}

fn micro_rows() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<usize>)> {
    (2usize..40, 1usize..8).prop_flat_map(|(n, d)| {
        (
            prop::collection::vec(prop::collection::vec(-10.0f64..10.0, d), n),
            prop::collection::vec(0usize..NUM_CLASSES, n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tree_depth_is_bounded((x, y) in micro_rows(), max_depth in 0usize..6, seed in any::<u64>()) {
        let rows: Vec<Row> = x.iter().zip(&y).map(|(r, &c)| Row::new(r, c)).collect();
        let params = ForestParams { features_per_split: x[0].len(), ..ForestParams::new(1, max_depth, seed) };
        let tree = grow_tree(&rows, &params, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert!(tree.depth() <= max_depth);
        prop_assert!(tree.leaf_count() <= 1 << max_depth);
    }

    #[test]
    fn posteriors_sum_to_one((x, y) in micro_rows(), n_trees in 1usize..8, seed in any::<u64>()) {
        let rows: Vec<Row> = x.iter().zip(&y).map(|(r, &c)| Row::new(r, c)).collect();
        let params = ForestParams { features_per_split: x[0].len(), ..ForestParams::new(n_trees, 3, seed) };
        let model = forest_fit_rows(&rows, &params).unwrap();
        for r in &x {
            let p = model.predict(r);
            prop_assert!((p.posteriors.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.posteriors.iter().all(|&q| q >= 0.0));
            prop_assert!(p.posteriors.iter().all(|&q| q <= p.posteriors[p.label.index()]));
        }
    }
}
