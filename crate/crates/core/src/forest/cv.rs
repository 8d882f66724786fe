//! Stratified splitting and cross-validated grid search.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{forest_fit, ForestError, ForestParams};
use crate::seed::rng_for;
use crate::synth::Dataset;
use crate::{Label, NUM_CLASSES};

/// Per-class sample indices in dataset order.
fn class_indices(ds: &Dataset) -> [Vec<usize>; NUM_CLASSES] {
    let mut out: [Vec<usize>; NUM_CLASSES] = Default::default();
    for (i, s) in ds.samples.iter().enumerate() {
        out[s.label.index()].push(i);
    }
    out
}

/// Splits `ds` into `k` disjoint folds preserving class proportions.
///
/// Each class's indices are shuffled (classes in canonical order, one rng
/// seeded from `seed`) and dealt round-robin; the dealing position carries
/// over between classes so fold sizes stay balanced too.
pub fn stratified_kfold(ds: &Dataset, k: usize, seed: u64) -> Result<Vec<Vec<usize>>, ForestError> {
    if k == 0 {
        return Err(ForestError::InvalidParams("k must be positive".into()));
    }
    let mut per_class = class_indices(ds);
    for (c, idx) in per_class.iter().enumerate() {
        if idx.len() < k {
            return Err(ForestError::TooFewPerClass { label: Label::ALL[c], count: idx.len(), needed: k });
        }
    }
    let mut rng = rng_for(seed, &[0x6b66_6f6c_64]);
    let mut folds = vec![Vec::new(); k];
    let mut slot = 0;
    for idx in per_class.iter_mut() {
        idx.shuffle(&mut rng);
        for &i in idx.iter() {
            folds[slot].push(i);
            slot = (slot + 1) % k;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Stratified train/test split with `n_train` training samples.
///
/// Per-class training counts are proportional (largest remainder, ties to
/// the lower class index); every class keeps at least one sample on each
/// side.
pub fn stratified_split(ds: &Dataset, n_train: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>), ForestError> {
    let total = ds.len();
    if n_train == 0 || n_train >= total {
        return Err(ForestError::InvalidParams(format!("cannot take {n_train} of {total} samples for training")));
    }
    let mut per_class = class_indices(ds);
    let mut quota = [0usize; NUM_CLASSES];
    let mut remainders = Vec::new();
    for (c, idx) in per_class.iter().enumerate() {
        let exact = n_train * idx.len();
        quota[c] = exact / total;
        remainders.push((exact % total, c));
    }
    let assigned: usize = quota.iter().sum();
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, c) in remainders.iter().take(n_train - assigned) {
        quota[c] += 1;
    }
    for (c, idx) in per_class.iter().enumerate() {
        if quota[c] == 0 || quota[c] >= idx.len() {
            return Err(ForestError::TooFewPerClass { label: Label::ALL[c], count: idx.len(), needed: 2 });
        }
    }

    let mut rng = rng_for(seed, &[0x7370_6c69_74]);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (c, idx) in per_class.iter_mut().enumerate() {
        idx.shuffle(&mut rng);
        train.extend_from_slice(&idx[..quota[c]]);
        test.extend_from_slice(&idx[quota[c]..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigScore {
    pub n_trees: usize,
    pub max_depth: usize,
    pub mean_accuracy: f64,
    pub fold_accuracies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub k: usize,
    /// Every configuration, trees-major in grid order.
    pub scores: Vec<ConfigScore>,
    pub best: ConfigScore,
}

/// Scores every `(n_trees, max_depth)` pair by mean K-fold accuracy.
///
/// All configurations share the same folds and forest seed. The best is the
/// highest mean; ties go to fewer trees, then the shallower depth.
pub fn grid_search(
    ds: &Dataset,
    trees_grid: &[usize],
    depth_grid: &[usize],
    k: usize,
    seed: u64,
) -> Result<GridSearchResult, ForestError> {
    if trees_grid.is_empty() || depth_grid.is_empty() {
        return Err(ForestError::InvalidParams("empty hyperparameter grid".into()));
    }
    if k < 2 {
        return Err(ForestError::InvalidParams("cross-validation needs k >= 2".into()));
    }
    let folds = stratified_kfold(ds, k, seed)?;
    let configs: Vec<(usize, usize)> = trees_grid
        .iter()
        .flat_map(|&t| depth_grid.iter().map(move |&d| (t, d)))
        .collect();

    let scores = configs
        .par_iter()
        .map(|&(n_trees, max_depth)| {
            let params = ForestParams::new(n_trees, max_depth, seed);
            let fold_accuracies = (0..k)
                .map(|held_out| {
                    let train_idx: Vec<usize> = folds
                        .iter()
                        .enumerate()
                        .filter(|(f, _)| *f != held_out)
                        .flat_map(|(_, idx)| idx.iter().copied())
                        .collect();
                    let model = forest_fit(&ds.subset(&train_idx), &params)?;
                    let test = &folds[held_out];
                    let correct = test
                        .iter()
                        .filter(|&&i| model.predict(ds.samples[i].features.as_slice()).label == ds.samples[i].label)
                        .count();
                    Ok(correct as f64 / test.len() as f64)
                })
                .collect::<Result<Vec<f64>, ForestError>>()?;
            let mean_accuracy = fold_accuracies.iter().sum::<f64>() / k as f64;
            Ok(ConfigScore { n_trees, max_depth, mean_accuracy, fold_accuracies })
        })
        .collect::<Result<Vec<_>, ForestError>>()?;

    let mut ranked: Vec<&ConfigScore> = scores.iter().collect();
    ranked.sort_by_key(|s| (s.n_trees, s.max_depth));
    let mut best = ranked[0];
    for s in &ranked[1..] {
        if s.mean_accuracy > best.mean_accuracy + 1e-12 {
            best = s;
        }
    }
    let best = best.clone();
    Ok(GridSearchResult { k, scores, best })
}
