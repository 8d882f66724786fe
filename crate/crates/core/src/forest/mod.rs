//! Random forest classifier built from scratch: bootstrap-bagged CART trees
//! with per-split feature subsampling, stratified K-fold grid search, and
//! confusion-matrix metrics.

mod cv;
mod metrics;
mod persist;
mod tree;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use cv::{grid_search, stratified_kfold, stratified_split, ConfigScore, GridSearchResult};
pub use metrics::{evaluate, ConfusionMatrix, Metrics};
pub use persist::{load_model, model_from_json, model_to_json, save_model, MODEL_VERSION};
pub use tree::{best_split, count_classes, gini, grow_tree, ClassCounts, Row, Split, TreeNode};

use crate::seed::rng_for;
use crate::signal::{FeatureVector, FEATURE_LEN};
use crate::synth::Dataset;
use crate::{Label, NUM_CLASSES};

pub const DEFAULT_TREES_GRID: [usize; 4] = [50, 100, 200, 300];
pub const DEFAULT_DEPTH_GRID: [usize; 4] = [2, 3, 4, 6];
pub const DEFAULT_FOLDS: usize = 5;

#[derive(Debug, thiserror::Error)]
pub enum ForestError {
    #[error("class counts are all zero")]
    EmptyCounts,
    #[error("dataset has no samples of class {0}")]
    MissingClass(Label),
    #[error("class {label} has {count} samples, fewer than the {needed} required")]
    TooFewPerClass { label: Label, count: usize, needed: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid forest parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("model format: {0}")]
    Format(String),
}

impl PartialEq for ForestError {
    fn eq(&self, other: &Self) -> bool {
        self.to_string() == other.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub features_per_split: usize,
    pub seed: u64,
}

impl Default for ForestParams {
    /// The configuration that won the reference grid search: 100 trees of depth 3.
    fn default() -> Self {
        ForestParams::new(100, 3, 42)
    }
}

impl ForestParams {
    /// `min_leaf = 1` and `ceil(sqrt(30)) = 6` features per split.
    pub fn new(n_trees: usize, max_depth: usize, seed: u64) -> Self {
        ForestParams {
            n_trees,
            max_depth,
            min_leaf: 1,
            features_per_split: (FEATURE_LEN as f64).sqrt().ceil() as usize,
            seed,
        }
    }

    pub fn validate(&self, n_features: usize) -> Result<(), ForestError> {
        if self.n_trees == 0 || self.max_depth == 0 || self.min_leaf == 0 || self.features_per_split == 0 {
            return Err(ForestError::InvalidParams("all counts must be positive".into()));
        }
        if self.features_per_split > n_features {
            return Err(ForestError::InvalidParams(format!(
                "features_per_split {} exceeds {n_features} features",
                self.features_per_split
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForestModel {
    pub trees: Vec<TreeNode>,
    pub params: ForestParams,
    pub labels: [Label; NUM_CLASSES],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: Label,
    /// Fraction of trees voting for each class, canonical label order.
    pub posteriors: [f64; NUM_CLASSES],
}

pub fn dataset_rows(ds: &Dataset) -> Vec<Row<'_>> {
    ds.samples.iter().map(|s| Row::new(s.features.as_slice(), s.label.index())).collect()
}

/// Trains on `ds`, which must contain every class.
pub fn forest_fit(ds: &Dataset, params: &ForestParams) -> Result<RandomForestModel, ForestError> {
    if ds.is_empty() {
        return Err(ForestError::EmptyDataset);
    }
    let counts = ds.class_counts();
    if let Some(i) = counts.iter().position(|&c| c == 0) {
        return Err(ForestError::MissingClass(Label::ALL[i]));
    }
    forest_fit_rows(&dataset_rows(ds), params)
}

/// Trains on arbitrary rows without requiring every class to be present.
///
/// Tree `i` is grown on a bootstrap sample of `rows.len()` draws from an rng
/// seeded by `derive_seed(params.seed, [i])`; the same rng then drives that
/// tree's feature subsampling. Trees are grown in parallel with identical
/// results to a sequential run.
pub fn forest_fit_rows(rows: &[Row], params: &ForestParams) -> Result<RandomForestModel, ForestError> {
    let Some(first) = rows.first() else {
        return Err(ForestError::EmptyDataset);
    };
    params.validate(first.features.len())?;
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(params.seed, &[i as u64]);
            let bag: Vec<Row> = (0..rows.len()).map(|_| rows[rng.random_range(0..rows.len())]).collect();
            grow_tree(&bag, params, &mut rng)
        })
        .collect();
    Ok(RandomForestModel { trees, params: *params, labels: Label::ALL })
}

impl RandomForestModel {
    pub fn predict(&self, x: &[f64]) -> Prediction {
        let mut votes = [0usize; NUM_CLASSES];
        for t in &self.trees {
            votes[t.vote(x)] += 1;
        }
        let n = self.trees.len().max(1) as f64;
        let posteriors = votes.map(|v| v as f64 / n);
        Prediction { label: self.labels[tree::argmax(&votes)], posteriors }
    }
}

pub fn forest_predict(model: &RandomForestModel, features: &FeatureVector) -> Prediction {
    model.predict(features.as_slice())
}
