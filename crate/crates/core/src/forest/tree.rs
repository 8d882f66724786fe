//! CART classification trees with Gini impurity.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ForestError, ForestParams};
use crate::NUM_CLASSES;

pub type ClassCounts = [u32; NUM_CLASSES];

/// `1 - Σ (c_i / N)²`.
pub fn gini(counts: &ClassCounts) -> Result<f64, ForestError> {
    let total: u32 = counts.iter().sum();
    if total == 0 {
        return Err(ForestError::EmptyCounts);
    }
    let n = total as f64;
    Ok(1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>())
}

/// A training row borrowed from a dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Row<'a> {
    pub features: &'a [f64],
    pub class: usize,
}

impl<'a> Row<'a> {
    pub fn new(features: &'a [f64], class: usize) -> Self {
        Row { features, class }
    }
}

pub fn count_classes(rows: &[Row]) -> ClassCounts {
    let mut counts = [0; NUM_CLASSES];
    for r in rows {
        counts[r.class] += 1;
    }
    counts
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    /// Rows with `x[feature] <= threshold` go left.
    pub threshold: f64,
    /// Parent impurity minus the size-weighted child impurities.
    pub decrease: f64,
}

/// Exact `Σ c² / n` for both children as a fraction `num / den`; larger
/// means purer children.
#[derive(Clone, Copy)]
struct Purity {
    num: u128,
    den: u128,
}

impl Purity {
    fn of(left: &ClassCounts, nl: u32, right: &ClassCounts, nr: u32) -> Self {
        let sq = |c: &ClassCounts| c.iter().map(|&v| (v as u128).pow(2)).sum::<u128>();
        Purity { num: sq(left) * nr as u128 + sq(right) * nl as u128, den: nl as u128 * nr as u128 }
    }

    fn beats(self, other: Purity) -> bool {
        self.num * other.den > other.num * self.den
    }
}

fn weighted_gini(counts: &ClassCounts, n: u32, total: u32) -> f64 {
    gini(counts).map_or(0.0, |g| g * n as f64 / total as f64)
}

/// Best Gini split over `candidates`, or `None` when nothing reduces impurity.
///
/// Thresholds are midpoints between consecutive distinct values. Ties go to
/// the lower feature index, then the lower threshold; comparisons are done
/// in exact integer arithmetic so ties are real ties.
pub fn best_split(rows: &[Row], candidates: &[usize]) -> Option<Split> {
    best_split_with_min_leaf(rows, candidates, 1)
}

pub(crate) fn best_split_with_min_leaf(rows: &[Row], candidates: &[usize], min_leaf: usize) -> Option<Split> {
    if rows.len() < 2 {
        return None;
    }
    let parent = count_classes(rows);
    let total = rows.len() as u32;
    let parent_purity = Purity {
        num: parent.iter().map(|&v| (v as u128).pow(2)).sum(),
        den: total as u128,
    };
    let min_leaf = min_leaf.max(1);

    let mut features = candidates.to_vec();
    features.sort_unstable();
    features.dedup();

    let mut best: Option<(Purity, usize, f64, ClassCounts, u32)> = None;
    let mut order: Vec<usize> = (0..rows.len()).collect();
    for &f in &features {
        order.sort_by(|&a, &b| rows[a].features[f].total_cmp(&rows[b].features[f]));
        let mut left = [0u32; NUM_CLASSES];
        for i in 0..rows.len() - 1 {
            left[rows[order[i]].class] += 1;
            let lo = rows[order[i]].features[f];
            let hi = rows[order[i + 1]].features[f];
            if lo >= hi {
                continue;
            }
            let nl = i as u32 + 1;
            let nr = total - nl;
            if (nl as usize) < min_leaf || (nr as usize) < min_leaf {
                continue;
            }
            let mut right = parent;
            for c in 0..NUM_CLASSES {
                right[c] -= left[c];
            }
            let purity = Purity::of(&left, nl, &right, nr);
            if !purity.beats(parent_purity) {
                continue;
            }
            if best.as_ref().is_none_or(|b| purity.beats(b.0)) {
                let mid = lo + (hi - lo) / 2.0;
                let threshold = if mid < hi { mid } else { lo };
                best = Some((purity, f, threshold, left, nl));
            }
        }
    }

    best.map(|(_, feature, threshold, left, nl)| {
        let mut right = parent;
        for c in 0..NUM_CLASSES {
            right[c] -= left[c];
        }
        let decrease = gini(&parent).unwrap_or(0.0)
            - weighted_gini(&left, nl, total)
            - weighted_gini(&right, total - nl, total);
        Split { feature, threshold, decrease }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        counts: ClassCounts,
    },
}

impl TreeNode {
    pub fn leaf(counts: ClassCounts) -> Self {
        TreeNode::Leaf { counts }
    }

    /// Edges on the longest root-to-leaf path; a lone leaf has depth 0.
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }

    pub fn leaf_for(&self, x: &[f64]) -> &ClassCounts {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { counts } => return counts,
                TreeNode::Split { feature, threshold, left, right } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    /// Majority class of the reached leaf; ties go to the lower class index.
    pub fn vote(&self, x: &[f64]) -> usize {
        argmax(self.leaf_for(x))
    }
}

/// Index of the first maximum.
pub(crate) fn argmax<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Grows a tree by recursive CART splitting.
///
/// Each node draws `features_per_split` distinct features from `rng` and
/// stops at `max_depth`, on a pure node, below `2 * min_leaf` rows, or when
/// no split reduces impurity. Nodes are expanded depth-first, left first.
pub fn grow_tree<R: Rng + ?Sized>(rows: &[Row], params: &ForestParams, rng: &mut R) -> TreeNode {
    grow(rows, 0, params, rng)
}

fn grow<R: Rng + ?Sized>(rows: &[Row], depth: usize, params: &ForestParams, rng: &mut R) -> TreeNode {
    let counts = count_classes(rows);
    let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
    if depth >= params.max_depth || pure || rows.len() < 2 * params.min_leaf {
        return TreeNode::leaf(counts);
    }
    let n_features = rows[0].features.len();
    let draw = params.features_per_split.min(n_features);
    let candidates = sample(rng, n_features, draw).into_vec();

    match best_split_with_min_leaf(rows, &candidates, params.min_leaf) {
        None => TreeNode::leaf(counts),
        Some(split) => {
            let (left, right): (Vec<Row>, Vec<Row>) =
                rows.iter().partition(|r| r.features[split.feature] <= split.threshold);
            TreeNode::Split {
                feature: split.feature,
                threshold: split.threshold,
                left: Box::new(grow(&left, depth + 1, params, rng)),
                right: Box::new(grow(&right, depth + 1, params, rng)),
            }
        }
    }
}
