//! Versioned JSON model files. Trees are stored as flat pre-order node lists.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ClassCounts, ForestError, ForestParams, RandomForestModel, TreeNode};
use crate::signal::FEATURE_LEN;
use crate::{Label, NUM_CLASSES};

pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum FlatNode {
    Split { feature: usize, threshold: f64 },
    Leaf { leaf: ClassCounts },
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    params: ForestParams,
    labels: Vec<Label>,
    trees: Vec<Vec<FlatNode>>,
}

fn flatten(node: &TreeNode, out: &mut Vec<FlatNode>) {
    match node {
        TreeNode::Leaf { counts } => out.push(FlatNode::Leaf { leaf: *counts }),
        TreeNode::Split { feature, threshold, left, right } => {
            out.push(FlatNode::Split { feature: *feature, threshold: *threshold });
            flatten(left, out);
            flatten(right, out);
        }
    }
}

fn rebuild<'a>(nodes: &mut impl Iterator<Item = &'a FlatNode>) -> Result<TreeNode, ForestError> {
    match nodes.next() {
        None => Err(ForestError::Format("truncated tree".into())),
        Some(FlatNode::Leaf { leaf }) => {
            if leaf.iter().all(|&c| c == 0) {
                return Err(ForestError::Format("leaf with no samples".into()));
            }
            Ok(TreeNode::Leaf { counts: *leaf })
        }
        Some(FlatNode::Split { feature, threshold }) => {
            if *feature >= FEATURE_LEN || !threshold.is_finite() {
                return Err(ForestError::Format(format!("bad split on feature {feature}")));
            }
            let left = rebuild(nodes)?;
            let right = rebuild(nodes)?;
            Ok(TreeNode::Split { feature: *feature, threshold: *threshold, left: Box::new(left), right: Box::new(right) })
        }
    }
}

pub fn model_to_json(model: &RandomForestModel) -> String {
    let file = ModelFile {
        version: MODEL_VERSION,
        params: model.params,
        labels: model.labels.to_vec(),
        trees: model
            .trees
            .iter()
            .map(|t| {
                let mut flat = Vec::new();
                flatten(t, &mut flat);
                flat
            })
            .collect(),
    };
    serde_json::to_string(&file).expect("model serializes")
}

pub fn model_from_json(text: &str) -> Result<RandomForestModel, ForestError> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| ForestError::Format(e.to_string()))?;
    if file.version != MODEL_VERSION {
        return Err(ForestError::Format(format!("unsupported version {}", file.version)));
    }
    let labels: [Label; NUM_CLASSES] = file
        .labels
        .try_into()
        .map_err(|_| ForestError::Format("expected 5 labels".into()))?;
    if labels != Label::ALL {
        return Err(ForestError::Format("labels must be S, K, O, L, J".into()));
    }
    if file.trees.len() != file.params.n_trees {
        return Err(ForestError::Format(format!(
            "{} trees stored, params say {}",
            file.trees.len(),
            file.params.n_trees
        )));
    }
    let trees = file
        .trees
        .iter()
        .map(|flat| {
            let mut it = flat.iter();
            let tree = rebuild(&mut it)?;
            if it.next().is_some() {
                return Err(ForestError::Format("trailing nodes after tree".into()));
            }
            if tree.depth() > file.params.max_depth {
                return Err(ForestError::Format("tree deeper than max_depth".into()));
            }
            Ok(tree)
        })
        .collect::<Result<_, _>>()?;
    Ok(RandomForestModel { trees, params: file.params, labels })
}

pub fn save_model(model: &RandomForestModel, path: impl AsRef<Path>) -> Result<(), ForestError> {
    fs::write(path, model_to_json(model) + "\n")?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<RandomForestModel, ForestError> {
    model_from_json(&fs::read_to_string(path)?)
}
