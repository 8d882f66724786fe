use serde::{Deserialize, Serialize};

use super::{ForestError, RandomForestModel};
use crate::synth::Dataset;
use crate::NUM_CLASSES;

/// Rows are true labels, columns predicted labels, canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u32; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn total(&self) -> u32 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u32 {
        (0..NUM_CLASSES).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sum(&self, class: usize) -> u32 {
        self.counts[class].iter().sum()
    }

    pub fn col_sum(&self, class: usize) -> u32 {
        self.counts.iter().map(|r| r[class]).sum()
    }

    pub fn recall(&self, class: usize) -> f64 {
        ratio(self.counts[class][class], self.row_sum(class))
    }

    pub fn precision(&self, class: usize) -> f64 {
        ratio(self.counts[class][class], self.col_sum(class))
    }
}

fn ratio(num: u32, den: u32) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Accuracy plus macro-averaged precision and recall.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision_macro: f64,
    pub recall_macro: f64,
    pub confusion: ConfusionMatrix,
}

impl Metrics {
    /// A class never predicted (or never present) contributes 0 to the
    /// precision (or recall) average.
    pub fn from_confusion(confusion: ConfusionMatrix) -> Self {
        let k = NUM_CLASSES as f64;
        Metrics {
            accuracy: ratio(confusion.trace(), confusion.total()),
            precision_macro: (0..NUM_CLASSES).map(|c| confusion.precision(c)).sum::<f64>() / k,
            recall_macro: (0..NUM_CLASSES).map(|c| confusion.recall(c)).sum::<f64>() / k,
            confusion,
        }
    }
}

pub fn evaluate(model: &RandomForestModel, test: &Dataset) -> Result<Metrics, ForestError> {
    if test.is_empty() {
        return Err(ForestError::EmptyDataset);
    }
    let mut confusion = ConfusionMatrix::default();
    for s in &test.samples {
        let p = model.predict(s.features.as_slice());
        confusion.record(s.label.index(), p.label.index());
    }
    Ok(Metrics::from_confusion(confusion))
}
