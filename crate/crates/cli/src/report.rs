use std::fmt::Write as _;

use dronelight_core::forest::Metrics;
use dronelight_core::{Label, NUM_CLASSES};
use serde_json::Value;

/// Command output: fixed-layout text for people, JSON for scripts.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub text: String,
    pub json: Value,
}

impl Report {
    pub fn render(&self, json: bool) -> String {
        if json {
            serde_json::to_string_pretty(&self.json).expect("report json") + "\n"
        } else {
            self.text.clone()
        }
    }
}

pub fn render_metrics(m: &Metrics) -> String {
    let mut out = String::new();
    writeln!(out, "accuracy: {:.4}", m.accuracy).unwrap();
    writeln!(out, "precision (macro): {:.4}", m.precision_macro).unwrap();
    writeln!(out, "recall (macro): {:.4}", m.recall_macro).unwrap();
    write!(out, "recall by class:").unwrap();
    for (c, label) in Label::ALL.iter().enumerate() {
        write!(out, " {label}={:.4}", m.confusion.recall(c)).unwrap();
    }
    out.push('\n');
    writeln!(out, "confusion matrix (rows: true, columns: predicted)").unwrap();
    write!(out, "   ").unwrap();
    for label in Label::ALL {
        write!(out, " {label:>4}").unwrap();
    }
    out.push('\n');
    for (r, label) in Label::ALL.iter().enumerate() {
        write!(out, "  {label}").unwrap();
        for c in 0..NUM_CLASSES {
            write!(out, " {:>4}", m.confusion.counts[r][c]).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn posteriors_line(posteriors: &[f64; NUM_CLASSES]) -> String {
    let parts: Vec<String> = Label::ALL.iter().zip(posteriors).map(|(l, p)| format!("{l}={p:.4}")).collect();
    format!("posteriors: {}", parts.join(" "))
}
