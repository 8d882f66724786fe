//! Synthetic glove streams and labeled feature datasets.
//!
//! A stream is produced by moving a virtual hand along the letter's glyph
//! polyline with cosine-eased speed, differentiating position twice with
//! central differences, and adding gravity, a small plane tilt, and sensor
//! noise.
//!
//! Datasets are stored as JSON lines: a header object followed by one
//! `{"label", "origin", "features"}` record per sample.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{Rotation3, Vector2, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::glyph::{glyph_table, Point2};
use crate::seed::rng_for;
use crate::signal::{
    featurize, gate_capture, FeatureVector, FilterSpec, ImuFrame, SignalError, DEFAULT_GATE_THRESHOLD,
    DEFAULT_MIN_CAPTURE_LEN, FEATURE_LEN,
};
use crate::{Label, NUM_CLASSES};

pub const GRAVITY: f64 = 9.81;
/// Side of the square the hand draws in, meters.
pub const HAND_SPAN: f64 = 0.4;
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid synthesis parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    /// Hz.
    pub sample_rate: f64,
    /// Seconds the clasped stroke lasts.
    pub stroke_duration: f64,
    /// Per-axis Gaussian noise, m/s².
    pub noise_sigma: f64,
    /// Standard deviation of the drawing-plane tilt about x and y, radians.
    pub tilt_jitter: f64,
    /// Unclasped frames before and after the stroke.
    pub lead_frames: usize,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            sample_rate: 50.0,
            stroke_duration: 1.2,
            noise_sigma: 0.4,
            tilt_jitter: 0.05,
            lead_frames: 10,
            seed: 42,
        }
    }
}

impl SynthParams {
    pub fn with_seed(seed: u64) -> Self {
        SynthParams { seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.sample_rate) || !positive(self.stroke_duration) {
            return Err(SynthError::InvalidParams("rate and duration must be positive".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite())
            || !(self.tilt_jitter >= 0.0 && self.tilt_jitter.is_finite())
        {
            return Err(SynthError::InvalidParams("noise and tilt must be non-negative".into()));
        }
        if self.lead_frames == 0 {
            return Err(SynthError::InvalidParams("lead_frames must be positive".into()));
        }
        if (self.stroke_duration * self.sample_rate).round() < 2.0 {
            return Err(SynthError::InvalidParams("stroke shorter than two samples".into()));
        }
        Ok(())
    }
}

/// Point at arc length `s` along a polyline.
fn point_at(points: &[Point2], cumulative: &[f64], s: f64) -> Vector2<f64> {
    let seg = cumulative
        .windows(2)
        .position(|w| s <= w[1])
        .unwrap_or(points.len() - 2);
    let span = cumulative[seg + 1] - cumulative[seg];
    let frac = if span > 0.0 { ((s - cumulative[seg]) / span).clamp(0.0, 1.0) } else { 0.0 };
    let a = Vector2::new(points[seg][0], points[seg][1]);
    let b = Vector2::new(points[seg + 1][0], points[seg + 1][1]);
    a + (b - a) * frac
}

/// Generates one labeled glove stream; deterministic in `(label, params)`.
pub fn synth_gesture(label: Label, params: &SynthParams) -> Result<Vec<ImuFrame>, SynthError> {
    params.validate()?;
    let mut rng = rng_for(params.seed, &[label.index() as u64]);

    let points = glyph_table(label).joined();
    let mut cumulative = vec![0.0];
    for w in points.windows(2) {
        let d = (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]);
        cumulative.push(cumulative.last().unwrap() + d);
    }
    let length = *cumulative.last().unwrap();

    let intervals = (params.stroke_duration * params.sample_rate).round() as usize;
    let positions: Vec<Vector2<f64>> = (0..=intervals)
        .map(|i| {
            let tau = i as f64 / intervals as f64;
            let s = length * (1.0 - (std::f64::consts::PI * tau).cos()) / 2.0;
            point_at(&points, &cumulative, s) * HAND_SPAN
        })
        .collect();

    let tilt_x: f64 = rng.sample::<f64, _>(StandardNormal) * params.tilt_jitter;
    let tilt_y: f64 = rng.sample::<f64, _>(StandardNormal) * params.tilt_jitter;
    let tilt = Rotation3::from_axis_angle(&Vector3::x_axis(), tilt_x)
        * Rotation3::from_axis_angle(&Vector3::y_axis(), tilt_y);

    let rate2 = params.sample_rate * params.sample_rate;
    let planar = (0..=intervals).map(|i| {
        let prev = positions[i.saturating_sub(1)];
        let next = positions[(i + 1).min(intervals)];
        (next - 2.0 * positions[i] + prev) * rate2
    });

    let at_rest = std::iter::repeat_n((Vector3::zeros(), 0.0), params.lead_frames);
    let stroke = planar.map(|a| (tilt * Vector3::new(a.x, a.y, 0.0), 1.0));
    let motion: Vec<(Vector3<f64>, f64)> = at_rest.clone().chain(stroke).chain(at_rest).collect();

    let noise = Normal::new(0.0, params.noise_sigma).map_err(|e| SynthError::InvalidParams(e.to_string()))?;
    let gravity = Vector3::new(0.0, 0.0, GRAVITY);
    let frames = motion
        .into_iter()
        .enumerate()
        .map(|(k, (a, flex))| {
            let mut acc = a + gravity;
            if params.noise_sigma > 0.0 {
                for c in acc.iter_mut() {
                    *c += noise.sample(&mut rng);
                }
            }
            ImuFrame::new(k as f64 / params.sample_rate, [acc.x, acc.y, acc.z], flex)
        })
        .collect();
    Ok(frames)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Synthetic,
    Recorded,
    Ui,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub label: Label,
    pub origin: Origin,
    pub features: FeatureVector,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub samples: Vec<LabeledSample>,
}

impl Dataset {
    pub fn new(samples: Vec<LabeledSample>) -> Self {
        Dataset { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn class_counts(&self) -> [usize; NUM_CLASSES] {
        let mut counts = [0; NUM_CLASSES];
        for s in &self.samples {
            counts[s.label.index()] += 1;
        }
        counts
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset::new(indices.iter().map(|&i| self.samples[i].clone()).collect())
    }
}

/// Featurizes a raw stream with the default gate.
pub fn stream_features(stream: &[ImuFrame], filter: &FilterSpec) -> Result<FeatureVector, SignalError> {
    let capture = gate_capture(stream, DEFAULT_GATE_THRESHOLD, DEFAULT_MIN_CAPTURE_LEN)?;
    featurize(&capture, filter)
}

/// `n_per_class` samples of each label, label-major in canonical order.
///
/// Sample `i` of label `l` is generated with seed
/// `derive_seed(params.seed, [l, i])`, so samples are independent of
/// generation order.
pub fn gen_dataset(n_per_class: usize, params: &SynthParams, filter: &FilterSpec) -> Result<Dataset, SynthError> {
    if n_per_class == 0 {
        return Err(SynthError::InvalidParams("n_per_class must be positive".into()));
    }
    params.validate()?;
    let jobs: Vec<(Label, usize)> = Label::ALL
        .iter()
        .flat_map(|&l| (0..n_per_class).map(move |i| (l, i)))
        .collect();
    let samples = jobs
        .into_par_iter()
        .map(|(label, i)| {
            let seed = crate::seed::derive_seed(params.seed, &[label.index() as u64, i as u64]);
            let stream = synth_gesture(label, &SynthParams { seed, ..*params })?;
            let features = stream_features(&stream, filter)?;
            Ok(LabeledSample { label, origin: Origin::Synthetic, features })
        })
        .collect::<Result<Vec<_>, SynthError>>()?;
    Ok(Dataset::new(samples))
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    version: u32,
    feature_len: usize,
    labels: Vec<Label>,
}

pub fn write_dataset<W: Write>(ds: &Dataset, mut out: W) -> io::Result<()> {
    let header = Header { version: DATASET_VERSION, feature_len: FEATURE_LEN, labels: Label::ALL.to_vec() };
    writeln!(out, "{}", serde_json::to_string(&header)?)?;
    for s in &ds.samples {
        writeln!(out, "{}", serde_json::to_string(s)?)?;
    }
    out.flush()
}

pub fn read_dataset<R: BufRead>(input: R) -> Result<Dataset, DatasetError> {
    let mut samples = Vec::new();
    let mut header_seen = false;
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fail = |message: String| DatasetError::Format { line: lineno, message };
        if !header_seen {
            let h: Header = serde_json::from_str(&line).map_err(|e| fail(format!("bad header: {e}")))?;
            if h.version != DATASET_VERSION {
                return Err(fail(format!("unsupported version {}", h.version)));
            }
            if h.feature_len != FEATURE_LEN {
                return Err(fail(format!("feature_len {} != {FEATURE_LEN}", h.feature_len)));
            }
            if h.labels != Label::ALL {
                return Err(fail("label order must be S, K, O, L, J".into()));
            }
            header_seen = true;
            continue;
        }
        let sample: LabeledSample = serde_json::from_str(&line).map_err(|e| fail(e.to_string()))?;
        samples.push(sample);
    }
    if !header_seen {
        return Err(DatasetError::Format { line: 1, message: "missing header".into() });
    }
    Ok(Dataset::new(samples))
}

pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let file = File::create(path)?;
    write_dataset(ds, BufWriter::new(file))?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
    let file = File::open(path)?;
    read_dataset(BufReader::new(file))
}
