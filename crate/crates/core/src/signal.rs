//! Clasp gating, zero-phase smoothing, and reduction of an accelerometer
//! stream to the fixed-length classifier input.
//!
//! All functions here are pure.

use std::f64::consts::PI;

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

/// Frames kept per axis after resampling.
pub const VALUES_PER_AXIS: usize = 10;
/// Length of a [`FeatureVector`]: three axes, axis-major.
pub const FEATURE_LEN: usize = 3 * VALUES_PER_AXIS;

pub const DEFAULT_GATE_THRESHOLD: f64 = 0.5;
pub const DEFAULT_MIN_CAPTURE_LEN: usize = 12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SignalError {
    #[error("no gesture detected")]
    NoGesture,
    #[error("signal of length {len} is too short for padding of {pad_len}")]
    SignalTooShort { len: usize, pad_len: usize },
    #[error("cannot resample {input} values to {output}")]
    BadLength { input: usize, output: usize },
    #[error("invalid filter: {0}")]
    InvalidFilter(String),
    #[error("invalid stream: {0}")]
    InvalidStream(String),
}

/// One glove reading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImuFrame {
    /// Seconds since stream start.
    pub t: f64,
    /// Acceleration (ax, ay, az) in m/s², gravity included.
    pub accel: [f64; 3],
    /// Flex sensor reading; 1 = fully clasped.
    pub flex: f64,
}

impl ImuFrame {
    pub fn new(t: f64, accel: [f64; 3], flex: f64) -> Self {
        ImuFrame { t, accel, flex }
    }

    pub fn validate(&self) -> Result<(), SignalError> {
        if !self.t.is_finite() || self.t < 0.0 {
            return Err(SignalError::InvalidStream(format!("bad timestamp {}", self.t)));
        }
        if self.accel.iter().any(|a| !a.is_finite()) {
            return Err(SignalError::InvalidStream("non-finite acceleration".into()));
        }
        if !(0.0..=1.0).contains(&self.flex) {
            return Err(SignalError::InvalidStream(format!("flex {} outside [0, 1]", self.flex)));
        }
        Ok(())
    }
}

/// Checks per-frame invariants and strictly increasing timestamps.
pub fn validate_stream(stream: &[ImuFrame]) -> Result<(), SignalError> {
    for f in stream {
        f.validate()?;
    }
    if let Some(w) = stream.windows(2).find(|w| w[1].t <= w[0].t) {
        return Err(SignalError::InvalidStream(format!(
            "timestamps not increasing at t={}",
            w[1].t
        )));
    }
    Ok(())
}

/// The clasped window of a stream.
#[derive(Debug, Clone, PartialEq)]
pub struct GestureCapture {
    pub frames: Vec<ImuFrame>,
    pub source_id: String,
}

impl GestureCapture {
    pub fn new(frames: Vec<ImuFrame>, source_id: impl Into<String>) -> Self {
        GestureCapture { frames, source_id: source_id.into() }
    }

    /// Acceleration series of one axis (0 = x, 1 = y, 2 = z).
    pub fn axis(&self, axis: usize) -> Vec<f64> {
        self.frames.iter().map(|f| f.accel[axis]).collect()
    }
}

/// Returns the longest contiguous run of frames with `flex >= threshold`.
///
/// Ties go to the earliest run. Runs shorter than `min_capture_len` are
/// rejected as accidental taps.
pub fn gate_capture(
    stream: &[ImuFrame],
    threshold: f64,
    min_capture_len: usize,
) -> Result<GestureCapture, SignalError> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(SignalError::InvalidStream(format!("gate threshold {threshold} outside (0, 1)")));
    }
    validate_stream(stream)?;

    let mut best: Option<(usize, usize)> = None;
    let mut start = None;
    for i in 0..=stream.len() {
        let clasped = i < stream.len() && stream[i].flex >= threshold;
        match (clasped, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                if best.is_none_or(|(bs, be)| i - s > be - bs) {
                    best = Some((s, i));
                }
                start = None;
            }
            _ => {}
        }
    }

    match best {
        Some((s, e)) if e - s >= min_capture_len.max(1) => {
            Ok(GestureCapture::new(stream[s..e].to_vec(), "capture"))
        }
        _ => Err(SignalError::NoGesture),
    }
}

/// Low-pass Butterworth design parameters for zero-phase smoothing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub order: usize,
    /// Cutoff as a fraction of the Nyquist frequency.
    pub cutoff_ratio: f64,
    /// Odd-reflection padding applied at each end.
    pub pad_len: usize,
}

impl Default for FilterSpec {
    fn default() -> Self {
        FilterSpec::new(2, 0.2)
    }
}

impl FilterSpec {
    /// A spec with the conventional padding of three times the order.
    pub fn new(order: usize, cutoff_ratio: f64) -> Self {
        FilterSpec { order, cutoff_ratio, pad_len: 3 * order }
    }

    pub fn validate(&self) -> Result<(), SignalError> {
        if self.order == 0 || self.order > 12 {
            return Err(SignalError::InvalidFilter(format!("order {} not in 1..=12", self.order)));
        }
        if !(self.cutoff_ratio > 0.0 && self.cutoff_ratio < 1.0) {
            return Err(SignalError::InvalidFilter(format!(
                "cutoff ratio {} not in (0, 1)",
                self.cutoff_ratio
            )));
        }
        Ok(())
    }

    /// Digital Butterworth low-pass via the bilinear transform.
    ///
    /// The numerator gain is chosen so the DC gain is exactly one.
    pub fn design(&self) -> Result<IirFilter, SignalError> {
        self.validate()?;
        let n = self.order;
        let warped = (PI * self.cutoff_ratio / 2.0).tan();

        let poles: Vec<Complex<f64>> = (0..n)
            .map(|k| {
                let theta = PI * (2 * k + n + 1) as f64 / (2 * n) as f64;
                let analog = Complex::from_polar(warped, theta);
                let one = Complex::new(1.0, 0.0);
                (one + analog) / (one - analog)
            })
            .collect();

        // Expand prod (1 - p z^-1).
        let mut den = vec![Complex::new(1.0, 0.0)];
        for p in &poles {
            let mut next = vec![Complex::new(0.0, 0.0); den.len() + 1];
            for (i, c) in den.iter().enumerate() {
                next[i] += c;
                next[i + 1] -= c * p;
            }
            den = next;
        }
        let a: Vec<f64> = den.iter().map(|c| c.re).collect();

        // (1 + z^-1)^n scaled to unity DC gain.
        let mut binom = vec![1.0f64];
        for _ in 0..n {
            let mut next = vec![0.0; binom.len() + 1];
            for (i, c) in binom.iter().enumerate() {
                next[i] += c;
                next[i + 1] += c;
            }
            binom = next;
        }
        let gain = a.iter().sum::<f64>() / 2f64.powi(n as i32);
        let b = binom.iter().map(|c| c * gain).collect();

        let pole_radius = poles.iter().map(|p| p.norm()).fold(0.0, f64::max);
        Ok(IirFilter { b, a, pole_radius })
    }
}

/// Transfer-function coefficients, `a[0] == 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct IirFilter {
    pub b: Vec<f64>,
    pub a: Vec<f64>,
    /// Largest pole magnitude; governs how fast transients die out.
    pub pole_radius: f64,
}

impl IirFilter {
    pub fn dc_gain(&self) -> f64 {
        self.b.iter().sum::<f64>() / self.a.iter().sum::<f64>()
    }

    /// Samples after which a unit transient has decayed below 1e-17.
    pub fn settle_len(&self) -> usize {
        if self.pole_radius <= 0.0 {
            return self.b.len();
        }
        let n = (1e-17f64).ln() / self.pole_radius.ln();
        (n.ceil() as usize).clamp(self.b.len(), 200_000)
    }

    /// Filter state (transposed direct form II) that holds the output at
    /// its steady state for a constant input equal to `x0`.
    fn steady_state(&self, x0: f64) -> Vec<f64> {
        let y0 = self.dc_gain() * x0;
        let order = self.a.len() - 1;
        let mut zi = vec![0.0; order];
        let mut acc = 0.0;
        for i in (1..=order).rev() {
            acc += self.b[i] * x0 - self.a[i] * y0;
            zi[i - 1] = acc;
        }
        zi
    }

    /// Runs the difference equation over `x` starting from the steady state
    /// of its first sample.
    pub fn lfilter_steady(&self, x: &[f64]) -> Vec<f64> {
        let Some(&x0) = x.first() else {
            return Vec::new();
        };
        let mut z = self.steady_state(x0);
        let order = z.len();
        x.iter()
            .map(|&xi| {
                let y = self.b[0] * xi + z.first().copied().unwrap_or(0.0);
                for i in 0..order {
                    let next = if i + 1 < order { z[i + 1] } else { 0.0 };
                    z[i] = self.b[i + 1] * xi - self.a[i + 1] * y + next;
                }
                y
            })
            .collect()
    }
}

/// Odd extension of `x` by `n` samples at each end: `2 x[0] - x[n..1]` on the left
/// and `2 x[last] - x[last-1..last-n]` on the right.
pub fn odd_extend(x: &[f64], n: usize) -> Vec<f64> {
    let len = x.len();
    let mut out = Vec::with_capacity(len + 2 * n);
    out.extend((1..=n).rev().map(|i| 2.0 * x[0] - x[i]));
    out.extend_from_slice(x);
    out.extend((1..=n).map(|i| 2.0 * x[len - 1] - x[len - 1 - i]));
    out
}

/// Zero-phase low-pass filtering: forward pass, then backward pass.
///
/// The input is odd-reflected by `pad_len` at each end, then held constant
/// at its end values for [`IirFilter::settle_len`] samples so both passes
/// start from steady state. Without the hold, the backward pass would start
/// from an output that has not settled and forward/backward would stop
/// commuting, breaking time-reversal symmetry.
pub fn filtfilt(x: &[f64], spec: &FilterSpec) -> Result<Vec<f64>, SignalError> {
    if x.len() <= spec.pad_len {
        return Err(SignalError::SignalTooShort { len: x.len(), pad_len: spec.pad_len });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(SignalError::InvalidStream("non-finite sample".into()));
    }
    let filter = spec.design()?;
    let settle = filter.settle_len();

    let padded = odd_extend(x, spec.pad_len);
    let (first, last) = (padded[0], padded[padded.len() - 1]);
    let mut ext = Vec::with_capacity(padded.len() + 2 * settle);
    ext.extend(std::iter::repeat_n(first, settle));
    ext.extend_from_slice(&padded);
    ext.extend(std::iter::repeat_n(last, settle));

    let mut y = filter.lfilter_steady(&ext);
    y.reverse();
    let mut y = filter.lfilter_steady(&y);
    y.reverse();

    let start = settle + spec.pad_len;
    Ok(y[start..start + x.len()].to_vec())
}

/// Linear interpolation of `x` at `n` evenly spaced positions spanning it.
pub fn resample(x: &[f64], n: usize) -> Result<Vec<f64>, SignalError> {
    if x.len() < 2 || n < 2 {
        return Err(SignalError::BadLength { input: x.len(), output: n });
    }
    let last = x.len() - 1;
    let step = last as f64 / (n - 1) as f64;
    let mut out: Vec<f64> = (0..n)
        .map(|i| {
            let pos = i as f64 * step;
            let lo = (pos.floor() as usize).min(last - 1);
            let frac = pos - lo as f64;
            x[lo] + (x[lo + 1] - x[lo]) * frac
        })
        .collect();
    out[0] = x[0];
    out[n - 1] = x[last];
    Ok(out)
}

/// The 30-value classifier input, axis-major: `[x0..x9, y0..y9, z0..z9]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FeatureVector(pub [f64; FEATURE_LEN]);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for FeatureVector {
    type Error = String;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        if v.iter().any(|x| !x.is_finite()) {
            return Err("feature values must be finite".into());
        }
        let len = v.len();
        let arr: [f64; FEATURE_LEN] = v
            .try_into()
            .map_err(|_| format!("expected {FEATURE_LEN} feature values, got {len}"))?;
        Ok(FeatureVector(arr))
    }
}

impl From<FeatureVector> for Vec<f64> {
    fn from(f: FeatureVector) -> Self {
        f.0.to_vec()
    }
}

/// Per axis: filter, then resample to [`VALUES_PER_AXIS`] values.
pub fn featurize(capture: &GestureCapture, spec: &FilterSpec) -> Result<FeatureVector, SignalError> {
    let mut values = [0.0; FEATURE_LEN];
    for axis in 0..3 {
        let smoothed = filtfilt(&capture.axis(axis), spec)?;
        let reduced = resample(&smoothed, VALUES_PER_AXIS)?;
        values[axis * VALUES_PER_AXIS..(axis + 1) * VALUES_PER_AXIS].copy_from_slice(&reduced);
    }
    Ok(FeatureVector(values))
}
