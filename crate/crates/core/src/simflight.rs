//! Point-mass quadcopter simulation and long-exposure rendering.
//!
//! The drone is a double integrator driven by a PD law,
//! `accel = kp (p_ref - pos) + kd (v_ref - vel) + a_ref`, integrated with
//! symplectic Euler. For a held setpoint `v_ref = a_ref = 0`. When flying a
//! [`LetterPath`] the reference is the setpoint polyline with short
//! parabolic blends at each setpoint, and its velocity and acceleration are
//! fed forward; plain PD on streamed positions would trail a 0.5 m/s ramp
//! by `kd * v / kp` = 0.5 m at the default gains.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::glyph::{LetterPath, PaintFrame, V_MAX};

/// Speed sanity clamp.
pub const MAX_SPEED: f64 = 2.0 * V_MAX;
/// Position norm beyond which a flight is declared unstable.
pub const DIVERGENCE_LIMIT: f64 = 10.0;
/// Time flown after the last setpoint.
pub const SETTLE_TAIL: f64 = 1.0;

#[derive(Debug, thiserror::Error)]
pub enum FlightError {
    #[error("flight diverged at t={t:.2} s (|position| = {norm:.2} m)")]
    Divergence { t: f64, norm: f64 },
    #[error("invalid gains: {0}")]
    InvalidGains(String),
    #[error("path has no setpoints")]
    EmptyPath,
    #[error("trace has no states")]
    EmptyTrace,
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("ppm: {0}")]
    Ppm(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerGains {
    /// 1/s².
    pub kp: f64,
    /// 1/s.
    pub kd: f64,
    /// Integration step, seconds.
    pub dt: f64,
}

impl Default for ControllerGains {
    /// Critically damped (`kd² = 4 kp`), natural frequency 2 rad/s, 100 Hz.
    fn default() -> Self {
        ControllerGains { kp: 4.0, kd: 4.0, dt: 0.01 }
    }
}

impl ControllerGains {
    pub fn validate(&self) -> Result<(), FlightError> {
        if !(self.kp > 0.0 && self.kd > 0.0 && self.kp.is_finite() && self.kd.is_finite()) {
            return Err(FlightError::InvalidGains(format!("kp={} kd={}", self.kp, self.kd)));
        }
        if !(self.dt > 0.0 && self.dt <= 0.05) {
            return Err(FlightError::InvalidGains(format!("dt={} not in (0, 0.05]", self.dt)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DroneState {
    pub t: f64,
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub led: [u8; 3],
    pub lit: bool,
}

impl DroneState {
    pub fn at_rest(position: Vector3<f64>) -> Self {
        DroneState { t: 0.0, position, velocity: Vector3::zeros(), led: [0, 0, 0], lit: false }
    }
}

/// A full-state command: where to be, how fast, and with what acceleration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reference {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub acceleration: Vector3<f64>,
}

impl Reference {
    pub fn hold(position: Vector3<f64>) -> Self {
        Reference { position, velocity: Vector3::zeros(), acceleration: Vector3::zeros() }
    }
}

/// One control period toward a held setpoint.
pub fn step(state: &DroneState, setpoint: Vector3<f64>, gains: &ControllerGains) -> DroneState {
    step_toward(state, &Reference::hold(setpoint), gains)
}

/// One control period toward a moving reference, with feedforward.
pub fn step_toward(state: &DroneState, reference: &Reference, gains: &ControllerGains) -> DroneState {
    let accel = reference.acceleration
        + (reference.position - state.position) * gains.kp
        + (reference.velocity - state.velocity) * gains.kd;
    let mut velocity = state.velocity + accel * gains.dt;
    let speed = velocity.norm();
    if speed > MAX_SPEED {
        velocity *= MAX_SPEED / speed;
    }
    DroneState {
        t: state.t + gains.dt,
        position: state.position + velocity * gains.dt,
        velocity,
        ..*state
    }
}

/// Smooth reference through a path's setpoints.
///
/// Between setpoints the reference moves in a straight line at constant
/// velocity. Around setpoint `i` the velocity change is spread over
/// `[t_i - h_i, t_i + h_i]`, `h_i` being half the shorter neighboring
/// interval, which keeps position and velocity continuous.
#[derive(Debug, Clone)]
pub struct ReferenceTrajectory {
    times: Vec<f64>,
    points: Vec<Vector3<f64>>,
    /// `velocities[j]` is the velocity on segment `j - 1 → j`; zero before
    /// the first and after the last setpoint.
    velocities: Vec<Vector3<f64>>,
    half_widths: Vec<f64>,
}

impl ReferenceTrajectory {
    pub fn new(path: &LetterPath) -> Result<Self, FlightError> {
        if path.setpoints.is_empty() {
            return Err(FlightError::EmptyPath);
        }
        let times: Vec<f64> = path.setpoints.iter().map(|s| s.t).collect();
        let points: Vec<Vector3<f64>> = path.setpoints.iter().map(|s| s.position).collect();
        let n = times.len();
        let mut velocities = vec![Vector3::zeros(); n + 1];
        for j in 1..n {
            velocities[j] = (points[j] - points[j - 1]) / (times[j] - times[j - 1]);
        }
        let gap = |j: usize| times[j] - times[j - 1];
        let half_widths = (0..n)
            .map(|i| {
                let before = if i > 0 { gap(i) } else if n > 1 { gap(1) } else { 0.0 };
                let after = if i + 1 < n { gap(i + 1) } else { before };
                0.5 * before.min(after)
            })
            .collect();
        Ok(ReferenceTrajectory { times, points, velocities, half_widths })
    }

    fn blend(&self, i: usize, t: f64) -> Reference {
        let h = self.half_widths[i];
        let (v_in, v_out) = (self.velocities[i], self.velocities[i + 1]);
        let acceleration = (v_out - v_in) / (2.0 * h);
        let tau = t - (self.times[i] - h);
        Reference {
            position: self.points[i] - v_in * h + v_in * tau + acceleration * (0.5 * tau * tau),
            velocity: v_in + acceleration * tau,
            acceleration,
        }
    }

    pub fn at(&self, t: f64) -> Reference {
        let n = self.times.len();
        // Index of the last setpoint at or before t (0 if t precedes all).
        let i = self.times.partition_point(|&ti| ti <= t).saturating_sub(1);
        if self.half_widths[i] > 0.0 && (t - self.times[i]).abs() < self.half_widths[i] {
            return self.blend(i, t);
        }
        if i + 1 < n && self.times[i + 1] - t < self.half_widths[i + 1] {
            return self.blend(i + 1, t);
        }
        if t < self.times[0] || i + 1 == n {
            return Reference::hold(self.points[i]);
        }
        let v = self.velocities[i + 1];
        Reference { position: self.points[i] + v * (t - self.times[i]), velocity: v, acceleration: Vector3::zeros() }
    }
}

/// Index of the setpoint in force at `t` under zero-order hold.
pub fn active_setpoint(path: &LetterPath, t: f64) -> usize {
    path.setpoints.partition_point(|s| s.t <= t + 1e-9).saturating_sub(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlightTrace {
    pub dt: f64,
    pub states: Vec<DroneState>,
}

impl FlightTrace {
    /// Distance from the drone to the active setpoint, for states at or
    /// after `after` seconds.
    pub fn max_tracking_error(&self, path: &LetterPath, after: f64) -> f64 {
        self.states
            .iter()
            .filter(|s| s.t >= after - 1e-9)
            .map(|s| (s.position - path.setpoints[active_setpoint(path, s.t)].position).norm())
            .fold(0.0, f64::max)
    }

    /// One JSON object per state.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for s in &self.states {
            writeln!(out, "{}", serde_json::to_string(s)?)?;
        }
        out.flush()
    }
}

/// Number of states `fly_path` produces for a path of `duration` seconds.
pub fn trace_len(duration: f64, dt: f64) -> usize {
    (((duration + SETTLE_TAIL) / dt) - 1e-9).ceil() as usize
}

/// Flies `path` from rest at its first setpoint, ending with a settle tail.
/// The LED mirrors the setpoint in force.
pub fn fly_path(path: &LetterPath, gains: &ControllerGains) -> Result<FlightTrace, FlightError> {
    gains.validate()?;
    let reference = ReferenceTrajectory::new(path)?;
    let n = trace_len(path.duration(), gains.dt);

    let first = &path.setpoints[0];
    let mut state = DroneState { led: first.led, lit: first.lit, ..DroneState::at_rest(first.position) };
    let mut states = Vec::with_capacity(n);
    states.push(state);
    for k in 1..n {
        let mut next = step_toward(&state, &reference.at(state.t), gains);
        next.t = k as f64 * gains.dt;
        let norm = next.position.norm();
        if !norm.is_finite() || norm > DIVERGENCE_LIMIT {
            return Err(FlightError::Divergence { t: next.t, norm });
        }
        let sp = &path.setpoints[active_setpoint(path, next.t)];
        next.led = sp.led;
        next.lit = sp.lit;
        states.push(next);
        state = next;
    }
    Ok(FlightTrace { dt: gains.dt, states })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanvasParams {
    pub width: usize,
    pub height: usize,
    pub frame: PaintFrame,
    /// Border around the frame, as a fraction of its size per side.
    pub margin: f64,
    /// Gaussian spot sigma, pixels.
    pub spot_sigma: f64,
    /// Spot cutoff radius, pixels.
    pub spot_radius: f64,
}

impl Default for CanvasParams {
    fn default() -> Self {
        CanvasParams {
            width: 512,
            height: 512,
            frame: PaintFrame::default(),
            margin: 0.1,
            spot_sigma: 1.5,
            spot_radius: 4.0,
        }
    }
}

/// Orthographic view along −y: x to the right, z up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub x_min: f64,
    pub x_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub width: usize,
    pub height: usize,
}

impl Camera {
    pub fn new(params: &CanvasParams) -> Self {
        let f = &params.frame;
        let half_w = f.width * (0.5 + params.margin);
        let half_h = f.height * (0.5 + params.margin);
        Camera {
            x_min: f.center.x - half_w,
            x_max: f.center.x + half_w,
            z_min: f.center.z - half_h,
            z_max: f.center.z + half_h,
            width: params.width,
            height: params.height,
        }
    }

    /// Continuous pixel coordinates; pixel `(i, j)` covers `[i, i+1) × [j, j+1)`.
    pub fn project(&self, p: &Vector3<f64>) -> (f64, f64) {
        let u = (p.x - self.x_min) / (self.x_max - self.x_min) * self.width as f64;
        let v = (self.z_max - p.z) / (self.z_max - self.z_min) * self.height as f64;
        (u, v)
    }
}

/// Linear light accumulation buffer; normalized only on export.
#[derive(Debug, Clone, PartialEq)]
pub struct PaintCanvas {
    pub camera: Camera,
    pub accum: Vec<[f64; 3]>,
}

impl PaintCanvas {
    pub fn new(params: &CanvasParams) -> Self {
        PaintCanvas { camera: Camera::new(params), accum: vec![[0.0; 3]; params.width * params.height] }
    }

    pub fn width(&self) -> usize {
        self.camera.width
    }

    pub fn height(&self) -> usize {
        self.camera.height
    }

    fn splat(&mut self, center: (f64, f64), color: [f64; 3], sigma: f64, radius: f64) {
        let (cu, cv) = center;
        let (w, h) = (self.width() as i64, self.height() as i64);
        let r = radius.ceil() as i64;
        let (iu, iv) = (cu.floor() as i64, cv.floor() as i64);
        for j in (iv - r).max(0)..=(iv + r).min(h - 1) {
            for i in (iu - r).max(0)..=(iu + r).min(w - 1) {
                let du = i as f64 + 0.5 - cu;
                let dv = j as f64 + 0.5 - cv;
                let d2 = du * du + dv * dv;
                if d2 > radius * radius {
                    continue;
                }
                let weight = (-d2 / (2.0 * sigma * sigma)).exp();
                let px = &mut self.accum[j as usize * w as usize + i as usize];
                for c in 0..3 {
                    px[c] += color[c] * weight;
                }
            }
        }
    }

    /// Adds another canvas's light, pixel by pixel.
    pub fn add(&mut self, other: &PaintCanvas) {
        for (a, b) in self.accum.iter_mut().zip(&other.accum) {
            for c in 0..3 {
                a[c] += b[c];
            }
        }
    }

    /// Scales so the brightest channel is 255, then rounds.
    pub fn to_image(&self) -> RgbImage {
        let peak = self.accum.iter().flatten().copied().fold(0.0, f64::max);
        let scale = if peak > 0.0 { 255.0 / peak } else { 0.0 };
        let pixels = self
            .accum
            .iter()
            .map(|p| p.map(|v| (v * scale).round().clamp(0.0, 255.0) as u8))
            .collect();
        RgbImage { width: self.width(), height: self.height(), pixels }
    }
}

/// Integrates every lit state's LED as a Gaussian spot weighted by `dt`.
pub fn render_exposure(trace: &FlightTrace, params: &CanvasParams) -> PaintCanvas {
    let mut canvas = PaintCanvas::new(params);
    for s in trace.states.iter().filter(|s| s.lit) {
        let color = s.led.map(|c| c as f64 * trace.dt);
        let at = canvas.camera.project(&s.position);
        canvas.splat(at, color, params.spot_sigma, params.spot_radius);
    }
    canvas
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn black(width: usize, height: usize) -> Self {
        RgbImage { width, height, pixels: vec![[0; 3]; width * height] }
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    /// ASCII PPM: `P3`, dimensions, maxval 255, one image row per line.
    pub fn to_ppm(&self) -> String {
        let mut out = String::with_capacity(self.pixels.len() * 12 + 32);
        write!(out, "P3\n{} {}\n255\n", self.width, self.height).unwrap();
        for row in self.pixels.chunks(self.width.max(1)) {
            let mut first = true;
            for p in row {
                for c in p {
                    if !first {
                        out.push(' ');
                    }
                    first = false;
                    write!(out, "{c}").unwrap();
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn from_ppm(text: &str) -> Result<Self, FlightError> {
        let mut tokens = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(str::split_whitespace);
        let bad = |m: &str| FlightError::Ppm(m.to_string());
        if tokens.next() != Some("P3") {
            return Err(bad("missing P3 magic"));
        }
        let mut number = |what: &str| -> Result<usize, FlightError> {
            tokens
                .next()
                .ok_or_else(|| bad(&format!("missing {what}")))?
                .parse()
                .map_err(|_| bad(&format!("bad {what}")))
        };
        let width = number("width")?;
        let height = number("height")?;
        if number("maxval")? != 255 {
            return Err(bad("maxval must be 255"));
        }
        let mut pixels = Vec::with_capacity(width * height);
        for _ in 0..width * height {
            let mut px = [0u8; 3];
            for c in &mut px {
                let v = number("sample")?;
                *c = u8::try_from(v).map_err(|_| bad("sample above 255"))?;
            }
            pixels.push(px);
        }
        if tokens.next().is_some() {
            return Err(bad("trailing data"));
        }
        Ok(RgbImage { width, height, pixels })
    }
}

pub fn save_image(canvas: &PaintCanvas, path: impl AsRef<Path>) -> Result<(), FlightError> {
    fs::write(path, canvas.to_image().to_ppm())?;
    Ok(())
}
