use std::path::{Path, PathBuf};

use dronelight_core::glyph::{PaintFrame, DEFAULT_RATE, DEFAULT_SPEED, V_MAX};
use dronelight_core::signal::{FilterSpec, DEFAULT_GATE_THRESHOLD, DEFAULT_MIN_CAPTURE_LEN};
use dronelight_core::simflight::{CanvasParams, ControllerGains};
use serde::{Deserialize, Serialize};

use crate::session::SessionSettings;
use crate::ServiceError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageMode {
    /// Base64 PPM inside `paint_done`.
    #[default]
    Inline,
    /// PPM written under `image_dir`; `paint_done` carries the path.
    Path,
}

/// Everything needed to fly and paint a letter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlightSettings {
    pub frame: PaintFrame,
    pub gains: ControllerGains,
    pub speed: f64,
    pub rate: f64,
}

impl Default for FlightSettings {
    fn default() -> Self {
        FlightSettings {
            frame: PaintFrame::default(),
            gains: ControllerGains::default(),
            speed: DEFAULT_SPEED,
            rate: DEFAULT_RATE,
        }
    }
}

impl FlightSettings {
    pub fn canvas(&self) -> CanvasParams {
        CanvasParams { frame: self.frame, ..CanvasParams::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub host: String,
    /// 0 picks a free port.
    pub port: u16,
    pub model_path: PathBuf,
    pub gate_threshold: f64,
    pub min_capture_len: usize,
    pub buffer_cap: usize,
    pub frame: PaintFrame,
    pub gains: ControllerGains,
    pub speed: f64,
    pub rate: f64,
    pub time_scale: f64,
    pub image_mode: ImageMode,
    pub image_dir: PathBuf,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            host: "127.0.0.1".into(),
            port: 8765,
            model_path: PathBuf::from("model.json"),
            gate_threshold: DEFAULT_GATE_THRESHOLD,
            min_capture_len: DEFAULT_MIN_CAPTURE_LEN,
            buffer_cap: 2000,
            frame: PaintFrame::default(),
            gains: ControllerGains::default(),
            speed: DEFAULT_SPEED,
            rate: DEFAULT_RATE,
            time_scale: 1.0,
            image_mode: ImageMode::Inline,
            image_dir: PathBuf::from("paintings"),
        }
    }
}

impl ServiceConfig {
    pub fn from_json(text: &str) -> Result<Self, ServiceError> {
        let cfg: ServiceConfig = serde_json::from_str(text).map_err(|e| ServiceError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ServiceError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ServiceError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), ServiceError> {
        let bad = |m: String| Err(ServiceError::Config(m));
        if !(self.gate_threshold > 0.0 && self.gate_threshold < 1.0) {
            return bad(format!("gate_threshold {} outside (0, 1)", self.gate_threshold));
        }
        if self.min_capture_len == 0 || self.buffer_cap < self.min_capture_len {
            return bad(format!(
                "need 0 < min_capture_len ({}) <= buffer_cap ({})",
                self.min_capture_len, self.buffer_cap
            ));
        }
        if !(self.speed > 0.0 && self.speed <= V_MAX) {
            return bad(format!("speed {} outside (0, {V_MAX}]", self.speed));
        }
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return bad(format!("rate {} must be positive", self.rate));
        }
        if !(self.time_scale > 0.0 && self.time_scale.is_finite()) {
            return bad(format!("time_scale {} must be positive", self.time_scale));
        }
        self.frame.validate().map_err(|e| ServiceError::Config(e.to_string()))?;
        self.gains.validate().map_err(|e| ServiceError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn session_settings(&self) -> SessionSettings {
        SessionSettings {
            gate_threshold: self.gate_threshold,
            min_capture_len: self.min_capture_len,
            buffer_cap: self.buffer_cap,
            time_scale: self.time_scale,
            filter: FilterSpec::default(),
        }
    }

    pub fn flight_settings(&self) -> FlightSettings {
        FlightSettings { frame: self.frame, gains: self.gains, speed: self.speed, rate: self.rate }
    }
}
