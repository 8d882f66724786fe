//! JSON messages exchanged over the socket, one per text frame.

use dronelight_core::signal::ImuFrame;
use dronelight_core::simflight::DroneState;
use dronelight_core::{Label, NUM_CLASSES};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::session::Mode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    /// Not a JSON object with a string `type`.
    BadFrame,
    UnknownType,
    /// Known type with missing, mistyped, or out-of-range fields.
    InvalidValue,
    CaptureTooShort,
    FlightFailed,
    Shutdown,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImuMessage {
    pub t: f64,
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
    pub flex: f64,
}

impl From<&ImuFrame> for ImuMessage {
    fn from(f: &ImuFrame) -> Self {
        ImuMessage { t: f.t, ax: f.accel[0], ay: f.accel[1], az: f.accel[2], flex: f.flex }
    }
}

impl From<ImuMessage> for ImuFrame {
    fn from(m: ImuMessage) -> Self {
        ImuFrame::new(m.t, [m.ax, m.ay, m.az], m.flex)
    }
}

/// Per-session overrides; absent fields keep their current value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigMessage {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_capture_len: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Imu(ImuMessage),
    Config(ConfigMessage),
}

impl ClientMessage {
    pub fn imu(frame: &ImuFrame) -> Self {
        ClientMessage::Imu(frame.into())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("client messages serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    State {
        mode: Mode,
    },
    Prediction {
        label: Label,
        posteriors: [f64; NUM_CLASSES],
    },
    DroneState {
        t: f64,
        x: f64,
        y: f64,
        z: f64,
        led: [u8; 3],
        lit: bool,
    },
    PaintDone {
        /// `ppm-base64` with the image in `data`, or `ppm-path` with a
        /// server-side file path.
        encoding: String,
        data: String,
    },
    Error {
        code: ErrorCode,
        detail: String,
    },
}

impl ServerMessage {
    pub fn error(code: ErrorCode, detail: impl Into<String>) -> Self {
        ServerMessage::Error { code, detail: detail.into() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages serialize")
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            ServerMessage::State { .. } => "state",
            ServerMessage::Prediction { .. } => "prediction",
            ServerMessage::DroneState { .. } => "drone_state",
            ServerMessage::PaintDone { .. } => "paint_done",
            ServerMessage::Error { .. } => "error",
        }
    }
}

impl From<&DroneState> for ServerMessage {
    fn from(s: &DroneState) -> Self {
        ServerMessage::DroneState {
            t: s.t,
            x: s.position.x,
            y: s.position.y,
            z: s.position.z,
            led: s.led,
            lit: s.lit,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WireError {
    pub code: ErrorCode,
    pub detail: String,
}

impl From<WireError> for ServerMessage {
    fn from(e: WireError) -> Self {
        ServerMessage::Error { code: e.code, detail: e.detail }
    }
}

fn wire_error(code: ErrorCode, detail: impl Into<String>) -> WireError {
    WireError { code, detail: detail.into() }
}

/// Decodes one inbound text frame.
pub fn parse_client(text: &str) -> Result<ClientMessage, WireError> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| wire_error(ErrorCode::BadFrame, format!("invalid JSON: {e}")))?;
    let kind = match value.get("type") {
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err(wire_error(ErrorCode::BadFrame, "\"type\" must be a string")),
        None if value.is_object() => return Err(wire_error(ErrorCode::BadFrame, "missing \"type\"")),
        None => return Err(wire_error(ErrorCode::BadFrame, "expected a JSON object")),
    };
    if !matches!(kind.as_str(), "imu" | "config") {
        return Err(wire_error(ErrorCode::UnknownType, format!("unknown message type {kind:?}")));
    }
    let msg: ClientMessage =
        serde_json::from_value(value).map_err(|e| wire_error(ErrorCode::InvalidValue, e.to_string()))?;
    match &msg {
        ClientMessage::Imu(m) => {
            ImuFrame::from(*m).validate().map_err(|e| wire_error(ErrorCode::InvalidValue, e.to_string()))?;
        }
        ClientMessage::Config(c) => {
            if let Some(g) = c.gate_threshold {
                if !(g > 0.0 && g < 1.0) {
                    return Err(wire_error(ErrorCode::InvalidValue, format!("gate_threshold {g} outside (0, 1)")));
                }
            }
            if let Some(s) = c.time_scale {
                if !(s > 0.0 && s.is_finite()) {
                    return Err(wire_error(ErrorCode::InvalidValue, format!("time_scale {s} must be positive")));
                }
            }
        }
    }
    Ok(msg)
}
