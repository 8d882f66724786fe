//! Per-connection capture state machine, free of any I/O.

use std::sync::Arc;

use dronelight_core::forest::RandomForestModel;
use dronelight_core::signal::{featurize, FilterSpec, GestureCapture, ImuFrame};
use dronelight_core::Label;
use serde::{Deserialize, Serialize};

use crate::wire::{ConfigMessage, ErrorCode, ServerMessage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Idle,
    Capturing,
    Flying,
}

impl Mode {
    /// The only legal edges: idle → capturing → {idle, flying} → idle.
    pub fn can_become(self, next: Mode) -> bool {
        matches!(
            (self, next),
            (Mode::Idle, Mode::Capturing)
                | (Mode::Capturing, Mode::Idle)
                | (Mode::Capturing, Mode::Flying)
                | (Mode::Flying, Mode::Idle)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionSettings {
    pub gate_threshold: f64,
    pub min_capture_len: usize,
    /// Captures are finalized once they reach this many frames.
    pub buffer_cap: usize,
    /// Flight playback speed-up relative to wall clock.
    pub time_scale: f64,
    pub filter: FilterSpec,
}

impl Default for SessionSettings {
    fn default() -> Self {
        SessionSettings {
            gate_threshold: dronelight_core::signal::DEFAULT_GATE_THRESHOLD,
            min_capture_len: dronelight_core::signal::DEFAULT_MIN_CAPTURE_LEN,
            buffer_cap: 2000,
            time_scale: 1.0,
            filter: FilterSpec::default(),
        }
    }
}

/// What the I/O layer must do after feeding the session.
#[derive(Debug, Clone, PartialEq)]
pub enum Effect {
    Send(ServerMessage),
    /// Fly and paint this letter, then call [`Session::finish_flight`].
    StartFlight(Label),
}

#[derive(Debug)]
pub struct Session {
    pub id: String,
    pub settings: SessionSettings,
    model: Arc<RandomForestModel>,
    mode: Mode,
    buffer: Vec<ImuFrame>,
    transitions: Vec<(Mode, Mode)>,
    ignored_frames: usize,
}

impl Session {
    pub fn new(id: impl Into<String>, settings: SessionSettings, model: Arc<RandomForestModel>) -> Self {
        Session {
            id: id.into(),
            settings,
            model,
            mode: Mode::Idle,
            buffer: Vec::new(),
            transitions: Vec::new(),
            ignored_frames: 0,
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    /// Every mode change so far, in order.
    pub fn transitions(&self) -> &[(Mode, Mode)] {
        &self.transitions
    }

    /// Frames received while flying.
    pub fn ignored_frames(&self) -> usize {
        self.ignored_frames
    }

    fn enter(&mut self, next: Mode, out: &mut Vec<Effect>) {
        debug_assert!(self.mode.can_become(next), "{:?} -> {next:?}", self.mode);
        self.transitions.push((self.mode, next));
        self.mode = next;
        out.push(Effect::Send(ServerMessage::State { mode: next }));
    }

    pub fn on_config(&mut self, cfg: &ConfigMessage) -> Vec<Effect> {
        if let Some(g) = cfg.gate_threshold {
            self.settings.gate_threshold = g;
        }
        if let Some(n) = cfg.min_capture_len {
            self.settings.min_capture_len = n;
        }
        if let Some(s) = cfg.time_scale {
            self.settings.time_scale = s;
        }
        vec![Effect::Send(ServerMessage::State { mode: self.mode })]
    }

    pub fn on_imu(&mut self, frame: ImuFrame) -> Vec<Effect> {
        let mut out = Vec::new();
        let clasped = frame.flex >= self.settings.gate_threshold;
        match self.mode {
            Mode::Flying => self.ignored_frames += 1,
            Mode::Idle if clasped => {
                self.enter(Mode::Capturing, &mut out);
                self.buffer.push(frame);
                if self.buffer.len() >= self.settings.buffer_cap {
                    self.finalize(&mut out);
                }
            }
            Mode::Idle => {}
            Mode::Capturing if clasped => {
                self.buffer.push(frame);
                if self.buffer.len() >= self.settings.buffer_cap {
                    self.finalize(&mut out);
                }
            }
            Mode::Capturing => self.finalize(&mut out),
        }
        out
    }

    fn finalize(&mut self, out: &mut Vec<Effect>) {
        let frames = std::mem::take(&mut self.buffer);
        let n = frames.len();
        let min_len = self.settings.min_capture_len.max(self.settings.filter.pad_len + 1);
        if n < min_len {
            out.push(Effect::Send(ServerMessage::error(
                ErrorCode::CaptureTooShort,
                format!("capture of {n} frames is shorter than {min_len}"),
            )));
            self.enter(Mode::Idle, out);
            return;
        }
        let features = match featurize(&GestureCapture::new(frames, self.id.clone()), &self.settings.filter) {
            Ok(f) => f,
            Err(e) => {
                out.push(Effect::Send(ServerMessage::error(ErrorCode::InvalidValue, e.to_string())));
                self.enter(Mode::Idle, out);
                return;
            }
        };
        let prediction = self.model.predict(features.as_slice());
        out.push(Effect::Send(ServerMessage::Prediction {
            label: prediction.label,
            posteriors: prediction.posteriors,
        }));
        self.enter(Mode::Flying, out);
        out.push(Effect::StartFlight(prediction.label));
    }

    /// Called once the flight's last message has been queued.
    pub fn finish_flight(&mut self) -> Vec<Effect> {
        let mut out = Vec::new();
        if self.mode == Mode::Flying {
            self.enter(Mode::Idle, &mut out);
        }
        out
    }
}
