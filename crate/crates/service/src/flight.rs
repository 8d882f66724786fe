//! Letter → flight → painting, shared by the server and batch tools.

use dronelight_core::glyph::{letter_path, GlyphError, LetterPath};
use dronelight_core::simflight::{fly_path, render_exposure, FlightError, FlightTrace, RgbImage};
use dronelight_core::Label;

use crate::config::FlightSettings;

#[derive(Debug, thiserror::Error)]
pub enum PaintError {
    #[error(transparent)]
    Glyph(#[from] GlyphError),
    #[error(transparent)]
    Flight(#[from] FlightError),
}

#[derive(Debug, Clone)]
pub struct Painting {
    pub label: Label,
    pub path: LetterPath,
    pub trace: FlightTrace,
    pub image: RgbImage,
    /// Worst distance to the active setpoint after the first 0.5 s.
    pub max_tracking_error: f64,
}

pub fn paint_letter(label: Label, settings: &FlightSettings) -> Result<Painting, PaintError> {
    let path = letter_path(label, &settings.frame, settings.speed, settings.rate)?;
    let trace = fly_path(&path, &settings.gains)?;
    let image = render_exposure(&trace, &settings.canvas()).to_image();
    let max_tracking_error = trace.max_tracking_error(&path, 0.5);
    Ok(Painting { label, path, trace, image, max_tracking_error })
}

/// Every `stride`-th state so telemetry goes out at about 10 Hz of flight time.
pub fn telemetry_stride(dt: f64) -> usize {
    ((0.1 / dt).round() as usize).max(1)
}
