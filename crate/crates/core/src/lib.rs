//! Gesture-to-light-painting pipeline.
//!
//! A clasp-gated accelerometer stream is filtered and reduced to a 30-value
//! feature vector ([`signal`]), classified by a from-scratch random forest
//! ([`forest`]) trained on synthetic glove data ([`synth`]), and the
//! recognized letter is flown by a simulated quadcopter ([`glyph`],
//! [`simflight`]) whose LED trace is integrated into a long-exposure image.

pub mod forest;
pub mod glyph;
mod label;
pub mod seed;
pub mod signal;
pub mod simflight;
pub mod synth;

pub use label::{Label, ParseLabelError, NUM_CLASSES};
