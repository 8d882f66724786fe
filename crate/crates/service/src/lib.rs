//! WebSocket service: each connection streams glove frames in and gets
//! predictions, drone telemetry, and the finished light-painting back.

pub mod config;
pub mod flight;
mod server;
pub mod session;
pub mod wire;

use std::path::PathBuf;

pub use config::{FlightSettings, ImageMode, ServiceConfig};
pub use flight::{paint_letter, PaintError, Painting};
pub use server::{run_server, Server};
pub use session::{Effect, Mode, Session, SessionSettings};
pub use wire::{parse_client, ClientMessage, ConfigMessage, ErrorCode, ImuMessage, ServerMessage};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("port in use: {port}")]
    PortInUse { port: u16 },
    #[error("model file {} not found", .0.display())]
    ModelMissing(PathBuf),
    #[error("cannot load model: {0}")]
    Model(#[from] dronelight_core::forest::ForestError),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
