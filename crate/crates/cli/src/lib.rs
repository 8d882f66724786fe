//! `dronelight` command line: data generation, training, evaluation,
//! painting, classification, and the live server.
//!
//! Each command returns a [`Report`] with a fixed text layout and a JSON
//! form; `main` only prints and maps errors to exit codes.

mod commands;
mod error;
mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use dronelight_core::forest::{DEFAULT_DEPTH_GRID, DEFAULT_FOLDS, DEFAULT_TREES_GRID};
use dronelight_core::synth::SynthParams;
use dronelight_service::FlightSettings;

pub use commands::{classify, evaluate, gen_data, paint, read_stream, serve, train, write_stream};
pub use error::CliError;
pub use report::{render_metrics, Report};

#[derive(Debug, Parser)]
#[command(name = "dronelight", version, about = "Glove gestures to drone light-paintings")]
pub struct Cli {
    /// Print the report as JSON.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic labeled dataset, or one raw gesture stream.
    GenData(GenDataArgs),
    /// Grid-search, train, and test a random forest.
    Train(TrainArgs),
    /// Score a saved model on a dataset.
    Evaluate(EvaluateArgs),
    /// Fly a letter in simulation and save the long exposure.
    Paint(PaintArgs),
    /// Classify a recorded gesture stream.
    Classify(ClassifyArgs),
    /// Serve the live WebSocket pipeline.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct GenDataArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub per_class: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write one synthetic gesture of this letter as an imu message stream.
    #[arg(long, value_name = "LETTER")]
    pub stream: Option<String>,
    /// Shared defaults file.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Train/test counts, e.g. 75/50.
    #[arg(long)]
    pub split: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated tree counts.
    #[arg(long, value_delimiter = ',')]
    pub trees: Option<Vec<usize>>,
    /// Comma-separated depth limits.
    #[arg(long, value_delimiter = ',')]
    pub depths: Option<Vec<usize>>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct PaintArgs {
    /// One of S, K, O, L, J.
    #[arg(long, required_unless_present = "input", conflicts_with = "input")]
    pub letter: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    /// Paint whatever this model reads from --input.
    #[arg(long, requires = "input")]
    pub model: Option<PathBuf>,
    /// Gesture stream to classify instead of giving --letter.
    #[arg(long, requires = "model")]
    pub input: Option<PathBuf>,
    /// Also write the flight trace as JSON lines.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    /// Service config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long)]
    pub model: Option<PathBuf>,
}

/// Values shared by several commands, loadable with `--config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Defaults {
    pub seed: u64,
    pub per_class: usize,
    pub split: String,
    pub k: usize,
    pub trees: Vec<usize>,
    pub depths: Vec<usize>,
    pub synth: SynthParams,
    pub flight: FlightSettings,
}

impl Default for Defaults {
    fn default() -> Self {
        Defaults {
            seed: 42,
            per_class: 25,
            split: "75/50".into(),
            k: DEFAULT_FOLDS,
            trees: DEFAULT_TREES_GRID.to_vec(),
            depths: DEFAULT_DEPTH_GRID.to_vec(),
            synth: SynthParams::default(),
            flight: FlightSettings::default(),
        }
    }
}

impl Defaults {
    pub fn load(path: Option<&PathBuf>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Defaults::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::env(path.display(), e))?;
        serde_json::from_str(&text).map_err(|e| CliError::env(path.display(), e))
    }
}

/// Runs one parsed command.
pub fn run(command: &Command) -> Result<Report, CliError> {
    match command {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Paint(a) => paint(a),
        Command::Classify(a) => classify(a),
        Command::Serve(a) => serve(a),
    }
}
