use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use dronelight_core::forest::{
    evaluate as evaluate_model, forest_fit, forest_predict, grid_search, load_model, save_model, stratified_split,
    ForestError, ForestParams, Prediction, RandomForestModel,
};
use dronelight_core::signal::{FilterSpec, ImuFrame};
use dronelight_core::synth::{gen_dataset, Dataset, load_dataset, save_dataset, stream_features, synth_gesture, SynthParams};
use dronelight_core::Label;
use dronelight_service::{paint_letter, parse_client, run_server, ClientMessage, ServiceConfig};
use serde_json::json;

use crate::report::{posteriors_line, render_metrics};
use crate::{ClassifyArgs, CliError, Defaults, EvaluateArgs, GenDataArgs, PaintArgs, Report, ServeArgs, TrainArgs};

fn open_model(path: &Path) -> Result<RandomForestModel, CliError> {
    load_model(path).map_err(|e| match e {
        ForestError::Io(io) => CliError::env(path.display(), io),
        other => other.into(),
    })
}

fn open_dataset(path: &Path) -> Result<Dataset, CliError> {
    load_dataset(path).map_err(|e| CliError::env(path.display(), e))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::env(path.display(), e))
}

/// Writes frames as `imu` wire messages, one per line.
pub fn write_stream(frames: &[ImuFrame], path: &Path) -> Result<(), CliError> {
    let mut out = create(path)?;
    for f in frames {
        writeln!(out, "{}", ClientMessage::imu(f).to_json()).map_err(|e| CliError::env(path.display(), e))?;
    }
    out.flush().map_err(|e| CliError::env(path.display(), e))
}

/// Reads a line-delimited `imu` message stream.
pub fn read_stream(path: &Path) -> Result<Vec<ImuFrame>, CliError> {
    let file = File::open(path).map_err(|e| CliError::env(path.display(), e))?;
    let mut frames = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::env(path.display(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_client(&line) {
            Ok(ClientMessage::Imu(m)) => frames.push(m.into()),
            Ok(ClientMessage::Config(_)) => {}
            Err(e) => return Err(CliError::Env(format!("{}:{}: {}", path.display(), i + 1, e.detail))),
        }
    }
    Ok(frames)
}

pub fn gen_data(args: &GenDataArgs) -> Result<Report, CliError> {
    let defaults = Defaults::load(args.config.as_ref())?;
    let seed = args.seed.unwrap_or(defaults.seed);
    let params = SynthParams { seed, ..defaults.synth };

    if let Some(letter) = &args.stream {
        let label: Label = letter.parse()?;
        let frames = synth_gesture(label, &params)?;
        write_stream(&frames, &args.out)?;
        let text = format!("wrote {} {label} frames (seed {seed}) to {}\n", frames.len(), args.out.display());
        return Ok(Report { text, json: json!({"letter": label, "seed": seed, "frames": frames.len()}) });
    }

    let per_class = args.per_class.unwrap_or(defaults.per_class);
    let ds = gen_dataset(per_class, &params, &FilterSpec::default())?;
    save_dataset(&ds, &args.out)?;
    let counts = ds.class_counts();
    let mut text = format!("wrote {} samples (seed {seed}) to {}\n", ds.len(), args.out.display());
    for (label, n) in Label::ALL.iter().zip(counts) {
        writeln!(text, "  {label}: {n}").unwrap();
    }
    let by_class: serde_json::Map<String, serde_json::Value> =
        Label::ALL.iter().zip(counts).map(|(l, n)| (l.to_string(), json!(n))).collect();
    Ok(Report { text, json: json!({"samples": ds.len(), "seed": seed, "class_counts": by_class}) })
}

fn parse_split(split: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::Domain(format!("split {split:?} must look like TRAIN/TEST, e.g. 75/50"));
    let (a, b) = split.split_once('/').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

pub fn train(args: &TrainArgs) -> Result<Report, CliError> {
    let defaults = Defaults::load(args.config.as_ref())?;
    let seed = args.seed.unwrap_or(defaults.seed);
    let k = args.k.unwrap_or(defaults.k);
    let trees = args.trees.clone().unwrap_or(defaults.trees);
    let depths = args.depths.clone().unwrap_or(defaults.depths);
    let (n_train, n_test) = parse_split(args.split.as_deref().unwrap_or(&defaults.split))?;

    let ds = open_dataset(&args.data)?;
    if n_train + n_test != ds.len() {
        return Err(CliError::Domain(format!(
            "split {n_train}/{n_test} does not cover the {} samples in {}",
            ds.len(),
            args.data.display()
        )));
    }
    let (train_idx, test_idx) = stratified_split(&ds, n_train, seed)?;
    let (train_set, test_set) = (ds.subset(&train_idx), ds.subset(&test_idx));

    let grid = grid_search(&train_set, &trees, &depths, k, seed)?;
    let best = &grid.best;
    let model = forest_fit(&train_set, &ForestParams::new(best.n_trees, best.max_depth, seed))?;
    save_model(&model, &args.out)?;
    let metrics = evaluate_model(&model, &test_set)?;

    let mut text = String::new();
    writeln!(text, "dataset: {} samples (train {}, test {})", ds.len(), train_set.len(), test_set.len()).unwrap();
    writeln!(text, "grid search: {} configurations, {k}-fold cross-validation, seed {seed}", grid.scores.len()).unwrap();
    writeln!(text, "trees  depth  cv_accuracy").unwrap();
    for s in &grid.scores {
        writeln!(text, "{:>5}  {:>5}  {:.4}", s.n_trees, s.max_depth, s.mean_accuracy).unwrap();
    }
    writeln!(text, "best: trees={} depth={} cv_accuracy={:.4}", best.n_trees, best.max_depth, best.mean_accuracy)
        .unwrap();
    writeln!(text, "test set ({} samples)", test_set.len()).unwrap();
    text.push_str(&render_metrics(&metrics));
    writeln!(text, "model written to {}", args.out.display()).unwrap();

    let json = json!({
        "samples": ds.len(),
        "train": train_set.len(),
        "test": test_set.len(),
        "k": k,
        "seed": seed,
        "scores": grid.scores,
        "best": best,
        "metrics": metrics,
        "model": args.out,
    });
    Ok(Report { text, json })
}

pub fn evaluate(args: &EvaluateArgs) -> Result<Report, CliError> {
    let model = open_model(&args.model)?;
    let ds = open_dataset(&args.data)?;
    let metrics = evaluate_model(&model, &ds)?;
    let text = format!("samples: {}\n{}", ds.len(), render_metrics(&metrics));
    Ok(Report { text, json: json!({"samples": ds.len(), "metrics": metrics}) })
}

fn classify_stream(model: &RandomForestModel, path: &Path) -> Result<Prediction, CliError> {
    let frames = read_stream(path)?;
    let features = stream_features(&frames, &FilterSpec::default())?;
    Ok(forest_predict(model, &features))
}

pub fn classify(args: &ClassifyArgs) -> Result<Report, CliError> {
    let model = open_model(&args.model)?;
    let p = classify_stream(&model, &args.input)?;
    let text = format!("label: {}\n{}\n", p.label, posteriors_line(&p.posteriors));
    Ok(Report { text, json: json!({"label": p.label, "posteriors": p.posteriors}) })
}

pub fn paint(args: &PaintArgs) -> Result<Report, CliError> {
    let defaults = Defaults::load(args.config.as_ref())?;
    let label: Label = match (&args.letter, &args.model, &args.input) {
        (Some(letter), _, _) => letter.parse()?,
        (None, Some(model), Some(input)) => classify_stream(&open_model(model)?, input)?.label,
        _ => return Err(CliError::Domain("give --letter, or --model with --input".into())),
    };
    let painting = paint_letter(label, &defaults.flight)?;
    let ppm = painting.image.to_ppm();
    std::fs::write(&args.out, &ppm).map_err(|e| CliError::env(args.out.display(), e))?;
    if let Some(trace_path) = &args.trace {
        let out = create(trace_path)?;
        painting.trace.write_jsonl(out).map_err(|e| CliError::env(trace_path.display(), e))?;
    }

    let duration = painting.path.duration();
    let mut text = String::new();
    writeln!(text, "letter: {label}").unwrap();
    writeln!(text, "setpoints: {} ({} lit)", painting.path.setpoints.len(), painting.path.lit_count()).unwrap();
    writeln!(text, "flight: {duration:.2} s, {} states", painting.trace.states.len()).unwrap();
    writeln!(text, "max tracking error: {:.4} m", painting.max_tracking_error).unwrap();
    writeln!(text, "image: {}x{} written to {}", painting.image.width, painting.image.height, args.out.display())
        .unwrap();
    let json = json!({
        "letter": label,
        "setpoints": painting.path.setpoints.len(),
        "duration": duration,
        "states": painting.trace.states.len(),
        "max_tracking_error": painting.max_tracking_error,
        "image": args.out,
    });
    Ok(Report { text, json })
}

pub fn serve(args: &ServeArgs) -> Result<Report, CliError> {
    let mut config = match &args.config {
        Some(path) => ServiceConfig::load(path)?,
        None => ServiceConfig::default(),
    };
    if let Some(port) = args.port {
        config.port = port;
    }
    if let Some(model) = &args.model {
        config.model_path = model.clone();
    }
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::env("runtime", e))?;
    runtime.block_on(run_server(config))?;
    Ok(Report { text: "server stopped\n".into(), json: json!({"stopped": true}) })
}
