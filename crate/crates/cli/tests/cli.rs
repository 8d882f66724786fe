use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use dronelight_cli::write_stream;
use dronelight_core::signal::ImuFrame;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dronelight"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Trained {
    dir: tempfile::TempDir,
    report: String,
}

impl Trained {
    fn data(&self) -> PathBuf {
        self.dir.path().join("ds.jsonl")
    }

    fn model(&self) -> PathBuf {
        self.dir.path().join("model.json")
    }
}

/// Default corpus and model, trained once per test binary.
fn trained() -> &'static Trained {
    static T: OnceLock<Trained> = OnceLock::new();
    T.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("ds.jsonl");
        let model = dir.path().join("model.json");
        assert!(run(&["gen-data", "--out", p(&data)]).status.success());
        let out = run(&["train", "--data", p(&data), "--out", p(&model)]);
        assert!(out.status.success(), "{}", stderr(&out));
        let report = stdout(&out).replace(p(dir.path()), "<dir>");
        Trained { dir, report }
    })
}

fn golden(name: &str, actual: &str) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("DRONELIGHT_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
    }
    let want = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, want, "{name} differs from golden");
}

#[test]
fn gen_data_record_counts_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let one = dir.path().join("one.jsonl");
    assert!(run(&["gen-data", "--out", p(&one), "--per-class", "1"]).status.success());
    // Header line plus one record per sample.
    assert_eq!(std::fs::read_to_string(&one).unwrap().lines().count(), 1 + 5);

    let text = std::fs::read_to_string(trained().data()).unwrap();
    assert_eq!(text.lines().count(), 1 + 125);

    let again = dir.path().join("again.jsonl");
    let out = run(&["gen-data", "--out", p(&again), "--seed", "42"]);
    assert!(stdout(&out).contains("wrote 125 samples"));
    assert_eq!(std::fs::read(&again).unwrap(), text.as_bytes());
}

#[test]
fn train_report_shape_and_golden() {
    let report = &trained().report;
    let rows = report.lines().filter(|l| l.split_whitespace().count() == 3 && l.trim_start().starts_with(char::is_numeric));
    assert_eq!(rows.count(), 16);
    assert!(report.contains("dataset: 125 samples (train 75, test 50)"));
    golden("train_default.txt", report);
}

#[test]
fn train_is_deterministic() {
    let t = trained();
    let model = t.dir.path().join("model2.json");
    let out = run(&["train", "--data", p(&t.data()), "--out", p(&model), "--seed", "42", "--split", "75/50"]);
    let report = stdout(&out).replace(p(t.dir.path()), "<dir>").replace("model2.json", "model.json");
    assert_eq!(report, t.report);
    assert_eq!(std::fs::read(&model).unwrap(), std::fs::read(t.model()).unwrap());
}

#[test]
fn train_rejects_bad_split() {
    let t = trained();
    let model = t.dir.path().join("unused.json");
    let out = run(&["train", "--data", p(&t.data()), "--out", p(&model), "--split", "70/50"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn classify_k_stream() {
    let t = trained();
    let stream = t.dir.path().join("k3.jsonl");
    assert!(run(&["gen-data", "--stream", "K", "--seed", "3", "--out", p(&stream)]).status.success());
    let out = run(&["classify", "--model", p(&t.model()), "--input", p(&stream)]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.starts_with("label: K\n"), "{text}");
    golden("classify_k_seed3.txt", &text);

    let json = bin().args(["--json", "classify", "--model", p(&t.model()), "--input", p(&stream)]).output().unwrap();
    let v: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    let total: f64 = v["posteriors"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert_eq!(v["label"], "K");
}

#[test]
fn classify_without_gesture_exits_2() {
    let t = trained();
    let stream = t.dir.path().join("flat.jsonl");
    let frames: Vec<ImuFrame> = (0..80).map(|i| ImuFrame::new(i as f64 * 0.02, [0.0, 0.0, 9.81], 0.0)).collect();
    write_stream(&frames, &stream).unwrap();
    let out = run(&["classify", "--model", p(&t.model()), "--input", p(&stream)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("no gesture detected"));
}

#[test]
fn evaluate_layout_and_errors() {
    let t = trained();
    let excerpt = t.dir.path().join("excerpt.jsonl");
    let text = std::fs::read_to_string(t.data()).unwrap();
    // Header plus the first two samples of each class.
    let lines: Vec<&str> = text.lines().collect();
    let mut keep = vec![lines[0]];
    for c in 0..5 {
        keep.extend(&lines[1 + c * 25..3 + c * 25]);
    }
    std::fs::write(&excerpt, keep.join("\n") + "\n").unwrap();

    // A deep forest reproduces its own training data.
    let model = t.dir.path().join("deep.json");
    let out = run(&["train", "--data", p(&t.data()), "--out", p(&model), "--trees", "50", "--depths", "6"]);
    assert!(out.status.success());
    let out = run(&["evaluate", "--model", p(&model), "--data", p(&excerpt)]);
    assert!(out.status.success());
    let report = stdout(&out);
    assert!(report.contains("accuracy: 1.0000"));
    golden("evaluate_excerpt.txt", &report);

    let out = run(&["evaluate", "--model", "/nonexistent/model.json", "--data", p(&excerpt)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("/nonexistent/model.json"));
}

#[test]
fn paint_outputs_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.ppm");
    let b = dir.path().join("b.ppm");
    let out = run(&["paint", "--letter", "S", "--out", p(&a)]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("max tracking error: "));
    assert!(run(&["paint", "--letter", "S", "--out", p(&b)]).status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let out = run(&["paint", "--letter", "X", "--out", p(&a)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("S, K, O, L, J"));
}

#[test]
fn paint_from_classified_stream() {
    let t = trained();
    let stream = t.dir.path().join("o.jsonl");
    assert!(run(&["gen-data", "--stream", "O", "--seed", "11", "--out", p(&stream)]).status.success());
    let img = t.dir.path().join("o.ppm");
    let trace = t.dir.path().join("o.trace.jsonl");
    let out = run(&[
        "paint", "--model", p(&t.model()), "--input", p(&stream), "--out", p(&img), "--trace", p(&trace),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).starts_with("letter: O\n"));
    assert!(std::fs::read_to_string(&trace).unwrap().lines().count() > 100);
}

#[test]
fn serve_on_busy_port_exits_1() {
    let t = trained();
    let busy = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = busy.local_addr().unwrap().port().to_string();
    let out = run(&["serve", "--port", &port, "--model", p(&t.model())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("port in use"), "{}", stderr(&out));

    let out = run(&["serve", "--port", "0", "--model", "/nonexistent/model.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn shared_defaults_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("defaults.json");
    std::fs::write(&cfg, r#"{"per_class": 2, "seed": 9}"#).unwrap();
    let data = dir.path().join("ds.jsonl");
    let out = run(&["gen-data", "--out", p(&data), "--config", p(&cfg)]);
    assert!(stdout(&out).contains("wrote 10 samples (seed 9)"));

    std::fs::write(&cfg, r#"{"per_clas": 2}"#).unwrap();
    let out = run(&["gen-data", "--out", p(&data), "--config", p(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
}
