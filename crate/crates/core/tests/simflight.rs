use dronelight_core::glyph::{glyph_table, letter_path, PaintFrame, DEFAULT_RATE, DEFAULT_SPEED};
use dronelight_core::simflight::{
    fly_path, render_exposure, save_image, step, CanvasParams, ControllerGains, DroneState, FlightTrace, RgbImage,
};
use dronelight_core::Label;
use nalgebra::Vector3;
use proptest::prelude::*;
use sha2::{Digest, Sha256};
use std::sync::OnceLock;

fn lyapunov(s: &DroneState, sp: &Vector3<f64>, kp: f64) -> f64 {
    kp * (s.position - sp).norm_squared() + s.velocity.norm_squared()
}

fn paint(label: Label) -> (FlightTrace, RgbImage) {
    let path = letter_path(label, &PaintFrame::default(), DEFAULT_SPEED, DEFAULT_RATE).unwrap();
    let trace = fly_path(&path, &ControllerGains::default()).unwrap();
    let image = render_exposure(&trace, &CanvasParams::default()).to_image();
    (trace, image)
}

fn s_trace() -> &'static FlightTrace {
    static TRACE: OnceLock<FlightTrace> = OnceLock::new();
    TRACE.get_or_init(|| paint(Label::S).0)
}

fn brightness(img: &RgbImage, x: i64, y: i64) -> f64 {
    if x < 0 || y < 0 || x >= img.width as i64 || y >= img.height as i64 {
        return 0.0;
    }
    img.pixel(x as usize, y as usize).iter().map(|&c| c as f64).sum()
}

#[test]
fn o_paints_an_annulus() {
    let (_, img) = paint(Label::O);
    let params = CanvasParams::default();
    let frame = params.frame;
    let px_per_m = params.width as f64 / (frame.width * (1.0 + 2.0 * params.margin));
    let (cx, cy) = (params.width as f64 / 2.0, params.height as f64 / 2.0);

    // Sample the known glyph outline, projected to pixels.
    let outline = glyph_table(Label::O).joined();
    let mut on_path = Vec::new();
    for w in outline.windows(2) {
        for k in 0..20 {
            let s = k as f64 / 20.0;
            let p = frame.to_world([w[0][0] + s * (w[1][0] - w[0][0]), w[0][1] + s * (w[1][1] - w[0][1])]);
            let x = cx + (p.x - frame.center.x) * px_per_m;
            let y = cy - (p.z - frame.center.z) * px_per_m;
            on_path.push(brightness(&img, x.floor() as i64, y.floor() as i64));
        }
    }
    let ring_mean = on_path.iter().sum::<f64>() / on_path.len() as f64;

    let radius_px = 0.45 * frame.width * px_per_m;
    let mut disc = Vec::new();
    for y in 0..img.height as i64 {
        for x in 0..img.width as i64 {
            let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
            if dx.hypot(dy) <= radius_px / 2.0 {
                disc.push(brightness(&img, x, y));
            }
        }
    }
    let disc_mean = disc.iter().sum::<f64>() / disc.len() as f64;
    assert!(ring_mean > 0.0);
    assert!(ring_mean > 10.0 * disc_mean, "ring {ring_mean} disc {disc_mean}");
}

fn digest(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

#[test]
fn letter_paintings_match_goldens() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    for label in Label::ALL {
        let (_, img) = paint(label);
        let ppm = img.to_ppm();
        assert_eq!(ppm, paint(label).1.to_ppm(), "{label} not deterministic");
        let golden = dir.join(format!("paint_{label}.sha256"));
        if std::env::var_os("DRONELIGHT_BLESS").is_some() {
            std::fs::write(&golden, format!("{}\n", digest(&ppm))).unwrap();
        }
        let want = std::fs::read_to_string(&golden).unwrap();
        assert_eq!(digest(&ppm), want.trim(), "{label} painting changed");
    }
}

#[test]
fn saved_ppm_round_trips() {
    let (trace, _) = paint(Label::L);
    let canvas = render_exposure(&trace, &CanvasParams::default());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("l.ppm");
    save_image(&canvas, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("P3\n512 512\n255\n"));
    let parsed = RgbImage::from_ppm(&text).unwrap();
    assert_eq!(parsed, canvas.to_image());
    assert_eq!(parsed.to_ppm(), text);
}

#[test]
fn all_letters_fly_within_bound() {
    for label in Label::ALL {
        let path = letter_path(label, &PaintFrame::default(), DEFAULT_SPEED, DEFAULT_RATE).unwrap();
        let trace = fly_path(&path, &ControllerGains::default()).unwrap();
        assert!(trace.max_tracking_error(&path, 0.5) < 0.15);
        assert!(trace.states.iter().any(|s| s.lit));
    }
}

#[test]
fn trace_exports_one_line_per_state() {
    let (trace, _) = paint(Label::J);
    let mut buf = Vec::new();
    trace.write_jsonl(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), trace.states.len());
    let first: DroneState = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(first, trace.states[0]);
}

fn vec3(range: f64) -> impl Strategy<Value = Vector3<f64>> {
    (-range..range, -range..range, -range..range).prop_map(|(x, y, z)| Vector3::new(x, y, z))
}

proptest! {
    #[test]
    fn energy_never_increases(start in vec3(2.0), v0 in vec3(0.5), sp in vec3(2.0)) {
        let gains = ControllerGains::default();
        let mut s = DroneState { velocity: v0, ..DroneState::at_rest(start) };
        s = step(&s, sp, &gains);
        let mut prev = lyapunov(&s, &sp, gains.kp);
        for _ in 0..600 {
            s = step(&s, sp, &gains);
            let cur = lyapunov(&s, &sp, gains.kp);
            prop_assert!(cur <= prev + 1e-9, "{} > {}", cur, prev);
            prev = cur;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn rendering_is_additive(cut in 1usize..200) {
        let trace = s_trace();
        let params = CanvasParams::default();
        let cut = cut * trace.states.len() / 200;
        let head = FlightTrace { dt: trace.dt, states: trace.states[..cut].to_vec() };
        let tail = FlightTrace { dt: trace.dt, states: trace.states[cut..].to_vec() };
        let whole = render_exposure(trace, &params);
        let mut sum = render_exposure(&head, &params);
        sum.add(&render_exposure(&tail, &params));
        for (a, b) in whole.accum.iter().zip(&sum.accum) {
            for c in 0..3 {
                prop_assert!((a[c] - b[c]).abs() <= 1e-9 * a[c].abs().max(1.0));
            }
        }
    }
}
