//! Letter geometry and the timed, colored flight paths that paint it.
//!
//! Glyphs are polylines in the unit square, loaded from a versioned JSON
//! table (`data/glyphs.json`). The table is keyed by name, so figures other
//! than the five letters can be added without code changes.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::Label;

pub const GLYPH_TABLE_VERSION: u32 = 1;
const BUILTIN_GLYPHS: &str = include_str!("../data/glyphs.json");

pub const V_MAX: f64 = 1.0;
pub const DEFAULT_SPEED: f64 = 0.5;
pub const DEFAULT_RATE: f64 = 10.0;
/// Lowest allowed bottom edge of a paint frame, meters.
pub const MIN_FRAME_BOTTOM: f64 = 0.2;

/// Per-stroke LED colors: red, green, blue, yellow, magenta, cyan.
pub const PALETTE: [[u8; 3]; 6] = [
    [255, 0, 0],
    [0, 255, 0],
    [0, 0, 255],
    [255, 255, 0],
    [255, 0, 255],
    [0, 255, 255],
];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GlyphError {
    #[error("frame bottom at z={bottom:.3} m is below the {MIN_FRAME_BOTTOM} m floor margin")]
    FrameTooLow { bottom: f64 },
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("speed {0} m/s outside (0, {V_MAX}]")]
    InvalidSpeed(f64),
    #[error("setpoint rate {0} Hz must be at least 1")]
    InvalidRate(f64),
    #[error("glyph table: {0}")]
    Table(String),
}

pub type Point2 = [f64; 2];

/// A letter or figure as pen-down polylines; the pen lifts between strokes.
#[derive(Debug, Clone, PartialEq)]
pub struct Glyph {
    pub name: String,
    pub strokes: Vec<Vec<Point2>>,
}

impl Glyph {
    pub fn new(name: impl Into<String>, strokes: Vec<Vec<Point2>>) -> Result<Self, GlyphError> {
        let g = Glyph { name: name.into(), strokes };
        g.validate()?;
        Ok(g)
    }

    fn validate(&self) -> Result<(), GlyphError> {
        if self.strokes.is_empty() {
            return Err(GlyphError::Table(format!("{}: no strokes", self.name)));
        }
        for s in &self.strokes {
            if s.len() < 2 {
                return Err(GlyphError::Table(format!("{}: stroke with fewer than 2 points", self.name)));
            }
            if s.iter().flatten().any(|c| !(0.0..=1.0).contains(c)) {
                return Err(GlyphError::Table(format!("{}: point outside the unit square", self.name)));
            }
        }
        Ok(())
    }

    pub fn pen_ups(&self) -> usize {
        self.strokes.len() - 1
    }

    /// All strokes joined into one polyline, pen-up moves included.
    pub fn joined(&self) -> Vec<Point2> {
        self.strokes.iter().flatten().copied().collect()
    }

    /// Total pen-down length in unit-square units.
    pub fn stroke_length(&self) -> f64 {
        self.strokes.iter().map(|s| polyline_length(s)).sum()
    }
}

pub fn polyline_length(points: &[Point2]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]))
        .sum()
}

#[derive(Debug, Serialize, Deserialize)]
struct GlyphFile {
    version: u32,
    glyphs: BTreeMap<String, Vec<Vec<Point2>>>,
}

/// A named collection of glyphs.
#[derive(Debug, Clone)]
pub struct GlyphTable {
    glyphs: BTreeMap<String, Glyph>,
}

impl GlyphTable {
    pub fn from_json(text: &str) -> Result<Self, GlyphError> {
        let file: GlyphFile = serde_json::from_str(text).map_err(|e| GlyphError::Table(e.to_string()))?;
        if file.version != GLYPH_TABLE_VERSION {
            return Err(GlyphError::Table(format!("unsupported version {}", file.version)));
        }
        let glyphs = file
            .glyphs
            .into_iter()
            .map(|(name, strokes)| Ok((name.clone(), Glyph::new(name, strokes)?)))
            .collect::<Result<_, GlyphError>>()?;
        Ok(GlyphTable { glyphs })
    }

    /// The table shipped with the crate; contains every [`Label`].
    pub fn builtin() -> &'static GlyphTable {
        static TABLE: OnceLock<GlyphTable> = OnceLock::new();
        TABLE.get_or_init(|| GlyphTable::from_json(BUILTIN_GLYPHS).expect("built-in glyph table is valid"))
    }

    pub fn get(&self, name: &str) -> Option<&Glyph> {
        self.glyphs.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.glyphs.keys().map(String::as_str)
    }
}

pub fn glyph_table(label: Label) -> &'static Glyph {
    GlyphTable::builtin()
        .get(label.as_str())
        .expect("built-in table covers every label")
}

/// The vertical x–z rectangle a glyph is painted into.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PaintFrame {
    pub center: Vector3<f64>,
    pub width: f64,
    pub height: f64,
}

impl Default for PaintFrame {
    fn default() -> Self {
        PaintFrame { center: Vector3::new(0.0, 0.0, 1.5), width: 1.0, height: 1.0 }
    }
}

impl PaintFrame {
    pub fn validate(&self) -> Result<(), GlyphError> {
        if !(self.width > 0.0 && self.height > 0.0) || self.center.iter().any(|c| !c.is_finite()) {
            return Err(GlyphError::InvalidFrame(format!(
                "width {} height {} center {:?}",
                self.width, self.height, self.center
            )));
        }
        let bottom = self.center.z - self.height / 2.0;
        if bottom < MIN_FRAME_BOTTOM {
            return Err(GlyphError::FrameTooLow { bottom });
        }
        Ok(())
    }

    /// Maps unit-square `(u, v)` to world, `u` along x and `v` up along z.
    pub fn to_world(&self, p: Point2) -> Vector3<f64> {
        self.center + Vector3::new((p[0] - 0.5) * self.width, 0.0, (p[1] - 0.5) * self.height)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Setpoint {
    pub t: f64,
    pub position: Vector3<f64>,
    pub led: [u8; 3],
    pub lit: bool,
}

/// Setpoints at a fixed rate, starting at `t = 0`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LetterPath {
    pub setpoints: Vec<Setpoint>,
}

impl LetterPath {
    pub fn duration(&self) -> f64 {
        self.setpoints.last().map_or(0.0, |s| s.t)
    }

    /// Summed distance between consecutive setpoints that are both lit.
    pub fn lit_length(&self) -> f64 {
        self.setpoints
            .windows(2)
            .filter(|w| w[0].lit && w[1].lit)
            .map(|w| (w[1].position - w[0].position).norm())
            .sum()
    }

    pub fn lit_count(&self) -> usize {
        self.setpoints.iter().filter(|s| s.lit).count()
    }
}

pub fn letter_path(label: Label, frame: &PaintFrame, speed: f64, rate: f64) -> Result<LetterPath, GlyphError> {
    glyph_path(glyph_table(label), frame, speed, rate)
}

/// Flies `glyph` inside `frame`: unlit lead-in from the frame center, each
/// stroke lit in its palette color with unlit pen-up transits between, and
/// an unlit return to the center.
///
/// Every straight piece is split into equal steps no longer than
/// `speed / rate`, so polyline vertices are hit exactly.
pub fn glyph_path(glyph: &Glyph, frame: &PaintFrame, speed: f64, rate: f64) -> Result<LetterPath, GlyphError> {
    frame.validate()?;
    if !(speed > 0.0 && speed <= V_MAX) {
        return Err(GlyphError::InvalidSpeed(speed));
    }
    if !(rate >= 1.0 && rate.is_finite()) {
        return Err(GlyphError::InvalidRate(rate));
    }
    let max_step = speed / rate;
    let dark = [0, 0, 0];

    let mut points: Vec<(Vector3<f64>, [u8; 3], bool)> = vec![(frame.center, dark, false)];
    let mut cursor = frame.center;

    let straight = |points: &mut Vec<_>, from: Vector3<f64>, to: Vector3<f64>, min_steps: usize, tail: ([u8; 3], bool), body: ([u8; 3], bool)| {
        let len = (to - from).norm();
        let steps = ((len / max_step - 1e-9).ceil() as usize).max(min_steps);
        for k in 1..=steps {
            let p = from + (to - from) * (k as f64 / steps as f64);
            let (led, lit) = if k == steps { tail } else { body };
            points.push((p, led, lit));
        }
    };

    for (i, stroke) in glyph.strokes.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let start = frame.to_world(stroke[0]);
        // At least one dark point between strokes keeps pen-ups visible.
        straight(&mut points, cursor, start, 2, (color, true), (dark, false));
        cursor = start;
        for p in &stroke[1..] {
            let next = frame.to_world(*p);
            straight(&mut points, cursor, next, 1, (color, true), (color, true));
            cursor = next;
        }
    }
    straight(&mut points, cursor, frame.center, 2, (dark, false), (dark, false));

    let setpoints = points
        .into_iter()
        .enumerate()
        .map(|(i, (position, led, lit))| Setpoint { t: i as f64 / rate, position, led, lit })
        .collect();
    Ok(LetterPath { setpoints })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_shapes() {
        let o = glyph_table(Label::O);
        assert_eq!(o.strokes.len(), 1);
        assert_eq!(o.strokes[0].len(), 17);
        assert_eq!(o.strokes[0].first(), o.strokes[0].last());

        let l = glyph_table(Label::L);
        assert_eq!(l.strokes.len(), 1);
        assert_eq!(l.strokes[0].len(), 3);

        let k = glyph_table(Label::K);
        assert_eq!(k.strokes.len(), 2);
        assert_eq!(k.pen_ups(), 1);

        assert_eq!(glyph_table(Label::J).strokes[0].len(), 4);
        assert_eq!(glyph_table(Label::S).strokes[0].len(), 8);
    }

    #[test]
    fn table_rejects_bad_files() {
        assert!(GlyphTable::from_json(r#"{"version":2,"glyphs":{}}"#).is_err());
        assert!(GlyphTable::from_json(r#"{"version":1,"glyphs":{"X":[[[0,0]]]}}"#).is_err());
        assert!(GlyphTable::from_json(r#"{"version":1,"glyphs":{"X":[[[0,0],[1.5,0]]]}}"#).is_err());
        assert!(GlyphTable::from_json(r#"{"version":1,"glyphs":{"X":[]}}"#).is_err());
    }

    #[test]
    fn table_admits_figures() {
        let t = GlyphTable::from_json(
            r#"{"version":1,"glyphs":{"heart":[[[0.5,0.1],[0.1,0.6],[0.3,0.9],[0.5,0.7],[0.7,0.9],[0.9,0.6],[0.5,0.1]]]}}"#,
        )
        .unwrap();
        let heart = t.get("heart").unwrap();
        let path = glyph_path(heart, &PaintFrame::default(), DEFAULT_SPEED, DEFAULT_RATE).unwrap();
        assert!(path.lit_count() > 10);
    }

    #[test]
    fn straight_stroke_counts() {
        // A 2.0 m stroke at 0.5 m/s and 10 Hz: 4.0 s, 41 inclusive lit setpoints.
        let g = Glyph::new("bar", vec![vec![[0.0, 0.5], [1.0, 0.5]]]).unwrap();
        let frame = PaintFrame { width: 2.0, ..PaintFrame::default() };
        let path = glyph_path(&g, &frame, 0.5, 10.0).unwrap();
        assert_eq!(path.lit_count(), 41);
        let first_lit = path.setpoints.iter().position(|s| s.lit).unwrap();
        let last_lit = path.setpoints.iter().rposition(|s| s.lit).unwrap();
        assert_eq!(last_lit - first_lit, 40);
        let lit_time = path.setpoints[last_lit].t - path.setpoints[first_lit].t;
        assert!((lit_time - 4.0).abs() < 1e-9);
        assert!((path.lit_length() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn frame_scaling() {
        let narrow = PaintFrame::default();
        let wide = PaintFrame { width: 2.0, ..narrow };
        for label in Label::ALL {
            for p in glyph_table(label).joined() {
                let dn = narrow.to_world(p) - narrow.center;
                let dw = wide.to_world(p) - wide.center;
                assert!((dw.x - 2.0 * dn.x).abs() < 1e-12);
                assert_eq!(dw.z, dn.z);
            }
            // Glyph vertices appear verbatim in the flown path.
            let path = letter_path(label, &wide, DEFAULT_SPEED, DEFAULT_RATE).unwrap();
            for p in glyph_table(label).joined() {
                let w = wide.to_world(p);
                assert!(path.setpoints.iter().any(|s| (s.position - w).norm() < 1e-12));
            }
        }
    }

    #[test]
    fn frame_too_low() {
        let frame = PaintFrame { center: Vector3::new(0.0, 0.0, 0.6), ..PaintFrame::default() };
        assert!(matches!(letter_path(Label::S, &frame, 0.5, 10.0), Err(GlyphError::FrameTooLow { .. })));
        assert!(matches!(
            letter_path(Label::S, &PaintFrame::default(), 1.5, 10.0),
            Err(GlyphError::InvalidSpeed(_))
        ));
        assert!(matches!(
            letter_path(Label::S, &PaintFrame::default(), 0.5, 0.5),
            Err(GlyphError::InvalidRate(_))
        ));
    }

    #[test]
    fn path_invariants_for_every_letter() {
        let frame = PaintFrame::default();
        for label in Label::ALL {
            let path = letter_path(label, &frame, DEFAULT_SPEED, DEFAULT_RATE).unwrap();
            let sp = &path.setpoints;
            assert_eq!(sp[0].t, 0.0);
            assert_eq!(sp[0].position, frame.center);
            assert!(!sp[0].lit && !sp.last().unwrap().lit);
            assert!((sp.last().unwrap().position - frame.center).norm() < 1e-12);
            for w in sp.windows(2) {
                assert!((w[1].t - w[0].t - 1.0 / DEFAULT_RATE).abs() < 1e-9);
                assert!((w[1].position - w[0].position).norm() <= V_MAX / DEFAULT_RATE + 1e-12);
            }
            for s in sp {
                let d = s.position - frame.center;
                assert!(d.x.abs() <= frame.width / 2.0 + 0.01);
                assert!(d.z.abs() <= frame.height / 2.0 + 0.01);
                assert_eq!(d.y, 0.0);
                assert_eq!(s.lit, s.led != [0, 0, 0]);
            }
            let want = glyph_table(label).stroke_length();
            assert!((path.lit_length() - want).abs() <= 0.01 * want, "{label}");
        }
    }

    #[test]
    fn strokes_cycle_palette() {
        let path = letter_path(Label::K, &PaintFrame::default(), DEFAULT_SPEED, DEFAULT_RATE).unwrap();
        let colors: Vec<[u8; 3]> = path
            .setpoints
            .iter()
            .filter(|s| s.lit)
            .map(|s| s.led)
            .fold(Vec::new(), |mut acc, c| {
                if acc.last() != Some(&c) {
                    acc.push(c);
                }
                acc
            });
        assert_eq!(colors, vec![PALETTE[0], PALETTE[1]]);
    }
}
