use std::fmt::Write as _;

use super::images::SketchImage;
use crate::error::{Error, Result};

/// Ordered polylines in drawing order, in the pixel coordinates of a
/// `width`×`height` canvas.
#[derive(Debug, Clone, PartialEq)]
pub struct StrokeSequence {
    pub strokes: Vec<Vec<(f32, f32)>>,
    pub pen_width: f32,
    pub width: usize,
    pub height: usize,
}

impl StrokeSequence {
    pub const DEFAULT_PEN_WIDTH: f32 = 2.0;

    pub fn new(strokes: Vec<Vec<(f32, f32)>>, width: usize, height: usize) -> Self {
        Self { strokes, pen_width: Self::DEFAULT_PEN_WIDTH, width, height }
    }

    pub fn len(&self) -> usize {
        self.strokes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strokes.is_empty()
    }

    /// Parse `stroke_index x y` lines. Stroke indices must be non-decreasing;
    /// a new stroke starts whenever the index changes. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn parse(text: &str, width: usize, height: usize) -> Result<Self> {
        let mut strokes: Vec<Vec<(f32, f32)>> = Vec::new();
        let mut current: Option<u64> = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || Error::InvalidInput(format!("stroke line {}: {line:?}", lineno + 1));
            let mut fields = line.split_whitespace();
            let idx: u64 = fields.next().and_then(|f| f.parse().ok()).ok_or_else(bad)?;
            let x: f32 = fields.next().and_then(|f| f.parse().ok()).ok_or_else(bad)?;
            let y: f32 = fields.next().and_then(|f| f.parse().ok()).ok_or_else(bad)?;
            if fields.next().is_some() || !x.is_finite() || !y.is_finite() {
                return Err(bad());
            }
            match current {
                Some(c) if idx < c => {
                    return Err(Error::InvalidInput(format!(
                        "stroke line {}: index {idx} decreases after {c}",
                        lineno + 1
                    )))
                }
                Some(c) if idx == c => strokes.last_mut().expect("stroke open").push((x, y)),
                _ => {
                    strokes.push(vec![(x, y)]);
                    current = Some(idx);
                }
            }
        }
        Ok(Self::new(strokes, width, height))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (i, stroke) in self.strokes.iter().enumerate() {
            for &(x, y) in stroke {
                let _ = writeln!(s, "{i} {x} {y}");
            }
        }
        s
    }

    /// Rescale coordinates (and pen width) onto a `size`×`size` canvas.
    pub fn scaled_to(&self, size: usize) -> Self {
        let side = self.width.max(self.height).max(1) as f32;
        let scale = size as f32 / side;
        // centered the same way SketchImage::normalized pads
        let ox = (side - self.width as f32) / 2.0;
        let oy = (side - self.height as f32) / 2.0;
        let strokes = self
            .strokes
            .iter()
            .map(|s| s.iter().map(|&(x, y)| ((x + ox) * scale, (y + oy) * scale)).collect())
            .collect();
        Self { strokes, pen_width: self.pen_width, width: size, height: size }
    }

    /// Render the first `count` strokes as black ink on white.
    pub fn rasterize_first(&self, count: usize) -> SketchImage {
        let mut canvas = SketchImage::blank(self.width, self.height);
        let radius = (self.pen_width / 2.0).max(0.5);
        for stroke in self.strokes.iter().take(count) {
            match stroke.as_slice() {
                [] => {}
                [p] => draw_segment(&mut canvas, *p, *p, radius),
                pts => pts.windows(2).for_each(|w| draw_segment(&mut canvas, w[0], w[1], radius)),
            }
        }
        canvas
    }

    pub fn rasterize(&self) -> SketchImage {
        self.rasterize_first(self.strokes.len())
    }
}

/// Ink every pixel whose center lies within `radius` of segment `a`–`b`.
fn draw_segment(canvas: &mut SketchImage, a: (f32, f32), b: (f32, f32), radius: f32) {
    let (w, h) = (canvas.width() as f32, canvas.height() as f32);
    let x0 = (a.0.min(b.0) - radius).floor().max(0.0);
    let x1 = (a.0.max(b.0) + radius).ceil().min(w - 1.0);
    let y0 = (a.1.min(b.1) - radius).floor().max(0.0);
    let y1 = (a.1.max(b.1) + radius).ceil().min(h - 1.0);
    if x0 > x1 || y0 > y1 {
        return;
    }
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let r2 = radius * radius;
    for py in y0 as usize..=y1 as usize {
        for px in x0 as usize..=x1 as usize {
            let (cx, cy) = (px as f32 + 0.5, py as f32 + 0.5);
            let t = if len2 > 0.0 {
                (((cx - a.0) * dx + (cy - a.1) * dy) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let (qx, qy) = (a.0 + t * dx - cx, a.1 + t * dy - cy);
            if qx * qx + qy * qy <= r2 {
                canvas.set(px, py, 0.0);
            }
        }
    }
}

/// Keep the first `⌈fraction·N⌉` strokes in drawing order and render them.
pub fn truncate_strokes(seq: &StrokeSequence, fraction: f64) -> Result<SketchImage> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidInput(format!("fraction {fraction} outside [0,1]")));
    }
    let keep = (fraction * seq.len() as f64).ceil() as usize;
    Ok(seq.rasterize_first(keep.min(seq.len())))
}
