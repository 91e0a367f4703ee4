//! Heatmap and line-plot PNGs.
//!
//! Output is a pure function of the input and [`RenderConfig`]: no fonts are
//! loaded from the system and no timestamps are embedded, so identical inputs
//! produce identical bytes.

use std::fs;
use std::io;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::diff::DiffReport;
use crate::features::FeatureKind;
use crate::histogram::{Normalization, TimeAzimuthHistogram};

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("IoError: {0}")]
    Io(#[from] io::Error),
    #[error("png encoding failed: {0}")]
    Png(#[from] png::EncodingError),
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
    #[error("EmptyInput: {0}")]
    Empty(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Colormap {
    ViridisLike,
    Grayscale,
}

impl FromStr for Colormap {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "viridis" | "viridis_like" => Ok(Colormap::ViridisLike),
            "gray" | "grey" | "grayscale" => Ok(Colormap::Grayscale),
            _ => Err(format!("unknown colormap '{s}' (viridis, grayscale)")),
        }
    }
}

// Nine evenly spaced samples of matplotlib's viridis.
const VIRIDIS: [[f64; 3]; 9] = [
    [68.0, 1.0, 84.0],
    [71.0, 44.0, 122.0],
    [59.0, 81.0, 139.0],
    [44.0, 113.0, 142.0],
    [33.0, 144.0, 141.0],
    [39.0, 173.0, 129.0],
    [92.0, 200.0, 99.0],
    [170.0, 220.0, 50.0],
    [253.0, 231.0, 37.0],
];

impl Colormap {
    /// Colour for `t` in `[0, 1]` (clamped).
    pub fn color(self, t: f64) -> [u8; 3] {
        let t = if t.is_nan() { 0.0 } else { t.clamp(0.0, 1.0) };
        match self {
            Colormap::Grayscale => {
                let v = (t * 255.0).round() as u8;
                [v, v, v]
            }
            Colormap::ViridisLike => {
                let pos = t * (VIRIDIS.len() - 1) as f64;
                let i = (pos.floor() as usize).min(VIRIDIS.len() - 2);
                let f = pos - i as f64;
                let mut out = [0u8; 3];
                for c in 0..3 {
                    let v = VIRIDIS[i][c] + (VIRIDIS[i + 1][c] - VIRIDIS[i][c]) * f;
                    out[c] = v.round() as u8;
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderConfig {
    pub colormap: Colormap,
    pub gamma: f64,
    /// Total image size, margins included.
    pub width_px: u32,
    pub height_px: u32,
    pub axis_labels: bool,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self { colormap: Colormap::ViridisLike, gamma: 0.5, width_px: 800, height_px: 400, axis_labels: true }
    }
}

const MARGIN_LEFT: u32 = 56;
const MARGIN_BOTTOM: u32 = 26;
const MARGIN_TOP: u32 = 6;
const MARGIN_RIGHT: u32 = 8;
const BLACK: [u8; 3] = [0, 0, 0];
const WHITE: [u8; 3] = [255, 255, 255];

impl RenderConfig {
    fn validate(&self) -> Result<(), RenderError> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(RenderError::InvalidConfig(format!("gamma {} must be positive", self.gamma)));
        }
        let (min_w, min_h) =
            if self.axis_labels { (MARGIN_LEFT + MARGIN_RIGHT + 8, MARGIN_TOP + MARGIN_BOTTOM + 8) } else { (1, 1) };
        if self.width_px < min_w || self.height_px < min_h {
            return Err(RenderError::InvalidConfig(format!(
                "image {}x{} too small (need at least {min_w}x{min_h})",
                self.width_px, self.height_px
            )));
        }
        Ok(())
    }

    /// `(x0, y0, width, height)` of the data area.
    fn plot_area(&self) -> (u32, u32, u32, u32) {
        if self.axis_labels {
            (
                MARGIN_LEFT,
                MARGIN_TOP,
                self.width_px - MARGIN_LEFT - MARGIN_RIGHT,
                self.height_px - MARGIN_TOP - MARGIN_BOTTOM,
            )
        } else {
            (0, 0, self.width_px, self.height_px)
        }
    }
}

/// 8-bit RGB raster, row-major from the top-left corner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: u32, height: u32, fill: [u8; 3]) -> Self {
        let mut data = Vec::with_capacity((width * height * 3) as usize);
        for _ in 0..width * height {
            data.extend_from_slice(&fill);
        }
        Self { width, height, data }
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        let i = ((y * self.width + x) * 3) as usize;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn put(&mut self, x: u32, y: u32, c: [u8; 3]) {
        if x < self.width && y < self.height {
            let i = ((y * self.width + x) * 3) as usize;
            self.data[i..i + 3].copy_from_slice(&c);
        }
    }

    pub fn encode_png(&self) -> Result<Vec<u8>, RenderError> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width, self.height);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            let mut w = enc.write_header()?;
            w.write_image_data(&self.data)?;
        }
        Ok(out)
    }

    pub fn save_png(&self, path: &Path) -> Result<(), RenderError> {
        fs::write(path, self.encode_png()?)?;
        Ok(())
    }
}

/// Histogram as an image: frames left to right, bins bottom (low values) to
/// top. Each column is rescaled to its own maximum, gamma-compressed and
/// colour-mapped; the matrix is scaled to the pixel grid nearest-neighbour.
pub fn histogram_image(h: &TimeAzimuthHistogram, cfg: &RenderConfig) -> Result<RgbImage, RenderError> {
    cfg.validate()?;
    let (bins, frames) = h.counts.dim();
    if bins == 0 || frames == 0 {
        return Err(RenderError::Empty("histogram has no cells".into()));
    }
    let norm = h.normalized(Normalization::PerFrameMax);
    let mut img = RgbImage::new(cfg.width_px, cfg.height_px, WHITE);
    let (x0, y0, pw, ph) = cfg.plot_area();
    let palette: Vec<[u8; 3]> = (0..=255).map(|i| cfg.colormap.color(i as f64 / 255.0)).collect();
    for py in 0..ph {
        let b = bins - 1 - (py as usize * bins / ph as usize);
        for px in 0..pw {
            let m = px as usize * frames / pw as usize;
            let v = norm.counts[[b, m]].powf(cfg.gamma);
            let idx = (v * 255.0).round().clamp(0.0, 255.0) as usize;
            img.put(x0 + px, y0 + py, palette[idx]);
        }
    }
    if cfg.axis_labels {
        let (scale, unit) = display_scale(h.kind);
        let lo = h.config.lo;
        let hi = h.config.hi;
        let row_of = |v: f64| {
            let frac = (v - lo) / (hi - lo);
            y0 + ph - 1 - ((frac * (ph - 1) as f64).round() as u32).min(ph - 1)
        };
        let mut ticks = vec![lo, hi];
        if lo < 0.0 && hi > 0.0 {
            ticks.push(0.0);
        }
        for t in ticks {
            let y = row_of(t);
            for x in x0.saturating_sub(4)..x0 {
                img.put(x, y, BLACK);
            }
            let label = format_tick(t * scale);
            draw_text_right(&mut img, x0 - 6, y.saturating_sub(5).max(y0), &label, BLACK);
        }
        draw_text(&mut img, 2, y0 + ph / 2, unit, BLACK);
        draw_time_axis(&mut img, x0, y0 + ph, pw, frames, h.frame_hop_s);
    }
    Ok(img)
}

pub fn render_histogram(h: &TimeAzimuthHistogram, cfg: &RenderConfig, path: &Path) -> Result<(), RenderError> {
    histogram_image(h, cfg)?.save_png(path)
}

/// Line plot of the per-frame delta over a zero axis. The vertical range is
/// symmetric about zero so negating every delta mirrors the plot exactly.
pub fn diff_image(r: &DiffReport, cfg: &RenderConfig) -> Result<RgbImage, RenderError> {
    cfg.validate()?;
    let mut img = RgbImage::new(cfg.width_px, cfg.height_px, WHITE);
    let (x0, y0, pw, full_ph) = cfg.plot_area();
    // odd height so that zero sits on a pixel row
    let ph = if full_ph % 2 == 0 { full_ph - 1 } else { full_ph };
    let centre = (ph - 1) / 2;
    let (scale, unit) = display_scale(r.kind);

    let extent = r.per_frame_delta.iter().flatten().fold(0.0f64, |a, d| a.max(d.abs()));
    let extent = if extent > 0.0 { extent * 1.1 } else { 1.0 / scale };
    let y_of = |v: f64| -> u32 {
        let off = (v / extent * centre as f64).round().clamp(-(centre as f64), centre as f64);
        (centre as f64 - off) as u32
    };

    for x in 0..pw {
        img.put(x0 + x, y0 + centre, [160, 160, 160]);
    }

    let frames = r.per_frame_delta.len();
    let x_of = |m: usize| -> u32 {
        if frames <= 1 {
            0
        } else {
            (m as u64 * (pw - 1) as u64 / (frames - 1) as u64) as u32
        }
    };
    let line = [31, 119, 180];
    let mut prev: Option<(u32, f64)> = None;
    for (m, d) in r.per_frame_delta.iter().enumerate() {
        let Some(d) = *d else {
            prev = None;
            continue;
        };
        let x = x_of(m);
        match prev {
            Some((px, pd)) if x > px => {
                let mut last_y = y_of(pd);
                for xi in px..=x {
                    let t = (xi - px) as f64 / (x - px) as f64;
                    let v = pd + (d - pd) * t;
                    let y = y_of(v);
                    let (a, b) = if y < last_y { (y, last_y) } else { (last_y, y) };
                    for yy in a..=b {
                        img.put(x0 + xi, y0 + yy, line);
                    }
                    last_y = y;
                }
            }
            _ => img.put(x0 + x, y0 + y_of(d), line),
        }
        prev = Some((x, d));
    }

    if cfg.axis_labels {
        for (v, y) in [(extent, 0), (0.0, centre), (-extent, ph - 1)] {
            for x in x0.saturating_sub(4)..x0 {
                img.put(x, y0 + y, BLACK);
            }
            draw_text_right(&mut img, x0 - 6, (y0 + y).saturating_sub(2), &format_tick(v * scale), BLACK);
        }
        draw_text(&mut img, 2, y0 + centre + 10, unit, BLACK);
        let mut note = format!("MEAN ABS SHIFT {} {}", format_tick(r.mean_abs_shift * scale), unit);
        if let Some(deg) = r.mean_abs_shift_degrees {
            note.push_str(&format!(" = {deg:.2} DEG"));
        }
        draw_text(&mut img, x0 + 4, y0 + 2, &note, BLACK);
        draw_time_axis(&mut img, x0, y0 + full_ph, pw, frames.max(1), r.frame_hop_s);
    }
    Ok(img)
}

pub fn render_diff(r: &DiffReport, cfg: &RenderConfig, path: &Path) -> Result<(), RenderError> {
    diff_image(r, cfg)?.save_png(path)
}

fn display_scale(kind: FeatureKind) -> (f64, &'static str) {
    match kind {
        FeatureKind::ItdSeconds => (1e6, "US"),
        FeatureKind::BoundedIlr => (1.0, "BILR"),
        FeatureKind::IpdRadians => (1.0, "RAD"),
        FeatureKind::IldDb => (1.0, "DB"),
    }
}

fn format_tick(v: f64) -> String {
    let a = v.abs();
    let s = if a == 0.0 {
        "0".to_string()
    } else if a >= 100.0 {
        format!("{v:.0}")
    } else if a >= 1.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.3}")
    };
    s.trim_end_matches(".0").to_string()
}

fn draw_time_axis(img: &mut RgbImage, x0: u32, y: u32, pw: u32, frames: usize, hop_s: f64) {
    let duration = frames as f64 * hop_s;
    let step = [0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 30.0, 60.0, 120.0, 300.0, 600.0]
        .into_iter()
        .find(|s| duration / s <= 8.0)
        .unwrap_or(1200.0);
    let mut t = 0.0;
    while t <= duration {
        let x = x0 + ((t / duration.max(f64::MIN_POSITIVE)) * (pw - 1) as f64).round() as u32;
        for yy in y..y + 4 {
            img.put(x, yy, BLACK);
        }
        draw_text(img, x.saturating_sub(4), y + 6, &format_tick(t), BLACK);
        t += step;
    }
    draw_text_right(img, x0 + pw, y + 16, "TIME S", BLACK);
}

// 3x5 bitmap glyphs, one row per entry, bit 2 is the leftmost column.
fn glyph(c: char) -> [u8; 5] {
    match c.to_ascii_uppercase() {
        '0' => [7, 5, 5, 5, 7],
        '1' => [2, 6, 2, 2, 7],
        '2' => [7, 1, 7, 4, 7],
        '3' => [7, 1, 7, 1, 7],
        '4' => [5, 5, 7, 1, 1],
        '5' => [7, 4, 7, 1, 7],
        '6' => [7, 4, 7, 5, 7],
        '7' => [7, 1, 1, 2, 2],
        '8' => [7, 5, 7, 5, 7],
        '9' => [7, 5, 7, 1, 7],
        '-' => [0, 0, 7, 0, 0],
        '.' => [0, 0, 0, 0, 2],
        '+' => [0, 2, 7, 2, 0],
        '=' => [0, 7, 0, 7, 0],
        '|' => [2, 2, 2, 2, 2],
        ':' => [0, 2, 0, 2, 0],
        '(' => [1, 2, 2, 2, 1],
        ')' => [4, 2, 2, 2, 4],
        '/' => [1, 1, 2, 4, 4],
        'A' => [2, 5, 7, 5, 5],
        'B' => [6, 5, 6, 5, 6],
        'C' => [3, 4, 4, 4, 3],
        'D' => [6, 5, 5, 5, 6],
        'E' => [7, 4, 6, 4, 7],
        'F' => [7, 4, 6, 4, 4],
        'G' => [3, 4, 5, 5, 3],
        'H' => [5, 5, 7, 5, 5],
        'I' => [7, 2, 2, 2, 7],
        'J' => [1, 1, 1, 5, 2],
        'K' => [5, 5, 6, 5, 5],
        'L' => [4, 4, 4, 4, 7],
        'M' => [5, 7, 7, 5, 5],
        'N' => [6, 5, 5, 5, 5],
        'O' => [2, 5, 5, 5, 2],
        'P' => [6, 5, 6, 4, 4],
        'Q' => [2, 5, 5, 6, 3],
        'R' => [6, 5, 6, 5, 5],
        'S' => [3, 4, 2, 1, 6],
        'T' => [7, 2, 2, 2, 2],
        'U' => [5, 5, 5, 5, 7],
        'V' => [5, 5, 5, 5, 2],
        'W' => [5, 5, 7, 7, 5],
        'X' => [5, 5, 2, 5, 5],
        'Y' => [5, 5, 2, 2, 2],
        'Z' => [7, 1, 2, 4, 7],
        _ => [0; 5],
    }
}

const GLYPH_SCALE: u32 = 2;
const GLYPH_ADVANCE: u32 = 4 * GLYPH_SCALE;

fn draw_text(img: &mut RgbImage, x: u32, y: u32, text: &str, color: [u8; 3]) {
    for (i, c) in text.chars().enumerate() {
        let gx = x + i as u32 * GLYPH_ADVANCE;
        for (row, bits) in glyph(c).iter().enumerate() {
            for col in 0..3u32 {
                if bits & (4 >> col) != 0 {
                    for dy in 0..GLYPH_SCALE {
                        for dx in 0..GLYPH_SCALE {
                            img.put(gx + col * GLYPH_SCALE + dx, y + row as u32 * GLYPH_SCALE + dy, color);
                        }
                    }
                }
            }
        }
    }
}

fn draw_text_right(img: &mut RgbImage, right: u32, y: u32, text: &str, color: [u8; 3]) {
    let w = text.chars().count() as u32 * GLYPH_ADVANCE;
    draw_text(img, right.saturating_sub(w), y, text, color);
}
