//! PNG heatmaps of fields arranged in labelled rows.
//!
//! Each row shares a color scale symmetric about zero with limit `max |value|`
//! over the row. Cells outside the disk are drawn gray. Labels such as `γ_3` are
//! drawn with a small built-in bitmap font (digits, `γ`, `η`, `_` for subscripts).

use crate::error::{invalid, Error, Result};
use crate::grids::RealField;

/// One labelled field.
#[derive(Debug, Clone)]
pub struct Panel {
    pub label: String,
    pub field: RealField,
}

const MARGIN: usize = 6;
const LABEL_BAND: usize = 14;
const MIN_PANEL: usize = 128;
const OUTSIDE: [u8; 3] = [200, 200, 200];
const BACKGROUND: [u8; 3] = [255, 255, 255];

/// Blue-white-red map of `t ∈ [-1, 1]`.
pub fn diverging(t: f64) -> [u8; 3] {
    let t = if t.is_finite() { t.clamp(-1.0, 1.0) } else { 0.0 };
    let fade = |x: f64| (255.0 * (1.0 - x)).round() as u8;
    if t >= 0.0 {
        [255, fade(t), fade(t)]
    } else {
        [fade(-t), fade(-t), 255]
    }
}

fn glyph(c: char) -> Option<[u8; 7]> {
    Some(match c {
        '0' => [0x0e, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0e],
        '1' => [0x04, 0x0c, 0x04, 0x04, 0x04, 0x04, 0x0e],
        '2' => [0x0e, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1f],
        '3' => [0x1f, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0e],
        '4' => [0x02, 0x06, 0x0a, 0x12, 0x1f, 0x02, 0x02],
        '5' => [0x1f, 0x10, 0x1e, 0x01, 0x01, 0x11, 0x0e],
        '6' => [0x06, 0x08, 0x10, 0x1e, 0x11, 0x11, 0x0e],
        '7' => [0x1f, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
        '8' => [0x0e, 0x11, 0x11, 0x0e, 0x11, 0x11, 0x0e],
        '9' => [0x0e, 0x11, 0x11, 0x0f, 0x01, 0x02, 0x0c],
        'γ' => [0x11, 0x11, 0x0a, 0x0a, 0x04, 0x04, 0x08],
        'η' => [0x16, 0x19, 0x11, 0x11, 0x11, 0x01, 0x01],
        _ => return None,
    })
}

struct Canvas {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl Canvas {
    fn new(width: usize, height: usize) -> Self {
        let mut pixels = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            pixels.extend_from_slice(&BACKGROUND);
        }
        Canvas { width, height, pixels }
    }

    fn set(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        if x < self.width && y < self.height {
            let i = 3 * (y * self.width + x);
            self.pixels[i..i + 3].copy_from_slice(&rgb);
        }
    }

    /// Draws `text` with its top-left corner at `(x, y)`; characters after `_` are
    /// drawn smaller and lowered.
    fn text(&mut self, x: usize, y: usize, text: &str) {
        let mut cx = x;
        let mut sub = false;
        for c in text.chars() {
            if c == '_' {
                sub = true;
                continue;
            }
            let (scale, dy) = if sub { (1, 5) } else { (2, 0) };
            if let Some(rows) = glyph(c) {
                for (r, bits) in rows.iter().enumerate() {
                    for col in 0..5 {
                        if bits & (0x10 >> col) != 0 {
                            for sy in 0..scale {
                                for sx in 0..scale {
                                    self.set(cx + col * scale + sx, y + dy + r * scale + sy, [0, 0, 0]);
                                }
                            }
                        }
                    }
                }
            }
            cx += 6 * scale;
        }
    }
}

/// Renders rows of panels to PNG bytes.
pub fn render_rows(rows: &[Vec<Panel>]) -> Result<Vec<u8>> {
    if rows.is_empty() || rows.iter().any(|r| r.is_empty()) {
        return invalid("render needs at least one non-empty row");
    }
    let n = rows[0][0].field.grid().n();
    if rows.iter().flatten().any(|p| p.field.grid().n() != n) {
        return invalid("all panels must share a grid size");
    }
    let scale = MIN_PANEL.div_ceil(n).max(1);
    let side = n * scale;
    let cols = rows.iter().map(|r| r.len()).max().unwrap_or(1);
    let width = MARGIN + cols * (side + MARGIN);
    let height = MARGIN + rows.len() * (LABEL_BAND + side + MARGIN);
    let mut canvas = Canvas::new(width, height);
    for (ri, row) in rows.iter().enumerate() {
        let limit = row.iter().map(|p| p.field.sup_norm()).fold(0.0, f64::max);
        let top = MARGIN + ri * (LABEL_BAND + side + MARGIN);
        for (ci, panel) in row.iter().enumerate() {
            let left = MARGIN + ci * (side + MARGIN);
            canvas.text(left, top, &panel.label);
            let grid = panel.field.grid();
            for iy in 0..n {
                for ix in 0..n {
                    let rgb = if grid.inside(ix, iy) {
                        let v = panel.field.get(ix, iy);
                        diverging(if limit > 0.0 { v / limit } else { 0.0 })
                    } else {
                        OUTSIDE
                    };
                    // image rows run top to bottom, grid rows bottom to top
                    let py = top + LABEL_BAND + (n - 1 - iy) * scale;
                    for sy in 0..scale {
                        for sx in 0..scale {
                            canvas.set(left + ix * scale + sx, py + sy, rgb);
                        }
                    }
                }
            }
        }
    }
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(|e| Error::Format(e.to_string()))?;
        writer.write_image_data(&canvas.pixels).map_err(|e| Error::Format(e.to_string()))?;
    }
    Ok(out)
}
