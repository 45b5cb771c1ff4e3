use serde::{Deserialize, Serialize};

use crate::grid::ImageGrid;

/// Interpolation used when resizing a grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    Bilinear,
    Nearest,
}

impl std::str::FromStr for Interpolation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bilinear" => Ok(Self::Bilinear),
            "nearest" => Ok(Self::Nearest),
            other => Err(format!("unknown interpolation `{other}`")),
        }
    }
}

/// Half-pixel-centred source coordinate for output index `dst`, clamped to
/// the valid sample range. Matches the usual `align_corners = false` rule.
fn source_coord(dst: usize, in_len: usize, out_len: usize) -> (usize, usize, f32) {
    let scale = in_len as f64 / out_len as f64;
    let src = ((dst as f64 + 0.5) * scale - 0.5).max(0.0);
    let lo = (src.floor() as usize).min(in_len - 1);
    let hi = (lo + 1).min(in_len - 1);
    let frac = (src - lo as f64).clamp(0.0, 1.0) as f32;
    (lo, hi, frac)
}

/// Row-major `out_len x in_len` matrix of bilinear weights, so that
/// resizing a vector is a matrix product.
pub(crate) fn bilinear_matrix(in_len: usize, out_len: usize) -> Vec<f32> {
    let mut m = vec![0.0; out_len * in_len];
    for dst in 0..out_len {
        let (lo, hi, frac) = source_coord(dst, in_len, out_len);
        m[dst * in_len + lo] += 1.0 - frac;
        m[dst * in_len + hi] += frac;
    }
    m
}

/// Resizes every channel of `grid` to `out_h x out_w`.
///
/// Bilinear output is a convex combination of inputs, so the value range of
/// the input is never exceeded.
pub fn resize(grid: &ImageGrid, out_h: usize, out_w: usize, mode: Interpolation) -> ImageGrid {
    let (c, h, w) = grid.shape();
    if (h, w) == (out_h, out_w) {
        return grid.clone();
    }
    let mut values = Vec::with_capacity(c * out_h * out_w);
    let rows: Vec<_> = (0..out_h).map(|r| source_coord(r, h, out_h)).collect();
    let cols: Vec<_> = (0..out_w).map(|q| source_coord(q, w, out_w)).collect();
    for ch in 0..c {
        for r in 0..out_h {
            for q in 0..out_w {
                let v = match mode {
                    Interpolation::Nearest => {
                        let sr = (r * h / out_h).min(h - 1);
                        let sc = (q * w / out_w).min(w - 1);
                        grid.get(ch, sr, sc)
                    }
                    Interpolation::Bilinear => {
                        let (r0, r1, fr) = rows[r];
                        let (c0, c1, fc) = cols[q];
                        let top = grid.get(ch, r0, c0) * (1.0 - fc) + grid.get(ch, r0, c1) * fc;
                        let bot = grid.get(ch, r1, c0) * (1.0 - fc) + grid.get(ch, r1, c1) * fc;
                        top * (1.0 - fr) + bot * fr
                    }
                };
                values.push(v);
            }
        }
    }
    ImageGrid::new(c, out_h, out_w, values).expect("resize keeps values finite")
}
