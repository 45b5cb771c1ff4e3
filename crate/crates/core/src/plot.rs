//! Contact sheets and the training-curve figure.

use std::fs;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::grid::ImageGrid;
use crate::losses::LossRow;

/// Tiles the first channel of each grid row-major into one image,
/// separated by `pad` pixels of mid-grey.
pub fn contact_sheet(tiles: &[ImageGrid], cols: usize, pad: usize) -> Result<ImageGrid> {
    let first = tiles
        .first()
        .ok_or_else(|| Error::shape("contact sheet needs at least one tile"))?;
    if cols == 0 {
        return Err(Error::config("contact sheet needs at least one column"));
    }
    let (th, tw) = (first.height(), first.width());
    if let Some(bad) = tiles.iter().find(|t| t.height() != th || t.width() != tw) {
        return Err(Error::shape(format!(
            "contact sheet tiles must share a size: {th}x{tw} vs {}x{}",
            bad.height(),
            bad.width()
        )));
    }
    let cols = cols.min(tiles.len());
    let rows = tiles.len().div_ceil(cols);
    let h = rows * th + (rows - 1) * pad;
    let w = cols * tw + (cols - 1) * pad;
    let mut sheet = ImageGrid::filled(1, h, w, 0.0);
    for (i, t) in tiles.iter().enumerate() {
        let (top, left) = ((i / cols) * (th + pad), (i % cols) * (tw + pad));
        for r in 0..th {
            for c in 0..tw {
                sheet.set(0, top + r, left + c, t.get(0, r, c));
            }
        }
    }
    Ok(sheet)
}

/// Writes a single-channel grid in `[-1, 1]` as an 8-bit PNG.
pub fn save_grid_png(grid: &ImageGrid, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    crate::data::write_gray(path, grid)
}

/// One plotted series.
pub struct Curve {
    pub label: &'static str,
    pub colour: [u8; 3],
    pub values: Vec<f64>,
}

/// The four curves drawn by [`plot_losses`].
pub fn loss_curves(history: &[LossRow]) -> Vec<Curve> {
    let series = |f: fn(&LossRow) -> f64| history.iter().map(f).collect();
    vec![
        Curve {
            label: "generator L1 (l1)",
            colour: [31, 119, 180],
            values: series(|r| r.l1),
        },
        Curve {
            label: "generator adversarial (g_adv_image + g_adv_noise)",
            colour: [255, 127, 14],
            values: series(|r| r.g_adv_image + r.g_adv_noise),
        },
        Curve {
            label: "discriminator, image cycle real+fake (d_image)",
            colour: [44, 160, 44],
            values: series(|r| r.d_image),
        },
        Curve {
            label: "discriminator, noise cycle real+fake (d_noise)",
            colour: [214, 39, 40],
            values: series(|r| r.d_noise),
        },
    ]
}

fn smooth(values: &[f64], window: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (i, v) in values.iter().enumerate() {
        sum += v;
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

fn draw_line(img: &mut RgbImage, (x0, y0): (i64, i64), (x1, y1): (i64, i64), colour: Rgb<u8>) {
    let steps = (x1 - x0).abs().max((y1 - y0).abs()).max(1);
    for s in 0..=steps {
        let x = x0 + (x1 - x0) * s / steps;
        let y = y0 + (y1 - y0) * s / steps;
        if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
            img.put_pixel(x as u32, y as u32, colour);
        }
    }
}

/// Draws the loss history (moving average over ~1% of the run) on shared
/// axes and writes a legend file next to the PNG. Returns the legend path.
pub fn plot_losses(history: &[LossRow], path: &Path) -> Result<PathBuf> {
    let (w, h, margin) = (800u32, 400u32, 20i64);
    let mut img = RgbImage::from_pixel(w, h, Rgb([255, 255, 255]));
    let curves = loss_curves(history);
    let window = (history.len() / 100).max(1);
    let smoothed: Vec<Vec<f64>> = curves.iter().map(|c| smooth(&c.values, window)).collect();
    let top = smoothed
        .iter()
        .flatten()
        .copied()
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let (pw, ph) = (w as i64 - 2 * margin, h as i64 - 2 * margin);
    draw_line(&mut img, (margin, margin), (margin, margin + ph), Rgb([0, 0, 0]));
    draw_line(&mut img, (margin, margin + ph), (margin + pw, margin + ph), Rgb([0, 0, 0]));
    let n = history.len();
    for (curve, ys) in curves.iter().zip(&smoothed) {
        let point = |i: usize| {
            let x = margin + if n > 1 { pw * i as i64 / (n as i64 - 1) } else { 0 };
            let y = margin + ph - (ys[i] / top * ph as f64).round() as i64;
            (x, y)
        };
        for i in 1..n {
            draw_line(&mut img, point(i - 1), point(i), Rgb(curve.colour));
        }
    }
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    img.save(path).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut legend = format!(
        "x: iteration (0..{n}), y: loss (0..{top:.4}), moving average over {window} iterations\n"
    );
    for c in &curves {
        let [r, g, b] = c.colour;
        legend.push_str(&format!("#{r:02x}{g:02x}{b:02x}  {}\n", c.label));
    }
    let legend_path = path.with_extension("legend.txt");
    fs::write(&legend_path, legend).map_err(|e| Error::io(&legend_path, e))?;
    Ok(legend_path)
}
