use std::collections::VecDeque;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::grid::ImageGrid;
use crate::metrics::Aggregate;

/// Second-moment ellipse of a foreground region.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentEllipse {
    pub cx: f64,
    pub cy: f64,
    /// Covariance `[xx, xy, yy]` of a uniform fill of the fitted ellipse.
    pub cov: [f64; 3],
}

impl MomentEllipse {
    /// Fits to the pixel squares with value `> 0`; `None` when empty.
    pub fn fit(mask: &ImageGrid) -> Option<Self> {
        let (mut n, mut sx, mut sy) = (0.0, 0.0, 0.0);
        for r in 0..mask.height() {
            for c in 0..mask.width() {
                if mask.get(0, r, c) > 0.0 {
                    n += 1.0;
                    sx += c as f64 + 0.5;
                    sy += r as f64 + 0.5;
                }
            }
        }
        if n == 0.0 {
            return None;
        }
        let (cx, cy) = (sx / n, sy / n);
        let (mut xx, mut xy, mut yy) = (0.0, 0.0, 0.0);
        for r in 0..mask.height() {
            for c in 0..mask.width() {
                if mask.get(0, r, c) > 0.0 {
                    let (dx, dy) = (c as f64 + 0.5 - cx, r as f64 + 0.5 - cy);
                    xx += dx * dx;
                    xy += dx * dy;
                    yy += dy * dy;
                }
            }
        }
        // Each pixel is a unit square, not a point: add its own variance.
        let unit = 1.0 / 12.0;
        Some(Self {
            cx,
            cy,
            cov: [xx / n + unit, xy / n, yy / n + unit],
        })
    }

    /// Semi-axes `(a, b)`, `a >= b`. A uniform ellipse has variance
    /// `a^2 / 4` along its major axis.
    pub fn semi_axes(&self) -> (f64, f64) {
        let [xx, xy, yy] = self.cov;
        let mid = (xx + yy) / 2.0;
        let rad = (((xx - yy) / 2.0).powi(2) + xy * xy).sqrt();
        (2.0 * (mid + rad).sqrt(), 2.0 * (mid - rad).max(0.0).sqrt())
    }

    pub fn area(&self) -> f64 {
        let (a, b) = self.semi_axes();
        PI * a * b
    }

    /// Whether the point `(x, y)` lies inside the ellipse.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let [xx, xy, yy] = self.cov;
        let det = xx * yy - xy * xy;
        let (dx, dy) = (x - self.cx, y - self.cy);
        (yy * dx * dx - 2.0 * xy * dx * dy + xx * dy * dy) / det <= 4.0
    }

    /// Whether the ellipse pokes out of a `height x width` frame.
    pub fn leaves_frame(&self, height: usize, width: usize) -> bool {
        let (ex, ey) = (2.0 * self.cov[0].sqrt(), 2.0 * self.cov[2].sqrt());
        self.cx - ex < 0.0
            || self.cy - ey < 0.0
            || self.cx + ex > width as f64
            || self.cy + ey > height as f64
    }
}

/// Symmetric difference between a mask and its moment ellipse, over the
/// foreground area. Ellipse area falling outside the frame counts as
/// mismatch. Empty and completely filled masks have no shape to fit and
/// score 1.
pub fn ellipse_fit_residual(mask: &ImageGrid) -> f64 {
    let total = mask.height() * mask.width();
    let fg = mask.foreground_count();
    if fg == 0 || fg == total {
        return 1.0;
    }
    let e = MomentEllipse::fit(mask).expect("mask has foreground");
    let (mut diff, mut inside) = (0usize, 0usize);
    for r in 0..mask.height() {
        for c in 0..mask.width() {
            let in_e = e.contains(c as f64 + 0.5, r as f64 + 0.5);
            inside += usize::from(in_e);
            diff += usize::from(in_e != (mask.get(0, r, c) > 0.0));
        }
    }
    let outside = if e.leaves_frame(mask.height(), mask.width()) {
        (e.area() - inside as f64).max(0.0)
    } else {
        0.0
    };
    (diff as f64 + outside) / fg as f64
}

/// Number of 4-connected foreground components.
pub fn connected_components(mask: &ImageGrid) -> usize {
    let (h, w) = (mask.height(), mask.width());
    let mut seen = vec![false; h * w];
    let mut count = 0;
    let mut queue = VecDeque::new();
    for start in 0..h * w {
        if seen[start] || mask.get(0, start / w, start % w) <= 0.0 {
            continue;
        }
        count += 1;
        seen[start] = true;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let (r, c) = (i / w, i % w);
            let mut visit = |rr: usize, cc: usize| {
                let j = rr * w + cc;
                if !seen[j] && mask.get(0, rr, cc) > 0.0 {
                    seen[j] = true;
                    queue.push_back(j);
                }
            };
            if r > 0 {
                visit(r - 1, c);
            }
            if r + 1 < h {
                visit(r + 1, c);
            }
            if c > 0 {
                visit(r, c - 1);
            }
            if c + 1 < w {
                visit(r, c + 1);
            }
        }
    }
    count
}

/// How ellipse-like a set of generated masks is.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionFitReport {
    pub samples: usize,
    pub residuals: Vec<f64>,
    pub residual: Aggregate,
    /// Foreground pixels over frame pixels.
    pub foreground_fraction: Aggregate,
    pub components: Aggregate,
    /// Share of empty or completely filled masks.
    pub degenerate_fraction: f64,
}

impl DistributionFitReport {
    /// Scores binary masks (foreground `> 0`).
    pub fn from_masks(masks: &[ImageGrid]) -> Self {
        let residuals: Vec<f64> = masks.iter().map(ellipse_fit_residual).collect();
        let fractions: Vec<f64> = masks
            .iter()
            .map(|m| m.foreground_count() as f64 / (m.height() * m.width()) as f64)
            .collect();
        let components: Vec<f64> = masks.iter().map(|m| connected_components(m) as f64).collect();
        let degenerate = fractions.iter().filter(|&&f| f == 0.0 || f == 1.0).count();
        Self {
            samples: masks.len(),
            residual: Aggregate::of(&residuals),
            residuals,
            foreground_fraction: Aggregate::of(&fractions),
            components: Aggregate::of(&components),
            degenerate_fraction: if masks.is_empty() {
                0.0
            } else {
                degenerate as f64 / masks.len() as f64
            },
        }
    }
}
