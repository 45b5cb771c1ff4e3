//! Dense single-image storage shared by the data, model and metric code.

use candle_core::{DType, Device, Tensor};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A channel-major (C, H, W) grid of `f32` values.
///
/// Images live in `[-1, 1]`; binarized masks hold exactly `-1` (background)
/// and `+1` (foreground).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageGrid {
    channels: usize,
    height: usize,
    width: usize,
    values: Vec<f32>,
}

impl ImageGrid {
    pub fn new(channels: usize, height: usize, width: usize, values: Vec<f32>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::shape(format!(
                "grid dimensions must be positive, got {channels}x{height}x{width}"
            )));
        }
        if values.len() != channels * height * width {
            return Err(Error::shape(format!(
                "{} values for a {channels}x{height}x{width} grid",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("image grid".into()));
        }
        Ok(Self {
            channels,
            height,
            width,
            values,
        })
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f32) -> Self {
        assert!(channels > 0 && height > 0 && width > 0 && value.is_finite());
        Self {
            channels,
            height,
            width,
            values: vec![value; channels * height * width],
        }
    }

    /// Builds a one-channel grid from a per-pixel function of `(row, col)`.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut values = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                values.push(f(r, c));
            }
        }
        Self::new(1, height, width, values).expect("from_fn produced an invalid grid")
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    pub fn get(&self, channel: usize, row: usize, col: usize) -> f32 {
        self.values[self.index(channel, row, col)]
    }

    pub fn set(&mut self, channel: usize, row: usize, col: usize, value: f32) {
        let i = self.index(channel, row, col);
        self.values[i] = value;
    }

    fn index(&self, channel: usize, row: usize, col: usize) -> usize {
        debug_assert!(channel < self.channels && row < self.height && col < self.width);
        (channel * self.height + row) * self.width + col
    }

    /// One channel as its own grid.
    pub fn channel(&self, channel: usize) -> ImageGrid {
        let plane = self.height * self.width;
        let start = channel * plane;
        Self {
            channels: 1,
            height: self.height,
            width: self.width,
            values: self.values[start..start + plane].to_vec(),
        }
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.values
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn in_range(&self, low: f32, high: f32) -> bool {
        self.values.iter().all(|&v| v >= low && v <= high)
    }

    /// True when every value is exactly `-1` or `+1`.
    pub fn is_two_valued(&self) -> bool {
        self.values.iter().all(|&v| v == -1.0 || v == 1.0)
    }

    pub fn same_spatial(&self, other: &ImageGrid) -> bool {
        self.height == other.height && self.width == other.width
    }

    /// Number of foreground (`> 0`) pixels.
    pub fn foreground_count(&self) -> usize {
        self.values.iter().filter(|&&v| v > 0.0).count()
    }

    /// Copies the grid into a `(1, C, H, W)` tensor.
    pub fn to_tensor(&self, dtype: DType, device: &Device) -> Result<Tensor> {
        let t = Tensor::from_slice(
            &self.values,
            (1, self.channels, self.height, self.width),
            device,
        )?;
        Ok(t.to_dtype(dtype)?)
    }

    /// Reads a `(C, H, W)` or `(1, C, H, W)` tensor back into a grid.
    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let t = match t.rank() {
            4 if t.dim(0)? == 1 => t.squeeze(0)?,
            3 => t.clone(),
            _ => {
                return Err(Error::shape(format!(
                    "expected a single (C,H,W) image tensor, got {:?}",
                    t.dims()
                )))
            }
        };
        let (c, h, w) = t.dims3()?;
        let values = t.to_dtype(DType::F32)?.flatten_all()?.to_vec1::<f32>()?;
        Self::new(c, h, w, values)
    }

    /// Stacks equally-shaped grids into a `(N, C, H, W)` tensor.
    pub fn stack(grids: &[&ImageGrid], dtype: DType, device: &Device) -> Result<Tensor> {
        let first = grids
            .first()
            .ok_or_else(|| Error::shape("cannot stack an empty batch"))?;
        let mut values = Vec::with_capacity(grids.len() * first.values.len());
        for g in grids {
            if g.shape() != first.shape() {
                return Err(Error::shape(format!(
                    "batch mixes {:?} and {:?}",
                    first.shape(),
                    g.shape()
                )));
            }
            values.extend_from_slice(&g.values);
        }
        let t = Tensor::from_vec(
            values,
            (grids.len(), first.channels, first.height, first.width),
            device,
        )?;
        Ok(t.to_dtype(dtype)?)
    }

    /// Splits a `(N, C, H, W)` tensor into `N` grids.
    pub fn unstack(t: &Tensor) -> Result<Vec<Self>> {
        let n = t.dim(0)?;
        (0..n).map(|i| Self::from_tensor(&t.get(i)?)).collect()
    }

    /// Channel concatenation of two grids with equal spatial size.
    pub fn concat_channels(&self, other: &ImageGrid) -> Result<ImageGrid> {
        if !self.same_spatial(other) {
            return Err(Error::shape(format!(
                "cannot concatenate {:?} with {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        ImageGrid::new(
            self.channels + other.channels,
            self.height,
            self.width,
            values,
        )
    }

    /// Crops a `size_h x size_w` window at `(top, left)`.
    pub fn crop(&self, top: usize, left: usize, size_h: usize, size_w: usize) -> Result<ImageGrid> {
        if top + size_h > self.height || left + size_w > self.width {
            return Err(Error::shape(format!(
                "crop {size_h}x{size_w} at ({top},{left}) exceeds {}x{}",
                self.height, self.width
            )));
        }
        let mut values = Vec::with_capacity(self.channels * size_h * size_w);
        for ch in 0..self.channels {
            for r in top..top + size_h {
                let start = self.index(ch, r, left);
                values.extend_from_slice(&self.values[start..start + size_w]);
            }
        }
        ImageGrid::new(self.channels, size_h, size_w, values)
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> ImageGrid {
        let values: Vec<f32> = self.values.iter().map(|&v| f(v)).collect();
        ImageGrid::new(self.channels, self.height, self.width, values)
            .expect("map produced a non-finite value")
    }

    /// Rotates every channel by 90 degrees counter-clockwise.
    pub fn rot90(&self) -> ImageGrid {
        let (c, h, w) = self.shape();
        let mut out = vec![0.0; c * h * w];
        for ch in 0..c {
            for r in 0..h {
                for col in 0..w {
                    // new grid is w x h
                    let nr = w - 1 - col;
                    let nc = r;
                    out[(ch * w + nr) * h + nc] = self.get(ch, r, col);
                }
            }
        }
        ImageGrid::new(c, w, h, out).expect("rotation preserves validity")
    }
}
