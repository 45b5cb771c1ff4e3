use candle_core::{DType, Device, Tensor, Var};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::{bilinear_matrix, Interpolation};
use crate::error::Result;

/// Kaiming-style normal initialisation scaled by `gain / sqrt(fan_in)`.
pub(crate) fn normal_var(
    rng: &mut impl Rng,
    shape: &[usize],
    fan_in: usize,
    gain: f64,
    dtype: DType,
    device: &Device,
) -> Result<Var> {
    let std = gain / (fan_in as f64).sqrt();
    let n: usize = shape.iter().product();
    let values: Vec<f64> = (0..n)
        .map(|_| std * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let t = Tensor::from_vec(values, shape, device)?.to_dtype(dtype)?;
    Ok(Var::from_tensor(&t)?)
}

pub(crate) fn zeros_var(shape: &[usize], dtype: DType, device: &Device) -> Result<Var> {
    Ok(Var::zeros(shape, dtype, device)?)
}

pub(crate) const LEAKY_SLOPE: f64 = 0.2;

pub(crate) fn leaky_gain() -> f64 {
    (2.0 / (1.0 + LEAKY_SLOPE * LEAKY_SLOPE)).sqrt()
}

pub(crate) fn relu_gain() -> f64 {
    std::f64::consts::SQRT_2
}

pub(crate) fn leaky_relu(x: &Tensor) -> Result<Tensor> {
    Ok(x.maximum(&(x * LEAKY_SLOPE)?)?)
}

/// Resizes `(N, C, H, W)` to `size x size` with the same weights as
/// [`crate::data::resize`]. Built from two matrix products so it is
/// differentiable.
pub(crate) fn resize_t(x: &Tensor, size: usize, mode: Interpolation) -> Result<Tensor> {
    let (n, c, h, w) = x.dims4()?;
    if (h, w) == (size, size) {
        return Ok(x.clone());
    }
    match mode {
        Interpolation::Nearest => Ok(x.upsample_nearest2d(size, size)?),
        Interpolation::Bilinear => {
            let rows = Tensor::from_vec(bilinear_matrix(h, size), (size, h), x.device())?
                .to_dtype(x.dtype())?;
            let cols = Tensor::from_vec(bilinear_matrix(w, size), (size, w), x.device())?
                .to_dtype(x.dtype())?
                .t()?;
            let flat = x.reshape((n * c, h, w))?;
            let y = rows.broadcast_matmul(&flat)?.broadcast_matmul(&cols)?;
            Ok(y.reshape((n, c, size, size))?)
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Conv2d {
    pub weight: Var,
    pub bias: Var,
    stride: usize,
    padding: usize,
}

pub(crate) struct ConvShape {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl Conv2d {
    pub fn new(
        rng: &mut impl Rng,
        shape: ConvShape,
        gain: f64,
        dtype: DType,
        device: &Device,
    ) -> Result<Self> {
        let ConvShape {
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
        } = shape;
        let weight = normal_var(
            rng,
            &[out_channels, in_channels, kernel, kernel],
            in_channels * kernel * kernel,
            gain,
            dtype,
            device,
        )?;
        let bias = zeros_var(&[out_channels], dtype, device)?;
        Ok(Self {
            weight,
            bias,
            stride,
            padding,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let y = x.conv2d(self.weight.as_tensor(), self.padding, self.stride, 1, 1)?;
        let out = self.bias.dim(0)?;
        Ok(y.broadcast_add(&self.bias.as_tensor().reshape((1, out, 1, 1))?)?)
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Linear {
    pub weight: Var,
    pub bias: Var,
}

impl Linear {
    pub fn new(
        rng: &mut impl Rng,
        in_features: usize,
        out_features: usize,
        gain: f64,
        dtype: DType,
        device: &Device,
    ) -> Result<Self> {
        Ok(Self {
            weight: normal_var(rng, &[out_features, in_features], in_features, gain, dtype, device)?,
            bias: zeros_var(&[out_features], dtype, device)?,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let y = x.matmul(&self.weight.as_tensor().t()?)?;
        Ok(y.broadcast_add(self.bias.as_tensor())?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::resize;
    use crate::grid::ImageGrid;

    #[test]
    fn resize_t_matches_grid_resize() {
        let g = ImageGrid::from_fn(4, 4, |r, c| ((r * 7 + c * 3) % 5) as f32 - 2.0);
        let x = g.to_tensor(DType::F32, &Device::Cpu).unwrap();
        for mode in [Interpolation::Nearest, Interpolation::Bilinear] {
            for size in [8, 16] {
                let got = ImageGrid::from_tensor(&resize_t(&x, size, mode).unwrap()).unwrap();
                let want = resize(&g, size, size, mode);
                for (a, b) in got.values().iter().zip(want.values()) {
                    assert!((a - b).abs() < 1e-6, "{mode:?} {size}: {a} vs {b}");
                }
            }
        }
    }
}
