//! Loading, preprocessing, splitting and synthesis of image/mask pairs.

mod loader;
mod noise;
mod preprocess;
mod resize;
mod split;
mod synth;

use serde::{Deserialize, Serialize};

use crate::grid::ImageGrid;

pub use loader::{load_dataset, write_dataset, ManifestEntry};
pub(crate) use loader::write_gray;
pub use noise::{draw_noise_code, sample_noise, NoiseSpec};
pub use preprocess::{preprocess, PreprocessConfig};
pub use resize::{resize, Interpolation};
pub(crate) use resize::bilinear_matrix;
pub use split::{split_dataset, split_sizes, SplitFile, SplitRatios, Splits};
pub use synth::{synthesize_ellipse_dataset, SynthConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

/// One input image with its ground-truth mask.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplePair {
    pub id: String,
    pub image: ImageGrid,
    /// Single channel, `{-1, +1}` once preprocessed.
    pub mask: ImageGrid,
    pub split: Split,
}

impl SamplePair {
    pub fn new(id: impl Into<String>, image: ImageGrid, mask: ImageGrid) -> crate::Result<Self> {
        let id = id.into();
        if !image.same_spatial(&mask) {
            return Err(crate::Error::shape(format!(
                "sample `{id}`: image {:?} vs mask {:?}",
                image.shape(),
                mask.shape()
            )));
        }
        if mask.channels() != 1 {
            return Err(crate::Error::shape(format!(
                "sample `{id}`: mask has {} channels",
                mask.channels()
            )));
        }
        Ok(Self {
            id,
            image,
            mask,
            split: Split::Train,
        })
    }
}

/// Maps a mask onto `{-1, +1}` at the midpoint of the `[-1, 1]` range.
pub fn binarize_mask(mask: &ImageGrid) -> ImageGrid {
    mask.map(|v| if v >= 0.0 { 1.0 } else { -1.0 })
}
