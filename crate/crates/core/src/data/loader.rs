use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use image::{GrayImage, Luma};
use serde::{Deserialize, Serialize};

use super::SamplePair;
use crate::error::{Error, Result};
use crate::grid::ImageGrid;

const MASK_SUFFIX: &str = "_mask";

/// One `(image, mask, id)` line of a dataset manifest. Paths are relative to
/// the dataset root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub image: PathBuf,
    pub mask: PathBuf,
    pub id: String,
}

/// Reads an 8-bit grayscale PNG into `[-1, 1]`.
pub(crate) fn read_gray(path: &Path) -> Result<ImageGrid> {
    let img = image::open(path)
        .map_err(|source| match source {
            image::ImageError::IoError(e) => Error::io(path, e),
            source => Error::Image {
                path: path.to_path_buf(),
                source,
            },
        })?
        .into_luma8();
    let (w, h) = img.dimensions();
    let values = img.pixels().map(|p| p.0[0] as f32 / 127.5 - 1.0).collect();
    ImageGrid::new(1, h as usize, w as usize, values)
}

/// Writes the first channel of a `[-1, 1]` grid as an 8-bit grayscale PNG.
pub(crate) fn write_gray(path: &Path, grid: &ImageGrid) -> Result<()> {
    let img = to_gray_image(grid);
    img.save(path).map_err(|source| match source {
        image::ImageError::IoError(e) => Error::io(path, e),
        source => Error::Image {
            path: path.to_path_buf(),
            source,
        },
    })
}

pub(crate) fn to_gray_image(grid: &ImageGrid) -> GrayImage {
    GrayImage::from_fn(grid.width() as u32, grid.height() as u32, |x, y| {
        let v = grid.get(0, y as usize, x as usize);
        Luma([((v.clamp(-1.0, 1.0) + 1.0) * 127.5).round() as u8])
    })
}

fn load_pair(id: String, image: &Path, mask: &Path) -> Result<SamplePair> {
    let image = read_gray(image)?;
    let mask = super::binarize_mask(&read_gray(mask)?);
    SamplePair::new(id, image, mask)
}

/// Loads every image/mask pair under `root`, ordered by id.
///
/// Without a manifest, each `<stem>.png` must have a sibling
/// `<stem>_mask.png`; the stem becomes the sample id.
pub fn load_dataset(root: &Path, manifest: Option<&Path>) -> Result<Vec<SamplePair>> {
    let mut entries: Vec<ManifestEntry> = match manifest {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str(&text)?
        }
        None => scan(root)?,
    };
    entries.sort_by(|a, b| a.id.cmp(&b.id));
    entries
        .into_iter()
        .map(|e| load_pair(e.id, &root.join(&e.image), &root.join(&e.mask)))
        .collect()
}

fn scan(root: &Path) -> Result<Vec<ManifestEntry>> {
    let mut stems = BTreeMap::new();
    let dir = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    for entry in dir {
        let path = entry.map_err(|e| Error::io(root, e))?.path();
        let is_png = path
            .extension()
            .is_some_and(|ext| ext.eq_ignore_ascii_case("png"));
        if !is_png {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        if stem.ends_with(MASK_SUFFIX) {
            continue;
        }
        stems.insert(stem.to_string(), path.clone());
    }
    stems
        .into_iter()
        .map(|(stem, image)| {
            let mask = root.join(format!("{stem}{MASK_SUFFIX}.png"));
            if !mask.is_file() {
                return Err(Error::MissingMask { stem });
            }
            Ok(ManifestEntry {
                image: image.strip_prefix(root).unwrap_or(&image).to_path_buf(),
                mask: PathBuf::from(format!("{stem}{MASK_SUFFIX}.png")),
                id: stem,
            })
        })
        .collect()
}

/// Writes pairs as `<id>.png` / `<id>_mask.png` plus `manifest.json`.
pub fn write_dataset(root: &Path, samples: &[SamplePair]) -> Result<Vec<ManifestEntry>> {
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let mut manifest = Vec::with_capacity(samples.len());
    for s in samples {
        let image = PathBuf::from(format!("{}.png", s.id));
        let mask = PathBuf::from(format!("{}{MASK_SUFFIX}.png", s.id));
        write_gray(&root.join(&image), &s.image)?;
        write_gray(&root.join(&mask), &s.mask)?;
        manifest.push(ManifestEntry {
            image,
            mask,
            id: s.id.clone(),
        });
    }
    let path = root.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
