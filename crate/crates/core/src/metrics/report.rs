use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{binarize, dice, jaccard};
use crate::data::{SamplePair, Split};
use crate::error::{Error, Result};
use crate::grid::ImageGrid;
use crate::model::Generator;

/// Anything that maps an input image to a continuous `[-1, 1]` output.
pub trait Segmenter {
    fn segment(&self, image: &ImageGrid) -> Result<ImageGrid>;
}

impl Segmenter for Generator {
    fn segment(&self, image: &ImageGrid) -> Result<ImageGrid> {
        self.forward_image(image)
    }
}

impl<F> Segmenter for F
where
    F: Fn(&ImageGrid) -> Result<ImageGrid>,
{
    fn segment(&self, image: &ImageGrid) -> Result<ImageGrid> {
        self(image)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleScore {
    pub id: String,
    pub dice: f64,
    pub jaccard: f64,
}

/// Mean and population standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl Aggregate {
    pub fn of(values: &[f64]) -> Self {
        let count = values.len();
        if count == 0 {
            return Self {
                mean: 0.0,
                std: 0.0,
                count,
            };
        }
        let mean = values.iter().sum::<f64>() / count as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / count as f64;
        Self {
            mean,
            std: var.sqrt(),
            count,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub split: Split,
    pub samples: Vec<SampleScore>,
    pub dice: Aggregate,
    pub jaccard: Aggregate,
}

/// Segments every sample, binarizes at `threshold` and scores it against
/// its mask. Dice and Jaccard are averaged per image.
pub fn evaluate_split(
    model: &impl Segmenter,
    samples: &[SamplePair],
    threshold: f32,
    model_tag: &str,
    split: Split,
) -> Result<EvalReport> {
    let scores = samples
        .iter()
        .map(|s| {
            let wrap = |e: Error| Error::Sample {
                id: s.id.clone(),
                source: Box::new(e),
            };
            let pred = binarize(&model.segment(&s.image).map_err(wrap)?, threshold);
            Ok(SampleScore {
                id: s.id.clone(),
                dice: dice(&pred, &s.mask).map_err(wrap)?,
                jaccard: jaccard(&pred, &s.mask).map_err(wrap)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let d: Vec<f64> = scores.iter().map(|s| s.dice).collect();
    let j: Vec<f64> = scores.iter().map(|s| s.jaccard).collect();
    Ok(EvalReport {
        model: model_tag.to_string(),
        split,
        dice: Aggregate::of(&d),
        jaccard: Aggregate::of(&j),
        samples: scores,
    })
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    model: &'a str,
    split: Split,
    count: usize,
    dice_mean: f64,
    dice_std: f64,
    jaccard_mean: f64,
    jaccard_std: f64,
}

#[derive(Serialize)]
struct PerSampleRow<'a> {
    model: &'a str,
    split: Split,
    id: &'a str,
    dice: f64,
    jaccard: f64,
}

/// Files written by [`export_report`].
#[derive(Clone, Debug)]
pub struct ReportFiles {
    pub summary_csv: PathBuf,
    pub per_sample_csv: PathBuf,
    pub table_md: PathBuf,
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

const SUMMARY_HEADER: [&str; 7] = [
    "model",
    "split",
    "count",
    "dice_mean",
    "dice_std",
    "jaccard_mean",
    "jaccard_std",
];

/// Writes `summary.csv`, `per_sample.csv` and `table.md` into `out_dir`.
pub fn export_report(reports: &[EvalReport], out_dir: &Path) -> Result<ReportFiles> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let files = ReportFiles {
        summary_csv: out_dir.join("summary.csv"),
        per_sample_csv: out_dir.join("per_sample.csv"),
        table_md: out_dir.join("table.md"),
    };

    let mut summary = csv_writer(&files.summary_csv)?;
    if reports.is_empty() {
        summary.write_record(SUMMARY_HEADER)?;
    }
    for r in reports {
        summary.serialize(SummaryRow {
            model: &r.model,
            split: r.split,
            count: r.dice.count,
            dice_mean: r.dice.mean,
            dice_std: r.dice.std,
            jaccard_mean: r.jaccard.mean,
            jaccard_std: r.jaccard.std,
        })?;
    }
    summary.flush().map_err(|e| Error::io(&files.summary_csv, e))?;

    let mut per_sample = csv_writer(&files.per_sample_csv)?;
    if reports.iter().all(|r| r.samples.is_empty()) {
        per_sample.write_record(["model", "split", "id", "dice", "jaccard"])?;
    }
    for r in reports {
        for s in &r.samples {
            per_sample.serialize(PerSampleRow {
                model: &r.model,
                split: r.split,
                id: &s.id,
                dice: s.dice,
                jaccard: s.jaccard,
            })?;
        }
    }
    per_sample.flush().map_err(|e| Error::io(&files.per_sample_csv, e))?;

    let mut md = String::from("| Split | Method | Dice score (%) | JC index |\n|---|---|---|---|\n");
    for r in reports {
        md.push_str(&format!(
            "| {:?} | {} | {:.2} ± {:.2} | {:.4} |\n",
            r.split,
            r.model,
            100.0 * r.dice.mean,
            100.0 * r.dice.std,
            r.jaccard.mean
        ));
    }
    fs::write(&files.table_md, md).map_err(|e| Error::io(&files.table_md, e))?;
    Ok(files)
}
