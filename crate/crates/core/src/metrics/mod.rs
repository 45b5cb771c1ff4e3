//! Dice / Jaccard scoring of binary masks and per-split reports.

mod report;

pub use report::{evaluate_split, export_report, Aggregate, EvalReport, SampleScore, Segmenter};

use crate::error::{Error, Result};
use crate::grid::ImageGrid;

/// Maps values `>= threshold` to foreground (`+1`), the rest to `-1`.
pub fn binarize(output: &ImageGrid, threshold: f32) -> ImageGrid {
    output.map(|v| if v >= threshold { 1.0 } else { -1.0 })
}

/// Foreground counts `(|P ∩ G|, |P|, |G|)` with foreground meaning `> 0`.
pub fn overlap_counts(pred: &ImageGrid, gt: &ImageGrid) -> Result<(usize, usize, usize)> {
    if pred.shape() != gt.shape() {
        return Err(Error::shape(format!(
            "cannot compare masks {:?} and {:?}",
            pred.shape(),
            gt.shape()
        )));
    }
    let mut inter = 0;
    let mut p = 0;
    let mut g = 0;
    for (&a, &b) in pred.values().iter().zip(gt.values()) {
        let (a, b) = (a > 0.0, b > 0.0);
        p += usize::from(a);
        g += usize::from(b);
        inter += usize::from(a && b);
    }
    Ok((inter, p, g))
}

/// `2|P ∩ G| / (|P| + |G|)`; two empty masks score 1.
pub fn dice(pred: &ImageGrid, gt: &ImageGrid) -> Result<f64> {
    let (i, p, g) = overlap_counts(pred, gt)?;
    Ok(if p + g == 0 {
        1.0
    } else {
        2.0 * i as f64 / (p + g) as f64
    })
}

/// `|P ∩ G| / |P ∪ G|`; two empty masks score 1.
pub fn jaccard(pred: &ImageGrid, gt: &ImageGrid) -> Result<f64> {
    let (i, p, g) = overlap_counts(pred, gt)?;
    let union = p + g - i;
    Ok(if union == 0 {
        1.0
    } else {
        i as f64 / union as f64
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mask(size: usize, f: impl Fn(usize, usize) -> bool) -> ImageGrid {
        ImageGrid::from_fn(size, size, |r, c| if f(r, c) { 1.0 } else { -1.0 })
    }

    #[test]
    fn binarize_conventions() {
        let zeros = ImageGrid::filled(1, 3, 3, 0.0);
        assert!(binarize(&zeros, 0.0).values().iter().all(|&v| v == 1.0));
        let x = ImageGrid::from_fn(3, 3, |r, c| (r as f32 - c as f32) / 2.0);
        assert!(binarize(&x, 1.0 + 1e-3).values().iter().all(|&v| v == -1.0));
        let once = binarize(&x, 0.1);
        assert_eq!(binarize(&once, 0.1), once);
    }

    #[test]
    fn closed_form_examples() {
        let full = mask(4, |_, _| true);
        let left = mask(4, |_, c| c < 2);
        let right = mask(4, |_, c| c >= 2);
        assert_eq!(dice(&full, &full).unwrap(), 1.0);
        assert_eq!(dice(&left, &right).unwrap(), 0.0);
        assert!((dice(&left, &full).unwrap() - 2.0 * 8.0 / 24.0).abs() < 1e-15);
        assert_eq!(jaccard(&full, &full).unwrap(), 1.0);
        assert_eq!(jaccard(&left, &full).unwrap(), 0.5);
        let empty = mask(4, |_, _| false);
        assert_eq!(dice(&empty, &empty).unwrap(), 1.0);
        assert_eq!(jaccard(&empty, &empty).unwrap(), 1.0);
        assert!(dice(&full, &mask(3, |_, _| true)).is_err());
        assert!(jaccard(&full, &mask(3, |_, _| true)).is_err());
    }

    proptest! {
        #[test]
        fn symmetric_bounded_and_related(a in proptest::collection::vec(any::<bool>(), 25),
                                         b in proptest::collection::vec(any::<bool>(), 25)) {
            let m = |v: &Vec<bool>| ImageGrid::new(1, 5, 5, v.iter().map(|&x| if x { 1.0 } else { -1.0 }).collect()).unwrap();
            let (p, g) = (m(&a), m(&b));
            let d = dice(&p, &g).unwrap();
            let j = jaccard(&p, &g).unwrap();
            prop_assert_eq!(d, dice(&g, &p).unwrap());
            prop_assert_eq!(j, jaccard(&g, &p).unwrap());
            prop_assert!((0.0..=1.0).contains(&d) && (0.0..=1.0).contains(&j));
            prop_assert!(j <= d);
            prop_assert!((j - d / (2.0 - d)).abs() <= 1e-12);
        }
    }
}
