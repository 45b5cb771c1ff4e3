use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{SamplePair, Split};
use crate::error::{Error, Result};
use crate::seed;

/// Train/validation/test fractions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.7,
            val: 0.1,
            test: 0.2,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let all = [self.train, self.val, self.test];
        if all.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::config(format!("split ratios must be positive: {all:?}")));
        }
        if (all.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("split ratios must sum to 1: {all:?}")));
        }
        Ok(())
    }
}

// Slack absorbs representation error such as 110 * (80/110) = 79.999...
const FLOOR_SLACK: f64 = 1e-9;

/// Split sizes for `n` samples: each part gets `floor(n * ratio)` and the
/// leftover samples are dealt one at a time to train, then val, then test.
pub fn split_sizes(n: usize, ratios: &SplitRatios) -> (usize, usize, usize) {
    let floor = |r: f64| ((n as f64) * r + FLOOR_SLACK).floor() as usize;
    let mut sizes = [floor(ratios.train), floor(ratios.val), floor(ratios.test)];
    let mut rest = n - sizes.iter().sum::<usize>();
    let mut k = 0;
    while rest > 0 {
        sizes[k % 3] += 1;
        rest -= 1;
        k += 1;
    }
    (sizes[0], sizes[1], sizes[2])
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Splits {
    pub train: Vec<SamplePair>,
    pub val: Vec<SamplePair>,
    pub test: Vec<SamplePair>,
}

impl Splits {
    pub fn get(&self, split: Split) -> &[SamplePair] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    pub fn ids(&self) -> SplitFile {
        let ids = |v: &[SamplePair]| v.iter().map(|s| s.id.clone()).collect();
        SplitFile {
            train: ids(&self.train),
            val: ids(&self.val),
            test: ids(&self.test),
        }
    }
}

/// Persisted form of a partition, for exact reruns.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitFile {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl SplitFile {
    /// Re-partitions `data` by id. Unknown ids are an error.
    pub fn apply(&self, data: &[SamplePair]) -> Result<Splits> {
        let lookup = |ids: &[String], split: Split| -> Result<Vec<SamplePair>> {
            ids.iter()
                .map(|id| {
                    data.iter()
                        .find(|s| &s.id == id)
                        .map(|s| SamplePair {
                            split,
                            ..s.clone()
                        })
                        .ok_or_else(|| Error::config(format!("split lists unknown id `{id}`")))
                })
                .collect()
        };
        Ok(Splits {
            train: lookup(&self.train, Split::Train)?,
            val: lookup(&self.val, Split::Val)?,
            test: lookup(&self.test, Split::Test)?,
        })
    }
}

/// Shuffles `data` with `seed` and partitions it by [`split_sizes`].
pub fn split_dataset(data: &[SamplePair], ratios: &SplitRatios, seed: u64) -> Result<Splits> {
    ratios.validate()?;
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut seed::derived_rng(seed, &[seed::TAG_SHUFFLE]));
    let (n_train, n_val, _) = split_sizes(data.len(), ratios);
    let tagged = |idx: &[usize], split: Split| -> Vec<SamplePair> {
        idx.iter()
            .map(|&i| SamplePair {
                split,
                ..data[i].clone()
            })
            .collect()
    };
    Ok(Splits {
        train: tagged(&order[..n_train], Split::Train),
        val: tagged(&order[n_train..n_train + n_val], Split::Val),
        test: tagged(&order[n_train + n_val..], Split::Test),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ImageGrid;
    use proptest::prelude::*;

    fn dataset(n: usize) -> Vec<SamplePair> {
        (0..n)
            .map(|i| {
                let g = ImageGrid::filled(1, 2, 2, 0.0);
                SamplePair::new(format!("s{i:04}"), g.clone(), g).unwrap()
            })
            .collect()
    }

    #[test]
    fn paper_proportions_on_ten() {
        assert_eq!(split_sizes(10, &SplitRatios::default()), (7, 1, 2));
        assert_eq!(split_sizes(1, &SplitRatios::default()), (1, 0, 0));
        let desk = SplitRatios {
            train: 80.0 / 110.0,
            val: 10.0 / 110.0,
            test: 20.0 / 110.0,
        };
        assert_eq!(split_sizes(110, &desk), (80, 10, 20));
    }

    #[test]
    fn same_seed_same_partition() {
        let d = dataset(30);
        let a = split_dataset(&d, &SplitRatios::default(), 3).unwrap();
        let b = split_dataset(&d, &SplitRatios::default(), 3).unwrap();
        assert_eq!(a, b);
        assert!(a.test.iter().all(|s| s.split == Split::Test));
        let c = split_dataset(&d, &SplitRatios::default(), 4).unwrap();
        assert_ne!(a.ids(), c.ids());
    }

    #[test]
    fn invalid_ratios_rejected() {
        let bad = SplitRatios {
            train: 0.7,
            val: 0.1,
            test: 0.1,
        };
        assert!(split_dataset(&dataset(3), &bad, 0).is_err());
    }

    #[test]
    fn split_file_round_trip() {
        let d = dataset(12);
        let s = split_dataset(&d, &SplitRatios::default(), 1).unwrap();
        assert_eq!(s.ids().apply(&d).unwrap(), s);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn partition_is_exact(n in 1usize..=1000, seed in any::<u64>()) {
            let r = SplitRatios::default();
            let d = dataset(n);
            let s = split_dataset(&d, &r, seed).unwrap();
            // independent size rule: floors, then round-robin remainder
            let floors = [(n * 7) / 10, n / 10, (n * 2) / 10];
            let rem = n - floors.iter().sum::<usize>();
            let expect = [
                floors[0] + usize::from(rem >= 1),
                floors[1] + usize::from(rem >= 2),
                floors[2],
            ];
            prop_assert_eq!([s.train.len(), s.val.len(), s.test.len()], expect);
            let mut ids: Vec<_> = s.train.iter().chain(&s.val).chain(&s.test).map(|x| x.id.clone()).collect();
            ids.sort();
            let mut all: Vec<_> = d.iter().map(|x| x.id.clone()).collect();
            all.sort();
            prop_assert_eq!(ids, all);
        }
    }
}
