//! Equal-width histogram binning of real-valued features.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

pub const DEFAULT_BIN_CAP: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureBins {
    pub count: usize,
    pub lo: f64,
    pub hi: f64,
}

impl FeatureBins {
    pub fn new(count: usize, lo: f64, hi: f64) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidConfig("bin count must be at least 1".into()));
        }
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(Error::InvalidConfig(format!("invalid bin range [{lo}, {hi}]")));
        }
        Ok(FeatureBins { count, lo, hi })
    }

    /// Bin index of `value`; values outside `[lo, hi]` land in the edge bins.
    pub fn assign(&self, value: f64) -> usize {
        if self.hi <= self.lo {
            return 0;
        }
        let scaled = self.count as f64 * (value - self.lo) / (self.hi - self.lo);
        if scaled <= 0.0 {
            0
        } else {
            (scaled.floor() as usize).min(self.count - 1)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinningSchema {
    features: Vec<FeatureBins>,
}

#[derive(Clone, Debug)]
pub struct BinningOptions {
    /// Per-feature bin counts that bypass the square-root rule.
    pub overrides: BTreeMap<usize, usize>,
    pub cap: usize,
}

impl Default for BinningOptions {
    fn default() -> Self {
        BinningOptions {
            overrides: BTreeMap::new(),
            cap: DEFAULT_BIN_CAP,
        }
    }
}

impl BinningSchema {
    pub fn new(features: Vec<FeatureBins>) -> Self {
        BinningSchema { features }
    }

    /// Infers bin counts and ranges from the data.
    ///
    /// For each feature with `n` distinct values the bin count is `round(sqrt(n))`,
    /// raised to 2 when `n >= 2` and clamped to `options.cap`. The range is the
    /// observed `[min, max]`.
    pub fn infer(d: &Dataset, options: &BinningOptions) -> Result<Self> {
        if d.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if options.cap == 0 {
            return Err(Error::InvalidConfig("bin cap must be at least 1".into()));
        }
        let f = d.feature_count();
        if let Some((&feature, _)) = options.overrides.iter().find(|(&i, _)| i >= f) {
            return Err(Error::FeatureOutOfRange { index: feature, count: f });
        }
        let mut features = Vec::with_capacity(f);
        let mut column: Vec<f64> = Vec::with_capacity(d.len());
        for i in 0..f {
            column.clear();
            column.extend(d.examples().iter().map(|e| e.features[i]));
            column.sort_by(f64::total_cmp);
            let lo = column[0];
            let hi = column[column.len() - 1];
            column.dedup();
            let distinct = column.len();
            let count = match options.overrides.get(&i) {
                Some(&m) => m,
                None => sqrt_rule(distinct, options.cap),
            };
            features.push(FeatureBins::new(count, lo, hi)?);
        }
        Ok(BinningSchema { features })
    }

    pub fn feature_count(&self) -> usize {
        self.features.len()
    }

    pub fn features(&self) -> &[FeatureBins] {
        &self.features
    }

    pub fn bin_count(&self, feature: usize) -> usize {
        self.features[feature].count
    }

    pub fn bin_assign(&self, feature: usize, value: f64) -> Result<usize> {
        let bins = self.features.get(feature).ok_or(Error::FeatureOutOfRange {
            index: feature,
            count: self.features.len(),
        })?;
        if !value.is_finite() {
            return Err(Error::NonFinite { feature, value });
        }
        Ok(bins.assign(value))
    }

    /// Bins a whole feature vector.
    pub fn bin_vector(&self, values: &[f64]) -> Result<Vec<usize>> {
        if values.len() != self.features.len() {
            return Err(Error::FeatureCountMismatch {
                expected: self.features.len(),
                found: values.len(),
            });
        }
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| self.bin_assign(i, v))
            .collect()
    }
}

fn sqrt_rule(distinct: usize, cap: usize) -> usize {
    let m = (distinct as f64).sqrt().round() as usize;
    let floor = if distinct >= 2 { 2 } else { 1 };
    m.max(floor).min(cap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ClassSet, Example};
    use proptest::prelude::*;

    fn dataset(columns: &[Vec<f64>]) -> Dataset {
        let n = columns[0].len();
        let examples = (0..n)
            .map(|r| Example {
                features: columns.iter().map(|c| c[r]).collect(),
                label: 0,
                source_index: r,
            })
            .collect();
        Dataset::new(columns.len(), ClassSet::new(vec!["a".into()]).unwrap(), examples).unwrap()
    }

    #[test]
    fn xor_feature_gets_two_bins() {
        // distinct {0, 1}: round(sqrt 2) = 1, floored to 2
        let d = dataset(&[vec![0.0, 0.0, 1.0, 1.0], vec![0.0, 1.0, 0.0, 1.0]]);
        let s = BinningSchema::infer(&d, &BinningOptions::default()).unwrap();
        assert_eq!(s.bin_count(0), 2);
        assert_eq!(s.bin_assign(0, 0.0).unwrap(), 0);
        assert_eq!(s.bin_assign(0, 1.0).unwrap(), 1);
    }

    #[test]
    fn hundred_distinct_values_give_ten_bins() {
        let d = dataset(&[(0..100).map(f64::from).collect()]);
        let s = BinningSchema::infer(&d, &BinningOptions::default()).unwrap();
        assert_eq!(s.bin_count(0), 10);
        assert_eq!(s.features()[0].lo, 0.0);
        assert_eq!(s.features()[0].hi, 99.0);
    }

    #[test]
    fn cap_and_override() {
        let col: Vec<f64> = (0..10_000).map(f64::from).collect();
        let d = dataset(&[col.clone(), col.clone(), col.clone(), col.clone()]);
        let mut options = BinningOptions::default();
        options.overrides.insert(3, 8);
        let s = BinningSchema::infer(&d, &options).unwrap();
        assert_eq!(s.bin_count(0), DEFAULT_BIN_CAP);
        assert_eq!(s.bin_count(3), 8);

        options.overrides.insert(4, 8);
        assert!(BinningSchema::infer(&d, &options).is_err());
    }

    #[test]
    fn constant_feature() {
        let d = dataset(&[vec![3.0; 5]]);
        let s = BinningSchema::infer(&d, &BinningOptions::default()).unwrap();
        assert_eq!(s.features()[0], FeatureBins { count: 1, lo: 3.0, hi: 3.0 });
        assert_eq!(s.bin_assign(0, -100.0).unwrap(), 0);
        assert_eq!(s.bin_assign(0, 100.0).unwrap(), 0);
    }

    #[test]
    fn equal_width_assignment() {
        let s = BinningSchema::new(vec![FeatureBins::new(5, 0.0, 10.0).unwrap()]);
        assert_eq!(s.bin_assign(0, 4.2).unwrap(), 2);
        assert_eq!(s.bin_assign(0, 10.0).unwrap(), 4);
        assert_eq!(s.bin_assign(0, 0.0).unwrap(), 0);
        assert_eq!(s.bin_assign(0, -1.0).unwrap(), 0);
        assert_eq!(s.bin_assign(0, 11.0).unwrap(), 4);
        assert!(matches!(s.bin_assign(0, f64::NAN), Err(Error::NonFinite { .. })));
        assert!(matches!(s.bin_assign(1, 1.0), Err(Error::FeatureOutOfRange { .. })));
    }

    proptest! {
        #[test]
        fn assignment_is_monotone_and_in_range(
            count in 1usize..40,
            lo in -1e6f64..1e6,
            width in 0f64..1e6,
            a in -1e7f64..1e7,
            b in -1e7f64..1e7,
        ) {
            let bins = FeatureBins::new(count, lo, lo + width).unwrap();
            let (small, large) = if a <= b { (a, b) } else { (b, a) };
            let (bs, bl) = (bins.assign(small), bins.assign(large));
            prop_assert!(bs <= bl);
            prop_assert!(bl < count);
        }

        #[test]
        fn inference_is_deterministic(values in proptest::collection::vec(-100f64..100.0, 1..60)) {
            let d = dataset(&[values.clone(), values.iter().map(|v| v * 2.0).collect()]);
            let a = BinningSchema::infer(&d, &BinningOptions::default()).unwrap();
            let b = BinningSchema::infer(&d, &BinningOptions::default()).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
