//! The difference boosting classifier.
//!
//! Every ordered feature pair `(i, j)`, `i != j`, gets a joint histogram per
//! class over the bin pair `(m_i, m_j)`. Cells start at a count of one, so an
//! empty cell yields a likelihood of exactly `1/K`. The class score of an input
//! is the product over all pairs of `likelihood * weight`, where the weight is a
//! per-cell stand-in for the prior that training raises on misclassified
//! examples.
//!
//! Cells are laid out per pair as `[m_i][m_j][k]`, so the `K` classes of one
//! bin pair are contiguous.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binning::BinningSchema;
use crate::data::{ClassSet, Dataset};
use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.9;
pub const DEFAULT_ITERATIONS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub alpha: f64,
    pub iterations: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha: DEFAULT_ALPHA,
            iterations: DEFAULT_ITERATIONS,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be at least 1".into()));
        }
        Ok(())
    }
}

/// Index bookkeeping shared by the count and weight tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct CellLayout {
    class_count: usize,
    bins: Vec<usize>,
    pairs: Vec<(usize, usize)>,
    /// `offsets[i * F + j]`: start of the block for pair `(i, j)`.
    offsets: Vec<usize>,
    len: usize,
}

impl CellLayout {
    pub fn new(schema: &BinningSchema, class_count: usize) -> Self {
        let f = schema.feature_count();
        let bins: Vec<usize> = (0..f).map(|i| schema.bin_count(i)).collect();
        // With a single feature there is nothing to pair with; it is paired with itself.
        let pairs: Vec<(usize, usize)> = if f == 1 {
            vec![(0, 0)]
        } else {
            (0..f)
                .flat_map(|i| (0..f).filter(move |&j| j != i).map(move |j| (i, j)))
                .collect()
        };
        let mut offsets = vec![usize::MAX; f * f];
        let mut len = 0;
        for &(i, j) in &pairs {
            offsets[i * f + j] = len;
            len += bins[i] * bins[j] * class_count;
        }
        CellLayout {
            class_count,
            bins,
            pairs,
            offsets,
            len,
        }
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn feature_count(&self) -> usize {
        self.bins.len()
    }

    /// The ordered feature pairs that contribute to a score.
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Total number of cells (classes included).
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Index of class 0's cell for pair `(i, j)` at bins `(mi, mj)`; classes follow contiguously.
    #[inline]
    pub fn base(&self, i: usize, mi: usize, j: usize, mj: usize) -> usize {
        let f = self.bins.len();
        self.offsets[i * f + j] + (mi * self.bins[j] + mj) * self.class_count
    }

    pub fn index(&self, k: usize, i: usize, mi: usize, j: usize, mj: usize) -> Result<usize> {
        let f = self.bins.len();
        let valid_pair = i < f && j < f && (i != j || f == 1);
        if !valid_pair {
            return Err(Error::FeatureOutOfRange {
                index: i.max(j),
                count: f,
            });
        }
        if k >= self.class_count || mi >= self.bins[i] || mj >= self.bins[j] {
            return Err(Error::InvalidConfig(format!(
                "cell ({k}, {i}, {mi}, {j}, {mj}) out of range"
            )));
        }
        Ok(self.base(i, mi, j, mj) + k)
    }

    fn bases<'a>(&'a self, bins: &'a [usize]) -> impl Iterator<Item = usize> + 'a {
        self.pairs
            .iter()
            .map(move |&(i, j)| self.base(i, bins[i], j, bins[j]))
    }
}

/// Laplace-initialized class-conditional pair counts.
#[derive(Clone, Debug, PartialEq)]
pub struct CountModel {
    schema: BinningSchema,
    layout: CellLayout,
    counts: Vec<u64>,
}

impl CountModel {
    /// Every cell at its base count of one.
    pub fn laplace(schema: &BinningSchema, class_count: usize) -> Self {
        let layout = CellLayout::new(schema, class_count);
        CountModel {
            schema: schema.clone(),
            counts: vec![1; layout.len()],
            layout,
        }
    }

    pub(crate) fn from_parts(schema: BinningSchema, class_count: usize, counts: Vec<u64>) -> Result<Self> {
        let layout = CellLayout::new(&schema, class_count);
        if counts.len() != layout.len() {
            return Err(Error::CorruptModel(format!(
                "expected {} count cells, found {}",
                layout.len(),
                counts.len()
            )));
        }
        if counts.contains(&0) {
            return Err(Error::CorruptModel("count cell below Laplace floor".into()));
        }
        Ok(CountModel {
            schema,
            layout,
            counts,
        })
    }

    /// Adds one to every pair cell the example's bins activate for class `label`.
    pub fn add(&mut self, bins: &[usize], label: usize) {
        for base in self.layout.bases(bins) {
            self.counts[base + label] += 1;
        }
    }

    pub fn schema(&self) -> &BinningSchema {
        &self.schema
    }

    pub fn layout(&self) -> &CellLayout {
        &self.layout
    }

    pub fn class_count(&self) -> usize {
        self.layout.class_count
    }

    pub fn cells(&self) -> &[u64] {
        &self.counts
    }

    pub fn count(&self, k: usize, i: usize, mi: usize, j: usize, mj: usize) -> Result<u64> {
        Ok(self.counts[self.layout.index(k, i, mi, j, mj)?])
    }

    /// Count of class `k` in the cell divided by the cell's total over all classes.
    pub fn likelihood(&self, k: usize, i: usize, mi: usize, j: usize, mj: usize) -> Result<f64> {
        let idx = self.layout.index(k, i, mi, j, mj)?;
        let base = idx - k;
        Ok(self.likelihood_at(base, k))
    }

    #[inline]
    fn likelihood_at(&self, base: usize, k: usize) -> f64 {
        let cell = &self.counts[base..base + self.layout.class_count];
        let total: u64 = cell.iter().sum();
        cell[k] as f64 / total as f64
    }
}

/// Accumulates pair counts for every example in `d` on top of the Laplace base.
pub fn accumulate_counts(d: &Dataset, schema: &BinningSchema) -> Result<CountModel> {
    check_schema(d.feature_count(), schema)?;
    let mut counts = CountModel::laplace(schema, d.class_count());
    for ex in d.examples() {
        let bins = schema.bin_vector(&ex.features)?;
        counts.add(&bins, ex.label);
    }
    Ok(counts)
}

fn check_schema(feature_count: usize, schema: &BinningSchema) -> Result<()> {
    if schema.feature_count() != feature_count {
        return Err(Error::FeatureCountMismatch {
            expected: schema.feature_count(),
            found: feature_count,
        });
    }
    Ok(())
}

/// Per-cell boost weights, aligned with the count cells.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightModel {
    weights: Vec<f64>,
    config: TrainConfig,
}

impl WeightModel {
    /// All weights at `1/K`.
    pub fn uniform(layout: &CellLayout, config: TrainConfig) -> Self {
        WeightModel {
            weights: vec![1.0 / layout.class_count() as f64; layout.len()],
            config,
        }
    }

    pub(crate) fn from_parts(weights: Vec<f64>, config: TrainConfig) -> Self {
        WeightModel { weights, config }
    }

    pub fn cells(&self) -> &[f64] {
        &self.weights
    }

    pub fn config(&self) -> TrainConfig {
        self.config
    }
}

/// Weight increment for a misclassified example.
///
/// `p_true` is the posterior of the true class and `p_wrong` that of the
/// (winning) wrong class, so `p_true <= p_wrong` and the result is in `[0, alpha]`.
pub fn delta_w(p_true: f64, p_wrong: f64, alpha: f64) -> Result<f64> {
    if !(p_wrong.is_finite() && p_wrong > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "competing posterior must be positive, got {p_wrong}"
        )));
    }
    if !(0.0..=p_wrong).contains(&p_true) {
        return Err(Error::InvalidConfig(format!(
            "true-class posterior {p_true} must lie in [0, {p_wrong}]"
        )));
    }
    Ok((alpha * (1.0 - p_true / p_wrong)).clamp(0.0, alpha))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub predicted: usize,
    /// `100 * max(posterior)`.
    pub confidence: f64,
    pub posterior: Vec<f64>,
}

impl Prediction {
    fn from_posterior(posterior: Vec<f64>) -> Self {
        let predicted = argmax(&posterior);
        Prediction {
            predicted,
            confidence: 100.0 * posterior[predicted],
            posterior,
        }
    }
}

/// First index of the maximum, so ties go to the lowest class id.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = k;
        }
    }
    best
}

fn normalize_log_scores(scores: &mut [f64]) {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        total += *s;
    }
    for s in scores.iter_mut() {
        *s /= total;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    classes: ClassSet,
    counts: CountModel,
    weights: WeightModel,
    /// `ln(likelihood)` per cell; fixed once counts are accumulated.
    log_likelihood: Vec<f64>,
}

impl TrainedModel {
    /// Combines counts with uniform `1/K` weights (no boosting yet).
    pub fn untrained(classes: ClassSet, counts: CountModel, config: TrainConfig) -> Result<Self> {
        let weights = WeightModel::uniform(counts.layout(), config);
        Self::from_parts(classes, counts, weights)
    }

    pub(crate) fn from_parts(classes: ClassSet, counts: CountModel, weights: WeightModel) -> Result<Self> {
        if classes.len() != counts.class_count() {
            return Err(Error::ClassMismatch(format!(
                "{} class names for a {}-class count model",
                classes.len(),
                counts.class_count()
            )));
        }
        if weights.weights.len() != counts.layout().len() {
            return Err(Error::CorruptModel(format!(
                "expected {} weight cells, found {}",
                counts.layout().len(),
                weights.weights.len()
            )));
        }
        let k = counts.class_count();
        let mut log_likelihood = Vec::with_capacity(counts.counts.len());
        for cell in counts.counts.chunks(k.max(1)) {
            let total = cell.iter().sum::<u64>() as f64;
            log_likelihood.extend(cell.iter().map(|&c| (c as f64 / total).ln()));
        }
        Ok(TrainedModel {
            classes,
            counts,
            weights,
            log_likelihood,
        })
    }

    pub fn classes(&self) -> &ClassSet {
        &self.classes
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn schema(&self) -> &BinningSchema {
        self.counts.schema()
    }

    pub fn counts(&self) -> &CountModel {
        &self.counts
    }

    pub fn weights(&self) -> &WeightModel {
        &self.weights
    }

    pub fn weight(&self, k: usize, i: usize, mi: usize, j: usize, mj: usize) -> Result<f64> {
        Ok(self.weights.weights[self.counts.layout.index(k, i, mi, j, mj)?])
    }

    fn log_scores(&self, bins: &[usize], scores: &mut [f64]) {
        scores.fill(0.0);
        let k = scores.len();
        for base in self.counts.layout.bases(bins) {
            let ll = &self.log_likelihood[base..base + k];
            let w = &self.weights.weights[base..base + k];
            for c in 0..k {
                scores[c] += ll[c] + w[c].ln();
            }
        }
    }

    fn posterior_of_bins(&self, bins: &[usize]) -> Vec<f64> {
        let mut scores = vec![0.0; self.class_count()];
        self.log_scores(bins, &mut scores);
        normalize_log_scores(&mut scores);
        scores
    }

    /// Normalized class posterior for one feature vector.
    pub fn posterior(&self, features: &[f64]) -> Result<Vec<f64>> {
        let bins = self.schema().bin_vector(features)?;
        Ok(self.posterior_of_bins(&bins))
    }

    pub fn predict(&self, features: &[f64]) -> Result<Prediction> {
        Ok(Prediction::from_posterior(self.posterior(features)?))
    }

    /// Predictions for every example of `d`, in order. Runs in parallel.
    pub fn predict_dataset(&self, d: &Dataset) -> Result<Vec<Prediction>> {
        self.check_compatible(d)?;
        d.examples()
            .par_iter()
            .map(|ex| self.predict(&ex.features))
            .collect()
    }

    pub fn predict_rows(&self, rows: &[Vec<f64>]) -> Result<Vec<Prediction>> {
        rows.par_iter().map(|r| self.predict(r)).collect()
    }

    /// Checks that `d` has this model's feature count and class list.
    pub fn check_compatible(&self, d: &Dataset) -> Result<()> {
        check_schema(d.feature_count(), self.schema())?;
        if d.classes() != &self.classes {
            return Err(Error::ClassMismatch(format!(
                "model classes {:?}, data classes {:?}",
                self.classes.names(),
                d.classes().names()
            )));
        }
        Ok(())
    }

    fn boost(&mut self, bins: &[usize], label: usize, delta: f64) {
        for base in self.counts.layout.bases(bins) {
            self.weights.weights[base + label] += delta;
        }
    }
}

/// Builds the count model from `d`, then runs `config.iterations` boosting passes.
///
/// Each pass visits the examples in dataset order. When an example is
/// misclassified, its true class's weights on every pair cell it activates are
/// raised by [`delta_w`] immediately, so later examples in the same pass see the
/// update.
pub fn train(d: &Dataset, schema: &BinningSchema, config: TrainConfig) -> Result<TrainedModel> {
    config.validate()?;
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let counts = accumulate_counts(d, schema)?;
    let mut model = TrainedModel::untrained(d.classes().clone(), counts, config)?;

    let binned: Vec<(Vec<usize>, usize)> = d
        .examples()
        .iter()
        .map(|ex| Ok((schema.bin_vector(&ex.features)?, ex.label)))
        .collect::<Result<_>>()?;

    let mut scores = vec![0.0; model.class_count()];
    for _ in 0..config.iterations {
        for (bins, label) in &binned {
            model.log_scores(bins, &mut scores);
            normalize_log_scores(&mut scores);
            let winner = argmax(&scores);
            if winner != *label {
                let delta = delta_w(scores[*label], scores[winner], config.alpha)?;
                model.boost(bins, *label, delta);
            }
        }
    }
    Ok(model)
}
