//! Optimal data selection: grow a training pool from the examples the current
//! model gets most confidently wrong.
//!
//! Start with one random example per class in the training pool and everything
//! else in the test pool. Each round retrains from scratch on the training
//! pool, predicts the test pool, and moves over, for every true class, the
//! misclassified example with the highest confidence. The loop ends when the
//! test pool is classified without error.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::binning::{BinningOptions, BinningSchema};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::eval::{accuracy_percent, evaluate};
use crate::model::{train, Prediction, TrainConfig, TrainedModel};

#[derive(Clone, Debug, Default)]
pub struct OdsaConfig {
    pub train: TrainConfig,
    pub binning: BinningOptions,
    pub seed: u64,
    /// Upper bound on train/evaluate rounds; `None` means the dataset size.
    pub max_rounds: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub round: usize,
    pub train_size: usize,
    pub test_size: usize,
    /// Accuracy on the training pool.
    pub pseudo_accuracy: f64,
    /// Accuracy on the test pool.
    pub real_accuracy: f64,
}

/// Pools as positions into the original dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct SelectionState {
    /// Training pool in joining order.
    pub train: Vec<usize>,
    /// Round in which each training example joined (parallel to `train`).
    pub round_added: Vec<usize>,
    /// Test pool in dataset order.
    pub test: Vec<usize>,
    pub round: usize,
    pub curve: Vec<CurvePoint>,
    pub seed: u64,
}

impl SelectionState {
    pub fn train_pool(&self, d: &Dataset) -> Result<Dataset> {
        d.subset(&self.train)
    }

    pub fn test_pool(&self, d: &Dataset) -> Result<Dataset> {
        d.subset(&self.test)
    }

    fn migrate(&mut self, test_positions: &[usize], round: usize) {
        let mut moving = vec![false; self.test.len()];
        for &p in test_positions {
            moving[p] = true;
            self.train.push(self.test[p]);
            self.round_added.push(round);
        }
        let mut keep = moving.iter().map(|m| !m);
        self.test.retain(|_| keep.next().unwrap());
    }
}

fn pick_one_per_class(d: &Dataset, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    let k = d.class_count();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (pos, ex) in d.examples().iter().enumerate() {
        members[ex.label].push(pos);
    }
    members
        .iter()
        .enumerate()
        .map(|(c, m)| {
            if m.is_empty() {
                Err(Error::MissingClass(d.classes().name(c).to_string()))
            } else {
                Ok(m[rng.random_range(0..m.len())])
            }
        })
        .collect()
}

/// Seeds the training pool with one uniformly chosen example per class.
pub fn initialize(d: &Dataset, seed: u64) -> Result<SelectionState> {
    if d.class_count() < 2 {
        return Err(Error::InvalidConfig(format!(
            "selection needs at least two classes, dataset has {}",
            d.class_count()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train = pick_one_per_class(d, &mut rng)?;
    let mut in_train = vec![false; d.len()];
    for &i in &train {
        in_train[i] = true;
    }
    Ok(SelectionState {
        round_added: vec![0; train.len()],
        train,
        test: (0..d.len()).filter(|&i| !in_train[i]).collect(),
        round: 0,
        curve: Vec::new(),
        seed,
    })
}

/// For each true class, the misclassified test example with the highest
/// confidence (ties go to the lowest source index).
///
/// Returns positions into `x` ordered by class id; empty when nothing failed.
pub fn select_failures(predictions: &[Prediction], x: &Dataset) -> Vec<usize> {
    let mut best: Vec<Option<usize>> = vec![None; x.class_count()];
    for (pos, (ex, p)) in x.examples().iter().zip(predictions).enumerate() {
        if p.predicted == ex.label {
            continue;
        }
        let slot = &mut best[ex.label];
        let better = match *slot {
            None => true,
            Some(cur) => {
                let (cp, ce) = (&predictions[cur], &x.examples()[cur]);
                p.confidence > cp.confidence
                    || (p.confidence == cp.confidence && ex.source_index < ce.source_index)
            }
        };
        if better {
            *slot = Some(pos);
        }
    }
    best.into_iter().flatten().collect()
}

#[derive(Clone, Debug)]
pub struct SelectionReport {
    pub train_indices: Vec<usize>,
    pub round_added: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub curve: Vec<CurvePoint>,
    pub model: TrainedModel,
    /// Accuracy of the final model on the whole dataset.
    pub overall_accuracy: f64,
    /// True when the loop stopped because the test pool had no errors.
    pub converged: bool,
}

impl SelectionReport {
    pub fn rounds(&self) -> usize {
        self.curve.len()
    }

    pub fn final_point(&self) -> &CurvePoint {
        self.curve.last().expect("at least one round is always recorded")
    }
}

fn pseudo_and_real(
    model: &TrainedModel,
    d: &Dataset,
    state: &SelectionState,
) -> Result<(f64, f64, Vec<Prediction>, Dataset)> {
    let y = state.train_pool(d)?;
    let x = state.test_pool(d)?;
    let on_y = model.predict_dataset(&y)?;
    let on_x = model.predict_dataset(&x)?;
    let hits = |pool: &Dataset, preds: &[Prediction]| {
        pool.examples()
            .iter()
            .zip(preds)
            .filter(|(e, p)| e.label == p.predicted)
            .count()
    };
    let pseudo = accuracy_percent(hits(&y, &on_y), y.len());
    let real = accuracy_percent(hits(&x, &on_x), x.len());
    Ok((pseudo, real, on_x, x))
}

pub fn run_odsa(d: &Dataset, config: &OdsaConfig) -> Result<SelectionReport> {
    let schema = BinningSchema::infer(d, &config.binning)?;
    run_odsa_with_schema(d, &schema, config)
}

/// Runs the selection loop with a fixed binning schema (held constant across rounds).
pub fn run_odsa_with_schema(
    d: &Dataset,
    schema: &BinningSchema,
    config: &OdsaConfig,
) -> Result<SelectionReport> {
    config.train.validate()?;
    let max_rounds = config.max_rounds.unwrap_or(d.len());
    if max_rounds == 0 {
        return Err(Error::InvalidConfig("max_rounds must be at least 1".into()));
    }
    let mut state = initialize(d, config.seed)?;
    loop {
        let y = state.train_pool(d)?;
        let model = train(&y, schema, config.train)?;
        let (pseudo_accuracy, real_accuracy, predictions, x) = pseudo_and_real(&model, d, &state)?;
        state.curve.push(CurvePoint {
            round: state.round,
            train_size: state.train.len(),
            test_size: state.test.len(),
            pseudo_accuracy,
            real_accuracy,
        });

        let failures = select_failures(&predictions, &x);
        let converged = failures.is_empty();
        if converged || state.curve.len() >= max_rounds {
            let overall_accuracy = evaluate(&model, d)?.accuracy;
            return Ok(SelectionReport {
                train_indices: state.train,
                round_added: state.round_added,
                test_indices: state.test,
                curve: state.curve,
                model,
                overall_accuracy,
                converged,
            });
        }
        state.round += 1;
        state.migrate(&failures, state.round);
    }
}

/// Trains on `n` randomly drawn examples and evaluates on the rest and on the whole set.
///
/// With `one_per_class`, the first `K` draws are exactly the ones
/// [`initialize`] makes for the same seed, and the remaining `n - K` are drawn
/// uniformly from what is left.
pub fn random_baseline(
    d: &Dataset,
    n: usize,
    one_per_class: bool,
    config: &OdsaConfig,
) -> Result<SelectionReport> {
    let schema = BinningSchema::infer(d, &config.binning)?;
    random_baseline_with_schema(d, &schema, n, one_per_class, config)
}

pub fn random_baseline_with_schema(
    d: &Dataset,
    schema: &BinningSchema,
    n: usize,
    one_per_class: bool,
    config: &OdsaConfig,
) -> Result<SelectionReport> {
    if n > d.len() {
        return Err(Error::InvalidConfig(format!(
            "cannot draw {n} examples from a dataset of {}",
            d.len()
        )));
    }
    if n == 0 {
        return Err(Error::InvalidConfig("baseline needs at least one training example".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut chosen = vec![false; d.len()];
    let mut train_idx = Vec::with_capacity(n);
    if one_per_class {
        if n < d.class_count() {
            return Err(Error::InvalidConfig(format!(
                "{n} examples cannot cover {} classes",
                d.class_count()
            )));
        }
        for i in pick_one_per_class(d, &mut rng)? {
            chosen[i] = true;
            train_idx.push(i);
        }
    }
    let rest: Vec<usize> = (0..d.len()).filter(|&i| !chosen[i]).collect();
    for j in sample(&mut rng, rest.len(), n - train_idx.len()) {
        train_idx.push(rest[j]);
    }
    for &i in &train_idx {
        chosen[i] = true;
    }
    let state = SelectionState {
        round_added: vec![0; train_idx.len()],
        train: train_idx,
        test: (0..d.len()).filter(|&i| !chosen[i]).collect(),
        round: 0,
        curve: Vec::new(),
        seed: config.seed,
    };
    let model = train(&state.train_pool(d)?, schema, config.train)?;
    let (pseudo_accuracy, real_accuracy, _, _) = pseudo_and_real(&model, d, &state)?;
    let overall_accuracy = evaluate(&model, d)?.accuracy;
    Ok(SelectionReport {
        curve: vec![CurvePoint {
            round: 0,
            train_size: state.train.len(),
            test_size: state.test.len(),
            pseudo_accuracy,
            real_accuracy,
        }],
        train_indices: state.train,
        round_added: state.round_added,
        test_indices: state.test,
        model,
        overall_accuracy,
        converged: real_accuracy == 100.0,
    })
}
