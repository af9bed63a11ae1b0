//! Difference boosting Bayesian classifier with optimal training-data selection.
//!
//! - [`data`]: datasets and CSV ingestion
//! - [`binning`]: equal-width feature binning
//! - [`model`]: pairwise count model, boosted weights, posterior and training
//! - [`persist`]: versioned model files
//! - [`odsa`]: selection of a small training set from confident failures
//! - [`eval`]: confusion matrices, confidence filtering, distribution comparison

pub mod binning;
pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod odsa;
pub mod persist;

pub use binning::{BinningOptions, BinningSchema, FeatureBins};
pub use data::{ingest_csv, ClassColumn, ClassSet, Dataset, Example, IngestOptions};
pub use error::{Error, Result};
pub use eval::{compare_distributions, evaluate, filter_by_confidence, ConfusionMatrix, EvalReport};
pub use model::{accumulate_counts, delta_w, train, Prediction, TrainConfig, TrainedModel};
pub use odsa::{initialize, random_baseline, run_odsa, select_failures, CurvePoint, OdsaConfig, SelectionReport};
pub use persist::{load_model, save_model};
