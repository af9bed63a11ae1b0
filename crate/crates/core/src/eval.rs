//! Accuracy, confusion matrices, confidence filtering and confusion-distribution
//! comparison between two evaluations.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::{ClassSet, Dataset};
use crate::error::{Error, Result};
use crate::model::{Prediction, TrainedModel};

/// Percentage of correct predictions; an empty set counts as fully correct.
pub fn accuracy_percent(correct: usize, total: usize) -> f64 {
    if total == 0 {
        100.0
    } else {
        100.0 * correct as f64 / total as f64
    }
}

/// K x K counts with rows = predicted class and columns = true class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: ClassSet,
    cells: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: ClassSet) -> Self {
        let k = classes.len();
        ConfusionMatrix {
            classes,
            cells: vec![vec![0; k]; k],
        }
    }

    pub fn from_cells(classes: ClassSet, cells: Vec<Vec<u64>>) -> Result<Self> {
        let k = classes.len();
        if cells.len() != k || cells.iter().any(|r| r.len() != k) {
            return Err(Error::MalformedReport(format!(
                "confusion matrix must be {k} x {k}"
            )));
        }
        Ok(ConfusionMatrix { classes, cells })
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.cells[predicted][truth] += 1;
    }

    pub fn classes(&self) -> &ClassSet {
        &self.classes
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    /// `cells()[predicted][truth]`
    pub fn cells(&self) -> &[Vec<u64>] {
        &self.cells
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.cells.len()).map(|k| self.cells[k][k]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        accuracy_percent(self.trace() as usize, self.total() as usize)
    }

    /// Totals per predicted class.
    pub fn row_totals(&self) -> Vec<u64> {
        self.cells.iter().map(|r| r.iter().sum()).collect()
    }

    /// Totals per true class.
    pub fn column_totals(&self) -> Vec<u64> {
        (0..self.cells.len())
            .map(|c| self.cells.iter().map(|r| r[c]).sum())
            .collect()
    }

    /// Column `truth` normalized to a distribution over predicted classes.
    pub fn column_distribution(&self, truth: usize) -> Option<Vec<f64>> {
        let total: u64 = self.cells.iter().map(|r| r[truth]).sum();
        (total > 0).then(|| {
            self.cells
                .iter()
                .map(|r| r[truth] as f64 / total as f64)
                .collect()
        })
    }

    /// Plain-text table: predicted classes down the side, true classes across
    /// the top, totals in the last row and column.
    pub fn to_table(&self) -> String {
        let names = self.classes.names();
        let rows = self.row_totals();
        let cols = self.column_totals();
        let width = names
            .iter()
            .map(|n| n.len())
            .chain(std::iter::once(self.total().to_string().len()))
            .chain(std::iter::once(5))
            .max()
            .unwrap_or(5);

        let mut out = String::new();
        let _ = write!(out, "{:<width$}", "Label");
        for n in names {
            let _ = write!(out, " {n:>width$}");
        }
        let _ = writeln!(out, " {:>width$}", "Total");
        for (p, row) in self.cells.iter().enumerate() {
            let _ = write!(out, "{:<width$}", names[p]);
            for c in row {
                let _ = write!(out, " {c:>width$}");
            }
            let _ = writeln!(out, " {:>width$}", rows[p]);
        }
        let _ = write!(out, "{:<width$}", "Total");
        for c in &cols {
            let _ = write!(out, " {c:>width$}");
        }
        let _ = writeln!(out, " {:>width$}", self.total());
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub source_index: usize,
    pub truth: usize,
    pub predicted: usize,
    pub confidence: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    /// Share of the originally evaluated examples still present after filtering.
    pub retained_fraction: f64,
    pub cutoff: Option<f64>,
    pub matrix: ConfusionMatrix,
    pub predictions: Vec<PredictionRecord>,
}

/// Report as read from disk; only the matrix is required.
#[derive(Deserialize)]
struct ReportFile {
    matrix: ConfusionMatrix,
    #[serde(default)]
    predictions: Vec<PredictionRecord>,
    #[serde(default)]
    retained_fraction: Option<f64>,
    #[serde(default)]
    cutoff: Option<f64>,
}

impl EvalReport {
    pub fn from_predictions(classes: ClassSet, records: Vec<PredictionRecord>) -> Self {
        let mut matrix = ConfusionMatrix::new(classes);
        for r in &records {
            matrix.record(r.truth, r.predicted);
        }
        EvalReport {
            accuracy: matrix.accuracy(),
            retained_fraction: 1.0,
            cutoff: None,
            matrix,
            predictions: records,
        }
    }

    pub fn from_matrix(matrix: ConfusionMatrix) -> Self {
        EvalReport {
            accuracy: matrix.accuracy(),
            retained_fraction: 1.0,
            cutoff: None,
            matrix,
            predictions: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.matrix.total() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Parses a report. Accuracy is recomputed from the matrix, and any
    /// per-prediction records must agree with it.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ReportFile =
            serde_json::from_str(text).map_err(|e| Error::MalformedReport(e.to_string()))?;
        let matrix = ConfusionMatrix::from_cells(file.matrix.classes, file.matrix.cells)?;
        let k = matrix.class_count();
        if !file.predictions.is_empty() {
            let mut check = ConfusionMatrix::new(matrix.classes.clone());
            for p in &file.predictions {
                if p.truth >= k || p.predicted >= k {
                    return Err(Error::MalformedReport(format!(
                        "prediction for row {} names a class outside 0..{k}",
                        p.source_index
                    )));
                }
                check.record(p.truth, p.predicted);
            }
            if check.cells != matrix.cells {
                return Err(Error::MalformedReport(
                    "predictions disagree with the confusion matrix".into(),
                ));
            }
        }
        Ok(EvalReport {
            accuracy: matrix.accuracy(),
            retained_fraction: file.retained_fraction.unwrap_or(1.0),
            cutoff: file.cutoff,
            matrix,
            predictions: file.predictions,
        })
    }
}

/// Pairs dataset examples with their predictions.
pub fn report_from_predictions(d: &Dataset, predictions: &[Prediction]) -> EvalReport {
    let records = d
        .examples()
        .iter()
        .zip(predictions)
        .map(|(ex, p)| PredictionRecord {
            source_index: ex.source_index,
            truth: ex.label,
            predicted: p.predicted,
            confidence: p.confidence,
        })
        .collect();
    EvalReport::from_predictions(d.classes().clone(), records)
}

pub fn evaluate(model: &TrainedModel, d: &Dataset) -> Result<EvalReport> {
    let predictions = model.predict_dataset(d)?;
    Ok(report_from_predictions(d, &predictions))
}

/// Keeps predictions with confidence strictly above `cutoff` and recomputes
/// the matrix and accuracy over them.
pub fn filter_by_confidence(report: &EvalReport, cutoff: f64) -> EvalReport {
    let kept: Vec<PredictionRecord> = report
        .predictions
        .iter()
        .filter(|p| p.confidence > cutoff)
        .cloned()
        .collect();
    let before = report.predictions.len();
    let share = if before == 0 {
        report.retained_fraction
    } else {
        report.retained_fraction * kept.len() as f64 / before as f64
    };
    let mut out = EvalReport::from_predictions(report.matrix.classes.clone(), kept);
    out.retained_fraction = share;
    out.cutoff = Some(report.cutoff.map_or(cutoff, |c| c.max(cutoff)));
    out
}

pub const DEFAULT_TV_THRESHOLD: f64 = 0.2;
pub const DEFAULT_MIN_SUPPORT: u64 = 5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareOptions {
    pub tv_threshold: f64,
    pub min_support: u64,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions {
            tv_threshold: DEFAULT_TV_THRESHOLD,
            min_support: DEFAULT_MIN_SUPPORT,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassStatus {
    Consistent,
    Flagged,
    InsufficientSupport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassDivergence {
    pub class: String,
    pub reference_support: u64,
    pub observed_support: u64,
    /// Total-variation distance between the two column distributions;
    /// `None` when either column is empty.
    pub tv_distance: Option<f64>,
    pub reference_recall: Option<f64>,
    pub observed_recall: Option<f64>,
    /// `observed_recall - reference_recall`.
    pub recall_delta: Option<f64>,
    pub status: ClassStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub options: CompareOptions,
    pub reference_accuracy: f64,
    pub observed_accuracy: f64,
    pub classes: Vec<ClassDivergence>,
}

impl DivergenceReport {
    pub fn with_status(&self, status: ClassStatus) -> Vec<&str> {
        self.classes
            .iter()
            .filter(|c| c.status == status)
            .map(|c| c.class.as_str())
            .collect()
    }

    pub fn flagged(&self) -> Vec<&str> {
        self.with_status(ClassStatus::Flagged)
    }

    pub fn to_table(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"));
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<8} {:>9} {:>9} {:>7} {:>8} {:>8} {:>8}  status",
            "class", "ref_n", "obs_n", "tv", "ref_rec", "obs_rec", "delta"
        );
        for c in &self.classes {
            let status = match c.status {
                ClassStatus::Consistent => "ok",
                ClassStatus::Flagged => "FLAGGED",
                ClassStatus::InsufficientSupport => "insufficient-support",
            };
            let _ = writeln!(
                out,
                "{:<8} {:>9} {:>9} {:>7} {:>8} {:>8} {:>8}  {status}",
                c.class,
                c.reference_support,
                c.observed_support,
                fmt(c.tv_distance),
                fmt(c.reference_recall),
                fmt(c.observed_recall),
                fmt(c.recall_delta),
            );
        }
        let _ = writeln!(
            out,
            "accuracy: reference {:.2}%, observed {:.2}%",
            self.reference_accuracy, self.observed_accuracy
        );
        out
    }
}

fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Compares, per true class, how two evaluations spread that class over the
/// predicted classes.
///
/// A class is `InsufficientSupport` when either side has fewer than
/// `min_support` examples of it, `Flagged` when the total-variation distance
/// of its two column distributions exceeds `tv_threshold`, and `Consistent`
/// otherwise.
pub fn compare_distributions(
    reference: &EvalReport,
    observed: &EvalReport,
    options: &CompareOptions,
) -> Result<DivergenceReport> {
    let (a, b) = (&reference.matrix, &observed.matrix);
    if a.class_count() != b.class_count() {
        return Err(Error::ClassMismatch(format!(
            "reference has {} classes, observed has {}",
            a.class_count(),
            b.class_count()
        )));
    }
    let (ref_support, obs_support) = (a.column_totals(), b.column_totals());
    let classes = (0..a.class_count())
        .map(|c| {
            let (pa, pb) = (a.column_distribution(c), b.column_distribution(c));
            let tv = match (&pa, &pb) {
                (Some(p), Some(q)) => Some(total_variation(p, q)),
                _ => None,
            };
            let reference_recall = pa.as_ref().map(|p| p[c]);
            let observed_recall = pb.as_ref().map(|p| p[c]);
            let recall_delta = reference_recall.zip(observed_recall).map(|(r, o)| o - r);
            let status = if ref_support[c].min(obs_support[c]) < options.min_support {
                ClassStatus::InsufficientSupport
            } else if tv.is_some_and(|t| t > options.tv_threshold) {
                ClassStatus::Flagged
            } else {
                ClassStatus::Consistent
            };
            ClassDivergence {
                class: a.classes().name(c).to_string(),
                reference_support: ref_support[c],
                observed_support: obs_support[c],
                tv_distance: tv,
                reference_recall,
                observed_recall,
                recall_delta,
                status,
            }
        })
        .collect();
    Ok(DivergenceReport {
        options: *options,
        reference_accuracy: a.accuracy(),
        observed_accuracy: b.accuracy(),
        classes,
    })
}
