mod commands;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dbnn::binning::DEFAULT_BIN_CAP;
use dbnn::model::{DEFAULT_ALPHA, DEFAULT_ITERATIONS};
use dbnn::{BinningOptions, ClassColumn, IngestOptions, TrainConfig};

#[derive(Parser)]
#[command(name = "dbnn", version, about = "Difference boosting classifier with training-data selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train on a whole file and save the model.
    Train {
        data: PathBuf,
        /// Model output path.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Select a small training subset and write pools, curve, report and model.
    Select {
        data: PathBuf,
        /// Output directory (created if missing).
        #[arg(long)]
        out_dir: PathBuf,
        /// Seed for the initial one-per-class draw.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Stop after this many rounds [default: number of examples].
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        max_rounds: Option<u64>,
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Evaluate a saved model on a labelled file.
    Evaluate {
        model: PathBuf,
        data: PathBuf,
        /// Keep only predictions with confidence strictly above this value (0-100).
        #[arg(long, value_parser = parse_percent)]
        cutoff: Option<f64>,
        /// Write the report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        input: InputArgs,
    },
    /// Compare the per-class confusion distributions of two reports.
    Compare {
        reference: PathBuf,
        observed: PathBuf,
        /// Total-variation distance above which a class is flagged.
        #[arg(long, default_value_t = 0.2)]
        threshold: f64,
        /// Minimum examples of a class on each side for it to be judged.
        #[arg(long, default_value_t = 5)]
        min_support: u64,
        /// Write the divergence report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Write per-row predictions with confidence and posteriors as CSV.
    Predict {
        model: PathBuf,
        data: PathBuf,
        /// Output CSV path [default: stdout].
        #[arg(long)]
        out: Option<PathBuf>,
        /// Input rows carry no class column.
        #[arg(long)]
        unlabeled: bool,
        #[command(flatten)]
        input: InputArgs,
    },
}

#[derive(Args, Clone)]
struct InputArgs {
    /// First row is a header.
    #[arg(long)]
    header: bool,
    /// Field delimiter: a single character, or "tab" / "space".
    #[arg(long, default_value = ",", value_parser = parse_delimiter)]
    delimiter: u8,
    /// Comma-separated class names; fixes class order and rejects others.
    #[arg(long, value_delimiter = ',')]
    classes: Option<Vec<String>>,
    /// 0-based column holding the class [default: last].
    #[arg(long)]
    class_column: Option<usize>,
}

impl InputArgs {
    fn options(&self, classes: Option<Vec<String>>) -> IngestOptions {
        IngestOptions {
            has_header: self.header,
            delimiter: self.delimiter,
            class_column: self.class_column.map_or(ClassColumn::Last, ClassColumn::Index),
            classes: self.classes.clone().or(classes),
        }
    }
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Boosting increment factor, in (0, 1].
    #[arg(long, default_value_t = DEFAULT_ALPHA, value_parser = parse_alpha)]
    alpha: f64,
    /// Boosting passes over the training data.
    #[arg(long, default_value_t = DEFAULT_ITERATIONS, value_parser = parse_positive)]
    iterations: usize,
    /// Per-feature bin counts, e.g. "0=8,3=12" (0-based feature indices).
    #[arg(long, value_parser = parse_bins)]
    bins: Option<BinOverrides>,
    /// Upper bound on inferred bin counts.
    #[arg(long, default_value_t = DEFAULT_BIN_CAP, value_parser = parse_positive)]
    bin_cap: usize,
}

impl ModelArgs {
    fn train_config(&self) -> TrainConfig {
        TrainConfig {
            alpha: self.alpha,
            iterations: self.iterations,
        }
    }

    fn binning(&self) -> BinningOptions {
        BinningOptions {
            overrides: self.bins.clone().map(|b| b.0).unwrap_or_default(),
            cap: self.bin_cap,
        }
    }
}

#[derive(Clone, Debug)]
struct BinOverrides(BTreeMap<usize, usize>);

fn parse_alpha(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("not a number: {s}"))?;
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err(format!("must lie in (0, 1], got {v}"))
    }
}

fn parse_percent(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("not a number: {s}"))?;
    if (0.0..=100.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("must lie in [0, 100], got {v}"))
    }
}

fn parse_positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v >= 1 => Ok(v),
        _ => Err(format!("expected a positive integer, got {s}")),
    }
}

fn parse_delimiter(s: &str) -> Result<u8, String> {
    match s {
        "tab" | "\\t" => Ok(b'\t'),
        "space" => Ok(b' '),
        _ if s.len() == 1 => Ok(s.as_bytes()[0]),
        _ => Err(format!("expected one ASCII character, \"tab\" or \"space\", got {s:?}")),
    }
}

fn parse_bins(s: &str) -> Result<BinOverrides, String> {
    let mut map = BTreeMap::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (feature, count) = part
            .split_once('=')
            .ok_or_else(|| format!("expected FEATURE=COUNT, got {part:?}"))?;
        let feature: usize = feature.trim().parse().map_err(|_| format!("bad feature index in {part:?}"))?;
        let count = parse_positive(count.trim())?;
        if map.insert(feature, count).is_some() {
            return Err(format!("feature {feature} given twice"));
        }
    }
    Ok(BinOverrides(map))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
