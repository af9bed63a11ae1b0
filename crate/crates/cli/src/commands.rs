use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use dbnn::data::read_feature_rows;
use dbnn::eval::{CompareOptions, DivergenceReport};
use dbnn::{
    compare_distributions, evaluate, filter_by_confidence, ingest_csv, load_model, run_odsa, save_model, train,
    BinningSchema, Dataset, Error, EvalReport, OdsaConfig, Prediction, Result, SelectionReport, TrainedModel,
};
use serde::Serialize;

use crate::{Command, InputArgs, ModelArgs};

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Train {
            data,
            out,
            input,
            model,
        } => cmd_train(&data, &out, &input, &model),
        Command::Select {
            data,
            out_dir,
            seed,
            max_rounds,
            input,
            model,
        } => cmd_select(&data, &out_dir, seed, max_rounds.map(|m| m as usize), &input, &model),
        Command::Evaluate {
            model,
            data,
            cutoff,
            report,
            input,
        } => cmd_evaluate(&model, &data, cutoff, report.as_deref(), &input),
        Command::Compare {
            reference,
            observed,
            threshold,
            min_support,
            json,
        } => cmd_compare(&reference, &observed, threshold, min_support, json.as_deref()),
        Command::Predict {
            model,
            data,
            out,
            unlabeled,
            input,
        } => cmd_predict(&model, &data, out.as_deref(), unlabeled, &input),
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(io_err(path))
}

fn cmd_train(data: &Path, out: &Path, input: &InputArgs, args: &ModelArgs) -> Result<()> {
    let d = ingest_csv(data, &input.options(None))?;
    let schema = BinningSchema::infer(&d, &args.binning())?;
    let model = train(&d, &schema, args.train_config())?;
    let report = evaluate(&model, &d)?;
    save_model(&model, out)?;
    println!("examples: {}", d.len());
    println!("classes: {}", d.classes().names().join(","));
    println!("bins: {}", bin_counts(&schema).iter().map(usize::to_string).collect::<Vec<_>>().join(","));
    println!("training accuracy: {:.2}%", report.accuracy);
    println!("model written to {}", out.display());
    Ok(())
}

fn bin_counts(schema: &BinningSchema) -> Vec<usize> {
    schema.features().iter().map(|f| f.count).collect()
}

#[derive(Serialize)]
struct SelectSummary<'a> {
    dataset_size: usize,
    train_size: usize,
    test_size: usize,
    rounds: usize,
    converged: bool,
    overall_accuracy: f64,
    final_pseudo_accuracy: f64,
    final_real_accuracy: f64,
    alpha: f64,
    iterations: usize,
    seed: u64,
    max_rounds: usize,
    bins: Vec<usize>,
    classes: &'a [String],
}

fn write_curve(path: &Path, r: &SelectionReport) -> Result<()> {
    let mut w = create(path)?;
    let mut body = String::from("round,train_size,test_size,pseudo_accuracy,real_accuracy\n");
    for p in &r.curve {
        body.push_str(&format!(
            "{},{},{},{},{}\n",
            p.round, p.train_size, p.test_size, p.pseudo_accuracy, p.real_accuracy
        ));
    }
    w.write_all(body.as_bytes()).and_then(|_| w.flush()).map_err(io_err(path))
}

fn cmd_select(
    data: &Path,
    out_dir: &Path,
    seed: u64,
    max_rounds: Option<usize>,
    input: &InputArgs,
    args: &ModelArgs,
) -> Result<()> {
    let d = ingest_csv(data, &input.options(None))?;
    let config = OdsaConfig {
        train: args.train_config(),
        binning: args.binning(),
        seed,
        max_rounds,
    };
    let r = run_odsa(&d, &config)?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let y = d.subset(&r.train_indices)?;
    let path = out_dir.join("train.csv");
    y.write_csv_with(create(&path)?, &["round_added", "row"], |i, ex| {
        vec![r.round_added[i].to_string(), ex.source_index.to_string()]
    })?;
    let x = d.subset(&r.test_indices)?;
    let path = out_dir.join("test.csv");
    x.write_csv_with(create(&path)?, &["row"], |_, ex| vec![ex.source_index.to_string()])?;
    write_curve(&out_dir.join("curve.csv"), &r)?;
    save_model(&r.model, out_dir.join("model.dbnn"))?;

    let last = r.final_point();
    let summary = SelectSummary {
        dataset_size: d.len(),
        train_size: r.train_indices.len(),
        test_size: r.test_indices.len(),
        rounds: r.rounds(),
        converged: r.converged,
        overall_accuracy: r.overall_accuracy,
        final_pseudo_accuracy: last.pseudo_accuracy,
        final_real_accuracy: last.real_accuracy,
        alpha: config.train.alpha,
        iterations: config.train.iterations,
        seed,
        max_rounds: max_rounds.unwrap_or(d.len()),
        bins: bin_counts(r.model.schema()),
        classes: d.classes().names(),
    };
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write_text(&out_dir.join("report.json"), &format!("{json}\n"))?;

    println!(
        "selected {} of {} examples in {} rounds",
        summary.train_size, summary.dataset_size, summary.rounds
    );
    println!("overall accuracy: {:.2}%", r.overall_accuracy);
    println!("test pool accuracy: {:.2}%", last.real_accuracy);
    if !r.converged {
        eprintln!("warning: stopped after {} rounds with errors left in the test pool", r.rounds());
    }
    println!("outputs written to {}", out_dir.display());
    Ok(())
}

fn load_labelled(model: &TrainedModel, data: &Path, input: &InputArgs) -> Result<Dataset> {
    let d = ingest_csv(data, &input.options(Some(model.classes().names().to_vec())))?;
    model.check_compatible(&d)?;
    Ok(d)
}

fn cmd_evaluate(
    model_path: &Path,
    data: &Path,
    cutoff: Option<f64>,
    report_path: Option<&Path>,
    input: &InputArgs,
) -> Result<()> {
    let model = load_model(model_path)?;
    let d = load_labelled(&model, data, input)?;
    let report = evaluate(&model, &d)?;
    println!("examples: {}", report.len());
    println!("accuracy: {:.2}%", report.accuracy);
    println!("confusion matrix (rows: predicted, columns: true)");
    print!("{}", report.matrix.to_table());
    let written = match cutoff {
        Some(c) => {
            let kept = filter_by_confidence(&report, c);
            println!("cutoff: confidence > {c}");
            println!("retained: {} ({:.2}%)", kept.len(), 100.0 * kept.retained_fraction);
            println!("filtered accuracy: {:.2}%", kept.accuracy);
            print!("{}", kept.matrix.to_table());
            kept
        }
        None => report,
    };
    if let Some(path) = report_path {
        write_text(path, &format!("{}\n", written.to_json()))?;
    }
    Ok(())
}

fn read_report(path: &Path) -> Result<EvalReport> {
    EvalReport::from_json(&fs::read_to_string(path).map_err(io_err(path))?)
        .map_err(|e| Error::MalformedReport(format!("{}: {e}", path.display())))
}

fn cmd_compare(
    reference: &Path,
    observed: &Path,
    threshold: f64,
    min_support: u64,
    json: Option<&Path>,
) -> Result<()> {
    let options = CompareOptions {
        tv_threshold: threshold,
        min_support,
    };
    let div: DivergenceReport =
        compare_distributions(&read_report(reference)?, &read_report(observed)?, &options)?;
    print!("{}", div.to_table());
    let flagged = div.flagged();
    if flagged.is_empty() {
        println!("flagged classes: none");
    } else {
        println!("flagged classes: {}", flagged.join(","));
    }
    if let Some(path) = json {
        let text = serde_json::to_string_pretty(&div).expect("divergence report serializes");
        write_text(path, &format!("{text}\n"))?;
    }
    Ok(())
}

fn prediction_rows(
    model: &TrainedModel,
    data: &Path,
    unlabeled: bool,
    input: &InputArgs,
) -> Result<(Vec<Prediction>, Option<Vec<usize>>)> {
    if unlabeled {
        let rows = read_feature_rows(data, input.header, input.delimiter)?;
        let expected = model.schema().feature_count();
        if let Some(bad) = rows.iter().find(|r| r.len() != expected) {
            return Err(Error::FeatureCountMismatch {
                expected,
                found: bad.len(),
            });
        }
        Ok((model.predict_rows(&rows)?, None))
    } else {
        let d = load_labelled(model, data, input)?;
        let truth = d.examples().iter().map(|e| e.label).collect();
        Ok((model.predict_dataset(&d)?, Some(truth)))
    }
}

fn cmd_predict(
    model_path: &Path,
    data: &Path,
    out: Option<&Path>,
    unlabeled: bool,
    input: &InputArgs,
) -> Result<()> {
    let model = load_model(model_path)?;
    let (predictions, truth) = prediction_rows(&model, data, unlabeled, input)?;
    let names = model.classes().names();

    let mut text = String::from("row,predicted,confidence");
    if truth.is_some() {
        text.push_str(",true");
    }
    for name in names {
        text.push_str(&format!(",p_{name}"));
    }
    text.push('\n');
    for (i, p) in predictions.iter().enumerate() {
        text.push_str(&format!("{i},{},{}", names[p.predicted], p.confidence));
        if let Some(t) = &truth {
            text.push_str(&format!(",{}", names[t[i]]));
        }
        for q in &p.posterior {
            text.push_str(&format!(",{q}"));
        }
        text.push('\n');
    }
    match out {
        Some(path) => write_text(path, &text),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(io_err(&PathBuf::from("<stdout>"))),
    }
}
