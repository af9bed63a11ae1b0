#![allow(dead_code)]

use std::path::{Path, PathBuf};

use dbnn::{ingest_csv, ClassSet, Dataset, Example, IngestOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("data")
}

pub fn load_fixture(name: &str) -> Dataset {
    let options = IngestOptions {
        has_header: true,
        ..Default::default()
    };
    ingest_csv(data_dir().join(name), &options).expect("fixture loads")
}

pub fn xor() -> Dataset {
    dbnn::data::ingest_reader("0,0,0\n0,1,1\n1,0,1\n1,1,0\n".as_bytes(), &IngestOptions::default())
        .unwrap()
}

/// Gaussian blobs: one random center per class in `[-spread, spread]^F`,
/// unit-variance noise, labels assigned round-robin so every class is present.
pub fn blobs(seed: u64, classes: usize, n: usize, features: usize, spread: f64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f64>> = (0..classes)
        .map(|_| (0..features).map(|_| rng.random_range(-spread..spread)).collect())
        .collect();
    let noise = Normal::new(0.0, 1.0).unwrap();
    let examples = (0..n)
        .map(|i| {
            let label = i % classes;
            Example {
                features: centers[label].iter().map(|c| c + noise.sample(&mut rng)).collect(),
                label,
                source_index: i,
            }
        })
        .collect();
    let names = ClassSet::new((0..classes).map(|c| format!("c{c}")).collect()).unwrap();
    Dataset::new(features, names, examples).unwrap()
}

/// Prints one result line and returns whether the criterion held.
pub fn report(criterion: u32, name: &str, pass: bool, detail: &str) -> bool {
    println!(
        "criterion {criterion:>2} [{}] {name}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    pass
}
