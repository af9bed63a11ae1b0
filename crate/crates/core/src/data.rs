//! Labeled datasets and CSV ingestion.
//!
//! A [`Dataset`] is an ordered list of [`Example`]s sharing one feature count
//! and one [`ClassSet`]. Class ids are dense indices `0..K` into the class set.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered set of class names; a class id is a position in this list.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct ClassSet {
    names: Vec<String>,
}

impl ClassSet {
    pub fn new(names: Vec<String>) -> Result<Self> {
        let mut seen = HashSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidConfig(format!("class '{name}' listed twice")));
            }
        }
        Ok(ClassSet { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn id_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn label(&self, id: usize) -> ClassLabel<'_> {
        ClassLabel {
            id,
            name: &self.names[id],
        }
    }
}

impl TryFrom<Vec<String>> for ClassSet {
    type Error = Error;

    fn try_from(names: Vec<String>) -> Result<Self> {
        ClassSet::new(names)
    }
}

impl From<ClassSet> for Vec<String> {
    fn from(c: ClassSet) -> Self {
        c.names
    }
}

/// A class id together with its display name.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClassLabel<'a> {
    pub id: usize,
    pub name: &'a str,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub features: Vec<f64>,
    pub label: usize,
    /// Row number (0-based, header excluded) in the file the example came from.
    pub source_index: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    feature_count: usize,
    feature_names: Option<Vec<String>>,
    classes: ClassSet,
    examples: Vec<Example>,
}

impl Dataset {
    /// Builds a dataset, checking every example against the feature count and class set.
    pub fn new(feature_count: usize, classes: ClassSet, examples: Vec<Example>) -> Result<Self> {
        for ex in &examples {
            if ex.features.len() != feature_count {
                return Err(Error::FeatureCountMismatch {
                    expected: feature_count,
                    found: ex.features.len(),
                });
            }
            if ex.label >= classes.len() {
                return Err(Error::ClassMismatch(format!(
                    "label id {} outside class set of size {}",
                    ex.label,
                    classes.len()
                )));
            }
            if let Some((feature, &value)) =
                ex.features.iter().enumerate().find(|(_, v)| !v.is_finite())
            {
                return Err(Error::NonFinite { feature, value });
            }
        }
        Ok(Dataset {
            feature_count,
            feature_names: None,
            classes,
            examples,
        })
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.feature_count {
            return Err(Error::FeatureCountMismatch {
                expected: self.feature_count,
                found: names.len(),
            });
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn classes(&self) -> &ClassSet {
        &self.classes
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Number of examples per class id.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes.len()];
        for ex in &self.examples {
            counts[ex.label] += 1;
        }
        counts
    }

    fn with_examples(&self, examples: Vec<Example>) -> Dataset {
        Dataset {
            feature_count: self.feature_count,
            feature_names: self.feature_names.clone(),
            classes: self.classes.clone(),
            examples,
        }
    }

    /// The examples at `idx`, in dataset order.
    pub fn subset(&self, idx: &[usize]) -> Result<Dataset> {
        Ok(self.split_by_indices(idx)?.0)
    }

    /// Partitions the dataset into (examples at `idx`, everything else).
    ///
    /// Both halves keep the original relative order regardless of the order of `idx`.
    pub fn split_by_indices(&self, idx: &[usize]) -> Result<(Dataset, Dataset)> {
        let mut chosen = vec![false; self.examples.len()];
        for &i in idx {
            if i >= self.examples.len() {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    len: self.examples.len(),
                });
            }
            if chosen[i] {
                return Err(Error::DuplicateIndex(i));
            }
            chosen[i] = true;
        }
        let (mut picked, mut rest) = (Vec::with_capacity(idx.len()), Vec::new());
        for (ex, take) in self.examples.iter().zip(chosen) {
            if take {
                picked.push(ex.clone());
            } else {
                rest.push(ex.clone());
            }
        }
        Ok((self.with_examples(picked), self.with_examples(rest)))
    }

    /// Appends `other` after `self`. Class sets and feature counts must agree.
    ///
    /// Source indices of the appended examples are shifted past the largest
    /// source index of `self`, so the merged set reads like one file.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.classes != other.classes {
            return Err(Error::ClassMismatch(
                "datasets declare different class lists".into(),
            ));
        }
        if self.feature_count != other.feature_count {
            return Err(Error::FeatureCountMismatch {
                expected: self.feature_count,
                found: other.feature_count,
            });
        }
        let offset = self
            .examples
            .iter()
            .map(|e| e.source_index + 1)
            .max()
            .unwrap_or(0);
        let mut examples = self.examples.clone();
        examples.extend(other.examples.iter().map(|e| Example {
            source_index: e.source_index + offset,
            ..e.clone()
        }));
        Ok(self.with_examples(examples))
    }

    /// Writes the dataset as CSV: features, then the class name as the last column.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        self.write_csv_with(writer, &[], |_, _| Vec::new())
    }

    /// Like [`write_csv`](Self::write_csv) but with extra trailing columns
    /// produced per example (`extra(row, example)`).
    pub fn write_csv_with<W, F>(&self, writer: W, extra_header: &[&str], extra: F) -> Result<()>
    where
        W: Write,
        F: Fn(usize, &Example) -> Vec<String>,
    {
        let mut out = csv::WriterBuilder::new().from_writer(writer);
        let map_err = |e: csv::Error| Error::Parse {
            line: 0,
            message: format!("write failed: {e}"),
        };
        if self.feature_names.is_some() || !extra_header.is_empty() {
            let mut header: Vec<String> = match &self.feature_names {
                Some(names) => names.clone(),
                None => (0..self.feature_count).map(|i| format!("f{i}")).collect(),
            };
            header.push("class".into());
            header.extend(extra_header.iter().map(|s| s.to_string()));
            out.write_record(&header).map_err(map_err)?;
        }
        for (row, ex) in self.examples.iter().enumerate() {
            let mut record: Vec<String> = ex.features.iter().map(|v| format!("{v}")).collect();
            record.push(self.classes.name(ex.label).to_string());
            record.extend(extra(row, ex));
            out.write_record(&record).map_err(map_err)?;
        }
        out.flush().map_err(|e| Error::Parse {
            line: 0,
            message: format!("write failed: {e}"),
        })
    }
}

/// Where the class token sits in each row.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ClassColumn {
    #[default]
    Last,
    Index(usize),
}

#[derive(Clone, Debug)]
pub struct IngestOptions {
    pub has_header: bool,
    pub delimiter: u8,
    pub class_column: ClassColumn,
    /// Fixed class list; ids follow this order and unseen tokens are rejected.
    /// When `None`, ids are assigned in first-seen order.
    pub classes: Option<Vec<String>>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            has_header: false,
            delimiter: b',',
            class_column: ClassColumn::Last,
            classes: None,
        }
    }
}

const MISSING_TOKENS: [&str; 4] = ["", "?", "na", "nan"];

fn parse_feature(token: &str, column: usize, line: u64) -> Result<f64> {
    if MISSING_TOKENS.contains(&token.to_ascii_lowercase().as_str()) {
        return Err(Error::Parse {
            line,
            message: format!("missing value in column {column}"),
        });
    }
    let value: f64 = token.parse().map_err(|_| Error::Parse {
        line,
        message: format!("non-numeric feature value '{token}' in column {column}"),
    })?;
    if !value.is_finite() {
        return Err(Error::Parse {
            line,
            message: format!("non-finite feature value '{token}' in column {column}"),
        });
    }
    Ok(value)
}

/// Reads a labeled CSV file.
pub fn ingest_csv(path: impl AsRef<Path>, options: &IngestOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(file, options)
}

pub fn ingest_reader<R: Read>(reader: R, options: &IngestOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(options.has_header)
        .delimiter(options.delimiter)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);

    let header: Option<Vec<String>> = if options.has_header {
        let h = rdr.headers().map_err(|e| csv_error(e, 1))?;
        if h.is_empty() {
            None
        } else {
            Some(h.iter().map(str::to_string).collect())
        }
    } else {
        None
    };

    let mut class_names: Vec<String> = options.classes.clone().unwrap_or_default();
    let mut class_index: HashMap<String, usize> = class_names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.clone(), i))
        .collect();
    if class_index.len() != class_names.len() {
        return Err(Error::InvalidConfig("class list contains duplicates".into()));
    }

    let mut arity: Option<usize> = header.as_ref().map(Vec::len);
    let mut examples = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(e, 0))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        let width = *arity.get_or_insert(record.len());
        if record.len() != width {
            return Err(Error::Parse {
                line,
                message: format!("expected {width} fields, found {}", record.len()),
            });
        }
        if width < 2 {
            return Err(Error::Parse {
                line,
                message: "a row needs at least one feature and a class".into(),
            });
        }
        let class_col = match options.class_column {
            ClassColumn::Last => width - 1,
            ClassColumn::Index(c) if c < width => c,
            ClassColumn::Index(c) => {
                return Err(Error::Parse {
                    line,
                    message: format!("class column {c} out of range for {width} fields"),
                })
            }
        };
        let mut features = Vec::with_capacity(width - 1);
        let mut token = "";
        for (col, field) in record.iter().enumerate() {
            if col == class_col {
                token = field;
            } else {
                features.push(parse_feature(field, col, line)?);
            }
        }
        if token.is_empty() {
            return Err(Error::Parse {
                line,
                message: "missing class value".into(),
            });
        }
        let label = match class_index.get(token) {
            Some(&id) => id,
            None if options.classes.is_some() => {
                return Err(Error::UnknownClass {
                    line,
                    token: token.to_string(),
                })
            }
            None => {
                let id = class_names.len();
                class_names.push(token.to_string());
                class_index.insert(token.to_string(), id);
                id
            }
        };
        examples.push(Example {
            features,
            label,
            source_index: examples.len(),
        });
    }

    if examples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let feature_count = examples[0].features.len();
    let dataset = Dataset::new(feature_count, ClassSet::new(class_names)?, examples)?;
    match header {
        Some(mut names) => {
            let class_col = match options.class_column {
                ClassColumn::Last => names.len() - 1,
                ClassColumn::Index(c) => c,
            };
            names.remove(class_col);
            dataset.with_feature_names(names)
        }
        None => Ok(dataset),
    }
}

/// Reads an unlabeled CSV file: every column is a feature.
pub fn read_feature_rows(path: impl AsRef<Path>, has_header: bool, delimiter: u8) -> Result<Vec<Vec<f64>>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(file);
    let mut rows = Vec::new();
    let mut arity = None;
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(e, 0))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        let width = *arity.get_or_insert(record.len());
        if record.len() != width {
            return Err(Error::Parse {
                line,
                message: format!("expected {width} fields, found {}", record.len()),
            });
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(col, f)| parse_feature(f, col, line))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(rows)
}

fn csv_error(e: csv::Error, fallback_line: u64) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(fallback_line);
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str, options: &IngestOptions) -> Result<Dataset> {
        ingest_reader(text.as_bytes(), options)
    }

    const XOR: &str = "0,0,0\n0,1,1\n1,0,1\n1,1,0\n";

    #[test]
    fn xor_file() {
        let d = read(XOR, &IngestOptions::default()).unwrap();
        assert_eq!(d.feature_count(), 2);
        assert_eq!(d.class_count(), 2);
        assert_eq!(d.len(), 4);
        // first-seen order: "0" then "1"
        assert_eq!(d.classes().names(), ["0", "1"]);
        assert_eq!(d.examples()[1].label, 1);
        assert_eq!(d.examples()[3].source_index, 3);
    }

    #[test]
    fn malformed_row_names_line() {
        let err = read("0,0,0\n1.0,foo,2\n", &IngestOptions::default()).unwrap_err();
        match err {
            Error::Parse { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains("foo"), "{message}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn wrong_arity_is_rejected() {
        let err = read("0,0,0\n1,1\n", &IngestOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(matches!(read("", &IngestOptions::default()), Err(Error::EmptyDataset)));
        let header_only = IngestOptions {
            has_header: true,
            ..Default::default()
        };
        assert!(matches!(read("a,b,class\n", &header_only), Err(Error::EmptyDataset)));
    }

    #[test]
    fn missing_values_are_errors() {
        for text in ["1,?,a\n", "1,,a\n", "1,NA,a\n", "1,nan,a\n"] {
            let err = read(text, &IngestOptions::default()).unwrap_err();
            assert!(
                matches!(&err, Error::Parse { message, .. } if message.contains("missing")),
                "{text:?} -> {err:?}"
            );
        }
        assert!(read("1,inf,a\n", &IngestOptions::default()).is_err());
    }

    #[test]
    fn explicit_class_list() {
        let options = IngestOptions {
            classes: Some(vec!["1".into(), "2".into(), "7".into()]),
            ..Default::default()
        };
        let d = read("0.5,7\n0.1,1\n", &options).unwrap();
        assert_eq!(d.class_count(), 3);
        assert_eq!(d.examples()[0].label, 2);
        assert_eq!(d.class_counts(), vec![1, 0, 1]);

        let err = read("0.5,6\n", &options).unwrap_err();
        assert!(matches!(err, Error::UnknownClass { line: 1, .. }), "{err:?}");
    }

    #[test]
    fn header_and_class_column() {
        let options = IngestOptions {
            has_header: true,
            class_column: ClassColumn::Index(0),
            ..Default::default()
        };
        let d = read("label,x,y\nb,1,2\na,3,4\n", &options).unwrap();
        assert_eq!(d.feature_names().unwrap(), ["x", "y"]);
        assert_eq!(d.examples()[1].features, vec![3.0, 4.0]);
        assert_eq!(d.classes().names(), ["b", "a"]);
    }

    #[test]
    fn whitespace_delimited() {
        let options = IngestOptions {
            delimiter: b' ',
            ..Default::default()
        };
        let d = read("92 115 3\n84 102 1\n", &options).unwrap();
        assert_eq!(d.feature_count(), 2);
        assert_eq!(d.classes().names(), ["3", "1"]);
    }

    #[test]
    fn split_examples() {
        let d = read(XOR, &IngestOptions::default()).unwrap();
        let (a, b) = d.split_by_indices(&[2, 0]).unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(b.len(), 2);
        assert_eq!(a.examples()[0].source_index, 0);
        assert_eq!(a.examples()[1].source_index, 2);
        assert_eq!(b.examples()[0].source_index, 1);

        let (a, b) = d.split_by_indices(&[]).unwrap();
        assert!(a.is_empty());
        assert_eq!(b, d);

        assert!(matches!(
            d.split_by_indices(&[5]),
            Err(Error::IndexOutOfRange { index: 5, len: 4 })
        ));
        assert!(matches!(d.split_by_indices(&[1, 1]), Err(Error::DuplicateIndex(1))));
    }

    #[test]
    fn concat_shifts_source_indices() {
        let d = read(XOR, &IngestOptions::default()).unwrap();
        let merged = d.concat(&d).unwrap();
        assert_eq!(merged.len(), 8);
        assert_eq!(merged.examples()[4].source_index, 4);
        let other = read("0,0,x\n", &IngestOptions::default()).unwrap();
        assert!(d.concat(&other).is_err());
    }

    #[test]
    fn csv_round_trip_with_header() {
        let options = IngestOptions {
            has_header: true,
            ..Default::default()
        };
        let d = read("a,b,class\n0.1,2.5e-7,x\n-3,4,\"y,z\"\n", &options).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let again = ingest_reader(buf.as_slice(), &options).unwrap();
        assert_eq!(again, d);
    }
}
