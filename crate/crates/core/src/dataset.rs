//! Transaction records, CSV ingestion and the synthetic split generator.
//!
//! Feature values are written as decimal text rounded to nine significant
//! digits. The generator rounds every value it draws to that precision, so a
//! generated split survives a `save_csv` / `load_csv` round trip bit for bit.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Significant digits used for every number written to a data file.
pub const SIGNIFICANT_DIGITS: usize = 9;

/// Train/test class counts `(train_legit, train_fraud, test_legit, test_fraud)`
/// of the nine reference splits of the original bank dataset.
pub const REFERENCE_SPLIT_COUNTS: [(usize, usize, usize, usize); 9] = [
    (27_904, 1_084, 12_184, 475),
    (28_012, 1_092, 12_076, 467),
    (28_061, 1_088, 12_027, 471),
    (28_145, 1_075, 11_943, 484),
    (28_045, 1_081, 12_043, 478),
    (27_973, 1_116, 12_115, 443),
    (28_113, 1_099, 11_975, 460),
    (27_884, 1_106, 12_204, 453),
    (28_188, 1_100, 11_960, 459),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Legitimate,
    Fraudulent,
}

impl Label {
    pub fn is_fraud(self) -> bool {
        matches!(self, Label::Fraudulent)
    }

    /// Integer code used in written CSV files.
    pub fn code(self) -> u8 {
        match self {
            Label::Legitimate => 0,
            Label::Fraudulent => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransactionRecord {
    features: Vec<f64>,
    label: Label,
}

impl TransactionRecord {
    pub fn new(features: Vec<f64>, label: Label) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::InvalidDataset("record has no features".into()));
        }
        if let Some(i) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "feature {} is not finite ({})",
                i + 1,
                features[i]
            )));
        }
        Ok(Self { features, label })
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn label(&self) -> Label {
        self.label
    }
}

/// A non-empty set of records sharing one feature count, with at least one
/// legitimate record.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    records: Vec<TransactionRecord>,
    feature_count: usize,
}

impl Dataset {
    pub fn new(records: Vec<TransactionRecord>) -> Result<Self> {
        let first = records
            .first()
            .ok_or_else(|| Error::InvalidDataset("no records".into()))?;
        let feature_count = first.features.len();
        for (i, r) in records.iter().enumerate() {
            if r.features.len() != feature_count {
                return Err(Error::InvalidDataset(format!(
                    "record {} has {} features, expected {}",
                    i + 1,
                    r.features.len(),
                    feature_count
                )));
            }
        }
        if !records.iter().any(|r| r.label == Label::Legitimate) {
            return Err(Error::InvalidDataset(
                "dataset contains no legitimate records".into(),
            ));
        }
        Ok(Self {
            records,
            feature_count,
        })
    }

    pub fn records(&self) -> &[TransactionRecord] {
        &self.records
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn legit_count(&self) -> usize {
        self.records.len() - self.fraud_count()
    }

    pub fn fraud_count(&self) -> usize {
        self.records.iter().filter(|r| r.label.is_fraud()).count()
    }

    /// Splits the feature rows by label, preserving record order.
    pub fn class_partition(&self) -> ClassPartition<'_> {
        let mut legal = Vec::with_capacity(self.records.len());
        let mut fraud = Vec::new();
        for r in &self.records {
            match r.label {
                Label::Legitimate => legal.push(r.features.as_slice()),
                Label::Fraudulent => fraud.push(r.features.as_slice()),
            }
        }
        ClassPartition { legal, fraud }
    }
}

#[derive(Clone, Debug)]
pub struct ClassPartition<'a> {
    pub legal: Vec<&'a [f64]>,
    pub fraud: Vec<&'a [f64]>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplitPair {
    pub split_id: u32,
    pub train: Dataset,
    pub test: Dataset,
}

impl SplitPair {
    pub fn train_fraction(&self) -> f64 {
        self.train.len() as f64 / (self.train.len() + self.test.len()) as f64
    }
}

/// Column mapping for [`load_csv`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvSchema {
    pub label_column: String,
    /// Feature columns in order. `None` takes every column except the label.
    pub feature_columns: Option<Vec<String>>,
    pub legitimate_values: Vec<String>,
    pub fraudulent_values: Vec<String>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            label_column: "label".into(),
            feature_columns: None,
            legitimate_values: vec!["0".into()],
            fraudulent_values: vec!["1".into()],
        }
    }
}

impl CsvSchema {
    fn parse_label(&self, raw: &str) -> Option<Label> {
        let raw = raw.trim();
        if self.legitimate_values.iter().any(|v| v == raw) {
            Some(Label::Legitimate)
        } else if self.fraudulent_values.iter().any(|v| v == raw) {
            Some(Label::Fraudulent)
        } else {
            None
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let format_err = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    let headers = reader
        .headers()
        .map_err(|e| format_err(e.to_string()))?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| format_err(format!("missing column `{name}`")))
    };
    let label_idx = column(&schema.label_column)?;
    let feature_idx: Vec<usize> = match &schema.feature_columns {
        Some(names) => names.iter().map(|n| column(n)).collect::<Result<_>>()?,
        None => (0..headers.len()).filter(|&i| i != label_idx).collect(),
    };
    if feature_idx.is_empty() {
        return Err(format_err("schema selects no feature columns".into()));
    }

    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let row_err = |message: String| Error::Row {
            path: path.to_path_buf(),
            row: row_no,
            message,
        };
        let row = row.map_err(|e| row_err(e.to_string()))?;
        if row.len() != headers.len() {
            return Err(row_err(format!(
                "expected {} columns, found {}",
                headers.len(),
                row.len()
            )));
        }
        let features = feature_idx
            .iter()
            .map(|&c| {
                let cell = &row[c];
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        row_err(format!("column `{}`: not a number: {cell:?}", &headers[c]))
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        let label = schema
            .parse_label(&row[label_idx])
            .ok_or_else(|| row_err(format!("unknown label value {:?}", &row[label_idx])))?;
        records.push(TransactionRecord { features, label });
    }
    Dataset::new(records).map_err(|e| format_err(e.to_string()))
}

/// Writes `dataset` in the `f1,...,fk,label` format to any writer.
pub fn write_csv<W: Write>(dataset: &Dataset, out: W) -> std::io::Result<()> {
    let mut out = BufWriter::new(out);
    let header: Vec<String> = (1..=dataset.feature_count)
        .map(|i| format!("f{i}"))
        .chain(std::iter::once("label".to_string()))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for r in &dataset.records {
        write_row(&mut out, &r.features)?;
        writeln!(out, ",{}", r.label.code())?;
    }
    out.flush()
}

pub fn save_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(dataset, file).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_row<W: Write>(out: &mut W, values: &[f64]) -> std::io::Result<()> {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.write_all(b",")?;
        }
        out.write_all(format_number(*v).as_bytes())?;
    }
    Ok(())
}

/// Rounds to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_significant(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, v)
        .parse()
        .expect("formatted float parses")
}

/// Plain decimal text of `v` rounded to nine significant digits.
pub fn format_number(v: f64) -> String {
    let r = round_significant(v);
    // avoid "-0"
    if r == 0.0 {
        "0".into()
    } else {
        format!("{r}")
    }
}

/// Parameters of the two-center synthetic transaction generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub feature_count: usize,
    pub train_legit: usize,
    pub train_fraud: usize,
    pub test_legit: usize,
    pub test_fraud: usize,
    /// Per-feature offset between the fraud and legitimate class centers.
    pub class_separation: f64,
    /// Standard deviation of the Gaussian noise around each center.
    pub noise_scale: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        let (train_legit, train_fraud, test_legit, test_fraud) = REFERENCE_SPLIT_COUNTS[0];
        Self {
            feature_count: 17,
            train_legit,
            train_fraud,
            test_legit,
            test_fraud,
            class_separation: 3.0,
            noise_scale: 1.0,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    /// Default config carrying the class counts of reference split `split_id` (1..=9).
    pub fn reference_split(split_id: u32) -> Option<Self> {
        let idx = (split_id as usize).checked_sub(1)?;
        let (train_legit, train_fraud, test_legit, test_fraud) =
            *REFERENCE_SPLIT_COUNTS.get(idx)?;
        Some(Self {
            train_legit,
            train_fraud,
            test_legit,
            test_fraud,
            ..Self::default()
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_count == 0 {
            return Err(Error::param("feature_count", "must be at least 1"));
        }
        for (name, n) in [
            ("train_legit", self.train_legit),
            ("train_fraud", self.train_fraud),
            ("test_legit", self.test_legit),
            ("test_fraud", self.test_fraud),
        ] {
            if n == 0 {
                return Err(Error::param(name, "must be at least 1"));
            }
        }
        if !(self.class_separation >= 0.0 && self.class_separation.is_finite()) {
            return Err(Error::param("class_separation", "must be finite and >= 0"));
        }
        if !(self.noise_scale > 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::param("noise_scale", "must be finite and > 0"));
        }
        Ok(())
    }

    pub fn fraud_fraction(&self) -> f64 {
        let fraud = (self.train_fraud + self.test_fraud) as f64;
        fraud / (fraud + (self.train_legit + self.test_legit) as f64)
    }

    pub fn train_fraction(&self) -> f64 {
        let train = (self.train_legit + self.train_fraud) as f64;
        train / (train + (self.test_legit + self.test_fraud) as f64)
    }
}

/// Draws `num_splits` independent splits with ids `1..=num_splits`.
pub fn generate_splits(config: &GeneratorConfig, num_splits: u32) -> Result<Vec<SplitPair>> {
    if num_splits == 0 {
        return Err(Error::param("num_splits", "must be at least 1"));
    }
    (1..=num_splits)
        .map(|id| generate_split(config, id))
        .collect()
}

/// One split, seeded with `config.seed + split_id`.
pub fn generate_split(config: &GeneratorConfig, split_id: u32) -> Result<SplitPair> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(u64::from(split_id)));
    let noise = Normal::new(0.0, config.noise_scale)
        .map_err(|e| Error::param("noise_scale", e.to_string()))?;
    let k = config.feature_count;

    let draw = |n: usize, center: f64, label: Label, rng: &mut ChaCha8Rng| {
        (0..n)
            .map(|_| TransactionRecord {
                features: (0..k)
                    .map(|_| round_significant(center + noise.sample(rng)))
                    .collect(),
                label,
            })
            .collect::<Vec<_>>()
    };

    let legit_center = 0.0;
    let fraud_center = config.class_separation;
    let mut train = draw(config.train_legit, legit_center, Label::Legitimate, &mut rng);
    train.extend(draw(config.train_fraud, fraud_center, Label::Fraudulent, &mut rng));
    let mut test = draw(config.test_legit, legit_center, Label::Legitimate, &mut rng);
    test.extend(draw(config.test_fraud, fraud_center, Label::Fraudulent, &mut rng));
    train.shuffle(&mut rng);
    test.shuffle(&mut rng);

    Ok(SplitPair {
        split_id,
        train: Dataset::new(train)?,
        test: Dataset::new(test)?,
    })
}
