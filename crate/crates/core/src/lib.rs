//! Detector learning for card-fraud classification.
//!
//! Two trainers build a set of normal-class detectors from a labeled training
//! split: [`aro_detector`] (asexual reproduction optimization) and
//! [`ais_detector`] (a clonal-selection immune baseline). Test records are
//! scored by their mean range-normalized distance to the detectors and
//! flagged as fraud at or above a threshold. [`eval`] and [`stats`] provide
//! the metrics, cost, ROC/AUC and nonparametric tests used to compare them.

pub mod ais_detector;
pub mod aro_detector;
pub mod binary_aro;
pub mod dataset;
pub mod detector_set;
pub mod error;
pub mod eval;
pub mod fitness;
pub mod seeds;
pub mod stats;

pub use ais_detector::{ais_train, AisOutcome, AisParams};
pub use aro_detector::{train as aro_train, AroOutcome, AroTrainParams, ThresholdRule};
pub use dataset::{
    generate_splits, load_csv, save_csv, CsvSchema, Dataset, GeneratorConfig, Label, SplitPair,
    TransactionRecord,
};
pub use detector_set::{Algorithm, DetectorSet, TrainStats};
pub use error::{Error, Result};
pub use eval::{ConfusionMatrix, MetricsReport, ScoredRecord, Scorer};
pub use fitness::{compute_bounds, FeatureBounds, FitnessContext};
pub use stats::TestResult;
