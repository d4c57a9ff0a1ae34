//! Test-phase scoring and classification, confusion counts, ratio metrics,
//! cost, ROC/AUC and wall-clock timing.

use std::io::Write;
use std::ops::Add;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Label};
use crate::detector_set::DetectorSet;
use crate::error::{Error, Result};
use crate::fitness::{FeatureBounds, ReferenceRows};

/// Scores records by their mean normalized distance to a set of reference
/// samples (the "final distance"). Higher scores look more like fraud.
#[derive(Clone, Debug)]
pub struct Scorer {
    rows: ReferenceRows,
    inverse_ranges: Vec<f64>,
}

impl Scorer {
    pub fn new<R: AsRef<[f64]>>(samples: &[R], bounds: &FeatureBounds) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Empty("no samples to score against"));
        }
        Ok(Self {
            rows: ReferenceRows::new(samples, bounds.feature_count())?,
            inverse_ranges: bounds.inverse_ranges(),
        })
    }

    pub fn from_detectors(set: &DetectorSet) -> Result<Self> {
        Self::new(&set.detectors, &set.bounds)
    }

    pub fn feature_count(&self) -> usize {
        self.rows.feature_count()
    }

    pub fn score(&self, record: &[f64]) -> Result<f64> {
        self.rows.mean_distance(record, &self.inverse_ranges)
    }

    /// Scores every record of `dataset` in parallel on the current rayon pool.
    pub fn score_dataset(&self, dataset: &Dataset) -> Result<Vec<ScoredRecord>> {
        if dataset.feature_count() != self.feature_count() {
            return Err(Error::FeatureCountMismatch {
                expected: self.feature_count(),
                found: dataset.feature_count(),
            });
        }
        dataset
            .records()
            .par_iter()
            .map(|r| {
                Ok(ScoredRecord {
                    score: self.score(r.features())?,
                    label: r.label(),
                })
            })
            .collect()
    }
}

pub fn score(record: &[f64], detectors: &DetectorSet) -> Result<f64> {
    Scorer::from_detectors(detectors)?.score(record)
}

/// Legitimate iff `score < threshold`.
pub fn predict(score: f64, threshold: f64) -> Label {
    if score < threshold {
        Label::Legitimate
    } else {
        Label::Fraudulent
    }
}

pub fn classify(record: &[f64], detectors: &DetectorSet, threshold: f64) -> Result<Label> {
    Ok(predict(score(record, detectors)?, threshold))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredRecord {
    pub score: f64,
    pub label: Label,
}

/// Fraud is the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

impl Add for ConfusionMatrix {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            tn: self.tn + o.tn,
            fn_: self.fn_ + o.fn_,
        }
    }
}

pub fn confusion(scored: &[ScoredRecord], threshold: f64) -> ConfusionMatrix {
    let mut cm = ConfusionMatrix::default();
    for s in scored {
        match (s.label, predict(s.score, threshold)) {
            (Label::Fraudulent, Label::Fraudulent) => cm.tp += 1,
            (Label::Fraudulent, Label::Legitimate) => cm.fn_ += 1,
            (Label::Legitimate, Label::Fraudulent) => cm.fp += 1,
            (Label::Legitimate, Label::Legitimate) => cm.tn += 1,
        }
    }
    cm
}

/// Ratio metrics; `None` marks a zero denominator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ratios {
    pub sensitivity: Option<f64>,
    pub precision: Option<f64>,
    pub specificity: Option<f64>,
    pub accuracy: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn metrics(cm: &ConfusionMatrix) -> Ratios {
    Ratios {
        sensitivity: ratio(cm.tp, cm.tp + cm.fn_),
        precision: ratio(cm.tp, cm.tp + cm.fp),
        specificity: ratio(cm.tn, cm.fp + cm.tn),
        accuracy: ratio(cm.tp + cm.tn, cm.total()),
    }
}

/// `100 * FN + 10 * FP + TP`: a missed fraud costs 100, every alert costs
/// one verification, and a false alert also carries the customer cost.
pub fn cost(cm: &ConfusionMatrix) -> u64 {
    100 * cm.fn_ + 10 * cm.fp + cm.tp
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Records scoring at or above this value are predicted fraudulent.
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// From `(0, 0)` to `(1, 1)`, one point per distinct score.
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

impl RocCurve {
    /// Trapezoidal area under the swept curve.
    pub fn trapezoid_area(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].fpr - w[0].fpr) * (w[0].tpr + w[1].tpr) / 2.0)
            .sum()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "fpr,tpr")?;
        for p in &self.points {
            writeln!(out, "{},{}", p.fpr, p.tpr)?;
        }
        out.flush()
    }
}

fn class_counts(scored: &[ScoredRecord]) -> Result<(usize, usize)> {
    let pos = scored.iter().filter(|s| s.label.is_fraud()).count();
    let neg = scored.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::InvalidDataset(
            "ROC analysis needs both fraudulent and legitimate records".into(),
        ));
    }
    if let Some(s) = scored.iter().find(|s| !s.score.is_finite()) {
        return Err(Error::InvalidDataset(format!("non-finite score {}", s.score)));
    }
    Ok((pos, neg))
}

/// AUC as the Mann-Whitney statistic with mid-ranks: the chance a random
/// fraud outscores a random legitimate record, ties counting one half.
pub fn auc_rank(scored: &[ScoredRecord]) -> Result<f64> {
    let (pos, neg) = class_counts(scored)?;
    let scores: Vec<f64> = scored.iter().map(|s| s.score).collect();
    let ranks = crate::stats::mid_ranks(&scores);
    let rank_sum: f64 = scored
        .iter()
        .zip(&ranks)
        .filter(|(s, _)| s.label.is_fraud())
        .map(|(_, r)| r)
        .sum();
    let (pos, neg) = (pos as f64, neg as f64);
    let u = rank_sum - pos * (pos + 1.0) / 2.0;
    Ok(u / (pos * neg))
}

pub fn roc_auc(scored: &[ScoredRecord]) -> Result<RocCurve> {
    let (pos, neg) = class_counts(scored)?;
    let mut sorted: Vec<&ScoredRecord> = scored.iter().collect();
    sorted.sort_by(|a, b| b.score.total_cmp(&a.score));

    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let t = sorted[i].score;
        while i < sorted.len() && sorted[i].score == t {
            if sorted[i].label.is_fraud() {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
            threshold: t,
        });
    }
    Ok(RocCurve {
        points,
        auc: auc_rank(scored)?,
    })
}

/// Threshold maximizing `sensitivity + specificity` on `scored`, placed
/// midway between the chosen score and the next lower distinct score.
pub fn roc_threshold(scored: &[ScoredRecord]) -> Result<f64> {
    let curve = roc_auc(scored)?;
    let pts = &curve.points;
    let mut best = 0;
    for (i, p) in pts.iter().enumerate() {
        if p.tpr - p.fpr > pts[best].tpr - pts[best].fpr {
            best = i;
        }
    }
    let t = pts[best].threshold;
    if !t.is_finite() {
        // nothing beats flagging no records: sit just above the top score
        return Ok(pts[1].threshold.next_up());
    }
    Ok(match pts.get(best + 1) {
        Some(lower) => t + (lower.threshold - t) / 2.0,
        None => t,
    })
}

/// Runs `f` and returns its result with the elapsed wall time in seconds.
pub fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub sensitivity: Option<f64>,
    pub precision: Option<f64>,
    pub specificity: Option<f64>,
    pub accuracy: Option<f64>,
    pub cost: u64,
    pub auc: f64,
    /// `None` when the detectors were loaded rather than trained in this run.
    pub train_time_s: Option<f64>,
    pub test_time_s: f64,
    pub threshold: f64,
    pub confusion: ConfusionMatrix,
}

impl MetricsReport {
    pub fn new(
        cm: ConfusionMatrix,
        auc: f64,
        threshold: f64,
        train_time_s: Option<f64>,
        test_time_s: f64,
    ) -> Self {
        let r = metrics(&cm);
        Self {
            sensitivity: r.sensitivity,
            precision: r.precision,
            specificity: r.specificity,
            accuracy: r.accuracy,
            cost: cost(&cm),
            auc,
            train_time_s,
            test_time_s,
            threshold,
            confusion: cm,
        }
    }

    /// Recomputes the ratios and cost from `confusion` and compares.
    pub fn is_consistent(&self) -> bool {
        let r = metrics(&self.confusion);
        r == Ratios {
            sensitivity: self.sensitivity,
            precision: self.precision,
            specificity: self.specificity,
            accuracy: self.accuracy,
        } && cost(&self.confusion) == self.cost
            && (0.0..=1.0).contains(&self.auc)
    }
}
