//! `generate`, `train` and `evaluate`, plus the training and scoring steps
//! shared with `benchmark`.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use aro_fraud_core::aro_detector::{self, default_cut_point_grid, Calibration};
use aro_fraud_core::ais_detector::{self, Replacement};
use aro_fraud_core::dataset::{generate_split, write_csv};
use aro_fraud_core::eval::{self, confusion, roc_auc, RocCurve};
use aro_fraud_core::seeds::task_seed;
use aro_fraud_core::{
    load_csv, Algorithm, Dataset, DetectorSet, MetricsReport, Scorer, ThresholdRule, TrainStats,
};
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, ScoreAgainst};
use crate::output::Outputs;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn split_file_names(split_id: u32) -> (String, String) {
    (
        format!("split_{split_id}_train.csv"),
        format!("split_{split_id}_test.csv"),
    )
}

pub fn detectors_file_name(algorithm: Algorithm) -> String {
    format!("detectors_{algorithm}.txt")
}

/// Per-task RNG stream of an algorithm.
pub fn stream(algorithm: Algorithm) -> u32 {
    match algorithm {
        Algorithm::Aro => 0,
        Algorithm::Ais => 1,
    }
}

fn csv_bytes(dataset: &Dataset) -> anyhow::Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_csv(dataset, &mut buf)?;
    Ok(buf)
}

pub fn generate(cfg: &RunConfig) -> anyhow::Result<Outputs> {
    let pairs: Vec<_> = (1..=cfg.splits)
        .map(|id| generate_split(&cfg.generator_for(id), id).with_context(|| format!("split {id}")))
        .collect::<anyhow::Result<_>>()?;
    let mut out = Outputs::new();
    for pair in &pairs {
        let (train, test) = split_file_names(pair.split_id);
        out.add(train, csv_bytes(&pair.train)?);
        out.add(test, csv_bytes(&pair.test)?);
    }
    Ok(out)
}

/// One trained detector set.
#[derive(Clone, Debug)]
pub struct Trained {
    pub set: DetectorSet,
    pub train_time_s: f64,
    pub seed: u64,
    pub calibration: Option<Calibration>,
}

/// Trains one algorithm with the seed of task `(split_id, run_id)`.
/// `threshold` is the rule the cut-point calibration optimizes for.
pub fn train_one(
    algorithm: Algorithm,
    train: &Dataset,
    cfg: &RunConfig,
    split_id: u32,
    run_id: u32,
    threshold: ThresholdRule,
) -> anyhow::Result<Trained> {
    let seed = task_seed(cfg.seed, split_id, run_id, stream(algorithm));
    match algorithm {
        Algorithm::Aro => {
            let mut params = aro_detector::AroTrainParams {
                seed,
                ..cfg.aro.clone()
            };
            let calibration = if cfg.calibrate {
                let c = aro_detector::calibrate_cut_point(train, &params, &default_cut_point_grid(), threshold)
                    .context("calibrating the ARO cut point")?;
                params.cut_point = c.cut_point;
                Some(c)
            } else {
                None
            };
            let outcome = aro_detector::train(train, &params).context("ARO training")?;
            Ok(Trained {
                set: outcome.detectors,
                train_time_s: outcome.train_time_s,
                seed,
                calibration,
            })
        }
        Algorithm::Ais => {
            let params = ais_detector::AisParams {
                seed,
                ..cfg.ais.clone()
            };
            let outcome = ais_detector::ais_train(train, &params).context("AIS training")?;
            Ok(Trained {
                set: outcome.detectors,
                train_time_s: outcome.train_time_s,
                seed,
                calibration: None,
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainEntry {
    pub algorithm: Algorithm,
    pub detectors_file: String,
    pub detector_count: usize,
    pub seed: u64,
    pub cut_point: f64,
    pub train_time_s: f64,
    pub stats: TrainStats,
    pub calibration: Option<Calibration>,
    pub replacement: Option<Replacement>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub tool_version: String,
    pub train_file: String,
    pub records: usize,
    pub legitimate: usize,
    pub fraudulent: usize,
    pub entries: Vec<TrainEntry>,
}

pub fn train(cfg: &RunConfig, train_path: &Path) -> anyhow::Result<(Outputs, TrainReport)> {
    let data = load_csv(train_path, &cfg.csv)?;
    let mut out = Outputs::new();
    let mut entries = Vec::new();
    for algorithm in cfg.algorithm.algorithms() {
        let t = train_one(algorithm, &data, cfg, 0, 0, cfg.threshold.rule())?;
        let name = detectors_file_name(algorithm);
        let mut buf = Vec::new();
        t.set.write_to(&mut buf)?;
        out.add(name.clone(), buf);
        log::info!("{algorithm}: {} detectors in {:.3}s", t.set.len(), t.train_time_s);
        entries.push(TrainEntry {
            algorithm,
            detectors_file: name,
            detector_count: t.set.len(),
            seed: t.seed,
            cut_point: t.set.cut_point,
            train_time_s: t.train_time_s,
            stats: t.set.stats.clone(),
            calibration: t.calibration,
            replacement: (algorithm == Algorithm::Ais).then_some(cfg.ais.replacement),
        });
    }
    let report = TrainReport {
        tool_version: TOOL_VERSION.into(),
        train_file: train_path.display().to_string(),
        records: data.len(),
        legitimate: data.legit_count(),
        fraudulent: data.fraud_count(),
        entries,
    };
    out.add_json("train_report.json", &report)?;
    Ok((out, report))
}

/// Builds the scorer a detector set is evaluated with.
pub fn scorer_for(set: &DetectorSet, mode: ScoreAgainst, train: Option<&Dataset>) -> anyhow::Result<Scorer> {
    match mode {
        ScoreAgainst::Detectors => Ok(Scorer::from_detectors(set)?),
        ScoreAgainst::Raw => {
            let Some(train) = train else {
                bail!("--score-against raw needs the training split (--train)");
            };
            Ok(Scorer::new(&train.class_partition().legal, &set.bounds)?)
        }
    }
}

/// Scores `test` and summarizes it at the threshold `rule` resolves to.
pub fn evaluate_set(
    set: &DetectorSet,
    scorer: &Scorer,
    rule: ThresholdRule,
    train: Option<&Dataset>,
    test: &Dataset,
    train_time_s: Option<f64>,
) -> anyhow::Result<(MetricsReport, RocCurve)> {
    let threshold = rule.resolve(set, || match train {
        Some(t) => scorer.score_dataset(t),
        None => Err(aro_fraud_core::Error::Empty(
            "a ROC-derived threshold needs the training split",
        )),
    })?;
    let (scored, test_time_s) = eval::timed(|| scorer.score_dataset(test));
    let scored = scored?;
    let curve = roc_auc(&scored)?;
    let cm = confusion(&scored, threshold);
    Ok((
        MetricsReport::new(cm, curve.auc, threshold, train_time_s, test_time_s),
        curve,
    ))
}

pub fn evaluate(
    cfg: &RunConfig,
    detector_paths: &[PathBuf],
    test_path: &Path,
    train_path: Option<&Path>,
) -> anyhow::Result<(Outputs, Vec<(Algorithm, MetricsReport)>)> {
    let test = load_csv(test_path, &cfg.csv)?;
    let train = train_path.map(|p| load_csv(p, &cfg.csv)).transpose()?;
    let mut out = Outputs::new();
    let mut reports: Vec<(Algorithm, MetricsReport)> = Vec::new();
    for path in detector_paths {
        let set = DetectorSet::load(path)?;
        if reports.iter().any(|(a, _)| *a == set.algorithm) {
            bail!("more than one {} detector file given", set.algorithm);
        }
        let scorer = scorer_for(&set, cfg.score_against, train.as_ref())?;
        let (report, curve) =
            evaluate_set(&set, &scorer, cfg.threshold.rule(), train.as_ref(), &test, None)
                .with_context(|| format!("evaluating {}", path.display()))?;
        out.add_json(format!("metrics_{}.json", set.algorithm), &report)?;
        let mut roc = Vec::new();
        curve.write_csv(&mut roc)?;
        out.add(format!("roc_{}.csv", set.algorithm), roc);
        reports.push((set.algorithm, report));
    }
    Ok((out, reports))
}
