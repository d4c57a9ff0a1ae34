//! Repeated train/evaluate runs over every split, best-cost selection,
//! averages and the nonparametric comparisons.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::Context;
use aro_fraud_core::dataset::generate_split;
use aro_fraud_core::stats::{kruskal_wallis, wilcoxon_signed_rank};
use aro_fraud_core::{load_csv, Algorithm, Dataset, MetricsReport, TestResult, TrainStats};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::commands::{evaluate_set, scorer_for, split_file_names, train_one, TOOL_VERSION};
use crate::config::{KwGroups, RunConfig};
use crate::output::Outputs;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Sensitivity,
    Precision,
    Specificity,
    Accuracy,
    Cost,
    Auc,
    TrainTimeS,
    TestTimeS,
}

impl Metric {
    pub const ALL: [Metric; 8] = [
        Metric::Sensitivity,
        Metric::Precision,
        Metric::Specificity,
        Metric::Accuracy,
        Metric::Cost,
        Metric::Auc,
        Metric::TrainTimeS,
        Metric::TestTimeS,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Sensitivity => "sensitivity",
            Metric::Precision => "precision",
            Metric::Specificity => "specificity",
            Metric::Accuracy => "accuracy",
            Metric::Cost => "cost",
            Metric::Auc => "auc",
            Metric::TrainTimeS => "train_time_s",
            Metric::TestTimeS => "test_time_s",
        }
    }

    /// `None` for an undefined ratio.
    pub fn value(self, m: &MetricsReport) -> Option<f64> {
        match self {
            Metric::Sensitivity => m.sensitivity,
            Metric::Precision => m.precision,
            Metric::Specificity => m.specificity,
            Metric::Accuracy => m.accuracy,
            Metric::Cost => Some(m.cost as f64),
            Metric::Auc => Some(m.auc),
            Metric::TrainTimeS => m.train_time_s,
            Metric::TestTimeS => Some(m.test_time_s),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: u32,
    pub seed: u64,
    pub detector_count: usize,
    pub cut_point: f64,
    pub stats: TrainStats,
    pub metrics: MetricsReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmResult {
    pub algorithm: Algorithm,
    /// Run with the lowest cost; ties go to the lower run id.
    pub best_run: u32,
    pub best: MetricsReport,
    pub runs: Vec<RunRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitResult {
    pub split_id: u32,
    pub train_legitimate: usize,
    pub train_fraudulent: usize,
    pub test_legitimate: usize,
    pub test_fraudulent: usize,
    pub results: Vec<AlgorithmResult>,
}

impl SplitResult {
    pub fn result(&self, algorithm: Algorithm) -> Option<&AlgorithmResult> {
        self.results.iter().find(|r| r.algorithm == algorithm)
    }
}

/// Mean of the defined values; `None` when there are none.
pub fn mean_defined(values: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.into_iter().flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AverageRow {
    pub algorithm: Algorithm,
    /// Means over the best-cost run of each split.
    pub best: BTreeMap<Metric, Option<f64>>,
    /// Means over every run of every split.
    pub all_runs: BTreeMap<Metric, Option<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatTest {
    Wilcoxon,
    KruskalWallis,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatEntry {
    pub test: StatTest,
    pub metric: Metric,
    /// Set for Kruskal-Wallis, which compares the splits of one algorithm.
    pub algorithm: Option<Algorithm>,
    pub result: Option<TestResult>,
    /// Why `result` is missing.
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub config: RunConfig,
    pub algorithms: Vec<Algorithm>,
    pub splits: Vec<SplitResult>,
    pub averages: Vec<AverageRow>,
    pub kw_groups: KwGroups,
    pub tests: Vec<StatEntry>,
}

pub fn averages(splits: &[SplitResult], algorithms: &[Algorithm]) -> Vec<AverageRow> {
    algorithms
        .iter()
        .map(|&alg| {
            let results: Vec<&AlgorithmResult> = splits.iter().filter_map(|s| s.result(alg)).collect();
            let best = Metric::ALL
                .iter()
                .map(|&m| (m, mean_defined(results.iter().map(|r| m.value(&r.best)))))
                .collect();
            let all_runs = Metric::ALL
                .iter()
                .map(|&m| {
                    let vals = results.iter().flat_map(|r| r.runs.iter().map(move |run| m.value(&run.metrics)));
                    (m, mean_defined(vals))
                })
                .collect();
            AverageRow {
                algorithm: alg,
                best,
                all_runs,
            }
        })
        .collect()
}

/// Wilcoxon of ARO against AIS per metric over the best-cost runs, and
/// Kruskal-Wallis across splits per algorithm and metric.
pub fn compute_tests(splits: &[SplitResult], algorithms: &[Algorithm], groups: KwGroups) -> Vec<StatEntry> {
    let mut tests = Vec::new();
    let both = algorithms.contains(&Algorithm::Aro) && algorithms.contains(&Algorithm::Ais);
    if both {
        for m in Metric::ALL {
            let (mut a, mut b) = (Vec::new(), Vec::new());
            for s in splits {
                let x = s.result(Algorithm::Aro).and_then(|r| m.value(&r.best));
                let y = s.result(Algorithm::Ais).and_then(|r| m.value(&r.best));
                if let (Some(x), Some(y)) = (x, y) {
                    a.push(x);
                    b.push(y);
                }
            }
            let (result, note) = match wilcoxon_signed_rank(&a, &b) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            tests.push(StatEntry {
                test: StatTest::Wilcoxon,
                metric: m,
                algorithm: None,
                result,
                note,
            });
        }
    }
    for &alg in algorithms {
        for m in Metric::ALL {
            let g: Vec<Vec<f64>> = splits
                .iter()
                .filter_map(|s| s.result(alg))
                .map(|r| match groups {
                    KwGroups::Best => m.value(&r.best).into_iter().collect(),
                    KwGroups::Runs => r.runs.iter().filter_map(|run| m.value(&run.metrics)).collect(),
                })
                .filter(|g: &Vec<f64>| !g.is_empty())
                .collect();
            let (result, note) = match kruskal_wallis(&g) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            tests.push(StatEntry {
                test: StatTest::KruskalWallis,
                metric: m,
                algorithm: Some(alg),
                result,
                note,
            });
        }
    }
    tests
}

fn load_or_generate(cfg: &RunConfig, data: Option<&Path>, split_id: u32) -> anyhow::Result<(Dataset, Dataset)> {
    match data {
        Some(dir) => {
            let (train, test) = split_file_names(split_id);
            let train = load_csv(dir.join(train), &cfg.csv)?;
            let test = load_csv(dir.join(test), &cfg.csv)?;
            if train.feature_count() != test.feature_count() {
                anyhow::bail!(
                    "train has {} features, test has {}",
                    train.feature_count(),
                    test.feature_count()
                );
            }
            Ok((train, test))
        }
        None => {
            let pair = generate_split(&cfg.generator_for(split_id), split_id)?;
            Ok((pair.train, pair.test))
        }
    }
}

fn run_task(
    cfg: &RunConfig,
    algorithm: Algorithm,
    run_id: u32,
    split_id: u32,
    train: &Dataset,
    test: &Dataset,
) -> anyhow::Result<RunRecord> {
    let rule = cfg.benchmark_threshold.rule();
    let t = train_one(algorithm, train, cfg, split_id, run_id, rule)?;
    let scorer = scorer_for(&t.set, cfg.score_against, Some(train))?;
    let (metrics, _) = evaluate_set(&t.set, &scorer, rule, Some(train), test, Some(t.train_time_s))?;
    Ok(RunRecord {
        run_id,
        seed: t.seed,
        detector_count: t.set.len(),
        cut_point: t.set.cut_point,
        stats: t.set.stats,
        metrics,
    })
}

pub fn benchmark(cfg: &RunConfig, data: Option<&Path>) -> anyhow::Result<(Outputs, BenchmarkReport)> {
    let algorithms = cfg.algorithm.algorithms();
    let ids: Vec<u32> = (1..=cfg.splits).collect();
    let datasets: Vec<(Dataset, Dataset)> = ids
        .par_iter()
        .map(|&id| load_or_generate(cfg, data, id).with_context(|| format!("split {id}")))
        .collect::<anyhow::Result<_>>()?;

    let tasks: Vec<(usize, Algorithm, u32)> = (0..ids.len())
        .flat_map(|i| {
            algorithms
                .iter()
                .flat_map(move |&a| (0..cfg.runs).map(move |r| (i, a, r)))
        })
        .collect();
    let records: Vec<RunRecord> = tasks
        .par_iter()
        .map(|&(i, alg, run)| {
            let (train, test) = &datasets[i];
            run_task(cfg, alg, run, ids[i], train, test)
                .with_context(|| format!("split {} ({alg}, run {run})", ids[i]))
        })
        .collect::<anyhow::Result<_>>()?;

    let mut records = records.into_iter();
    let mut splits = Vec::with_capacity(ids.len());
    for (i, &split_id) in ids.iter().enumerate() {
        let (train, test) = &datasets[i];
        let mut results = Vec::new();
        for &alg in &algorithms {
            let runs: Vec<RunRecord> = records.by_ref().take(cfg.runs as usize).collect();
            let best = runs
                .iter()
                .min_by(|a, b| a.metrics.cost.cmp(&b.metrics.cost).then(a.run_id.cmp(&b.run_id)))
                .expect("runs >= 1");
            results.push(AlgorithmResult {
                algorithm: alg,
                best_run: best.run_id,
                best: best.metrics.clone(),
                runs,
            });
        }
        splits.push(SplitResult {
            split_id,
            train_legitimate: train.legit_count(),
            train_fraudulent: train.fraud_count(),
            test_legitimate: test.legit_count(),
            test_fraudulent: test.fraud_count(),
            results,
        });
    }

    let report = BenchmarkReport {
        schema_version: SCHEMA_VERSION,
        tool_version: TOOL_VERSION.into(),
        config: cfg.clone(),
        averages: averages(&splits, &algorithms),
        tests: compute_tests(&splits, &algorithms, cfg.kw_groups),
        kw_groups: cfg.kw_groups,
        algorithms,
        splits,
    };
    let mut out = Outputs::new();
    out.add_json("benchmark_report.json", &report)?;
    for &alg in &report.algorithms {
        out.add(format!("table_{alg}.csv"), table_csv(&report, alg).into_bytes());
    }
    out.add("tests.csv", tests_csv(&report.tests).into_bytes());
    Ok((out, report))
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Best-cost metrics per split plus the average row.
pub fn table_csv(report: &BenchmarkReport, alg: Algorithm) -> String {
    let mut s = String::from("split");
    for m in Metric::ALL {
        s.push(',');
        s.push_str(m.name());
    }
    s.push('\n');
    for split in &report.splits {
        if let Some(r) = split.result(alg) {
            s.push_str(&split.split_id.to_string());
            for m in Metric::ALL {
                s.push(',');
                s.push_str(&cell(m.value(&r.best)));
            }
            s.push('\n');
        }
    }
    if let Some(avg) = report.averages.iter().find(|a| a.algorithm == alg) {
        s.push_str("average");
        for m in Metric::ALL {
            s.push(',');
            s.push_str(&cell(avg.best.get(&m).copied().flatten()));
        }
        s.push('\n');
    }
    s
}

pub fn tests_csv(tests: &[StatEntry]) -> String {
    let mut s = String::from("test,algorithm,metric,statistic,df,z,p_value,exact_p_value,note\n");
    for t in tests {
        let test = match t.test {
            StatTest::Wilcoxon => "wilcoxon",
            StatTest::KruskalWallis => "kruskal-wallis",
        };
        let alg = t.algorithm.map(|a| a.to_string()).unwrap_or_default();
        let r = t.result.as_ref();
        let _ = writeln!(
            s,
            "{test},{alg},{},{},{},{},{},{},{}",
            t.metric.name(),
            cell(r.map(|r| r.statistic)),
            r.and_then(|r| r.df).map(|d| d.to_string()).unwrap_or_default(),
            cell(r.and_then(|r| r.z)),
            cell(r.map(|r| r.p_value)),
            cell(r.and_then(|r| r.exact_p_value)),
            t.note.as_deref().unwrap_or("").replace(',', ";"),
        );
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsOutput {
    pub kw_groups: KwGroups,
    pub tests: Vec<StatEntry>,
    /// Whether the recomputed tests equal those stored in the report; `None`
    /// when a different grouping was requested.
    pub matches_embedded: Option<bool>,
}

pub fn stats(report_path: &Path, groups: Option<KwGroups>) -> anyhow::Result<(Outputs, StatsOutput)> {
    let text = std::fs::read_to_string(report_path)
        .with_context(|| format!("reading {}", report_path.display()))?;
    let report: BenchmarkReport = serde_json::from_str(&text)
        .with_context(|| format!("malformed benchmark report {}", report_path.display()))?;
    if report.schema_version != SCHEMA_VERSION {
        anyhow::bail!(
            "unsupported report schema version {} (expected {SCHEMA_VERSION})",
            report.schema_version
        );
    }
    let kw_groups = groups.unwrap_or(report.kw_groups);
    let tests = compute_tests(&report.splits, &report.algorithms, kw_groups);
    let matches_embedded = (kw_groups == report.kw_groups).then(|| tests == report.tests);
    let output = StatsOutput {
        kw_groups,
        tests,
        matches_embedded,
    };
    let mut out = Outputs::new();
    out.add_json("stats.json", &output)?;
    Ok((out, output))
}

#[cfg(test)]
mod tests {
    use super::*;
    use aro_fraud_core::ConfusionMatrix;

    fn metrics(tp: u64, fp: u64, auc: f64, train: f64) -> MetricsReport {
        let cm = ConfusionMatrix { tp, fp, tn: 100 - fp, fn_: 10 - tp };
        MetricsReport::new(cm, auc, 0.2, Some(train), 0.01)
    }

    fn run(run_id: u32, m: MetricsReport) -> RunRecord {
        RunRecord {
            run_id,
            seed: 0,
            detector_count: 3,
            cut_point: 0.175,
            stats: TrainStats {
                iterations: 10,
                accepted: 2,
                final_fitness: 0.18,
                reached_cut_point: true,
            },
            metrics: m,
        }
    }

    fn split(id: u32, aro: f64, ais: f64) -> SplitResult {
        let mk = |alg, train| AlgorithmResult {
            algorithm: alg,
            best_run: 0,
            best: metrics(9, id as u64, 0.9, train),
            runs: vec![run(0, metrics(9, id as u64, 0.9, train)), run(1, metrics(8, 3, 0.8, train + 1.0))],
        };
        SplitResult {
            split_id: id,
            train_legitimate: 100,
            train_fraudulent: 10,
            test_legitimate: 100,
            test_fraudulent: 10,
            results: vec![mk(Algorithm::Aro, aro), mk(Algorithm::Ais, ais)],
        }
    }

    #[test]
    fn averages_are_means_of_defined_values() {
        let splits: Vec<_> = (1..=9).map(|i| split(i, i as f64, 10.0 + i as f64)).collect();
        let avg = averages(&splits, &[Algorithm::Aro, Algorithm::Ais]);
        assert_eq!(avg[0].best[&Metric::TrainTimeS], Some(5.0));
        assert_eq!(avg[1].best[&Metric::TrainTimeS], Some(15.0));
        assert_eq!(avg[0].all_runs[&Metric::TrainTimeS], Some(5.5));
        assert_eq!(mean_defined([None, Some(1.0), Some(2.0)]), Some(1.5));
        assert_eq!(mean_defined([None]), None);
    }

    #[test]
    fn train_time_wilcoxon_and_singleton_kruskal_wallis() {
        let splits: Vec<_> = (1..=9).map(|i| split(i, i as f64, 10.0 + 2.0 * i as f64)).collect();
        let algs = [Algorithm::Aro, Algorithm::Ais];
        let tests = compute_tests(&splits, &algs, KwGroups::Best);
        let w = tests
            .iter()
            .find(|t| t.test == StatTest::Wilcoxon && t.metric == Metric::TrainTimeS)
            .unwrap();
        let r = w.result.as_ref().unwrap();
        assert!((r.p_value - 0.008).abs() < 0.001, "{}", r.p_value);
        // both algorithms share every AUC, so all differences are zero
        let spec = tests
            .iter()
            .find(|t| t.test == StatTest::Wilcoxon && t.metric == Metric::Auc)
            .unwrap();
        assert!(spec.result.is_none() && spec.note.is_some());
        let kw = tests
            .iter()
            .find(|t| {
                t.test == StatTest::KruskalWallis
                    && t.metric == Metric::TrainTimeS
                    && t.algorithm == Some(Algorithm::Aro)
            })
            .unwrap();
        let r = kw.result.as_ref().unwrap();
        assert_eq!(r.statistic, 8.0);
        assert_eq!(r.df, Some(8));
        assert!((r.p_value - 0.433).abs() < 0.001);
    }

    #[test]
    fn tables_have_one_row_per_split_plus_average() {
        let splits: Vec<_> = (1..=3).map(|i| split(i, 1.0, 2.0)).collect();
        let algorithms = vec![Algorithm::Aro, Algorithm::Ais];
        let report = BenchmarkReport {
            schema_version: SCHEMA_VERSION,
            tool_version: TOOL_VERSION.into(),
            config: RunConfig::default(),
            averages: averages(&splits, &algorithms),
            tests: compute_tests(&splits, &algorithms, KwGroups::Runs),
            kw_groups: KwGroups::Runs,
            algorithms,
            splits,
        };
        let t = table_csv(&report, Algorithm::Aro);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(lines[0].starts_with("split,sensitivity"));
        assert!(lines[4].starts_with("average,0.9,"));
        let json = serde_json::to_string(&report).unwrap();
        let back: BenchmarkReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
        assert!(tests_csv(&report.tests).lines().count() > 1);
    }
}
