//! Run configuration: built-in defaults, overridden by a TOML file, overridden
//! by command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use aro_fraud_core::ais_detector::Replacement;
use aro_fraud_core::{AisParams, Algorithm, AroTrainParams, CsvSchema, GeneratorConfig, ThresholdRule};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::args::{GeneratorFlags, ScoringFlags, TrainFlags};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum AlgorithmChoice {
    Aro,
    Ais,
    Both,
}

impl AlgorithmChoice {
    pub fn algorithms(self) -> Vec<Algorithm> {
        match self {
            AlgorithmChoice::Aro => vec![Algorithm::Aro],
            AlgorithmChoice::Ais => vec![Algorithm::Ais],
            AlgorithmChoice::Both => vec![Algorithm::Aro, Algorithm::Ais],
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ScoreAgainst {
    /// The legitimate records of the training split.
    Raw,
    #[default]
    Detectors,
}

/// Kruskal-Wallis grouping across splits.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum KwGroups {
    /// One group per split holding every repeat run's value.
    #[default]
    Runs,
    /// One single-value group per split holding the best-cost run's value.
    Best,
}

/// Threshold selector as written on the command line or in the config file.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ThresholdSpec {
    CutPoint,
    Roc,
    Fixed(f64),
}

impl ThresholdSpec {
    pub fn rule(self) -> ThresholdRule {
        match self {
            ThresholdSpec::CutPoint => ThresholdRule::CutPoint,
            ThresholdSpec::Roc => ThresholdRule::Roc,
            ThresholdSpec::Fixed(t) => ThresholdRule::Fixed(t),
        }
    }
}

impl FromStr for ThresholdSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "cut-point" => Ok(ThresholdSpec::CutPoint),
            "roc" => Ok(ThresholdSpec::Roc),
            other => match other.parse::<f64>() {
                Ok(t) if t.is_finite() => Ok(ThresholdSpec::Fixed(t)),
                _ => Err(format!("expected `cut-point`, `roc` or a finite number, got {other:?}")),
            },
        }
    }
}

impl fmt::Display for ThresholdSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThresholdSpec::CutPoint => f.write_str("cut-point"),
            ThresholdSpec::Roc => f.write_str("roc"),
            ThresholdSpec::Fixed(t) => write!(f, "{t}"),
        }
    }
}

impl Serialize for ThresholdSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ThresholdSpec::Fixed(t) => s.serialize_f64(*t),
            other => s.serialize_str(&other.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for ThresholdSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(t) => Ok(ThresholdSpec::Fixed(t)),
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Effective configuration of one invocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub parallelism: usize,
    pub algorithm: AlgorithmChoice,
    pub splits: u32,
    pub reference_counts: bool,
    pub runs: u32,
    pub calibrate: bool,
    /// Threshold used by `evaluate`.
    pub threshold: ThresholdSpec,
    /// Threshold used inside `benchmark`.
    pub benchmark_threshold: ThresholdSpec,
    pub score_against: ScoreAgainst,
    pub kw_groups: KwGroups,
    pub generator: GeneratorConfig,
    pub aro: AroTrainParams,
    pub ais: AisParams,
    pub csv: CsvSchema,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            parallelism: 1,
            algorithm: AlgorithmChoice::Both,
            splits: 9,
            reference_counts: false,
            runs: 3,
            calibrate: false,
            threshold: ThresholdSpec::CutPoint,
            benchmark_threshold: ThresholdSpec::Roc,
            score_against: ScoreAgainst::Detectors,
            kw_groups: KwGroups::Runs,
            generator: GeneratorConfig::default(),
            aro: AroTrainParams::default(),
            ais: AisParams::default(),
            csv: CsvSchema::default(),
        }
    }
}

/// The config file: every key optional.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    out: Option<PathBuf>,
    parallelism: Option<usize>,
    algorithm: Option<AlgorithmChoice>,
    splits: Option<u32>,
    reference_counts: Option<bool>,
    runs: Option<u32>,
    calibrate: Option<bool>,
    threshold: Option<ThresholdSpec>,
    benchmark_threshold: Option<ThresholdSpec>,
    score_against: Option<ScoreAgainst>,
    kw_groups: Option<KwGroups>,
    generator: Option<GeneratorConfig>,
    aro: Option<AroTrainParams>,
    ais: Option<AisParams>,
    csv: Option<CsvSchema>,
}

/// Flags that may override the file, collected from whichever subcommand ran.
#[derive(Debug, Default)]
pub struct Overrides<'a> {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub parallelism: Option<u32>,
    pub generator: Option<&'a GeneratorFlags>,
    pub train: Option<&'a TrainFlags>,
    pub scoring: Option<&'a ScoringFlags>,
    pub runs: Option<u32>,
    pub kw_groups: Option<KwGroups>,
    /// Which threshold field `scoring.threshold` sets.
    pub benchmark: bool,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let file: FileConfig = toml::from_str(text)?;
        let d = RunConfig::default();
        Ok(Self {
            seed: file.seed.unwrap_or(d.seed),
            out: file.out.unwrap_or(d.out),
            parallelism: file.parallelism.unwrap_or(d.parallelism),
            algorithm: file.algorithm.unwrap_or(d.algorithm),
            splits: file.splits.unwrap_or(d.splits),
            reference_counts: file.reference_counts.unwrap_or(d.reference_counts),
            runs: file.runs.unwrap_or(d.runs),
            calibrate: file.calibrate.unwrap_or(d.calibrate),
            threshold: file.threshold.unwrap_or(d.threshold),
            benchmark_threshold: file.benchmark_threshold.unwrap_or(d.benchmark_threshold),
            score_against: file.score_against.unwrap_or(d.score_against),
            kw_groups: file.kw_groups.unwrap_or(d.kw_groups),
            generator: file.generator.unwrap_or(d.generator),
            aro: file.aro.unwrap_or(d.aro),
            ais: file.ais.unwrap_or(d.ais),
            csv: file.csv.unwrap_or(d.csv),
        })
    }

    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config file {}", p.display()))?;
                Self::from_toml(&text).with_context(|| format!("parsing config file {}", p.display()))
            }
        }
    }

    pub fn apply(&mut self, o: &Overrides<'_>) {
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = &o.out {
            self.out = v.clone();
        }
        if let Some(v) = o.parallelism {
            self.parallelism = v as usize;
        }
        if let Some(v) = o.runs {
            self.runs = v;
        }
        if let Some(v) = o.kw_groups {
            self.kw_groups = v;
        }
        if let Some(g) = o.generator {
            if let Some(v) = g.splits {
                self.splits = v;
            }
            if g.reference_counts {
                self.reference_counts = true;
            }
            if let Some(v) = g.feature_count {
                self.generator.feature_count = v;
            }
            if let Some(v) = g.class_separation {
                self.generator.class_separation = v;
            }
            if let Some(v) = g.noise_scale {
                self.generator.noise_scale = v;
            }
        }
        if let Some(t) = o.train {
            if let Some(v) = t.algorithm {
                self.algorithm = v;
            }
            if let Some(v) = t.cut_point {
                self.aro.cut_point = v;
                self.ais.cut_point = v;
            }
            if t.calibrate {
                self.calibrate = true;
            }
            if let Some(v) = t.max_iters {
                self.aro.max_loop_iterations = usize::try_from(v).unwrap_or(usize::MAX);
            }
            if t.ais_faithful {
                self.ais.replacement = Replacement::Unconditional;
            }
        }
        if let Some(s) = o.scoring {
            if let Some(v) = s.score_against {
                self.score_against = v;
            }
            if let Some(v) = s.threshold {
                if o.benchmark {
                    self.benchmark_threshold = v;
                } else {
                    self.threshold = v;
                }
            }
        }
        // one seed drives everything; section-level seeds are derived per task
        self.generator.seed = self.seed;
    }

    /// Checks every field before any work starts.
    pub fn validate(&self) -> anyhow::Result<()> {
        if self.parallelism == 0 {
            bail!("config field `parallelism`: must be at least 1");
        }
        if self.splits == 0 {
            bail!("config field `splits`: must be at least 1");
        }
        if self.reference_counts && self.splits > 9 {
            bail!("config field `splits`: reference class counts exist for splits 1..=9 only");
        }
        if self.runs == 0 {
            bail!("config field `runs`: must be at least 1");
        }
        for (name, spec) in [("threshold", self.threshold), ("benchmark_threshold", self.benchmark_threshold)] {
            if let ThresholdSpec::Fixed(t) = spec {
                if !t.is_finite() {
                    bail!("config field `{name}`: must be finite");
                }
            }
        }
        self.generator
            .validate()
            .map_err(|e| anyhow::anyhow!("config section `generator`: {e}"))?;
        self.aro
            .validate()
            .map_err(|e| anyhow::anyhow!("config section `aro`: {e}"))?;
        self.ais
            .validate()
            .map_err(|e| anyhow::anyhow!("config section `ais`: {e}"))?;
        Ok(())
    }

    /// Generator settings for one split id.
    pub fn generator_for(&self, split_id: u32) -> GeneratorConfig {
        if !self.reference_counts {
            return self.generator.clone();
        }
        let counts = GeneratorConfig::reference_split(split_id).expect("validated split id");
        GeneratorConfig {
            train_legit: counts.train_legit,
            train_fraud: counts.train_fraud,
            test_legit: counts.test_legit,
            test_fraud: counts.test_fraud,
            ..self.generator.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_spec_parses() {
        assert_eq!("roc".parse::<ThresholdSpec>().unwrap(), ThresholdSpec::Roc);
        assert_eq!("cut-point".parse::<ThresholdSpec>().unwrap(), ThresholdSpec::CutPoint);
        assert_eq!("0.25".parse::<ThresholdSpec>().unwrap(), ThresholdSpec::Fixed(0.25));
        assert!("inf".parse::<ThresholdSpec>().is_err());
        assert!("median".parse::<ThresholdSpec>().is_err());
    }

    #[test]
    fn file_overrides_defaults_and_flags_override_file() {
        let mut cfg = RunConfig::from_toml(
            "seed = 5\nruns = 7\nthreshold = 0.3\n[aro]\ncut_point = 0.19\n[generator]\nclass_separation = 2.5\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.runs, 7);
        assert_eq!(cfg.threshold, ThresholdSpec::Fixed(0.3));
        assert_eq!(cfg.aro.cut_point, 0.19);
        assert_eq!(cfg.aro.max_loop_iterations, 100_000);
        assert_eq!(cfg.generator.class_separation, 2.5);
        assert_eq!(cfg.splits, 9);

        let train = TrainFlags {
            cut_point: Some(0.18),
            ..TrainFlags::default()
        };
        cfg.apply(&Overrides {
            seed: Some(9),
            train: Some(&train),
            ..Overrides::default()
        });
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.generator.seed, 9);
        assert_eq!(cfg.aro.cut_point, 0.18);
        assert_eq!(cfg.runs, 7);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(RunConfig::from_toml("sede = 1\n").is_err());
        assert!(RunConfig::from_toml("[aro]\ncutpoint = 0.2\n").is_err());
        let cfg = RunConfig::from_toml("runs = 0\n").unwrap();
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("`runs`"), "{err}");
        let cfg = RunConfig::from_toml("[ais]\nn_m = 9\n").unwrap();
        assert!(cfg.validate().unwrap_err().to_string().contains("`ais`"));
    }

    #[test]
    fn reference_counts_follow_split_id() {
        let cfg = RunConfig {
            reference_counts: true,
            ..RunConfig::default()
        };
        let g = cfg.generator_for(1);
        assert_eq!((g.train_legit, g.train_fraud), (27_904, 1_084));
        assert_ne!(cfg.generator_for(2), g);
    }
}
