//! Real-valued ARO trainer that grows the identifier matrix of normal-class
//! detectors.
//!
//! A random parent is drawn inside the legal-class bounds. Each iteration
//! copies the parent into a bud, picks a gene window `S..=E`, and resamples
//! each gene in it with probability `1 / (1 + ln(E - S + 1))`. A bud whose
//! fitness strictly beats the parent replaces it and joins the identifier
//! matrix. The loop stops once the parent fitness reaches the cut point.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::detector_set::{Algorithm, DetectorSet, TrainStats};
use crate::error::{Error, Result};
use crate::eval::{self, Scorer};
use crate::fitness::{compute_bounds, FeatureBounds, FitnessContext};

pub const DEFAULT_CUT_POINT: f64 = 0.175;
pub const DEFAULT_MAX_LOOP_ITERATIONS: usize = 100_000;

/// `1 / (1 + ln(end - start + 1))` for a 1-based inclusive window of a
/// `feature_count`-gene chromosome.
pub fn mutation_probability(start: usize, end: usize, feature_count: usize) -> Result<f64> {
    if start == 0 || start > end || end > feature_count {
        return Err(Error::param(
            "window",
            format!("need 1 <= S <= E <= {feature_count}, got S={start} E={end}"),
        ));
    }
    Ok(1.0 / (1.0 + ((end - start + 1) as f64).ln()))
}

/// Value domain of sampled genes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneDomain {
    #[default]
    Continuous,
    /// Genes are integers drawn from `ceil(min)..=floor(max)`.
    Integer,
}

/// Criterion used to score the very first parent.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialFitness {
    /// Fraud distance minus normal distance, the same criterion as buds.
    #[default]
    Difference,
    /// Normal distance alone.
    NormalDistance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AroTrainParams {
    pub cut_point: f64,
    /// Per-restart safety cap on loop iterations.
    pub max_loop_iterations: usize,
    pub seed: u64,
    pub restarts: usize,
    pub gene_domain: GeneDomain,
    pub initial_fitness: InitialFitness,
    /// Keep every bud's (fraud, normal) distance pair in the outcome.
    pub record_fitting_trace: bool,
}

impl Default for AroTrainParams {
    fn default() -> Self {
        Self {
            cut_point: DEFAULT_CUT_POINT,
            max_loop_iterations: DEFAULT_MAX_LOOP_ITERATIONS,
            seed: 0,
            restarts: 1,
            gene_domain: GeneDomain::Continuous,
            initial_fitness: InitialFitness::Difference,
            record_fitting_trace: false,
        }
    }
}

impl AroTrainParams {
    pub fn validate(&self) -> Result<()> {
        if self.cut_point.is_nan() {
            return Err(Error::param("cut_point", "must not be NaN"));
        }
        if self.max_loop_iterations == 0 {
            return Err(Error::param("max_loop_iterations", "must be at least 1"));
        }
        if self.restarts == 0 {
            return Err(Error::param("restarts", "must be at least 1"));
        }
        Ok(())
    }
}

fn sample_gene<R: Rng + ?Sized>(lo: f64, hi: f64, domain: GeneDomain, rng: &mut R) -> f64 {
    match domain {
        GeneDomain::Continuous => {
            if lo == hi {
                lo
            } else {
                // u in [0, 1) keeps the value inside [lo, hi)
                lo + (hi - lo) * rng.random::<f64>()
            }
        }
        GeneDomain::Integer => {
            let (a, b) = (lo.ceil(), hi.floor());
            if a > b {
                lo
            } else {
                rng.random_range(a as i64..=b as i64) as f64
            }
        }
    }
}

/// A parent with every gene uniform within its legal bounds.
pub fn random_parent<R: Rng + ?Sized>(
    legal_bounds: &FeatureBounds,
    domain: GeneDomain,
    rng: &mut R,
) -> Vec<f64> {
    legal_bounds
        .min()
        .iter()
        .zip(legal_bounds.max())
        .map(|(&lo, &hi)| sample_gene(lo, hi, domain, rng))
        .collect()
}

/// Bud for a fixed 1-based window `start..=end`.
pub fn mutate_bud_in_window<R: Rng + ?Sized>(
    parent: &[f64],
    legal_bounds: &FeatureBounds,
    domain: GeneDomain,
    start: usize,
    end: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let p = mutation_probability(start, end, parent.len())?;
    let mut bud = parent.to_vec();
    for i in start - 1..end {
        if p >= rng.random::<f64>() {
            bud[i] = sample_gene(legal_bounds.min()[i], legal_bounds.max()[i], domain, rng);
        }
    }
    Ok(bud)
}

/// Draws `S` uniform in `1..=k` and `E` uniform in `S..=k`, then mutates.
pub fn mutate_bud<R: Rng + ?Sized>(
    parent: &[f64],
    legal_bounds: &FeatureBounds,
    domain: GeneDomain,
    rng: &mut R,
) -> Vec<f64> {
    let k = parent.len();
    let start = rng.random_range(1..=k);
    let end = rng.random_range(start..=k);
    mutate_bud_in_window(parent, legal_bounds, domain, start, end, rng)
        .expect("window drawn within 1..=k")
}

/// A replacement event: the bud at `iteration` became the parent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Replacement {
    pub restart: usize,
    pub iteration: usize,
    pub fitness: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AroOutcome {
    pub detectors: DetectorSet,
    /// Parent fitness at the start of each restart and after every replacement.
    pub parent_trace: Vec<Replacement>,
    /// `(fraud_distance, normal_distance)` of every evaluated bud, when requested.
    pub fitting_trace: Vec<(f64, f64)>,
    pub train_time_s: f64,
}

/// Trains on `train`: full-split bounds normalize distances, legal-class
/// bounds bound the sampled genes.
pub fn train(train: &Dataset, params: &AroTrainParams) -> Result<AroOutcome> {
    let (ctx, legal_bounds) = training_context(train)?;
    train_with_context(&ctx, &legal_bounds, params)
}

/// Fitness context over the whole split plus the legal-class gene bounds.
pub fn training_context(train: &Dataset) -> Result<(FitnessContext, FeatureBounds)> {
    let part = train.class_partition();
    if part.fraud.is_empty() {
        return Err(Error::MissingClass("fraudulent"));
    }
    if part.legal.is_empty() {
        return Err(Error::MissingClass("legitimate"));
    }
    let legal_bounds = compute_bounds(&part.legal)?;
    let ctx = FitnessContext::from_dataset(train)?;
    Ok((ctx, legal_bounds))
}

pub fn train_with_context(
    ctx: &FitnessContext,
    legal_bounds: &FeatureBounds,
    params: &AroTrainParams,
) -> Result<AroOutcome> {
    params.validate()?;
    if legal_bounds.feature_count() != ctx.feature_count() {
        return Err(Error::FeatureCountMismatch {
            expected: ctx.feature_count(),
            found: legal_bounds.feature_count(),
        });
    }
    let (result, train_time_s) = eval::timed(|| run(ctx, legal_bounds, params));
    let (detectors, parent_trace, fitting_trace) = result?;
    Ok(AroOutcome {
        detectors,
        parent_trace,
        fitting_trace,
        train_time_s,
    })
}

type RunOutput = (DetectorSet, Vec<Replacement>, Vec<(f64, f64)>);

fn run(ctx: &FitnessContext, legal_bounds: &FeatureBounds, params: &AroTrainParams) -> Result<RunOutput> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut detectors = Vec::new();
    let mut parent_trace = Vec::new();
    let mut fitting_trace = Vec::new();
    let mut iterations = 0;
    let mut accepted = 0;
    let mut best_final = f64::NEG_INFINITY;
    let mut reached = true;

    for restart in 0..params.restarts {
        let mut parent = random_parent(legal_bounds, params.gene_domain, &mut rng);
        let mut parent_fit = match params.initial_fitness {
            InitialFitness::Difference => ctx.fitness(&parent)?,
            InitialFitness::NormalDistance => ctx.normal_distance(&parent)?,
        };
        detectors.push(parent.clone());
        parent_trace.push(Replacement {
            restart,
            iteration: 0,
            fitness: parent_fit,
        });

        let mut it = 0;
        while parent_fit < params.cut_point && it < params.max_loop_iterations {
            it += 1;
            let bud = mutate_bud(&parent, legal_bounds, params.gene_domain, &mut rng);
            let (fraud, normal) = ctx.distances(&bud)?;
            if params.record_fitting_trace {
                fitting_trace.push((fraud, normal));
            }
            let bud_fit = fraud - normal;
            if bud_fit > parent_fit {
                parent = bud;
                parent_fit = bud_fit;
                detectors.push(parent.clone());
                accepted += 1;
                parent_trace.push(Replacement {
                    restart,
                    iteration: it,
                    fitness: parent_fit,
                });
            }
        }
        iterations += it;
        if parent_fit < params.cut_point {
            reached = false;
            log::warn!(
                "ARO restart {restart}: safety cap of {} iterations hit at fitness {parent_fit:.6} (cut point {})",
                params.max_loop_iterations,
                params.cut_point
            );
        }
        best_final = best_final.max(parent_fit);
    }
    log::debug!("ARO: {iterations} iterations, {accepted} buds accepted, final fitness {best_final:.6}");

    let set = DetectorSet {
        algorithm: Algorithm::Aro,
        detectors,
        bounds: ctx.bounds().clone(),
        cut_point: params.cut_point,
        stats: TrainStats {
            iterations,
            accepted,
            final_fitness: best_final,
            reached_cut_point: reached,
        },
    };
    Ok((set, parent_trace, fitting_trace))
}

/// How the classification threshold is chosen when a detector set is evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdRule {
    /// The detector set's training cut point.
    #[default]
    CutPoint,
    /// The ROC point maximizing sensitivity + specificity on the training split.
    Roc,
    Fixed(f64),
}

impl ThresholdRule {
    /// Resolves the rule; `train_scores` is only scored when the rule needs it.
    pub fn resolve(
        &self,
        set: &DetectorSet,
        train_scores: impl FnOnce() -> Result<Vec<eval::ScoredRecord>>,
    ) -> Result<f64> {
        match *self {
            ThresholdRule::CutPoint => Ok(set.cut_point),
            ThresholdRule::Fixed(t) => Ok(t),
            ThresholdRule::Roc => eval::roc_threshold(&train_scores()?),
        }
    }
}

/// Evenly spaced candidates from 0.15 to 0.20 in steps of 0.005.
pub fn default_cut_point_grid() -> Vec<f64> {
    (0..=10).map(|i| (150 + 5 * i) as f64 / 1000.0).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub cut_point: f64,
    /// `(candidate, training cost)` for every grid entry.
    pub costs: Vec<(f64, u64)>,
}

/// Trains once per candidate and keeps the one with the lowest training-split
/// cost, ties going to the smaller candidate.
pub fn calibrate_cut_point(
    train: &Dataset,
    base: &AroTrainParams,
    grid: &[f64],
    threshold: ThresholdRule,
) -> Result<Calibration> {
    if grid.is_empty() {
        return Err(Error::param("grid", "must contain at least one candidate"));
    }
    let (ctx, legal_bounds) = training_context(train)?;
    let mut costs = Vec::with_capacity(grid.len());
    for &candidate in grid {
        let params = AroTrainParams {
            cut_point: candidate,
            ..base.clone()
        };
        let outcome = train_with_context(&ctx, &legal_bounds, &params)?;
        let scorer = Scorer::from_detectors(&outcome.detectors)?;
        let scored = scorer.score_dataset(train)?;
        let t = threshold.resolve(&outcome.detectors, || Ok(scored.clone()))?;
        let c = eval::cost(&eval::confusion(&scored, t));
        log::debug!("calibration: cut point {candidate} -> training cost {c}");
        costs.push((candidate, c));
    }
    let best = costs
        .iter()
        .copied()
        .min_by(|a, b| a.1.cmp(&b.1).then(a.0.total_cmp(&b.0)))
        .expect("grid is non-empty");
    Ok(Calibration {
        cut_point: best.0,
        costs,
    })
}
