//! Clonal-selection AIS baseline.
//!
//! Every iteration samples `n_pop` legitimate training records, keeps the
//! `n_c` with the highest affinity, expands a colony in which rank `ρ`
//! receives `max(1, round(clone_factor * n_c / ρ))` clones, mutates the
//! colony, and offers the `n_m` best mutants to the memory pool in place of
//! its worst cells. After the last iteration the memory cells are the
//! detectors.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::aro_detector::{training_context, DEFAULT_CUT_POINT};
use crate::dataset::Dataset;
use crate::detector_set::{Algorithm, DetectorSet, TrainStats};
use crate::error::{Error, Result};
use crate::eval;
use crate::fitness::{FeatureBounds, FitnessContext};

/// How mutants enter the memory pool.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Replacement {
    /// A mutant replaces the current worst cell only if its affinity is higher.
    #[default]
    Guarded,
    /// The `n_m` worst cells are always swapped for the `n_m` best mutants.
    Unconditional,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AisParams {
    pub n_pop: usize,
    pub n_c: usize,
    pub n_m: usize,
    pub iterations: usize,
    pub clone_factor: f64,
    /// Per-gene chance that a clone's gene is resampled within the legal bounds.
    pub mutation_rate: f64,
    pub seed: u64,
    pub replacement: Replacement,
    /// Drop sampled records with negative affinity before selection.
    pub negative_selection: bool,
    /// Test-time threshold stored with the resulting detector set.
    pub cut_point: f64,
}

impl Default for AisParams {
    fn default() -> Self {
        Self {
            n_pop: 25,
            n_c: 7,
            n_m: 5,
            iterations: 150,
            clone_factor: 1.0,
            mutation_rate: 0.1,
            seed: 0,
            replacement: Replacement::Guarded,
            negative_selection: false,
            cut_point: DEFAULT_CUT_POINT,
        }
    }
}

impl AisParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_m == 0 || self.n_m > self.n_c || self.n_c > self.n_pop {
            return Err(Error::param(
                "n_pop/n_c/n_m",
                format!(
                    "need 1 <= n_m <= n_c <= n_pop, got {}/{}/{}",
                    self.n_pop, self.n_c, self.n_m
                ),
            ));
        }
        if !(self.clone_factor > 0.0 && self.clone_factor.is_finite()) {
            return Err(Error::param("clone_factor", "must be finite and > 0"));
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return Err(Error::param("mutation_rate", "must lie in [0, 1]"));
        }
        if self.cut_point.is_nan() {
            return Err(Error::param("cut_point", "must not be NaN"));
        }
        Ok(())
    }
}

/// Clones per selected record, by affinity rank (rank 1 first).
pub fn colony_sizes(n_c: usize, clone_factor: f64) -> Vec<usize> {
    (1..=n_c)
        .map(|rank| ((clone_factor * n_c as f64 / rank as f64).round() as usize).max(1))
        .collect()
}

/// Detector quality: fraud distance minus normal distance.
pub fn affinity(record: &[f64], ctx: &FitnessContext) -> Result<f64> {
    ctx.fitness(record)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub detector: Vec<f64>,
    pub affinity: f64,
}

/// Memory cells kept sorted by affinity, best first.
#[derive(Clone, Debug, PartialEq)]
pub struct MemoryCellPool {
    cells: Vec<Cell>,
    capacity: usize,
}

impl MemoryCellPool {
    pub fn new(capacity: usize) -> Self {
        Self {
            cells: Vec::with_capacity(capacity),
            capacity,
        }
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn worst_affinity(&self) -> Option<f64> {
        self.cells.last().map(|c| c.affinity)
    }

    pub fn best_affinity(&self) -> Option<f64> {
        self.cells.first().map(|c| c.affinity)
    }

    fn sort(&mut self) {
        // stable, so equal affinities keep insertion order
        self.cells.sort_by(|a, b| b.affinity.total_cmp(&a.affinity));
    }

    /// Offers candidates to the pool, filling free slots first. Returns how
    /// many candidates were installed.
    pub fn offer(&mut self, mut candidates: Vec<Cell>, rule: Replacement) -> usize {
        candidates.sort_by(|a, b| b.affinity.total_cmp(&a.affinity));
        let mut installed = 0;
        let mut rest = Vec::new();
        for c in candidates {
            if self.cells.len() < self.capacity {
                self.cells.push(c);
                installed += 1;
            } else {
                rest.push(c);
            }
        }
        self.sort();
        match rule {
            Replacement::Unconditional => {
                let n = rest.len().min(self.cells.len());
                self.cells.truncate(self.cells.len() - n);
                installed += n;
                self.cells.extend(rest.into_iter().take(n));
            }
            Replacement::Guarded => {
                for c in rest {
                    match self.cells.last_mut() {
                        Some(worst) if c.affinity > worst.affinity => {
                            *worst = c;
                            installed += 1;
                            self.sort();
                        }
                        _ => break,
                    }
                }
            }
        }
        self.sort();
        installed
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AisOutcome {
    pub detectors: DetectorSet,
    pub pool: MemoryCellPool,
    /// Worst memory affinity after initialization and after each iteration.
    pub worst_affinity_trace: Vec<f64>,
    pub train_time_s: f64,
}

pub fn ais_train(train: &Dataset, params: &AisParams) -> Result<AisOutcome> {
    params.validate()?;
    let (ctx, legal_bounds) = training_context(train)?;
    let part = train.class_partition();
    if part.legal.len() < params.n_pop {
        return Err(Error::param(
            "n_pop",
            format!(
                "training split has {} legitimate records, fewer than n_pop = {}",
                part.legal.len(),
                params.n_pop
            ),
        ));
    }
    let (result, train_time_s) = eval::timed(|| run(&ctx, &legal_bounds, &part.legal, params));
    let (pool, trace, replaced) = result?;

    let detectors = DetectorSet {
        algorithm: Algorithm::Ais,
        detectors: pool.cells().iter().map(|c| c.detector.clone()).collect(),
        bounds: ctx.bounds().clone(),
        cut_point: params.cut_point,
        stats: TrainStats {
            iterations: params.iterations,
            accepted: replaced,
            final_fitness: pool.best_affinity().unwrap_or(f64::NEG_INFINITY),
            reached_cut_point: true,
        },
    };
    Ok(AisOutcome {
        detectors,
        pool,
        worst_affinity_trace: trace,
        train_time_s,
    })
}

fn sample_scored<R: Rng + ?Sized>(
    ctx: &FitnessContext,
    normals: &[&[f64]],
    params: &AisParams,
    rng: &mut R,
) -> Result<Vec<Cell>> {
    let mut cells = Vec::with_capacity(params.n_pop);
    for i in index::sample(rng, normals.len(), params.n_pop) {
        let detector = normals[i].to_vec();
        let affinity = affinity(&detector, ctx)?;
        if params.negative_selection && affinity < 0.0 {
            continue;
        }
        cells.push(Cell { detector, affinity });
    }
    cells.sort_by(|a, b| b.affinity.total_cmp(&a.affinity));
    Ok(cells)
}

fn mutate<R: Rng + ?Sized>(
    detector: &[f64],
    legal_bounds: &FeatureBounds,
    rate: f64,
    rng: &mut R,
) -> Vec<f64> {
    detector
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if rng.random::<f64>() < rate {
                let (lo, hi) = (legal_bounds.min()[i], legal_bounds.max()[i]);
                lo + (hi - lo) * rng.random::<f64>()
            } else {
                v
            }
        })
        .collect()
}

fn run(
    ctx: &FitnessContext,
    legal_bounds: &FeatureBounds,
    normals: &[&[f64]],
    params: &AisParams,
) -> Result<(MemoryCellPool, Vec<f64>, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let sizes = colony_sizes(params.n_c, params.clone_factor);

    let mut pool = MemoryCellPool::new(params.n_pop);
    pool.offer(sample_scored(ctx, normals, params, &mut rng)?, params.replacement);
    let mut trace = Vec::with_capacity(params.iterations + 1);
    trace.extend(pool.worst_affinity());
    let mut replaced = 0;

    for _ in 0..params.iterations {
        let first_pop = sample_scored(ctx, normals, params, &mut rng)?;
        let mut mutated = Vec::new();
        for (cell, &clones) in first_pop.iter().take(params.n_c).zip(&sizes) {
            for _ in 0..clones {
                let detector = mutate(&cell.detector, legal_bounds, params.mutation_rate, &mut rng);
                let affinity = affinity(&detector, ctx)?;
                mutated.push(Cell { detector, affinity });
            }
        }
        mutated.sort_by(|a, b| b.affinity.total_cmp(&a.affinity));
        mutated.truncate(params.n_m);
        replaced += pool.offer(mutated, params.replacement);
        trace.extend(pool.worst_affinity());
    }
    log::debug!(
        "AIS: {} iterations, {replaced} memory replacements, best affinity {:?}",
        params.iterations,
        pool.best_affinity()
    );
    Ok((pool, trace, replaced))
}
