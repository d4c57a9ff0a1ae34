//! Generic single-individual ARO over fixed-length bit strings.
//!
//! Each iteration picks a contiguous window of the parent, flips it to form
//! the larva, and builds a bud gene by gene inside the window from either the
//! larva or the parent. The bud survives only if it strictly beats the parent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinaryChromosome {
    bits: Vec<bool>,
}

impl BinaryChromosome {
    pub fn new(bits: Vec<bool>) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::param("chromosome", "length must be at least 1"));
        }
        Ok(Self { bits })
    }

    pub fn zeros(len: usize) -> Result<Self> {
        Self::new(vec![false; len])
    }

    pub fn ones(len: usize) -> Result<Self> {
        Self::new(vec![true; len])
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Result<Self> {
        Self::new((0..len).map(|_| rng.random::<bool>()).collect())
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn complement(&self) -> Self {
        Self {
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }
}

impl std::fmt::Display for BinaryChromosome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// `1 / (1 + ln(window_len))`, the chance a gene inside a window of
/// `window_len` genes is taken from the mutated copy.
pub fn merge_probability(window_len: usize) -> Result<f64> {
    if window_len == 0 {
        return Err(Error::param("window_len", "must be at least 1"));
    }
    Ok(1.0 / (1.0 + (window_len as f64).ln()))
}

/// How bud genes inside the window choose between larva and parent.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MergeRule {
    /// Each gene independently takes the larva gene with probability P.
    #[default]
    Stochastic,
    /// Every gene takes the larva gene when P > 0.5, otherwise the parent gene.
    Threshold,
}

/// Zero-based contiguous gene window.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Window {
    pub start: usize,
    pub len: usize,
}

impl Window {
    pub fn end(&self) -> usize {
        self.start + self.len
    }

    pub fn contains(&self, i: usize) -> bool {
        (self.start..self.end()).contains(&i)
    }

    /// Start uniform over all positions, then a length that fits.
    pub fn random<R: Rng + ?Sized>(genes: usize, rng: &mut R) -> Self {
        let start = rng.random_range(0..genes);
        let len = rng.random_range(1..=genes - start);
        Self { start, len }
    }
}

/// Builds the bud for a fixed window; `draw` supplies one uniform `[0, 1)`
/// value per gene under [`MergeRule::Stochastic`].
pub fn bud_from_window(
    parent: &BinaryChromosome,
    window: Window,
    rule: MergeRule,
    mut draw: impl FnMut() -> f64,
) -> BinaryChromosome {
    assert!(window.len >= 1 && window.end() <= parent.len(), "window out of range");
    let p = merge_probability(window.len).expect("window length >= 1");
    let mut bits = parent.bits.clone();
    for bit in &mut bits[window.start..window.end()] {
        let larva_gene = !*bit;
        let take_larva = match rule {
            MergeRule::Stochastic => draw() < p,
            MergeRule::Threshold => p > 0.5,
        };
        if take_larva {
            *bit = larva_gene;
        }
    }
    BinaryChromosome { bits }
}

pub fn reproduce_bud<R: Rng + ?Sized>(
    parent: &BinaryChromosome,
    rule: MergeRule,
    rng: &mut R,
) -> BinaryChromosome {
    let window = Window::random(parent.len(), rng);
    bud_from_window(parent, window, rule, || rng.random::<f64>())
}

#[derive(Clone, Debug, PartialEq)]
pub struct AroCoreParams {
    pub chromosome_length: usize,
    pub max_iterations: usize,
    pub seed: u64,
    /// Stop early once the parent reaches this fitness.
    pub target_fitness: Option<f64>,
    pub merge_rule: MergeRule,
}

impl AroCoreParams {
    pub fn new(chromosome_length: usize, max_iterations: usize, seed: u64) -> Self {
        Self {
            chromosome_length,
            max_iterations,
            seed,
            target_fitness: None,
            merge_rule: MergeRule::Stochastic,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.chromosome_length == 0 {
            return Err(Error::param("chromosome_length", "must be at least 1"));
        }
        if self.max_iterations == 0 {
            return Err(Error::param("max_iterations", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AroRun {
    pub best: BinaryChromosome,
    pub best_fitness: f64,
    pub iterations_used: usize,
    /// Parent fitness before the first iteration and after each one.
    pub fitness_trace: Vec<f64>,
}

/// Maximizes `objective`. Errors from the objective are returned unchanged.
pub fn optimize<E, F>(
    params: &AroCoreParams,
    initial: Option<BinaryChromosome>,
    mut objective: F,
) -> std::result::Result<AroRun, E>
where
    E: From<Error>,
    F: FnMut(&BinaryChromosome) -> std::result::Result<f64, E>,
{
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut parent = match initial {
        Some(c) if c.len() != params.chromosome_length => {
            return Err(Error::param(
                "initial",
                format!(
                    "length {} does not match chromosome_length {}",
                    c.len(),
                    params.chromosome_length
                ),
            )
            .into())
        }
        Some(c) => c,
        None => BinaryChromosome::random(params.chromosome_length, &mut rng)?,
    };
    let mut parent_fitness = objective(&parent)?;
    let mut trace = Vec::with_capacity(params.max_iterations + 1);
    trace.push(parent_fitness);

    let mut iterations = 0;
    while iterations < params.max_iterations {
        if params.target_fitness.is_some_and(|t| parent_fitness >= t) {
            break;
        }
        iterations += 1;
        let bud = reproduce_bud(&parent, params.merge_rule, &mut rng);
        let bud_fitness = objective(&bud)?;
        if bud_fitness > parent_fitness {
            parent = bud;
            parent_fitness = bud_fitness;
        }
        trace.push(parent_fitness);
    }

    Ok(AroRun {
        best: parent,
        best_fitness: parent_fitness,
        iterations_used: iterations,
        fitness_trace: trace,
    })
}
