//! Range-normalized distances between a record and a class matrix, and the
//! fraud-minus-normal fitness shared by both detectors and by test scoring.
//!
//! For a record `r` and reference rows `x_1..x_n` over `k` features,
//!
//! ```text
//! distance(r) = sum_i sum_j |r_i - x_ji| / (max_i - min_i) / (k * n)
//! ```
//!
//! and `fitness(r) = distance_to_fraud(r) - distance_to_normal(r)`. Features
//! with `max_i == min_i` contribute nothing.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Per-feature normalization range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureBounds {
    min: Vec<f64>,
    max: Vec<f64>,
}

impl FeatureBounds {
    pub fn new(min: Vec<f64>, max: Vec<f64>) -> Result<Self> {
        if min.is_empty() || min.len() != max.len() {
            return Err(Error::param(
                "bounds",
                format!("min/max lengths {} and {} invalid", min.len(), max.len()),
            ));
        }
        for (i, (lo, hi)) in min.iter().zip(&max).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && hi >= lo) {
                return Err(Error::param(
                    "bounds",
                    format!("feature {}: [{lo}, {hi}] is not a valid range", i + 1),
                ));
            }
        }
        Ok(Self { min, max })
    }

    pub fn min(&self) -> &[f64] {
        &self.min
    }

    pub fn max(&self) -> &[f64] {
        &self.max
    }

    pub fn feature_count(&self) -> usize {
        self.min.len()
    }

    pub fn range(&self, i: usize) -> f64 {
        self.max[i] - self.min[i]
    }

    pub fn is_degenerate(&self, i: usize) -> bool {
        self.max[i] == self.min[i]
    }

    /// Zero-based indices of constant features.
    pub fn degenerate_features(&self) -> Vec<usize> {
        (0..self.feature_count())
            .filter(|&i| self.is_degenerate(i))
            .collect()
    }

    /// `1 / (max_i - min_i)`, or 0 for degenerate features.
    pub fn inverse_ranges(&self) -> Vec<f64> {
        (0..self.feature_count())
            .map(|i| {
                if self.is_degenerate(i) {
                    0.0
                } else {
                    1.0 / self.range(i)
                }
            })
            .collect()
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.feature_count()
            && point
                .iter()
                .zip(self.min.iter().zip(&self.max))
                .all(|(v, (lo, hi))| lo <= v && v <= hi)
    }
}

/// Componentwise max and min over `rows`.
pub fn compute_bounds<R: AsRef<[f64]>>(rows: &[R]) -> Result<FeatureBounds> {
    let first = rows.first().ok_or(Error::Empty("bounds need at least one row"))?;
    let mut min = first.as_ref().to_vec();
    let mut max = min.clone();
    for row in &rows[1..] {
        let row = row.as_ref();
        if row.len() != min.len() {
            return Err(Error::FeatureCountMismatch {
                expected: min.len(),
                found: row.len(),
            });
        }
        for (i, &v) in row.iter().enumerate() {
            if v < min[i] {
                min[i] = v;
            }
            if v > max[i] {
                max[i] = v;
            }
        }
    }
    FeatureBounds::new(min, max)
}

/// Reference rows stored feature-major so each feature's column is contiguous.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceRows {
    columns: Vec<Vec<f64>>,
    len: usize,
}

impl ReferenceRows {
    pub fn new<R: AsRef<[f64]>>(rows: &[R], feature_count: usize) -> Result<Self> {
        let mut columns = vec![Vec::with_capacity(rows.len()); feature_count];
        for row in rows {
            let row = row.as_ref();
            if row.len() != feature_count {
                return Err(Error::FeatureCountMismatch {
                    expected: feature_count,
                    found: row.len(),
                });
            }
            for (col, &v) in columns.iter_mut().zip(row) {
                col.push(v);
            }
        }
        Ok(Self {
            columns,
            len: rows.len(),
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn feature_count(&self) -> usize {
        self.columns.len()
    }

    /// Mean normalized absolute deviation of `record` from every row.
    ///
    /// Features are visited in order; within a feature the row sum uses eight
    /// fixed lanes, so the result is deterministic and agrees with a plain
    /// sequential sum to well within 1e-12 relative.
    pub fn mean_distance(&self, record: &[f64], inverse_ranges: &[f64]) -> Result<f64> {
        if self.len == 0 {
            return Err(Error::Empty("reference matrix has no rows"));
        }
        if record.len() != self.columns.len() {
            return Err(Error::FeatureCountMismatch {
                expected: self.columns.len(),
                found: record.len(),
            });
        }
        let mut total = 0.0;
        for ((col, &r), &inv) in self.columns.iter().zip(record).zip(inverse_ranges) {
            if inv == 0.0 {
                continue;
            }
            total += abs_deviation_sum(col, r) * inv;
        }
        Ok(total / (self.columns.len() * self.len) as f64)
    }
}

#[inline]
fn abs_deviation_sum(col: &[f64], r: f64) -> f64 {
    const LANES: usize = 8;
    let mut acc = [0.0f64; LANES];
    let chunks = col.chunks_exact(LANES);
    let tail = chunks.remainder();
    for chunk in chunks {
        for l in 0..LANES {
            acc[l] += (r - chunk[l]).abs();
        }
    }
    let mut s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for &x in tail {
        s += (r - x).abs();
    }
    s
}

/// Normal and fraud matrices plus the bounds used to normalize distances.
#[derive(Clone, Debug)]
pub struct FitnessContext {
    normal: ReferenceRows,
    fraud: ReferenceRows,
    bounds: FeatureBounds,
    inverse_ranges: Vec<f64>,
}

impl FitnessContext {
    pub fn new<R: AsRef<[f64]>>(
        normal_rows: &[R],
        fraud_rows: &[R],
        bounds: FeatureBounds,
    ) -> Result<Self> {
        let k = bounds.feature_count();
        Ok(Self {
            normal: ReferenceRows::new(normal_rows, k)?,
            fraud: ReferenceRows::new(fraud_rows, k)?,
            inverse_ranges: bounds.inverse_ranges(),
            bounds,
        })
    }

    /// Class matrices from `dataset`, normalized by bounds over all its records.
    pub fn from_dataset(dataset: &Dataset) -> Result<Self> {
        let all: Vec<&[f64]> = dataset.records().iter().map(|r| r.features()).collect();
        let bounds = compute_bounds(&all)?;
        let part = dataset.class_partition();
        Self::new(&part.legal, &part.fraud, bounds)
    }

    pub fn bounds(&self) -> &FeatureBounds {
        &self.bounds
    }

    pub fn inverse_ranges(&self) -> &[f64] {
        &self.inverse_ranges
    }

    pub fn feature_count(&self) -> usize {
        self.bounds.feature_count()
    }

    pub fn normal_count(&self) -> usize {
        self.normal.len()
    }

    pub fn fraud_count(&self) -> usize {
        self.fraud.len()
    }

    pub fn normal_distance(&self, record: &[f64]) -> Result<f64> {
        self.normal.mean_distance(record, &self.inverse_ranges)
    }

    pub fn fraud_distance(&self, record: &[f64]) -> Result<f64> {
        self.fraud.mean_distance(record, &self.inverse_ranges)
    }

    /// `fraud_distance - normal_distance`; larger means closer to normal traffic.
    pub fn fitness(&self, record: &[f64]) -> Result<f64> {
        let (fraud, normal) = self.distances(record)?;
        Ok(fraud - normal)
    }

    /// `(fraud_distance, normal_distance)` in one call.
    pub fn distances(&self, record: &[f64]) -> Result<(f64, f64)> {
        if self.fraud.is_empty() {
            return Err(Error::Empty("fraud matrix has no rows"));
        }
        let normal = self.normal_distance(record)?;
        let fraud = self.fraud_distance(record)?;
        Ok((fraud, normal))
    }
}
