//! Learned detectors and their versioned text file format.
//!
//! ```text
//! aro-fraud-detectors,1
//! algorithm,aro
//! k,17
//! cut_point,0.175
//! iterations,812
//! accepted,37
//! final_fitness,0.1751...
//! reached_cut_point,true
//! min,<k values>
//! max,<k values>
//! detectors,<n>
//! <n rows of k values>
//! ```
//!
//! Detector and bound values use the dataset CSV number format.

use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{format_number, write_row};
use crate::error::{Error, Result};
use crate::fitness::FeatureBounds;

pub const FORMAT_TAG: &str = "aro-fraud-detectors";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Aro,
    Ais,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Aro => "aro",
            Algorithm::Ais => "ais",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "aro" => Ok(Algorithm::Aro),
            "ais" => Ok(Algorithm::Ais),
            other => Err(Error::param("algorithm", format!("unknown algorithm {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    /// Loop iterations summed over restarts (ARO) or clonal iterations (AIS).
    pub iterations: usize,
    /// Accepted buds (ARO) or memory-cell replacements (AIS).
    pub accepted: usize,
    /// Final parent fitness (ARO, best over restarts) or best memory affinity (AIS).
    pub final_fitness: f64,
    /// False when the ARO safety cap stopped a restart below the cut point.
    pub reached_cut_point: bool,
}

/// The identifier matrix plus everything needed to score against it.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectorSet {
    pub algorithm: Algorithm,
    pub detectors: Vec<Vec<f64>>,
    /// Normalization bounds of the training split.
    pub bounds: FeatureBounds,
    pub cut_point: f64,
    pub stats: TrainStats,
}

impl DetectorSet {
    pub fn feature_count(&self) -> usize {
        self.bounds.feature_count()
    }

    pub fn len(&self) -> usize {
        self.detectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detectors.is_empty()
    }

    pub fn write_to<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut out = BufWriter::new(out);
        writeln!(out, "{FORMAT_TAG},{FORMAT_VERSION}")?;
        writeln!(out, "algorithm,{}", self.algorithm)?;
        writeln!(out, "k,{}", self.feature_count())?;
        writeln!(out, "cut_point,{}", self.cut_point)?;
        writeln!(out, "iterations,{}", self.stats.iterations)?;
        writeln!(out, "accepted,{}", self.stats.accepted)?;
        writeln!(out, "final_fitness,{}", self.stats.final_fitness)?;
        writeln!(out, "reached_cut_point,{}", self.stats.reached_cut_point)?;
        out.write_all(b"min,")?;
        write_row(&mut out, self.bounds.min())?;
        out.write_all(b"\nmax,")?;
        write_row(&mut out, self.bounds.max())?;
        writeln!(out, "\ndetectors,{}", self.detectors.len())?;
        for d in &self.detectors {
            write_row(&mut out, d)?;
            out.write_all(b"\n")?;
        }
        out.flush()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(file).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(file).map_err(|e| match e {
            Error::Format { message, .. } => Error::Format {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    pub fn read_from<R: Read>(input: R) -> Result<Self> {
        let fail = |message: String| Error::Format {
            path: "<detectors>".into(),
            message,
        };
        let mut lines = BufReader::new(input).lines().enumerate();
        let mut next = |key: &str| -> Result<String> {
            let (no, line) = lines
                .next()
                .ok_or_else(|| fail(format!("unexpected end of file, expected `{key}`")))?;
            let line = line.map_err(|e| fail(e.to_string()))?;
            match line.split_once(',') {
                Some((k, v)) if k == key => Ok(v.to_string()),
                _ => Err(fail(format!("line {}: expected `{key},...`", no + 1))),
            }
        };
        fn parse<T: FromStr>(v: &str, what: &str) -> std::result::Result<T, String> {
            v.trim()
                .parse()
                .map_err(|_| format!("invalid {what}: {v:?}"))
        }
        fn row(v: &str, k: usize, what: &str) -> std::result::Result<Vec<f64>, String> {
            let vals = v
                .split(',')
                .map(|x| parse::<f64>(x, what))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            if vals.len() != k {
                return Err(format!("{what}: expected {k} values, found {}", vals.len()));
            }
            Ok(vals)
        }

        let version: u32 = parse(&next(FORMAT_TAG)?, "version").map_err(fail)?;
        if version != FORMAT_VERSION {
            return Err(fail(format!("unsupported format version {version}")));
        }
        let algorithm: Algorithm = next("algorithm")?.trim().parse()?;
        let k: usize = parse(&next("k")?, "k").map_err(fail)?;
        if k == 0 {
            return Err(fail("k must be at least 1".into()));
        }
        let cut_point: f64 = parse(&next("cut_point")?, "cut_point").map_err(fail)?;
        let stats = TrainStats {
            iterations: parse(&next("iterations")?, "iterations").map_err(fail)?,
            accepted: parse(&next("accepted")?, "accepted").map_err(fail)?,
            final_fitness: parse(&next("final_fitness")?, "final_fitness").map_err(fail)?,
            reached_cut_point: parse(&next("reached_cut_point")?, "reached_cut_point")
                .map_err(fail)?,
        };
        let min = row(&next("min")?, k, "min").map_err(fail)?;
        let max = row(&next("max")?, k, "max").map_err(fail)?;
        let bounds = FeatureBounds::new(min, max)?;
        let count: usize = parse(&next("detectors")?, "detector count").map_err(fail)?;
        let mut detectors = Vec::with_capacity(count);
        for (no, line) in lines.by_ref() {
            let line = line.map_err(|e| fail(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            detectors.push(row(&line, k, &format!("line {}", no + 1)).map_err(fail)?);
        }
        if detectors.len() != count {
            return Err(fail(format!(
                "header announces {count} detectors, found {}",
                detectors.len()
            )));
        }
        if detectors.is_empty() {
            return Err(fail("detector set is empty".into()));
        }
        Ok(Self {
            algorithm,
            detectors,
            bounds,
            cut_point,
            stats,
        })
    }

    /// The set as it reads back from disk, with values rounded to the file precision.
    pub fn rounded(&self) -> Self {
        let mut out = self.clone();
        for d in &mut out.detectors {
            for v in d.iter_mut() {
                *v = format_number(*v).parse().expect("formatted number parses");
            }
        }
        out
    }
}
