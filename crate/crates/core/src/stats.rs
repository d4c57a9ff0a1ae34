//! Wilcoxon signed-rank and Kruskal-Wallis tests, with the special functions
//! they need.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest reduced sample size for which the exact signed-rank p-value is computed.
pub const EXACT_WILCOXON_MAX_N: usize = 20;

/// 1-based ranks, ties sharing the mean of the ranks they span.
pub fn mid_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j share ranks i+1..=j+1
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn tie_group_sizes(values: &[f64]) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut sizes = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|&&v| v == sorted[i]).count();
        sizes.push(j);
        i += j;
    }
    sizes
}

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Upper regularized incomplete gamma `Q(a, x) = Γ(a, x) / Γ(a)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    assert!(a > 0.0, "gamma_q needs a > 0");
    if x <= 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_continued_fraction(a, x)
    }
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..1_000 {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * 1e-16 {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

fn gamma_q_continued_fraction(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..1_000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Upper-tail probability of the chi-square distribution.
pub fn chi_square_sf(x: f64, df: u32) -> Result<f64> {
    if df == 0 {
        return Err(Error::param("df", "must be at least 1"));
    }
    if !(x >= 0.0) {
        return Err(Error::param("x", format!("must be >= 0, got {x}")));
    }
    Ok(gamma_q(f64::from(df) / 2.0, x / 2.0).clamp(0.0, 1.0))
}

/// `P(|Z| >= |z|)` for a standard normal `Z`.
pub fn normal_two_sided_p(z: f64) -> f64 {
    gamma_q(0.5, z * z / 2.0).clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignedRankSums {
    pub w_plus: f64,
    pub w_minus: f64,
    /// Pairs left after dropping zero differences.
    pub n_used: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub df: Option<u32>,
    /// Asymptotic p-value.
    pub p_value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_p_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<SignedRankSums>,
    #[serde(default)]
    pub continuity_correction: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Two-sided Wilcoxon signed-rank test on `a - b`.
///
/// Zero differences are dropped, absolute differences get mid-ranks, and the
/// statistic is `min(W+, W-)`. The asymptotic p-value uses the normal
/// approximation without continuity or tie correction of the variance.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::param(
            "pairs",
            format!("need equal non-empty samples, got {} and {}", a.len(), b.len()),
        ));
    }
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::param("pairs", "non-finite difference"));
    }
    if diffs.is_empty() {
        return Err(Error::AllZeroDifferences);
    }
    let n = diffs.len();
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = mid_ranks(&abs);
    let w_plus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum::<f64>()
        + 0.0; // an empty float sum is -0.0
    let nf = n as f64;
    let total = nf * (nf + 1.0) / 2.0;
    let w_minus = total - w_plus;
    let w = w_plus.min(w_minus);

    let mean = nf * (nf + 1.0) / 4.0;
    let sd = (nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0).sqrt();
    let z = (w - mean) / sd;
    let p_value = normal_two_sided_p(z);

    let exact_p_value = (n <= EXACT_WILCOXON_MAX_N).then(|| exact_signed_rank_p(&ranks, w));

    Ok(TestResult {
        statistic: w,
        df: None,
        p_value,
        exact_p_value,
        z: Some(z),
        direction: Some(SignedRankSums {
            w_plus,
            w_minus,
            n_used: n,
        }),
        continuity_correction: false,
        warnings: Vec::new(),
    })
}

/// Two-sided exact p: the share of the `2^n` sign assignments whose
/// `min(W+, W-)` is at most `w`. Counted by dynamic programming over doubled ranks.
fn exact_signed_rank_p(ranks: &[f64], w: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0f64; total + 1];
    counts[0] = 1.0;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            if counts[s] > 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let limit = (w * 2.0).round() as usize;
    let hits: f64 = counts
        .iter()
        .enumerate()
        .filter(|(s, _)| (*s).min(total - s) <= limit)
        .map(|(_, c)| c)
        .sum();
    (hits / 2f64.powi(ranks.len() as i32)).min(1.0)
}

/// Kruskal-Wallis H over pooled mid-ranks with tie correction; chi-square p
/// with `groups - 1` degrees of freedom.
pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<TestResult> {
    if groups.len() < 2 {
        return Err(Error::param("groups", "need at least two groups"));
    }
    if groups.iter().any(|g| g.is_empty()) {
        return Err(Error::param("groups", "every group needs an observation"));
    }
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    if pooled.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("groups", "non-finite observation"));
    }
    let n = pooled.len();
    if n < 2 {
        return Err(Error::param("groups", "need at least two observations"));
    }
    let df = (groups.len() - 1) as u32;
    let mut warnings = Vec::new();
    if groups.iter().any(|g| g.len() == 1) {
        warnings.push(
            "singleton groups: H depends only on the group count and carries no information"
                .to_string(),
        );
    }

    let nf = n as f64;
    let ties: f64 = tie_group_sizes(&pooled)
        .into_iter()
        .map(|t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum();
    let correction = 1.0 - ties / (nf * nf * nf - nf);
    if correction <= 0.0 {
        warnings.push("all observations are identical".to_string());
        return Ok(TestResult {
            statistic: 0.0,
            df: Some(df),
            p_value: 1.0,
            exact_p_value: None,
            z: None,
            direction: None,
            continuity_correction: false,
            warnings,
        });
    }

    let ranks = mid_ranks(&pooled);
    let mut offset = 0;
    let mut weighted = 0.0;
    for g in groups {
        let r: f64 = ranks[offset..offset + g.len()].iter().sum();
        weighted += r * r / g.len() as f64;
        offset += g.len();
    }
    let h = 12.0 * weighted / (nf * (nf + 1.0)) - 3.0 * (nf + 1.0);
    let h = (h / correction).max(0.0);
    Ok(TestResult {
        statistic: h,
        df: Some(df),
        p_value: chi_square_sf(h, df)?,
        exact_p_value: None,
        z: None,
        direction: None,
        continuity_correction: false,
        warnings,
    })
}
