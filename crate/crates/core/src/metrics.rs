//! Success probability, Hellinger distance, error profiles and the summary
//! statistics used across devices and patterns.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::SecretString;
use crate::error::{Error, Result};
use crate::simulator::CountsDistribution;

fn check_width(counts: &CountsDistribution, s: &SecretString) -> Result<()> {
    if counts.n_bits() != s.len() {
        return Err(Error::DimensionMismatch {
            expected: s.len(),
            actual: counts.n_bits(),
        });
    }
    Ok(())
}

/// `100 · N_s / N`.
pub fn success_probability(counts: &CountsDistribution, s: &SecretString) -> Result<f64> {
    check_width(counts, s)?;
    Ok(100.0 * counts.get(s.as_str()) as f64 / counts.total() as f64)
}

/// `(1/√2)·‖√P − √E‖₂` over a shared support (absent outcomes are zeros).
pub fn hellinger_distance(ideal: &[f64], experimental: &[f64]) -> Result<f64> {
    if ideal.len() != experimental.len() {
        return Err(Error::DimensionMismatch {
            expected: ideal.len(),
            actual: experimental.len(),
        });
    }
    if let Some(&v) = ideal.iter().chain(experimental).find(|&&v| v.is_nan() || v < 0.0) {
        return Err(Error::InvalidProbability {
            name: "distribution entry",
            value: v,
        });
    }
    let sum: f64 = ideal
        .iter()
        .zip(experimental)
        .map(|(p, e)| (p.sqrt() - e.sqrt()).powi(2))
        .sum();
    Ok((sum / 2.0).sqrt().min(1.0))
}

/// Hellinger distance between an ideal distribution keyed by outcome and observed counts.
pub fn hellinger_from_counts(ideal: &BTreeMap<String, f64>, counts: &CountsDistribution) -> Result<f64> {
    let n = counts.n_bits();
    let mut p = vec![0.0; 1 << n];
    for (k, &v) in ideal {
        if k.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: k.len(),
            });
        }
        let idx = usize::from_str_radix(k, 2).map_err(|_| Error::InvalidCounts(k.clone()))?;
        p[idx] = v;
    }
    hellinger_distance(&p, &counts.probabilities())
}

/// Probability mass by Hamming distance from `s`; every distance 0..=n is present.
pub fn hamming_error_profile(counts: &CountsDistribution, s: &SecretString) -> Result<BTreeMap<usize, f64>> {
    check_width(counts, s)?;
    let total = counts.total() as f64;
    let mut hist: BTreeMap<usize, f64> = (0..=s.len()).map(|d| (d, 0.0)).collect();
    for (k, &v) in counts.counts() {
        let d = k.bytes().zip(s.as_str().bytes()).filter(|(a, b)| a != b).count();
        *hist.get_mut(&d).expect("distance in range") += v as f64 / total;
    }
    Ok(hist)
}

pub fn mean(x: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::Undefined("mean of an empty list"));
    }
    Ok(x.iter().sum::<f64>() / x.len() as f64)
}

pub fn median(x: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::Undefined("median of an empty list"));
    }
    let mut v = x.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let mid = v.len() / 2;
    Ok(if v.len() % 2 == 1 { v[mid] } else { (v[mid - 1] + v[mid]) / 2.0 })
}

/// Sample standard deviation (n − 1 denominator).
pub fn std_dev(x: &[f64]) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::Undefined("standard deviation needs two values"));
    }
    let m = mean(x)?;
    Ok((x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64).sqrt())
}

pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Ragged(format!("{} vs {} values", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::Undefined("correlation needs at least two points"));
    }
    let (mx, my) = (mean(x)?, mean(y)?);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Undefined("correlation with zero variance"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Ranks starting at 1, ties sharing their average rank. `descending` ranks
/// the largest value first.
pub fn average_ranks(values: &[f64], descending: bool) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        let c = values[a].total_cmp(&values[b]);
        if descending { c.reverse() } else { c }
    });
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Kendall's coefficient of concordance for `m` raters (rows) ranking `k`
/// items (columns), with the usual tie correction.
pub fn kendalls_w(rankings: &[Vec<f64>]) -> Result<f64> {
    let m = rankings.len();
    if m < 2 {
        return Err(Error::Undefined("concordance needs at least two rankings"));
    }
    let k = rankings[0].len();
    if k < 2 {
        return Err(Error::Undefined("concordance needs at least two items"));
    }
    if let Some(r) = rankings.iter().find(|r| r.len() != k) {
        return Err(Error::Ragged(format!("ranking of {} items, expected {k}", r.len())));
    }
    let totals: Vec<f64> = (0..k).map(|j| rankings.iter().map(|r| r[j]).sum()).collect();
    let mean_total = totals.iter().sum::<f64>() / k as f64;
    let s: f64 = totals.iter().map(|t| (t - mean_total).powi(2)).sum();
    let ties: f64 = rankings
        .iter()
        .map(|r| {
            let mut groups: BTreeMap<u64, usize> = BTreeMap::new();
            for v in r {
                *groups.entry(v.to_bits()).or_default() += 1;
            }
            groups.values().map(|&t| (t * t * t - t) as f64).sum::<f64>()
        })
        .sum();
    let (mf, kf) = (m as f64, k as f64);
    let denom = mf * mf * (kf * kf * kf - kf) - mf * ties;
    if denom <= 0.0 {
        return Err(Error::Undefined("concordance of fully tied rankings"));
    }
    Ok((12.0 * s / denom).clamp(0.0, 1.0))
}

/// Permutation p-value for W: each rater's ranks shuffled independently.
pub fn kendalls_w_p_value(rankings: &[Vec<f64>], trials: usize, seed: u64) -> Result<f64> {
    let observed = kendalls_w(rankings)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffled = rankings.to_vec();
    let mut at_least = 0usize;
    for _ in 0..trials {
        for r in &mut shuffled {
            r.shuffle(&mut rng);
        }
        if kendalls_w(&shuffled)? >= observed - 1e-12 {
            at_least += 1;
        }
    }
    Ok((1 + at_least) as f64 / (1 + trials) as f64)
}

/// Emulation minus hardware, in percentage points.
pub fn performance_gap(emulation_p: f64, hardware_p: f64) -> Result<f64> {
    for (name, v) in [("emulation success", emulation_p), ("hardware success", hardware_p)] {
        if !(0.0..=100.0).contains(&v) {
            return Err(Error::InvalidProbability { name, value: v });
        }
    }
    Ok(emulation_p - hardware_p)
}

/// One-decimal percentage as printed in reports.
pub fn format_percent(p: f64) -> String {
    format!("{p:.1}")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub success_probability: f64,
    pub hellinger: f64,
    pub hamming_error_histogram: BTreeMap<usize, f64>,
}

impl MetricReport {
    /// Metrics of `counts` against the ideal output, a point mass at `s`.
    pub fn compute(counts: &CountsDistribution, s: &SecretString) -> Result<Self> {
        let success_probability = success_probability(counts, s)?;
        let ideal = BTreeMap::from([(s.as_str().to_string(), 1.0)]);
        let hellinger = hellinger_from_counts(&ideal, counts)?;
        let hamming_error_histogram = hamming_error_profile(counts, s)?;
        Ok(Self {
            success_probability,
            hellinger,
            hamming_error_histogram,
        })
    }
}
