//! Order-stable sample statistics.
//!
//! All sums run over the input in the order given, so callers that sort by
//! seed first get bit-identical results regardless of how trials were
//! scheduled.

use serde::{Deserialize, Serialize};

use crate::special::normal_cdf;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Quantile with linear interpolation between order statistics
/// (position `q (n - 1)`).
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    quantile_sorted(&sorted(xs), q)
}

fn quantile_sorted(v: &[f64], q: f64) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

/// One-sample Kolmogorov-Smirnov distance to `Normal(mu, sd^2)`.
pub fn ks_normal(xs: &[f64], mu: f64, sd: f64) -> f64 {
    let v = sorted(xs);
    let n = v.len() as f64;
    v.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = normal_cdf((x - mu) / sd);
        d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    })
}

/// Most frequent value; ties go to the smallest.
pub fn mode(xs: &[usize]) -> Option<usize> {
    let mut counts = std::collections::BTreeMap::new();
    for &x in xs {
        *counts.entry(x).or_insert(0usize) += 1;
    }
    counts.into_iter().fold(None, |best: Option<(usize, usize)>, (v, c)| match best {
        Some((_, bc)) if bc >= c => best,
        _ => Some((v, c)),
    })
    .map(|(v, _)| v)
}

/// Equal-width histogram on `[lo, hi)`; values outside are counted
/// separately.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
    pub below: u64,
    pub above: u64,
}

impl Histogram {
    pub fn new(xs: &[f64], lo: f64, hi: f64, bins: usize) -> Self {
        let mut counts = vec![0; bins];
        let (mut below, mut above) = (0, 0);
        let width = (hi - lo) / bins as f64;
        for &x in xs {
            if x < lo {
                below += 1;
            } else if x >= hi {
                above += 1;
            } else {
                let b = (((x - lo) / width) as usize).min(bins - 1);
                counts[b] += 1;
            }
        }
        Self { lo, hi, counts, below, above }
    }

    pub fn bin_edges(&self, b: usize) -> (f64, f64) {
        let width = (self.hi - self.lo) / self.counts.len() as f64;
        (self.lo + b as f64 * width, self.lo + (b + 1) as f64 * width)
    }
}

/// Summary of one recorded column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub name: String,
    pub mean: f64,
    pub variance: f64,
    pub median: f64,
    pub q05: f64,
    pub q95: f64,
}

impl ColumnStats {
    pub fn new(name: &str, xs: &[f64]) -> Self {
        let v = sorted(xs);
        Self {
            name: name.to_string(),
            mean: mean(xs),
            variance: variance(xs),
            median: quantile_sorted(&v, 0.5),
            q05: quantile_sorted(&v, 0.05),
            q95: quantile_sorted(&v, 0.95),
        }
    }
}
