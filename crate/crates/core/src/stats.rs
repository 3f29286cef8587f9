//! Paired Wilcoxon signed-rank tests and Hodges–Lehmann estimates.
//!
//! Zero differences are dropped before ranking. Tied magnitudes get mid-ranks.
//! Up to [`EXACT_MAX_N`] non-zero differences the null distribution of the
//! positive rank sum is computed exactly by dynamic programming over doubled
//! ranks, which stay integral under mid-ranking. Larger samples use the
//! normal approximation with tie and continuity corrections.

use std::fmt;

use crate::error::{Error, Result};

/// Largest effective sample size handled by the exact null distribution.
pub const EXACT_MAX_N: usize = 25;

pub const DEFAULT_CONFIDENCE: f64 = 0.95;

#[derive(Clone, Debug, PartialEq)]
pub struct PairedSample {
    pub differences: Vec<f64>,
}

impl PairedSample {
    pub fn new(differences: Vec<f64>) -> Result<Self> {
        if differences.is_empty() {
            return Err(Error::InvalidArgument(
                "a paired sample needs at least one difference".into(),
            ));
        }
        if differences.iter().any(|d| !d.is_finite()) {
            return Err(Error::InvalidArgument(
                "paired differences must be finite".into(),
            ));
        }
        Ok(PairedSample { differences })
    }

    /// `a[i] - b[i]` for matched observations.
    pub fn from_pairs(a: &[f64], b: &[f64]) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::dims(format!(
                "paired samples of length {} and {}",
                a.len(),
                b.len()
            )));
        }
        Self::new(a.iter().zip(b).map(|(x, y)| x - y).collect())
    }

    pub fn len(&self) -> usize {
        self.differences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.differences.is_empty()
    }

    fn nonzero(&self) -> Vec<f64> {
        self.differences
            .iter()
            .copied()
            .filter(|&d| d != 0.0)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TestMethod {
    Exact,
    NormalApprox,
}

impl TestMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            TestMethod::Exact => "exact",
            TestMethod::NormalApprox => "normal_approx",
        }
    }
}

impl fmt::Display for TestMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TestResult {
    /// Number of differences, zeros included.
    pub n: usize,
    /// Number of non-zero differences used for the test.
    pub n_eff: usize,
    /// Sum of the ranks of the positive differences.
    pub statistic: f64,
    pub p_two_sided: f64,
    pub hl_estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub method: TestMethod,
}

/// Mid-ranks of `|d|` multiplied by two, in input order.
fn doubled_ranks(d: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.sort_by(|&i, &j| d[i].abs().total_cmp(&d[j].abs()));
    let mut ranks = vec![0u64; d.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && d[order[j + 1]].abs() == d[order[i]].abs() {
            j += 1;
        }
        // positions i..=j hold ranks i+1..=j+1; twice their mean is i+j+2
        for &o in &order[i..=j] {
            ranks[o] = (i + j + 2) as u64;
        }
        i = j + 1;
    }
    ranks
}

fn tie_sizes(d: &[f64]) -> Vec<usize> {
    let mut mags: Vec<f64> = d.iter().map(|x| x.abs()).collect();
    mags.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    let mut i = 0;
    while i < mags.len() {
        let mut j = i;
        while j + 1 < mags.len() && mags[j + 1] == mags[i] {
            j += 1;
        }
        out.push(j - i + 1);
        i = j + 1;
    }
    out
}

/// Number of sign assignments reaching each doubled rank sum.
fn null_counts(ranks: &[u64]) -> Vec<u64> {
    let total: u64 = ranks.iter().sum();
    let mut counts = vec![0u64; total as usize + 1];
    counts[0] = 1;
    let mut reach = 0usize;
    for &r in ranks {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] != 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    counts
}

/// Exact two-sided p-value of the signed-rank statistic; zeros are dropped.
pub fn wilcoxon_exact_p(sample: &PairedSample) -> Result<f64> {
    let d = sample.nonzero();
    if d.is_empty() {
        return Err(Error::AllZeroDifferences);
    }
    if d.len() > 62 {
        return Err(Error::InvalidArgument(format!(
            "exact null distribution needs n <= 62, got {}",
            d.len()
        )));
    }
    let ranks = doubled_ranks(&d);
    let w2: u64 = d
        .iter()
        .zip(&ranks)
        .filter(|(x, _)| **x > 0.0)
        .map(|(_, r)| r)
        .sum();
    let counts = null_counts(&ranks);
    let lower: u64 = counts[..=w2 as usize].iter().sum();
    let upper: u64 = counts[w2 as usize..].iter().sum();
    let total = 2f64.powi(d.len() as i32);
    Ok((2.0 * lower.min(upper) as f64 / total).min(1.0))
}

/// Two-sided p-value from the normal approximation with tie and continuity
/// corrections; zeros are dropped.
pub fn wilcoxon_normal_p(sample: &PairedSample) -> Result<f64> {
    let d = sample.nonzero();
    if d.is_empty() {
        return Err(Error::AllZeroDifferences);
    }
    let n = d.len() as f64;
    let w = positive_rank_sum(&d);
    let mean = n * (n + 1.0) / 4.0;
    let ties: f64 = tie_sizes(&d).iter().map(|&t| (t * t * t - t) as f64).sum();
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - ties / 48.0;
    let z = ((w - mean).abs() - 0.5).max(0.0) / var.sqrt();
    Ok(libm::erfc(z / std::f64::consts::SQRT_2).min(1.0))
}

fn positive_rank_sum(d: &[f64]) -> f64 {
    let ranks = doubled_ranks(d);
    d.iter()
        .zip(&ranks)
        .filter(|(x, _)| **x > 0.0)
        .map(|(_, &r)| r as f64)
        .sum::<f64>()
        / 2.0
}

/// Signed-rank test with the default 95% Hodges–Lehmann interval.
pub fn wilcoxon_signed_rank(sample: &PairedSample) -> Result<TestResult> {
    wilcoxon_signed_rank_with(sample, DEFAULT_CONFIDENCE)
}

pub fn wilcoxon_signed_rank_with(sample: &PairedSample, confidence: f64) -> Result<TestResult> {
    let d = sample.nonzero();
    if d.is_empty() {
        return Err(Error::AllZeroDifferences);
    }
    let (method, p) = if d.len() <= EXACT_MAX_N {
        (TestMethod::Exact, wilcoxon_exact_p(sample)?)
    } else {
        (TestMethod::NormalApprox, wilcoxon_normal_p(sample)?)
    };
    let (hl, lo, hi) = hodges_lehmann(sample, confidence)?;
    Ok(TestResult {
        n: sample.len(),
        n_eff: d.len(),
        statistic: positive_rank_sum(&d),
        p_two_sided: p,
        hl_estimate: hl,
        ci_low: lo,
        ci_high: hi,
        method,
    })
}

/// All Walsh averages `(d_i + d_j) / 2`, `i <= j`, sorted ascending.
pub fn walsh_averages(d: &[f64]) -> Vec<f64> {
    let mut w = Vec::with_capacity(d.len() * (d.len() + 1) / 2);
    for i in 0..d.len() {
        for j in i..d.len() {
            w.push(0.5 * (d[i] + d[j]));
        }
    }
    w.sort_by(f64::total_cmp);
    w
}

fn median_sorted(v: &[f64]) -> f64 {
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// Standard normal quantile by bisection on `erfc`.
fn normal_quantile(p: f64) -> f64 {
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if 0.5 * libm::erfc(-mid / std::f64::consts::SQRT_2) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Number of Walsh averages to trim from each end for a two-sided interval
/// at `confidence`: the largest `k` with `P(T <= k - 1) <= (1 - confidence) / 2`
/// under the tie-free null of the signed-rank statistic `T`.
fn ci_depth(n: usize, confidence: f64) -> usize {
    let half_alpha = 0.5 * (1.0 - confidence);
    if n <= EXACT_MAX_N {
        let ranks: Vec<u64> = (1..=n as u64).collect();
        let counts = null_counts(&ranks);
        let total = 2f64.powi(n as i32);
        let mut cum = 0u64;
        let mut k = 0;
        for (t, &c) in counts.iter().enumerate() {
            cum += c;
            if cum as f64 / total <= half_alpha {
                k = t + 1;
            } else {
                break;
            }
        }
        k
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let sd = (nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0).sqrt();
        let k = (mean + normal_quantile(half_alpha) * sd + 0.5).floor();
        k.max(0.0) as usize
    }
}

/// Median of the Walsh averages of all differences, with the distribution-free
/// signed-rank confidence interval. If the sample is too small for the
/// requested confidence the interval spans all Walsh averages.
pub fn hodges_lehmann(sample: &PairedSample, confidence: f64) -> Result<(f64, f64, f64)> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "confidence must lie in (0, 1), got {confidence}"
        )));
    }
    let w = walsh_averages(&sample.differences);
    let m = w.len();
    let est = median_sorted(&w);
    let k = ci_depth(sample.len(), confidence).min(m.div_ceil(2));
    let (lo, hi) = if k == 0 {
        (w[0], w[m - 1])
    } else {
        (w[k - 1], w[m - k])
    };
    Ok((est, lo.min(est), hi.max(est)))
}
