use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

/// Largest number of nonzero differences tested with the exact null
/// distribution; above it the tie-corrected normal approximation is used.
pub const EXACT_MAX_N: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    /// All differences, zeros included.
    pub n_total: usize,
    /// Nonzero differences, the ones that are ranked.
    pub n_effective: usize,
    /// Sum of the (average) ranks of positive differences.
    pub w_plus: f64,
    /// P(W ≥ w_plus) under the null.
    pub p_right: f64,
    /// P(W ≤ w_plus) under the null.
    pub p_left: f64,
    pub method: Method,
    /// Mean of all differences.
    pub mean_diff: f64,
    /// Half-width of the 95% Student-t interval on `mean_diff`; `None`
    /// for a single difference.
    pub ci95_half_width: Option<f64>,
}

/// Ranks of `|d|` over the nonzero differences, doubled so that average
/// ranks of ties stay integral. Returns `(doubled rank, is_positive)`.
pub fn doubled_signed_ranks(diffs: &[f64]) -> Vec<(u64, bool)> {
    let mut nonzero: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    nonzero.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let mut out = Vec::with_capacity(nonzero.len());
    let mut i = 0;
    while i < nonzero.len() {
        let mut j = i;
        while j + 1 < nonzero.len() && nonzero[j + 1].abs() == nonzero[i].abs() {
            j += 1;
        }
        // 1-based ranks i+1..=j+1 average to (i+j+2)/2.
        let doubled = (i + j + 2) as u64;
        out.extend(nonzero[i..=j].iter().map(|d| (doubled, *d > 0.0)));
        i = j + 1;
    }
    out
}

/// Number of sign assignments reaching each doubled rank sum.
fn null_counts(doubled_ranks: &[u64]) -> Vec<u64> {
    let total: u64 = doubled_ranks.iter().sum();
    let mut counts = vec![0u64; total as usize + 1];
    counts[0] = 1;
    let mut reach = 0usize;
    for &r in doubled_ranks {
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

fn tie_sizes(ranks: &[(u64, bool)]) -> Vec<u64> {
    let mut sizes = Vec::new();
    let mut i = 0;
    while i < ranks.len() {
        let j = ranks[i..].iter().take_while(|r| r.0 == ranks[i].0).count();
        sizes.push(j as u64);
        i += j;
    }
    sizes
}

fn mean_and_ci(diffs: &[f64]) -> (f64, Option<f64>) {
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    if diffs.len() < 2 {
        return (mean, None);
    }
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let t = StudentsT::new(0.0, 1.0, n - 1.0)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    (mean, Some(t * var.sqrt() / n.sqrt()))
}

/// Right-tailed Wilcoxon signed-rank test, exact for up to
/// [`EXACT_MAX_N`] nonzero differences.
pub fn wilcoxon_right(diffs: &[f64]) -> Result<TestResult> {
    wilcoxon_right_with(diffs, None)
}

/// As [`wilcoxon_right`], optionally forcing the method.
pub fn wilcoxon_right_with(diffs: &[f64], method: Option<Method>) -> Result<TestResult> {
    if diffs.is_empty() {
        return Err(Error::invalid("diffs", "need at least one difference"));
    }
    if let Some(bad) = diffs.iter().find(|d| !d.is_finite()) {
        return Err(Error::invalid("diffs", format!("{bad} is not finite")));
    }
    let ranks = doubled_signed_ranks(diffs);
    let n = ranks.len();
    if n == 0 {
        return Err(Error::NoInformation("all differences are zero".into()));
    }
    let w2: u64 = ranks.iter().filter(|r| r.1).map(|r| r.0).sum();
    let w_plus = w2 as f64 / 2.0;
    let method = method.unwrap_or(if n <= EXACT_MAX_N {
        Method::Exact
    } else {
        Method::NormalApprox
    });

    let (p_right, p_left) = match method {
        Method::Exact => {
            if n > 62 {
                return Err(Error::invalid("diffs", "exact test limited to 62 nonzero differences"));
            }
            let doubled: Vec<u64> = ranks.iter().map(|r| r.0).collect();
            let counts = null_counts(&doubled);
            let total = 2f64.powi(n as i32);
            let upper: u64 = counts[w2 as usize..].iter().sum();
            let lower: u64 = counts[..=w2 as usize].iter().sum();
            (upper as f64 / total, lower as f64 / total)
        }
        Method::NormalApprox => {
            let nf = n as f64;
            let mean = nf * (nf + 1.0) / 4.0;
            let ties: f64 = tie_sizes(&ranks)
                .into_iter()
                .map(|t| (t.pow(3) - t) as f64)
                .sum();
            let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - ties / 48.0;
            let sd = var.sqrt();
            let z = Normal::standard();
            (
                z.sf((w_plus - mean - 0.5) / sd),
                z.cdf((w_plus - mean + 0.5) / sd),
            )
        }
    };

    let (mean_diff, ci95_half_width) = mean_and_ci(diffs);
    Ok(TestResult {
        n_total: diffs.len(),
        n_effective: n,
        w_plus,
        p_right: p_right.clamp(0.0, 1.0),
        p_left: p_left.clamp(0.0, 1.0),
        method,
        mean_diff,
        ci95_half_width,
    })
}
