//! Two-sided Wilcoxon signed-rank test, normal approximation with tie
//! correction and no continuity correction.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::HarnessError;

/// Fewest nonzero differences for which the normal approximation is used.
pub const MIN_PAIRS: usize = 6;
pub const ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Pairs with a nonzero difference.
    pub pairs: usize,
    /// Rank sum of positive differences `a - b`.
    pub w_plus: f64,
    pub w_minus: f64,
    /// `min(w_plus, w_minus)`.
    pub statistic: f64,
    pub z: f64,
    pub p_value: f64,
    pub significant: bool,
}

/// Tests whether paired samples `a` and `b` differ in location.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult, HarnessError> {
    if a.len() != b.len() {
        return Err(HarnessError::Usage(format!("paired samples differ in length: {} vs {}", a.len(), b.len())));
    }
    let mut diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    let n = diffs.len();
    if n < MIN_PAIRS {
        return Err(HarnessError::TooFewPairs { found: n, needed: MIN_PAIRS });
    }
    diffs.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
    let (mut w_plus, mut w_minus, mut tie_term) = (0.0, 0.0, 0.0);
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && diffs[j + 1].abs() == diffs[i].abs() {
            j += 1;
        }
        // positions i..=j share the average of ranks i+1..=j+1
        let rank = (i + j + 2) as f64 / 2.0;
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        for d in &diffs[i..=j] {
            if *d > 0.0 {
                w_plus += rank;
            } else {
                w_minus += rank;
            }
        }
        i = j + 1;
    }
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let statistic = w_plus.min(w_minus);
    let z = (statistic - mean) / var.sqrt();
    let p_value = (2.0 * Normal::standard().cdf(-z.abs())).min(1.0);
    Ok(WilcoxonResult { pairs: n, w_plus, w_minus, statistic, z, p_value, significant: p_value < ALPHA })
}
