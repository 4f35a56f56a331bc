//! Wilcoxon signed-rank test for paired per-query scores.
//!
//! Zero differences are dropped and tied absolute differences share
//! average ranks. For small samples the p-value is exact, computed by
//! enumerating every sign assignment over the ranks; larger samples use
//! the normal approximation with continuity correction and tie-adjusted
//! variance.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use super::EvalError;

/// Exact enumeration is used strictly below this sample size.
pub const EXACT_N_LIMIT: usize = 20;

/// Enumeration guard: 2^n sign assignments are walked explicitly.
const MAX_ENUMERATION_N: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WilcoxonMethod {
    Exact,
    NormalApproximation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WilcoxonResult {
    /// `min(W+, W-)`: the smaller of the signed rank sums.
    pub statistic: f64,
    /// Two-sided p-value.
    pub p_value: f64,
    /// One-sided p-value in the observed direction.
    pub p_value_one_sided: f64,
    pub significant: bool,
    /// Pairs remaining after zero differences were dropped.
    pub n: usize,
    pub method: WilcoxonMethod,
}

/// Two-sided Wilcoxon signed-rank test of paired samples `a` vs `b` at
/// significance level `alpha`.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64], alpha: f64) -> Result<WilcoxonResult, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(EvalError::InvalidParameter("alpha must be in [0,1]".into()));
    }
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    let n = diffs.len();
    if n < 5 {
        return Err(EvalError::TooFewPairs { available: n });
    }

    let ranks = average_ranks(&diffs);
    let w_plus: f64 = ranks
        .iter()
        .zip(&diffs)
        .filter(|(_, d)| **d > 0.0)
        .map(|(r, _)| *r)
        .sum();

    let (method, (p_two, p_one)) = if n < EXACT_N_LIMIT {
        (WilcoxonMethod::Exact, wilcoxon_exact_p(&ranks, w_plus))
    } else {
        (
            WilcoxonMethod::NormalApproximation,
            wilcoxon_normal_approx_p(&ranks, w_plus),
        )
    };

    let total: f64 = ranks.iter().sum();
    let w_minus = total - w_plus;
    Ok(WilcoxonResult {
        statistic: w_plus.min(w_minus),
        p_value: p_two,
        p_value_one_sided: p_one,
        significant: p_two <= alpha,
        n,
        method,
    })
}

/// Ranks of |diffs| in ascending order, ties sharing the average rank.
fn average_ranks(diffs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..diffs.len()).collect();
    order.sort_by(|&i, &j| diffs[i].abs().partial_cmp(&diffs[j].abs()).unwrap());
    let mut ranks = vec![0.0; diffs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && diffs[order[j + 1]].abs() == diffs[order[i]].abs() {
            j += 1;
        }
        // Positions i..=j (0-based) share the average of ranks i+1..=j+1.
        let avg = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Exact (two-sided, one-sided) p-values by enumerating all `2^n` sign
/// assignments of the ranks.
pub fn wilcoxon_exact_p(ranks: &[f64], w_plus: f64) -> (f64, f64) {
    let n = ranks.len();
    assert!(
        n <= MAX_ENUMERATION_N,
        "exact enumeration limited to n <= {MAX_ENUMERATION_N}"
    );
    let total: f64 = ranks.iter().sum();
    let w_minus = total - w_plus;
    let (w_lo, w_hi) = (w_plus.min(w_minus), w_plus.max(w_minus));
    let assignments: u64 = 1 << n;
    let mut count_le = 0u64;
    let mut count_ge = 0u64;
    for mask in 0..assignments {
        let mut w = 0.0;
        let mut bits = mask;
        while bits != 0 {
            let bit = bits.trailing_zeros() as usize;
            w += ranks[bit];
            bits &= bits - 1;
        }
        if w <= w_lo + 1e-9 {
            count_le += 1;
        }
        if w >= w_hi - 1e-9 {
            count_ge += 1;
        }
    }
    let denom = assignments as f64;
    let p_two = ((count_le + count_ge) as f64 / denom).min(1.0);
    let directed = if w_plus >= w_minus {
        count_ge
    } else {
        count_le
    };
    (p_two, directed as f64 / denom)
}

/// Normal-approximation (two-sided, one-sided) p-values with continuity
/// correction and the tie adjustment `Σ(t³ - t)/48` subtracted from the
/// variance.
pub fn wilcoxon_normal_approx_p(ranks: &[f64], w_plus: f64) -> (f64, f64) {
    let n = ranks.len() as f64;
    let total: f64 = ranks.iter().sum();
    let w = w_plus.min(total - w_plus);
    let mean = n * (n + 1.0) / 4.0;
    let mut variance = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0;
    variance -= tie_correction(ranks) / 48.0;
    if variance <= 0.0 {
        return (1.0, 0.5);
    }
    let z = (w - mean + 0.5) / variance.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let p_one = normal.cdf(z);
    ((2.0 * p_one).min(1.0), p_one)
}

/// `Σ_groups (t³ - t)` over groups of tied ranks.
fn tie_correction(ranks: &[f64]) -> f64 {
    let mut sorted: Vec<f64> = ranks.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut correction = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        correction += t * t * t - t;
        i = j + 1;
    }
    correction
}
