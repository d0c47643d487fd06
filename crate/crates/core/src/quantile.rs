//! Five-number summaries with linearly interpolated quartiles.
//!
//! Quartiles use interpolation between closest ranks: for sorted values
//! `x[0..n]` the `p`-quantile is read at position `h = (n - 1) * p`, i.e.
//! `x[floor(h)] + (h - floor(h)) * (x[floor(h) + 1] - x[floor(h)])`.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Minimum, lower quartile, median, upper quartile, maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiveNumber<F> {
    pub count: usize,
    pub min: F,
    pub q1: F,
    pub median: F,
    pub q3: F,
    pub max: F,
}

/// Interpolated quantile of an ascending-sorted, non-empty slice.
pub fn quantile_sorted<F: Scalar>(sorted: &[F], p: F) -> F {
    assert!(!sorted.is_empty(), "quantile of empty slice");
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = F::from_count(n - 1) * p;
    let lo = h.floor();
    let lo_idx = lo.to_usize().unwrap_or(0).min(n - 1);
    let hi_idx = (lo_idx + 1).min(n - 1);
    let frac = h - lo;
    sorted[lo_idx] + frac * (sorted[hi_idx] - sorted[lo_idx])
}

/// Five-number summary of arbitrary finite values. Returns `None` for empty input.
pub fn five_number<F: Scalar>(values: &[F]) -> Option<FiveNumber<F>> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    Some(FiveNumber {
        count: sorted.len(),
        min: sorted[0],
        q1: quantile_sorted(&sorted, F::lit(0.25)),
        median: quantile_sorted(&sorted, F::lit(0.5)),
        q3: quantile_sorted(&sorted, F::lit(0.75)),
        max: sorted[sorted.len() - 1],
    })
}
