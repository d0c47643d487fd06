//! Normalized discounted cumulative gain at a cutoff.

use serde::{Deserialize, Serialize};

use super::{EvalError, Result};
use crate::scalar::Scalar;

/// How a graded relevance label turns into gain.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainScheme {
    /// `2^g - 1`
    #[default]
    Exponential,
    /// `g`
    Linear,
}

impl GainScheme {
    fn gain<F: Scalar>(self, g: i64) -> F {
        match self {
            GainScheme::Exponential => F::lit(2.0).powi(g as i32) - F::one(),
            GainScheme::Linear => F::lit(g as f64),
        }
    }
}

/// DCG of gains listed in presentation order, truncated at `k`.
pub fn dcg_at_k<F: Scalar>(ordered_gains: impl IntoIterator<Item = i64>, k: usize, scheme: GainScheme) -> F {
    ordered_gains
        .into_iter()
        .take(k)
        .enumerate()
        .fold(F::zero(), |acc, (i, g)| {
            acc + scheme.gain::<F>(g) / F::from_count(i + 2).log2()
        })
}

/// NDCG@k of `predicted` (candidate indices, best first) against per-candidate `gains`.
///
/// Returns 0 when every gain is zero.
pub fn ndcg_at_k<F: Scalar>(predicted: &[usize], gains: &[i64], k: usize, scheme: GainScheme) -> Result<F> {
    if k == 0 {
        return Err(EvalError::Argument("k must be at least 1".into()));
    }
    if let Some(g) = gains.iter().find(|g| **g < 0) {
        return Err(EvalError::Argument(format!("negative gain {g}")));
    }
    if predicted.len() != gains.len() {
        return Err(EvalError::Argument(format!(
            "ranking has {} entries for {} labeled candidates",
            predicted.len(),
            gains.len()
        )));
    }
    let mut seen = vec![false; gains.len()];
    for &i in predicted {
        if i >= gains.len() || std::mem::replace(&mut seen[i], true) {
            return Err(EvalError::Argument(format!(
                "ranking is not a permutation (bad or repeated index {i})"
            )));
        }
    }

    let mut ideal = gains.to_vec();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: F = dcg_at_k(ideal, k, scheme);
    if idcg == F::zero() {
        return Ok(F::zero());
    }
    let dcg: F = dcg_at_k(predicted.iter().map(|&i| gains[i]), k, scheme);
    Ok(dcg / idcg)
}
