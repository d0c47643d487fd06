//! Descriptive statistics over repeated runs and Welch's two-sample t-test.

use log::warn;
use serde::{Deserialize, Serialize};

use super::tdist::{t_cdf, t_quantile};
use super::{EvalError, Result};
use crate::scalar::Scalar;

/// Mean, sample SD, coefficient of variation and a two-sided t confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary<F> {
    pub n: usize,
    pub mean: F,
    pub sd: F,
    /// Percent. `None` when the mean is zero.
    pub cv: Option<F>,
    pub ci_low: F,
    pub ci_high: F,
    pub alpha: F,
}

/// Outcome of a two-tailed Welch test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Welch<F> {
    pub t: F,
    pub df: F,
    pub p: F,
    pub significant: bool,
}

fn check_alpha<F: Scalar>(alpha: F) -> Result<()> {
    if !(alpha > F::zero() && alpha < F::one()) {
        return Err(EvalError::Argument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

fn mean_var<F: Scalar>(xs: &[F]) -> (F, F) {
    let n = F::from_count(xs.len());
    let mean = xs.iter().fold(F::zero(), |acc, &x| acc + x) / n;
    let ss = xs.iter().fold(F::zero(), |acc, &x| acc + (x - mean) * (x - mean));
    (mean, ss / (n - F::one()))
}

fn check_sample<F: Scalar>(xs: &[F], label: &str) -> Result<()> {
    if xs.len() < 2 {
        return Err(EvalError::Argument(format!(
            "{label}: need at least 2 observations, got {}",
            xs.len()
        )));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(EvalError::Argument(format!("{label}: non-finite observation")));
    }
    Ok(())
}

pub fn descriptive_stats<F: Scalar>(scores: &[F], alpha: F) -> Result<Summary<F>> {
    check_sample(scores, "scores")?;
    check_alpha(alpha)?;
    let n = scores.len();
    let (mean, var) = mean_var(scores);
    let sd = var.sqrt();
    let cv = if mean == F::zero() { None } else { Some(F::lit(100.0) * sd / mean) };
    let t_crit = t_quantile(F::one() - alpha / F::lit(2.0), F::from_count(n - 1))?;
    let half_width = t_crit * sd / F::from_count(n).sqrt();
    Ok(Summary {
        n,
        mean,
        sd,
        cv,
        ci_low: mean - half_width,
        ci_high: mean + half_width,
        alpha,
    })
}

pub fn welch_t_test<F: Scalar>(a: &[F], b: &[F], alpha: F) -> Result<Welch<F>> {
    check_sample(a, "a")?;
    check_sample(b, "b")?;
    check_alpha(alpha)?;
    let (n1, n2) = (F::from_count(a.len()), F::from_count(b.len()));
    let (m1, v1) = mean_var(a);
    let (m2, v2) = mean_var(b);
    let se1 = v1 / n1;
    let se2 = v2 / n2;
    let se = se1 + se2;

    if se == F::zero() {
        let df = n1 + n2 - F::lit(2.0);
        if m1 == m2 {
            return Ok(Welch { t: F::zero(), df, p: F::one(), significant: false });
        }
        warn!("welch_t_test: both samples have zero variance but different means");
        let t = if m1 > m2 { F::infinity() } else { F::neg_infinity() };
        return Ok(Welch { t, df, p: F::zero(), significant: true });
    }

    let t = (m1 - m2) / se.sqrt();
    let df = se * se / (se1 * se1 / (n1 - F::one()) + se2 * se2 / (n2 - F::one()));
    let p = (F::lit(2.0) * t_cdf(-t.abs(), df)?).min(F::one());
    Ok(Welch { t, df, p, significant: p < alpha })
}
