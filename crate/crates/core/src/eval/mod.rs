//! Ranking quality metric and the run-to-run reproducibility statistics.

mod ndcg;
mod stats;
mod tdist;

pub use ndcg::{dcg_at_k, ndcg_at_k, GainScheme};
pub use stats::{descriptive_stats, welch_t_test, Summary, Welch};
pub use tdist::{ln_gamma, regularized_incomplete_beta, t_cdf, t_pdf, t_quantile};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("invalid argument: {0}")]
    Argument(String),
}

pub type Result<T> = std::result::Result<T, EvalError>;
