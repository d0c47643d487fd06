//! Training-free LLM ranking orchestration for financial filings.

pub mod agents;
pub mod corpus;
pub mod eval;
pub mod exemplars;
pub mod parallel;
pub mod prompts;
pub mod provider;
pub mod quantile;
pub mod runner;
pub mod scalar;
pub mod synth;
pub mod telemetry;
pub mod text;

pub use scalar::Scalar;

/// Run-level statistics in double precision.
pub type StatsSummary = eval::Summary<f64>;
pub type WelchResult = eval::Welch<f64>;
pub type FiveNumberSummary = quantile::FiveNumber<f64>;
/// Exemplar vectors are stored as `f32`, matching the on-disk index format.
pub type ExemplarIndex = exemplars::FlatIndex<f32>;
