//! Versioned prompt templates, rendering, and structured-output parsing.

mod parse;
mod template;
mod weights;

pub use parse::{extract_json_object, parse_scores, parse_weights, SchemaId, ScoreEntry, ScoreList};
pub use template::{
    format_candidates, render_prompt, Compose, PromptInputs, PromptTemplate, PromptVariant,
    TemplateRegistry, DEFAULT_CHAR_BUDGET, PLACEHOLDERS,
};
pub use weights::{validate_weights, WeightMap, MIN_WEIGHT};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PromptError {
    #[error("missing value for placeholder {{{0}}}")]
    MissingPlaceholder(String),
    #[error("template {template}: undeclared placeholder {{{placeholder}}}")]
    UnknownPlaceholder { template: String, placeholder: String },
    #[error("rendered prompt is {len} chars, over the {budget}-char budget by {overflow}")]
    BudgetExceeded { len: usize, budget: usize, overflow: usize },
    #[error("unknown template {0}")]
    UnknownTemplate(String),
    #[error("template asset error: {0}")]
    Asset(String),
    /// No well-formed payload could be extracted; worth retrying the call.
    #[error("parse failure: {0}")]
    ParseFailure(String),
    /// A payload was extracted but cannot satisfy the output contract.
    #[error("contract violation: {0}")]
    ContractViolation(String),
}

impl PromptError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, PromptError::ParseFailure(_))
    }
}

pub type Result<T> = std::result::Result<T, PromptError>;
