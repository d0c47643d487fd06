//! Chat-completion and embedding clients behind one interface, with retry,
//! latency and token accounting, and a deterministic offline mock.

mod http;
mod mock;
mod retry;

pub use http::{network_request_count, HttpProvider, ENV_API_BASE, ENV_API_KEY};
pub use mock::{mock_score, MockEmbedder, MockProvider, ENV_MOCK_SEED, MOCK_EMBED_DIM};
pub use retry::{complete, complete_parsed, FaultyProvider, RetryPolicy};

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompts::{PromptError, SchemaId};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl std::ops::Add for Usage {
    type Output = Usage;
    fn add(self, o: Usage) -> Usage {
        Usage {
            prompt_tokens: self.prompt_tokens + o.prompt_tokens,
            completion_tokens: self.completion_tokens + o.completion_tokens,
        }
    }
}

impl std::ops::AddAssign for Usage {
    fn add_assign(&mut self, o: Usage) {
        *self = *self + o;
    }
}

impl std::iter::Sum for Usage {
    fn sum<I: Iterator<Item = Usage>>(iter: I) -> Usage {
        iter.fold(Usage::default(), |a, b| a + b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model_id: String,
    pub system_prompt: String,
    pub user_prompt: String,
    pub schema: SchemaId,
    pub max_output_tokens: u32,
    /// Ask the backend for its most deterministic sampling.
    pub deterministic: bool,
}

impl ChatRequest {
    pub fn new(model_id: impl Into<String>, system: impl Into<String>, user: impl Into<String>, schema: SchemaId) -> Self {
        ChatRequest {
            model_id: model_id.into(),
            system_prompt: system.into(),
            user_prompt: user.into(),
            schema,
            max_output_tokens: 16_384,
            deterministic: true,
        }
    }

    fn validate(&self) -> Result<(), ProviderError> {
        if self.system_prompt.is_empty() || self.user_prompt.is_empty() {
            return Err(ProviderError::BadRequest("prompts must be non-empty".into()));
        }
        if self.max_output_tokens == 0 {
            return Err(ProviderError::BadRequest("max_output_tokens must be positive".into()));
        }
        Ok(())
    }
}

/// One backend response, before retry bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct RawResponse {
    pub text: String,
    pub usage: Usage,
    /// Backends with a virtual clock report latency here instead of being timed.
    pub simulated_latency: Option<Duration>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub usage: Usage,
    pub latency_ms: u64,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProviderError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("rate limited: {0}")]
    RateLimited(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("provider configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Output(#[from] PromptError),
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: Box<ProviderError> },
}

impl ProviderError {
    pub fn is_retryable(&self) -> bool {
        match self {
            ProviderError::Transport(_) | ProviderError::RateLimited(_) => true,
            ProviderError::Output(e) => e.is_retryable(),
            _ => false,
        }
    }

    /// Innermost cause, looking through `Exhausted`.
    pub fn root(&self) -> &ProviderError {
        match self {
            ProviderError::Exhausted { last, .. } => last.root(),
            other => other,
        }
    }
}

/// A chat-completion backend. One call, no retries.
pub trait ChatProvider: Send + Sync {
    fn id(&self) -> &str;
    fn send(&self, request: &ChatRequest) -> Result<RawResponse, ProviderError>;
    /// Whether repeated identical requests return identical responses.
    fn is_deterministic(&self) -> bool {
        false
    }
}

/// A text-embedding backend.
pub trait EmbeddingProvider: Send + Sync {
    fn id(&self) -> &str;
    fn embed_text(&self, text: &str) -> Result<Vec<f64>, ProviderError>;
}

impl<P: ChatProvider + ?Sized> ChatProvider for Arc<P> {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn send(&self, request: &ChatRequest) -> Result<RawResponse, ProviderError> {
        (**self).send(request)
    }
    fn is_deterministic(&self) -> bool {
        (**self).is_deterministic()
    }
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for Arc<P> {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn embed_text(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        (**self).embed_text(text)
    }
}

/// Chat provider by id: `"mock"` (seeded from `PRISM_MOCK_SEED`, else `seed`) or `"http"`.
pub fn chat_provider(id: &str, seed: u64) -> Result<Arc<dyn ChatProvider>, ProviderError> {
    match id {
        "mock" => Ok(Arc::new(MockProvider::new(mock::seed_from_env().unwrap_or(seed)))),
        "http" | "openai" => Ok(Arc::new(HttpProvider::from_env()?)),
        other => Err(ProviderError::Config(format!("unknown provider {other:?}"))),
    }
}

/// Embedding provider by id: `"mock"` or a remote embedding model name.
pub fn embedding_provider(id: &str, seed: u64) -> Result<Arc<dyn EmbeddingProvider>, ProviderError> {
    match id {
        "mock" => Ok(Arc::new(MockEmbedder::new(mock::seed_from_env().unwrap_or(seed)))),
        model => Ok(Arc::new(HttpProvider::from_env()?.embedding_model(model))),
    }
}
