//! Chat-completions and embeddings over HTTPS in the common JSON wire shape.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde_json::{json, Value};

use super::{ChatProvider, ChatRequest, EmbeddingProvider, ProviderError, RawResponse, Usage};

pub const ENV_API_BASE: &str = "PRISM_API_BASE";
pub const ENV_API_KEY: &str = "PRISM_API_KEY";

static NETWORK_REQUESTS: AtomicU64 = AtomicU64::new(0);

/// Number of HTTP requests issued by any [`HttpProvider`] in this process.
pub fn network_request_count() -> u64 {
    NETWORK_REQUESTS.load(Ordering::SeqCst)
}

#[derive(Debug, Clone)]
pub struct HttpProvider {
    base: String,
    key: String,
    embedding_model: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpProvider {
    pub fn new(base: impl Into<String>, key: impl Into<String>) -> Result<Self, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(3600))
            .build()
            .map_err(|e| ProviderError::Config(e.to_string()))?;
        Ok(HttpProvider {
            base: base.into().trim_end_matches('/').to_string(),
            key: key.into(),
            embedding_model: None,
            client,
        })
    }

    pub fn from_env() -> Result<Self, ProviderError> {
        let base = std::env::var(ENV_API_BASE)
            .map_err(|_| ProviderError::Config(format!("{ENV_API_BASE} is not set")))?;
        let key = std::env::var(ENV_API_KEY)
            .map_err(|_| ProviderError::Config(format!("{ENV_API_KEY} is not set")))?;
        Self::new(base, key)
    }

    pub fn embedding_model(mut self, model: &str) -> Self {
        self.embedding_model = Some(model.to_string());
        self
    }

    fn post(&self, path: &str, body: &Value) -> Result<Value, ProviderError> {
        NETWORK_REQUESTS.fetch_add(1, Ordering::SeqCst);
        let resp = self
            .client
            .post(format!("{}/{path}", self.base))
            .bearer_auth(&self.key)
            .json(body)
            .send()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| ProviderError::Transport(e.to_string()))?;
        match status.as_u16() {
            200..=299 => serde_json::from_str(&text)
                .map_err(|e| ProviderError::Transport(format!("invalid response body: {e}"))),
            401 | 403 => Err(ProviderError::Auth(format!("{status}: {text}"))),
            408 | 500..=599 => Err(ProviderError::Transport(format!("{status}: {text}"))),
            429 => Err(ProviderError::RateLimited(text)),
            _ => Err(ProviderError::BadRequest(format!("{status}: {text}"))),
        }
    }
}

/// Request body in the chat-completions shape.
pub(crate) fn chat_body(req: &ChatRequest) -> Value {
    let mut body = json!({
        "model": req.model_id,
        "messages": [
            {"role": "system", "content": req.system_prompt},
            {"role": "user", "content": req.user_prompt},
        ],
        "max_completion_tokens": req.max_output_tokens,
    });
    if req.deterministic {
        body["seed"] = json!(0);
    }
    body
}

pub(crate) fn parse_chat_response(v: &Value) -> Result<RawResponse, ProviderError> {
    let text = v
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| ProviderError::Transport("response has no message content".into()))?
        .to_string();
    let usage = Usage {
        prompt_tokens: v.pointer("/usage/prompt_tokens").and_then(Value::as_u64).unwrap_or(0),
        completion_tokens: v.pointer("/usage/completion_tokens").and_then(Value::as_u64).unwrap_or(0),
    };
    Ok(RawResponse { text, usage, simulated_latency: None })
}

impl ChatProvider for HttpProvider {
    fn id(&self) -> &str {
        "http"
    }

    fn send(&self, req: &ChatRequest) -> Result<RawResponse, ProviderError> {
        parse_chat_response(&self.post("chat/completions", &chat_body(req))?)
    }
}

impl EmbeddingProvider for HttpProvider {
    fn id(&self) -> &str {
        self.embedding_model.as_deref().unwrap_or("http")
    }

    fn embed_text(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        let model = self
            .embedding_model
            .as_deref()
            .ok_or_else(|| ProviderError::Config("no embedding model configured".into()))?;
        let v = self.post("embeddings", &json!({"model": model, "input": text}))?;
        v.pointer("/data/0/embedding")
            .and_then(Value::as_array)
            .ok_or_else(|| ProviderError::Transport("response has no embedding".into()))?
            .iter()
            .map(|x| x.as_f64().ok_or_else(|| ProviderError::Transport("non-numeric embedding".into())))
            .collect()
    }
}
