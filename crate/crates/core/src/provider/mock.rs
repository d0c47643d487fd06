//! Deterministic offline backend: lexical-overlap scoring and hashed bag-of-words embeddings.

use std::collections::BTreeSet;
use std::time::Duration;

use serde_json::json;

use super::{ChatProvider, ChatRequest, EmbeddingProvider, ProviderError, RawResponse, Usage};
use crate::corpus::DocType;
use crate::prompts::SchemaId;
use crate::text::{fnv1a, tokenize};

pub const ENV_MOCK_SEED: &str = "PRISM_MOCK_SEED";
pub const MOCK_EMBED_DIM: usize = 256;

pub(crate) fn seed_from_env() -> Option<u64> {
    std::env::var(ENV_MOCK_SEED).ok()?.trim().parse().ok()
}

fn doc_profile(t: DocType) -> &'static str {
    match t {
        DocType::Def14A => "proxy statements shareholder governance executive compensation board director voting",
        DocType::TenK => "annual report comprehensive business overview risk factors financial statements strategy",
        DocType::TenQ => "quarterly report recent performance interim financials operational updates",
        DocType::EightK => "current report material events breaking news significant changes acquisition merger leadership",
        DocType::Earnings => "earnings call management guidance outlook projections recent performance discussion",
    }
}

/// Score in 1..=10 from the share of query tokens present in the candidate,
/// mapped linearly, plus a seed-keyed perturbation in {-1, 0, +1}.
pub fn mock_score(query: &str, candidate_text: &str, seed: u64) -> u8 {
    let q: BTreeSet<String> = tokenize(query).into_iter().collect();
    let c: BTreeSet<String> = tokenize(candidate_text).into_iter().collect();
    let overlap = if q.is_empty() { 0.0 } else { q.intersection(&c).count() as f64 / q.len() as f64 };
    let base = 1 + (9.0 * overlap).round() as i32;
    let mut key = Vec::with_capacity(query.len() + candidate_text.len() + 1);
    key.extend_from_slice(query.as_bytes());
    key.push(0x1f);
    key.extend_from_slice(candidate_text.as_bytes());
    let perturb = (fnv1a(seed, &key) % 3) as i32 - 1;
    (base + perturb).clamp(1, 10) as u8
}

/// `(index, text)` for each `[index] text` line inside the `<candidates>` block.
fn presented_candidates(system_prompt: &str) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    let mut inside = false;
    for line in system_prompt.lines() {
        match line.trim() {
            "<candidates>" => inside = true,
            "</candidates>" => inside = false,
            l if inside => {
                if let Some(rest) = l.strip_prefix('[') {
                    if let Some((idx, text)) = rest.split_once("] ") {
                        if let Ok(i) = idx.parse() {
                            out.push((i, text.to_string()));
                        }
                    }
                }
            }
            _ => {}
        }
    }
    out
}

/// Expand a `DEF 14A: ...` style document line with that type's profile vocabulary.
fn scoring_text(text: &str) -> String {
    if let Some((label, rest)) = text.split_once(": ") {
        if let Ok(t) = label.parse::<DocType>() {
            return format!("{label} {rest} {}", doc_profile(t));
        }
    }
    text.to_string()
}

fn approx_tokens(s: &str) -> u64 {
    (s.chars().count() as u64).div_ceil(4)
}

/// Offline chat backend. Responses depend only on the request and the seed.
#[derive(Debug, Clone)]
pub struct MockProvider {
    seed: u64,
    keep_threshold: u8,
}

impl MockProvider {
    pub fn new(seed: u64) -> Self {
        MockProvider { seed, keep_threshold: 3 }
    }

    /// Filter roles keep candidates scoring at least `threshold`.
    pub fn with_keep_threshold(mut self, threshold: u8) -> Self {
        self.keep_threshold = threshold;
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn weights(&self, question: &str) -> String {
        let q: BTreeSet<String> = tokenize(question).into_iter().collect();
        let raw: Vec<f64> = DocType::ALL
            .iter()
            .map(|t| {
                let p: BTreeSet<String> = tokenize(doc_profile(*t)).into_iter().collect();
                1.0 + q.intersection(&p).count() as f64
            })
            .collect();
        let total: f64 = raw.iter().sum();
        let weights: serde_json::Map<String, serde_json::Value> = DocType::ALL
            .iter()
            .zip(&raw)
            .map(|(t, w)| (t.as_str().to_string(), json!(w / total)))
            .collect();
        json!({"weights": weights, "reasoning": "lexical overlap with document profiles"}).to_string()
    }

    fn scores(&self, req: &ChatRequest) -> String {
        let key = fnv1a(self.seed, req.system_prompt.as_bytes());
        let cands = presented_candidates(&req.system_prompt);
        let mut kept = Vec::new();
        let scores: Vec<_> = cands
            .iter()
            .map(|(i, text)| {
                let s = mock_score(&req.user_prompt, &scoring_text(text), key);
                if s >= self.keep_threshold {
                    kept.push(*i);
                }
                json!({"chunk_index": i, "relevance_score": s, "reasoning": format!("overlap score {s}")})
            })
            .collect();
        match req.schema {
            SchemaId::FilterV1 => json!({"scores": scores, "filtered_indices": kept}).to_string(),
            _ => json!({"scores": scores}).to_string(),
        }
    }
}

impl ChatProvider for MockProvider {
    fn id(&self) -> &str {
        "mock"
    }

    fn send(&self, req: &ChatRequest) -> Result<RawResponse, ProviderError> {
        let text = match req.schema {
            SchemaId::WeightsV1 => self.weights(&req.user_prompt),
            SchemaId::ScoresV1 | SchemaId::FilterV1 => self.scores(req),
        };
        let usage = Usage {
            prompt_tokens: approx_tokens(&req.system_prompt) + approx_tokens(&req.user_prompt),
            completion_tokens: approx_tokens(&text),
        };
        let simulated = Duration::from_millis(200 + usage.prompt_tokens / 20 + usage.completion_tokens / 5);
        Ok(RawResponse { text, usage, simulated_latency: Some(simulated) })
    }

    fn is_deterministic(&self) -> bool {
        true
    }
}

/// Hashed bag-of-words embedding over [`MOCK_EMBED_DIM`] buckets, unit L2 norm.
#[derive(Debug, Clone)]
pub struct MockEmbedder {
    seed: u64,
}

impl MockEmbedder {
    pub fn new(seed: u64) -> Self {
        MockEmbedder { seed }
    }
}

impl EmbeddingProvider for MockEmbedder {
    fn id(&self) -> &str {
        "mock"
    }

    fn embed_text(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        if text.trim().is_empty() {
            return Err(ProviderError::BadRequest("cannot embed empty text".into()));
        }
        let mut tokens = tokenize(text);
        if tokens.is_empty() {
            tokens.push(text.trim().to_string());
        }
        let mut v = vec![0.0; MOCK_EMBED_DIM];
        for t in &tokens {
            v[(fnv1a(self.seed, t.as_bytes()) % MOCK_EMBED_DIM as u64) as usize] += 1.0;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        Ok(v.into_iter().map(|x| x / norm).collect())
    }
}
