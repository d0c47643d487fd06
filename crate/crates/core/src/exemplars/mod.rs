//! In-context exemplars: embedding, exact L2 retrieval, few-shot formatting.

mod fewshot;
mod index;
mod persist;

pub use fewshot::{format_few_shot, IclK};
pub use index::{FlatIndex, Hit};
pub use persist::{read_exemplars, read_index, write_exemplars, write_index, INDEX_MAGIC, INDEX_VERSION};

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Sample, Task};
use crate::provider::{EmbeddingProvider, ProviderError};

#[derive(Debug, Error)]
pub enum ExemplarError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("duplicate exemplar id {0}")]
    DuplicateId(String),
    #[error("exemplar {id}: dimension {found} does not match index dimension {expected}")]
    DimensionMismatch { id: String, expected: usize, found: usize },
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("index file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, ExemplarError>;

/// A solved query used as a few-shot example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exemplar {
    pub exemplar_id: String,
    pub query: String,
    /// Ground-truth ordering as display labels, best first.
    pub answer_ranking: Vec<String>,
    pub task: Task,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vector: Option<Vec<f32>>,
}

impl Exemplar {
    /// Build from a labeled sample. Documents list every type; chunks list the
    /// relevant indices (or the top five when none are relevant).
    pub fn from_sample(sample: &Sample) -> Option<Exemplar> {
        let order = sample.ideal_order()?;
        let answer_ranking: Vec<String> = match sample.task {
            Task::DocumentRanking => order
                .iter()
                .filter_map(|&i| sample.position_of(i).and_then(|p| sample.candidates[p].doc_type))
                .map(|t| t.to_string())
                .collect(),
            Task::ChunkRanking => {
                let relevant: Vec<String> = order
                    .iter()
                    .filter(|&&i| sample.gain_of(i).unwrap_or(0) > 0)
                    .map(|i| format!("chunk {i}"))
                    .collect();
                if relevant.is_empty() {
                    order.iter().take(5).map(|i| format!("chunk {i}")).collect()
                } else {
                    relevant
                }
            }
        };
        (!answer_ranking.is_empty()).then(|| Exemplar {
            exemplar_id: sample.sample_id.clone(),
            query: sample.query.clone(),
            answer_ranking,
            task: sample.task,
            vector: None,
        })
    }
}

/// Embed non-empty text.
pub fn embed(text: &str, provider: &dyn EmbeddingProvider) -> Result<Vec<f64>> {
    if text.trim().is_empty() {
        return Err(ExemplarError::Argument("cannot embed empty text".into()));
    }
    Ok(provider.embed_text(text)?)
}

/// An index together with the exemplar payloads it was built from, in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct ExemplarStore {
    pub index: FlatIndex<f32>,
    pub exemplars: Vec<Exemplar>,
}

impl ExemplarStore {
    /// Top-`k` exemplars for a query text.
    pub fn retrieve(&self, query: &str, k: usize, provider: &dyn EmbeddingProvider) -> Result<Vec<(&Exemplar, f64)>> {
        let q: Vec<f32> = embed(query, provider)?.into_iter().map(|x| x as f32).collect();
        let hits = self.index.search(&q, k)?;
        Ok(hits.into_iter().map(|h| (&self.exemplars[h.position], h.distance)).collect())
    }

    pub fn len(&self) -> usize {
        self.exemplars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exemplars.is_empty()
    }
}

/// Embed every exemplar query and insert it into a fresh index.
pub fn build_index(exemplars: Vec<Exemplar>, provider: &dyn EmbeddingProvider) -> Result<ExemplarStore> {
    if exemplars.is_empty() {
        return Err(ExemplarError::Argument("no exemplars to index".into()));
    }
    let mut ids = HashSet::new();
    for e in &exemplars {
        if !ids.insert(e.exemplar_id.as_str()) {
            return Err(ExemplarError::DuplicateId(e.exemplar_id.clone()));
        }
    }
    let mut index: Option<FlatIndex<f32>> = None;
    let mut stored = Vec::with_capacity(exemplars.len());
    for mut e in exemplars {
        let v: Vec<f32> = embed(&e.query, provider)?.into_iter().map(|x| x as f32).collect();
        let idx = index.get_or_insert_with(|| FlatIndex::new(v.len()));
        idx.insert(&e.exemplar_id, &v)?;
        e.vector = Some(v);
        stored.push(e);
    }
    Ok(ExemplarStore { index: index.expect("non-empty"), exemplars: stored })
}
