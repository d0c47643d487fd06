//! Experiment orchestration: run a configuration over a dataset and write
//! rankings, telemetry, scores and a manifest tying them together.

mod artifacts;
mod evaluate;
mod execute;
mod tables;

pub use artifacts::{manifest_hash, read_rankings, sha256_file, Manifest, RankingEntry, SampleFailure, Versions};
pub use evaluate::{evaluate_run, write_scores_csv, EvalReport, SampleScore};
pub use execute::{run_experiment, RunArtifacts, RunEnv};
pub use tables::{read_run_scores, write_descriptive_csv, write_welch_csv};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{AgentError, Architecture, GraphConfig};
use crate::corpus::{CorpusError, Task};
use crate::eval::EvalError;
use crate::exemplars::{ExemplarError, IclK};
use crate::prompts::{PromptError, PromptVariant};
use crate::provider::{ProviderError, RetryPolicy};
use crate::telemetry::TelemetryError;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid run config: {0}")]
    Config(String),
    #[error("evaluation: {0}")]
    Eval(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("{path}: {reason}")]
    Malformed { path: String, reason: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Exemplar(#[from] ExemplarError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Telemetry(#[from] TelemetryError),
    #[error(transparent)]
    Stats(#[from] EvalError),
}

pub type Result<T> = std::result::Result<T, RunError>;

pub const DEFAULT_BATCH_SIZE: usize = 50;

fn default_batch() -> usize {
    DEFAULT_BATCH_SIZE
}

fn default_parallelism() -> usize {
    4
}

fn default_provider() -> String {
    "mock".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IclConfig {
    pub k: IclK,
    /// Embedding provider id, e.g. `mock` or `http`.
    pub embedding: String,
    /// Directory written by `index-build`; needed when running from the CLI.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskConfig {
    pub prompt: PromptVariant,
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub icl: Option<IclConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agentic: Option<Architecture>,
    /// Replaces the stock topology of `agentic`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphConfig>,
    /// Candidates per prompt on the non-agentic chunk path.
    #[serde(default = "default_batch")]
    pub batch_size: usize,
}

impl TaskConfig {
    pub fn new(prompt: PromptVariant, model: &str) -> Self {
        TaskConfig { prompt, model: model.into(), icl: None, agentic: None, graph: None, batch_size: DEFAULT_BATCH_SIZE }
    }

    pub fn with_icl(mut self, k: IclK, embedding: &str) -> Self {
        self.icl = Some(IclConfig { k, embedding: embedding.into(), index_dir: None });
        self
    }

    pub fn with_agentic(mut self, a: Architecture) -> Self {
        self.agentic = Some(a);
        self
    }

    /// Topology to run for `task`, if agentic. Any architecture on the document
    /// task selects the document ensemble.
    pub fn resolved_graph(&self, task: Task) -> Option<GraphConfig> {
        if let Some(g) = &self.graph {
            return Some(g.clone());
        }
        let a = self.agentic?;
        Some(match task {
            Task::DocumentRanking => GraphConfig::standard(Architecture::DocEnsemble),
            Task::ChunkRanking => GraphConfig::standard(a),
        })
    }
}

/// One row of the ablation grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub run_id: String,
    pub seed: u64,
    /// Samples processed concurrently.
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    /// Chat provider id: `mock` or `http`.
    #[serde(default = "default_provider")]
    pub provider: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub document: Option<TaskConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chunk: Option<TaskConfig>,
    #[serde(default)]
    pub retry: RetryPolicy,
}

impl RunConfig {
    pub fn new(run_id: &str, seed: u64) -> Self {
        RunConfig {
            run_id: run_id.into(),
            seed,
            parallelism: default_parallelism(),
            provider: default_provider(),
            document: None,
            chunk: None,
            retry: RetryPolicy::default(),
        }
    }

    pub fn task(&self, task: Task) -> Option<&TaskConfig> {
        match task {
            Task::DocumentRanking => self.document.as_ref(),
            Task::ChunkRanking => self.chunk.as_ref(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(RunError::Config(m));
        if self.run_id.trim().is_empty() || self.run_id.contains(['/', '\\', ',', '\n']) {
            return bad(format!("run_id {:?} must be non-empty and path/CSV safe", self.run_id));
        }
        if self.parallelism == 0 {
            return bad("parallelism must be at least 1".into());
        }
        if self.document.is_none() && self.chunk.is_none() {
            return bad("no task configured".into());
        }
        for task in [Task::DocumentRanking, Task::ChunkRanking] {
            let Some(t) = self.task(task) else { continue };
            if t.model.trim().is_empty() {
                return bad(format!("{task}: model is empty"));
            }
            if t.batch_size == 0 {
                return bad(format!("{task}: batch_size must be at least 1"));
            }
            if let Some(g) = t.resolved_graph(task) {
                if g.architecture.is_chunk() != (task == Task::ChunkRanking) {
                    return bad(format!("{task}: graph {} does not rank this task", g.architecture));
                }
                g.validate()?;
            }
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: RunConfig = serde_json::from_str(s).map_err(|e| RunError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
