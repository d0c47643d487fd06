//! Multi-agent ranking graphs: the document ensemble and chunk architectures A1–A4.

mod consensus;
mod graph;

pub use consensus::{consensus, enforce_filter_floor, Consensus, ScoreMatrix};
pub use graph::{run_chunk_ranking, run_document_ranking, GraphEnv};

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::DocType;
use crate::prompts::PromptError;
use crate::provider::Usage;

/// Default minimum number of candidates a filtering agent must keep.
pub const DEFAULT_FILTER_FLOOR: usize = 100;
/// Default number of agent calls in flight within one stage.
pub const DEFAULT_STAGE_PARALLELISM: usize = 4;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("invalid input: {0}")]
    Argument(String),
    #[error("every agent in stage {stage} failed: {}", errors.join("; "))]
    EmptyStage { stage: u32, errors: Vec<String> },
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

pub type Result<T> = std::result::Result<T, AgentError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Architecture {
    DocEnsemble,
    A1,
    A2,
    A3,
    A4,
}

impl Architecture {
    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::DocEnsemble => "DocEnsemble",
            Architecture::A1 => "A1",
            Architecture::A2 => "A2",
            Architecture::A3 => "A3",
            Architecture::A4 => "A4",
        }
    }

    pub fn is_chunk(self) -> bool {
        self != Architecture::DocEnsemble
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Architecture {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "docensemble" | "doc_ensemble" | "document" => Ok(Architecture::DocEnsemble),
            "a1" => Ok(Architecture::A1),
            "a2" => Ok(Architecture::A2),
            "a3" => Ok(Architecture::A3),
            "a4" => Ok(Architecture::A4),
            _ => Err(format!("unknown architecture {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Analyzer,
    Expert,
    Filter,
    Selector,
    Scorer,
    Diversity,
}

impl AgentKind {
    fn narrows(self) -> bool {
        matches!(self, AgentKind::Filter | AgentKind::Selector)
    }

    fn scores(self) -> bool {
        matches!(self, AgentKind::Scorer | AgentKind::Diversity)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub agent_id: String,
    pub role_prompt_id: String,
    pub stage: u32,
    pub kind: AgentKind,
    /// Experts only: the document type this agent judges.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc_type: Option<DocType>,
    /// Filters and selectors only: minimum survivors, see [`enforce_filter_floor`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor: Option<usize>,
}

impl AgentSpec {
    pub fn new(agent_id: &str, role_prompt_id: &str, stage: u32, kind: AgentKind) -> Self {
        AgentSpec {
            agent_id: agent_id.into(),
            role_prompt_id: role_prompt_id.into(),
            stage,
            kind,
            doc_type: None,
            floor: kind.narrows().then_some(DEFAULT_FILTER_FLOOR),
        }
    }

    pub fn with_floor(mut self, floor: usize) -> Self {
        self.floor = Some(floor);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphConfig {
    pub architecture: Architecture,
    pub agents: Vec<AgentSpec>,
}

fn expert_role(t: DocType) -> &'static str {
    match t {
        DocType::Def14A => "expert_def14a",
        DocType::TenK => "expert_10k",
        DocType::TenQ => "expert_10q",
        DocType::EightK => "expert_8k",
        DocType::Earnings => "expert_earnings",
    }
}

impl GraphConfig {
    /// The stock topology for an architecture, using the built-in role prompts.
    pub fn standard(architecture: Architecture) -> GraphConfig {
        use AgentKind::*;
        let s = |role: &str, stage, kind| AgentSpec::new(role, role, stage, kind);
        let agents = match architecture {
            Architecture::DocEnsemble => {
                let mut v = vec![s("analyzer", 0, Analyzer)];
                v.extend(DocType::ALL.iter().map(|&t| AgentSpec {
                    doc_type: Some(t),
                    ..s(expert_role(t), 1, Expert)
                }));
                v
            }
            Architecture::A1 => ["a1_ceo", "a1_financial_analyst", "a1_operation_manager", "a1_risk_analyst"]
                .iter()
                .map(|r| s(r, 0, Scorer))
                .collect(),
            Architecture::A2 => vec![
                s("a2_noise_remover", 0, Filter),
                s("a2_candidate_selector", 1, Selector),
                s("a2_relevance_scorer", 2, Scorer),
                s("a2_contextual_reasoner", 2, Scorer),
                s("a2_evidence_extractor", 2, Scorer),
                s("a2_diversity", 2, Diversity),
            ],
            Architecture::A3 => vec![
                s("a3_quick_filter", 0, Filter),
                s("a3_relevance_scorer", 1, Scorer),
                s("a3_contextual_reasoner", 1, Scorer),
                s("a3_evidence_extractor", 1, Scorer),
            ],
            Architecture::A4 => vec![s("a4_financial_analyst", 0, Scorer), s("a4_risk_analyst", 0, Scorer)],
        };
        GraphConfig { architecture, agents }
    }

    /// Agents grouped by stage, ascending, each group sorted by `agent_id`.
    pub fn stages(&self) -> Vec<(u32, Vec<&AgentSpec>)> {
        let mut by: BTreeMap<u32, Vec<&AgentSpec>> = BTreeMap::new();
        for a in &self.agents {
            by.entry(a.stage).or_default().push(a);
        }
        by.into_iter()
            .map(|(s, mut v)| {
                v.sort_by(|a, b| a.agent_id.cmp(&b.agent_id));
                (s, v)
            })
            .collect()
    }

    /// Check id uniqueness and the stage shape required by the architecture.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(AgentError::InvalidGraph(format!("{}: {m}", self.architecture)));
        let mut ids = HashSet::new();
        for a in &self.agents {
            if !ids.insert(a.agent_id.as_str()) {
                return bad(format!("duplicate agent_id {}", a.agent_id));
            }
            if a.floor.is_some() && !a.kind.narrows() {
                return bad(format!("{} has a floor but does not filter", a.agent_id));
            }
        }
        let stages = self.stages();
        let kinds: Vec<Vec<AgentKind>> = stages.iter().map(|(_, v)| v.iter().map(|a| a.kind).collect()).collect();
        let all = |st: &[AgentKind], k: AgentKind| st.iter().all(|x| *x == k);
        let count = |st: &[AgentKind], k: AgentKind| st.iter().filter(|x| **x == k).count();
        let scoring_stage = |st: &[AgentKind], n: usize, diversity: usize| {
            st.len() == n && st.iter().all(|k| k.scores()) && count(st, AgentKind::Diversity) == diversity
        };
        let ok = match self.architecture {
            Architecture::DocEnsemble => {
                let experts: Vec<_> = self.agents.iter().filter(|a| a.kind == AgentKind::Expert).collect();
                let mut types: Vec<_> = experts.iter().filter_map(|a| a.doc_type).collect();
                types.sort();
                types.dedup();
                kinds.len() == 2
                    && kinds[0] == [AgentKind::Analyzer]
                    && kinds[1].len() == 5
                    && all(&kinds[1], AgentKind::Expert)
                    && types.len() == 5
            }
            Architecture::A1 => kinds.len() == 1 && scoring_stage(&kinds[0], 4, 0),
            Architecture::A2 => {
                kinds.len() == 3
                    && kinds[0] == [AgentKind::Filter]
                    && kinds[1] == [AgentKind::Selector]
                    && scoring_stage(&kinds[2], 4, 1)
            }
            Architecture::A3 => kinds.len() == 2 && kinds[0] == [AgentKind::Filter] && scoring_stage(&kinds[1], 3, 0),
            Architecture::A4 => kinds.len() == 1 && scoring_stage(&kinds[0], 2, 0),
        };
        if ok {
            Ok(())
        } else {
            bad(format!("stage layout {kinds:?} does not match the architecture"))
        }
    }
}

/// What one agent did, as written to the run manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTrace {
    pub stage: u32,
    pub agent_id: String,
    /// Candidates this agent kept (filters) or scored (scorers).
    pub survivors: usize,
    pub latency_ms: u64,
    pub usage: Usage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Final ordering of every candidate, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub order: Vec<usize>,
    /// Aggregate score aligned with `order`; eliminated candidates carry 0.
    pub scores: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub architecture: Option<Architecture>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<StageTrace>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl Ranking {
    pub fn usage(&self) -> Usage {
        self.trace.iter().map(|t| t.usage).sum()
    }

    pub fn latency_ms(&self) -> u64 {
        self.trace.iter().map(|t| t.latency_ms).sum()
    }
}
