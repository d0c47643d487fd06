//! Stage-by-stage execution of a [`GraphConfig`] against one sample.

use std::collections::{BTreeMap, BTreeSet};

use super::{
    consensus, enforce_filter_floor, AgentError, AgentKind, AgentSpec, Architecture, GraphConfig, Ranking, Result,
    ScoreMatrix, StageTrace, DEFAULT_STAGE_PARALLELISM,
};
use crate::corpus::{Candidate, DocType, Sample, Task};
use crate::parallel::parallel_map;
use crate::prompts::{
    parse_scores, parse_weights, render_prompt, validate_weights, PromptInputs, PromptVariant, ScoreList,
    TemplateRegistry, WeightMap, DEFAULT_CHAR_BUDGET,
};
use crate::provider::{complete_parsed, ChatProvider, ChatRequest, Completion, RetryPolicy};

/// Everything a graph needs besides the sample and topology.
#[derive(Clone, Copy)]
pub struct GraphEnv<'a> {
    pub provider: &'a dyn ChatProvider,
    pub policy: &'a RetryPolicy,
    pub registry: &'a TemplateRegistry,
    pub model_id: &'a str,
    /// Variant that role prompts are composed with.
    pub base: PromptVariant,
    /// Few-shot block for this sample, if any.
    pub examples: Option<&'a str>,
    pub parallelism: usize,
}

impl<'a> GraphEnv<'a> {
    pub fn new(
        provider: &'a dyn ChatProvider,
        policy: &'a RetryPolicy,
        registry: &'a TemplateRegistry,
        model_id: &'a str,
    ) -> Self {
        GraphEnv {
            provider,
            policy,
            registry,
            model_id,
            base: PromptVariant::P1,
            examples: None,
            parallelism: DEFAULT_STAGE_PARALLELISM,
        }
    }

    pub fn with_base(mut self, base: PromptVariant) -> Self {
        self.base = base;
        self
    }

    pub fn with_examples(mut self, examples: Option<&'a str>) -> Self {
        self.examples = examples;
        self
    }

    pub fn with_parallelism(mut self, n: usize) -> Self {
        self.parallelism = n.max(1);
        self
    }
}

struct Outcome<T> {
    result: std::result::Result<T, String>,
    trace: StageTrace,
}

fn trace_of(spec: &AgentSpec, c: Option<&Completion>, survivors: usize, error: Option<String>) -> StageTrace {
    StageTrace {
        stage: spec.stage,
        agent_id: spec.agent_id.clone(),
        survivors,
        latency_ms: c.map_or(0, |c| c.latency_ms),
        usage: c.map(|c| c.usage).unwrap_or_default(),
        error,
    }
}

fn score_call(env: &GraphEnv<'_>, spec: &AgentSpec, task: Task, question: &str, cands: &[Candidate]) -> Outcome<ScoreList> {
    let attempt = || -> std::result::Result<(ScoreList, Completion), String> {
        let template = env.registry.compose(&spec.role_prompt_id, task, env.base).map_err(|e| e.to_string())?;
        let system = render_prompt(&template, &PromptInputs::new(question, cands).with_examples(env.examples))
            .map_err(|e| e.to_string())?;
        let expected: BTreeSet<usize> = cands.iter().map(|c| c.index).collect();
        let req = ChatRequest::new(env.model_id, system, question, template.schema);
        complete_parsed(env.provider, &req, env.policy, |raw| parse_scores(raw, &expected, template.schema))
            .map_err(|e| e.to_string())
    };
    match attempt() {
        Ok((list, c)) => {
            let n = list.filtered_indices.as_ref().map_or(list.scores.len(), Vec::len);
            let trace = trace_of(spec, Some(&c), n, None);
            Outcome { result: Ok(list), trace }
        }
        Err(e) => Outcome { trace: trace_of(spec, None, 0, Some(e.clone())), result: Err(e) },
    }
}

fn weights_call(env: &GraphEnv<'_>, spec: &AgentSpec, question: &str) -> Outcome<WeightMap> {
    let attempt = || -> std::result::Result<(WeightMap, Completion), String> {
        let template = env
            .registry
            .compose(&spec.role_prompt_id, Task::DocumentRanking, env.base)
            .map_err(|e| e.to_string())?;
        let inputs = PromptInputs {
            question: Some(question),
            candidates: None,
            examples: env.examples,
            char_budget: DEFAULT_CHAR_BUDGET,
        };
        let system = render_prompt(&template, &inputs).map_err(|e| e.to_string())?;
        let req = ChatRequest::new(env.model_id, system, question, template.schema);
        complete_parsed(env.provider, &req, env.policy, |raw| validate_weights(&parse_weights(raw)?))
            .map_err(|e| e.to_string())
    };
    match attempt() {
        Ok((w, c)) => Outcome { result: Ok(w), trace: trace_of(spec, Some(&c), 5, None) },
        Err(e) => Outcome { trace: trace_of(spec, None, 0, Some(e.clone())), result: Err(e) },
    }
}

fn check_graph(sample: &Sample, config: &GraphConfig, task: Task) -> Result<()> {
    if sample.task != task {
        return Err(AgentError::Argument(format!("sample {} is a {} sample", sample.sample_id, sample.task)));
    }
    if config.architecture.is_chunk() != (task == Task::ChunkRanking) {
        return Err(AgentError::InvalidGraph(format!("{} cannot rank {task} samples", config.architecture)));
    }
    if sample.candidates.is_empty() {
        return Err(AgentError::Argument(format!("sample {} has no candidates", sample.sample_id)));
    }
    config.validate()
}

enum DocOut {
    Weights(WeightMap),
    Scores(ScoreList),
}

/// Analyzer weights times each expert's score for its own document type.
pub fn run_document_ranking(sample: &Sample, config: &GraphConfig, env: &GraphEnv<'_>) -> Result<Ranking> {
    check_graph(sample, config, Task::DocumentRanking)?;
    if let Some(c) = sample.candidates.iter().find(|c| c.doc_type.is_none()) {
        return Err(AgentError::Argument(format!("candidate {} has no document type", c.index)));
    }
    let mut trace = Vec::new();
    let mut warnings = Vec::new();
    let mut weights = WeightMap::uniform();
    let mut expert_scores: BTreeMap<usize, f64> = BTreeMap::new();

    for (_, agents) in config.stages() {
        let outcomes = parallel_map(&agents, env.parallelism, |spec| match spec.kind {
            AgentKind::Analyzer => {
                let o = weights_call(env, spec, &sample.query);
                (Some(o.result.map(DocOut::Weights)), o.trace)
            }
            _ => {
                let t = spec.doc_type.expect("validated experts carry a type");
                let own: Vec<Candidate> =
                    sample.candidates.iter().filter(|c| c.doc_type == Some(t)).cloned().collect();
                if own.is_empty() {
                    return (None, trace_of(spec, None, 0, None));
                }
                let o = score_call(env, spec, Task::DocumentRanking, &sample.query, &own);
                (Some(o.result.map(DocOut::Scores)), o.trace)
            }
        });
        for (spec, (result, t)) in agents.iter().zip(outcomes) {
            trace.push(t);
            match result {
                None => {}
                Some(Ok(DocOut::Weights(w))) => weights = w,
                Some(Ok(DocOut::Scores(list))) => {
                    for s in &list.scores {
                        expert_scores.insert(s.chunk_index, s.relevance_score as f64);
                    }
                }
                Some(Err(e)) => {
                    let msg = if spec.kind == AgentKind::Analyzer {
                        format!("{}: {e}; using uniform weights", spec.agent_id)
                    } else {
                        format!("{}: {e}; its document type scored 1", spec.agent_id)
                    };
                    log::warn!("{msg}");
                    warnings.push(msg);
                }
            }
        }
    }

    let mut scored: Vec<(usize, DocType, f64)> = sample
        .candidates
        .iter()
        .enumerate()
        .map(|(pos, c)| {
            let t = c.doc_type.expect("checked above");
            (pos, t, weights.get(t) * expert_scores.get(&c.index).copied().unwrap_or(1.0))
        })
        .collect();
    scored.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.1.cmp(&b.1)).then(a.0.cmp(&b.0)));
    Ok(Ranking {
        order: scored.iter().map(|x| sample.candidates[x.0].index).collect(),
        scores: scored.iter().map(|x| x.2).collect(),
        architecture: Some(Architecture::DocEnsemble),
        trace,
        warnings,
    })
}

/// Filters narrow the pool, the last stage scores the survivors, consensus orders
/// them, and eliminated candidates follow in their original order.
pub fn run_chunk_ranking(sample: &Sample, config: &GraphConfig, env: &GraphEnv<'_>) -> Result<Ranking> {
    check_graph(sample, config, Task::ChunkRanking)?;
    let mut survivors: Vec<Candidate> = sample.candidates.clone();
    let mut trace = Vec::new();
    let mut warnings = Vec::new();
    let mut result = None;

    for (stage, agents) in config.stages() {
        let outcomes = parallel_map(&agents, env.parallelism, |spec| {
            score_call(env, spec, Task::ChunkRanking, &sample.query, &survivors)
        });
        let mut errors = Vec::new();
        let mut lists = Vec::new();
        for (spec, o) in agents.iter().zip(outcomes) {
            trace.push(o.trace);
            match o.result {
                Ok(l) => {
                    if l.repaired {
                        warnings.push(format!("{}: output repaired ({} fixes)", spec.agent_id, l.repair_log.len()));
                    }
                    lists.push((*spec, l));
                }
                Err(e) => {
                    let msg = format!("{}: {e}", spec.agent_id);
                    log::warn!("agent failed, omitted: {msg}");
                    warnings.push(format!("{msg}; omitted"));
                    errors.push(msg);
                }
            }
        }
        if lists.is_empty() {
            return Err(AgentError::EmptyStage { stage, errors });
        }

        if agents[0].kind.narrows() {
            let position: BTreeMap<usize, usize> = survivors.iter().enumerate().map(|(p, c)| (c.index, p)).collect();
            let mut keep = BTreeSet::new();
            for (spec, l) in &lists {
                let kept: Vec<usize> = match &l.filtered_indices {
                    Some(ix) => ix.iter().map(|i| position[i]).collect(),
                    None => (0..survivors.len()).collect(),
                };
                let floored = enforce_filter_floor(survivors.len(), &kept, spec.floor.unwrap_or(0))?;
                if floored.len() != kept.len() {
                    warnings.push(format!(
                        "{}: kept {} of {}, below its floor; filter overridden",
                        spec.agent_id,
                        kept.len(),
                        survivors.len()
                    ));
                }
                if let Some(t) = trace.iter_mut().rev().find(|t| t.agent_id == spec.agent_id) {
                    t.survivors = floored.len();
                }
                keep.extend(floored);
            }
            survivors = survivors
                .into_iter()
                .enumerate()
                .filter(|(p, _)| keep.contains(p))
                .map(|(_, c)| c)
                .collect();
        } else {
            let mut m = ScoreMatrix::new(survivors.iter().map(|c| c.index));
            for (spec, l) in &lists {
                for s in &l.scores {
                    m.set(&spec.agent_id, s.chunk_index, s.relevance_score as f64)?;
                }
            }
            result = Some(consensus(&m, None)?);
        }
    }

    let c = result.ok_or_else(|| AgentError::InvalidGraph("graph has no scoring stage".into()))?;
    let ranked: BTreeSet<usize> = c.order.iter().copied().collect();
    let mut order = c.order;
    let mut scores = c.scores;
    for cand in &sample.candidates {
        if !ranked.contains(&cand.index) {
            order.push(cand.index);
            scores.push(0.0);
        }
    }
    Ok(Ranking { order, scores, architecture: Some(config.architecture), trace, warnings })
}
