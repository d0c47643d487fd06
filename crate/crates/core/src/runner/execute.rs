use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::artifacts::{
    jsonl_header, sha256_hex, DatasetInfo, SampleTrace, MANIFEST_FILE, RANKINGS_FILE, SCORES_FILE, TELEMETRY_FILE,
};
use super::{
    evaluate_run, manifest_hash, write_scores_csv, EvalReport, Manifest, RankingEntry, Result, RunConfig, RunError,
    SampleFailure, TaskConfig, Versions,
};
use crate::agents::{run_chunk_ranking, run_document_ranking, GraphEnv, Ranking, ScoreMatrix, DEFAULT_STAGE_PARALLELISM};
use crate::corpus::{Sample, SampleSet, Task};
use crate::exemplars::{format_few_shot, ExemplarStore, INDEX_VERSION};
use crate::parallel::parallel_map;
use crate::prompts::{parse_scores, render_prompt, PromptInputs, TemplateRegistry};
use crate::provider::{chat_provider, complete_parsed, embedding_provider, ChatProvider, ChatRequest, EmbeddingProvider};
use crate::telemetry::CallRecord;

/// Backends and prebuilt indexes a run draws on.
pub struct RunEnv {
    pub provider: Arc<dyn ChatProvider>,
    pub registry: TemplateRegistry,
    pub exemplars: BTreeMap<Task, (ExemplarStore, Arc<dyn EmbeddingProvider>)>,
    /// Concurrent agent calls within one graph stage.
    pub stage_parallelism: usize,
}

impl RunEnv {
    pub fn new(provider: Arc<dyn ChatProvider>) -> Self {
        RunEnv {
            provider,
            registry: TemplateRegistry::builtin(),
            exemplars: BTreeMap::new(),
            stage_parallelism: DEFAULT_STAGE_PARALLELISM,
        }
    }

    pub fn with_exemplars(mut self, task: Task, store: ExemplarStore, embedder: Arc<dyn EmbeddingProvider>) -> Self {
        self.exemplars.insert(task, (store, embedder));
        self
    }

    /// Resolve providers by id and load every configured exemplar index from disk.
    /// Relative index directories are taken relative to `base_dir`.
    pub fn for_config(config: &RunConfig, base_dir: &Path) -> Result<Self> {
        let mut env = RunEnv::new(chat_provider(&config.provider, config.seed)?);
        for task in [Task::DocumentRanking, Task::ChunkRanking] {
            let Some(icl) = config.task(task).and_then(|t| t.icl.as_ref()) else { continue };
            let dir = icl
                .index_dir
                .as_ref()
                .ok_or_else(|| RunError::Config(format!("{task}: icl.index_dir is required")))?;
            let store = ExemplarStore::load(base_dir.join(dir))?;
            env = env.with_exemplars(task, store, embedding_provider(&icl.embedding, config.seed)?);
        }
        Ok(env)
    }
}

/// Everything a run produced, in memory and on disk.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub rankings: Vec<RankingEntry>,
    pub records: Vec<CallRecord>,
    /// Present when every ranked sample carries gains.
    pub evaluation: Option<EvalReport>,
}

impl RunArtifacts {
    pub fn failure_count(&self) -> usize {
        self.manifest.failures.len()
    }
}

struct Outcome {
    ranking: std::result::Result<Ranking, String>,
    records: Vec<CallRecord>,
}

fn few_shot(sample: &Sample, tc: &TaskConfig, env: &RunEnv) -> std::result::Result<Option<String>, String> {
    let Some(icl) = &tc.icl else { return Ok(None) };
    let (store, embedder) = env.exemplars.get(&sample.task).ok_or("no exemplar index loaded")?;
    let k = icl.k.k();
    // one extra in case the sample itself is in the index
    let hits = store.retrieve(&sample.query, k + 1, embedder.as_ref()).map_err(|e| e.to_string())?;
    let chosen: Vec<_> = hits.into_iter().map(|(e, _)| e).filter(|e| e.exemplar_id != sample.sample_id).take(k).collect();
    if chosen.is_empty() {
        return Ok(None);
    }
    format_few_shot(&chosen, icl.k).map(Some).map_err(|e| e.to_string())
}

fn record(config: &RunConfig, sample: &Sample, model: &str, latency_ms: u64, usage: crate::provider::Usage, agent: Option<&str>) -> CallRecord {
    CallRecord {
        run_id: config.run_id.clone(),
        task: sample.task,
        sample_id: sample.sample_id.clone(),
        latency_ms,
        usage,
        model_id: model.to_string(),
        agent_id: agent.map(str::to_string),
    }
}

/// Score candidates in fixed-size batches with one prompt, then order globally.
fn single_prompt(
    sample: &Sample,
    tc: &TaskConfig,
    examples: Option<&str>,
    config: &RunConfig,
    env: &RunEnv,
    records: &mut Vec<CallRecord>,
) -> std::result::Result<Ranking, String> {
    let template = env.registry.variant(tc.prompt, sample.task).map_err(|e| e.to_string())?;
    let agent = tc.prompt.as_str();
    let mut m = ScoreMatrix::new(sample.candidates.iter().map(|c| c.index));
    let mut warnings = Vec::new();
    for (b, batch) in sample.candidates.chunks(tc.batch_size).enumerate() {
        let system = render_prompt(template, &PromptInputs::new(&sample.query, batch).with_examples(examples))
            .map_err(|e| format!("batch {b}: {e}"))?;
        let expected: BTreeSet<usize> = batch.iter().map(|c| c.index).collect();
        let req = ChatRequest::new(&tc.model, system, sample.query.clone(), template.schema);
        let (list, c) = complete_parsed(env.provider.as_ref(), &req, &config.retry, |raw| {
            parse_scores(raw, &expected, template.schema)
        })
        .map_err(|e| format!("batch {b}: {e}"))?;
        records.push(record(config, sample, &tc.model, c.latency_ms, c.usage, None));
        if list.repaired {
            warnings.push(format!("batch {b}: output repaired ({} fixes)", list.repair_log.len()));
        }
        for s in &list.scores {
            m.set(agent, s.chunk_index, s.relevance_score as f64).map_err(|e| e.to_string())?;
        }
    }
    let c = crate::agents::consensus(&m, None).map_err(|e| e.to_string())?;
    Ok(Ranking { order: c.order, scores: c.scores, architecture: None, trace: Vec::new(), warnings })
}

fn process(sample: &Sample, config: &RunConfig, env: &RunEnv) -> Outcome {
    let tc = config.task(sample.task).expect("filtered to configured tasks");
    let mut records = Vec::new();
    let examples = match few_shot(sample, tc, env) {
        Ok(x) => x,
        Err(e) => return Outcome { ranking: Err(format!("exemplar retrieval: {e}")), records },
    };
    let ranking = match tc.resolved_graph(sample.task) {
        None => single_prompt(sample, tc, examples.as_deref(), config, env, &mut records),
        Some(graph) => {
            let genv = GraphEnv::new(env.provider.as_ref(), &config.retry, &env.registry, &tc.model)
                .with_base(tc.prompt)
                .with_examples(examples.as_deref())
                .with_parallelism(env.stage_parallelism);
            let r = match sample.task {
                Task::DocumentRanking => run_document_ranking(sample, &graph, &genv),
                Task::ChunkRanking => run_chunk_ranking(sample, &graph, &genv),
            };
            if let Ok(r) = &r {
                for t in r.trace.iter().filter(|t| t.error.is_none() && t.usage != Default::default()) {
                    records.push(record(config, sample, &tc.model, t.latency_ms, t.usage, Some(&t.agent_id)));
                }
            }
            r.map_err(|e| e.to_string())
        }
    };
    Outcome { ranking, records }
}

fn dataset_hash(samples: &[&Sample]) -> String {
    let mut bytes = Vec::new();
    for s in samples {
        serde_json::to_writer(&mut bytes, s).expect("sample serializes");
        bytes.push(b'\n');
    }
    sha256_hex(&bytes)
}

/// Rank every sample of each configured task and write the run directory.
///
/// Samples of tasks the config does not cover are skipped. A sample that fails
/// after retries and degradation is recorded as failed; the run continues.
pub fn run_experiment(config: &RunConfig, dataset: &SampleSet, env: &RunEnv, out_dir: impl AsRef<Path>) -> Result<RunArtifacts> {
    config.validate()?;
    for task in [Task::DocumentRanking, Task::ChunkRanking] {
        if config.task(task).is_some_and(|t| t.icl.is_some()) && !env.exemplars.contains_key(&task) {
            return Err(RunError::Config(format!("{task}: ICL configured but no exemplar index supplied")));
        }
    }
    let samples: Vec<&Sample> = dataset.samples.iter().filter(|s| config.task(s.task).is_some()).collect();
    if samples.len() < dataset.samples.len() {
        log::info!("{} samples belong to unconfigured tasks and are skipped", dataset.samples.len() - samples.len());
    }
    if samples.is_empty() {
        return Err(RunError::Config("dataset has no samples for the configured tasks".into()));
    }

    let outcomes = parallel_map(&samples, config.parallelism, |s| process(s, config, env));

    let mut rankings = Vec::with_capacity(samples.len());
    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut stage_traces = Vec::new();
    for (s, o) in samples.iter().zip(outcomes) {
        records.extend(o.records);
        match o.ranking {
            Ok(r) => {
                for w in &r.warnings {
                    log::debug!("{} {}: {w}", s.task, s.sample_id);
                }
                if !r.trace.is_empty() {
                    stage_traces.push(SampleTrace { sample_id: s.sample_id.clone(), task: s.task, trace: r.trace });
                }
                rankings.push(RankingEntry {
                    sample_id: s.sample_id.clone(),
                    task: s.task,
                    ranking: r.order,
                    scores: r.scores,
                    failed: false,
                });
            }
            Err(e) => {
                log::warn!("{} {} failed: {e}", s.task, s.sample_id);
                failures.push(SampleFailure { sample_id: s.sample_id.clone(), task: s.task, error: e });
                rankings.push(RankingEntry {
                    sample_id: s.sample_id.clone(),
                    task: s.task,
                    ranking: Vec::new(),
                    scores: Vec::new(),
                    failed: true,
                });
            }
        }
    }

    let evaluation = if samples.iter().all(|s| s.ground_truth.is_some()) {
        Some(evaluate_run(&rankings, dataset)?)
    } else {
        None
    };

    let mut manifest = Manifest {
        manifest_hash: String::new(),
        run_id: config.run_id.clone(),
        seed: config.seed,
        config: config.clone(),
        versions: Versions {
            package: env!("CARGO_PKG_VERSION").to_string(),
            prompts: env.registry.version().to_string(),
            index_format: INDEX_VERSION,
        },
        provider: env.provider.id().to_string(),
        deterministic: env.provider.is_deterministic(),
        dataset: DatasetInfo { records: samples.len(), sha256: dataset_hash(&samples) },
        samples: samples.len(),
        failures,
        stage_traces,
        artifacts: BTreeMap::new(),
    };
    let hash = manifest_hash(&manifest);
    manifest.manifest_hash = hash.clone();

    let dir = out_dir.as_ref().to_path_buf();
    std::fs::create_dir_all(&dir)?;
    let header = jsonl_header(&hash);

    let mut buf = Vec::new();
    writeln!(buf, "{header}")?;
    for r in &rankings {
        writeln!(buf, "{}", serde_json::to_string(r).expect("entry serializes"))?;
    }
    std::fs::write(dir.join(RANKINGS_FILE), &buf)?;
    manifest.artifacts.insert(RANKINGS_FILE.into(), sha256_hex(&buf));

    let mut buf = Vec::new();
    writeln!(buf, "{header}")?;
    for r in &records {
        writeln!(buf, "{}", serde_json::to_string(r).expect("record serializes"))?;
    }
    std::fs::write(dir.join(TELEMETRY_FILE), &buf)?;
    manifest.artifacts.insert(TELEMETRY_FILE.into(), sha256_hex(&buf));

    let mut buf = Vec::new();
    match &evaluation {
        Some(rep) => write_scores_csv(&mut buf, rep, Some(&hash))?,
        None => {
            writeln!(buf, "# manifest_hash={hash}")?;
            writeln!(buf, "sample_id,task,ndcg_at_5,failed")?;
        }
    }
    std::fs::write(dir.join(SCORES_FILE), &buf)?;
    manifest.artifacts.insert(SCORES_FILE.into(), sha256_hex(&buf));

    let body = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(dir.join(MANIFEST_FILE), body + "\n")?;

    Ok(RunArtifacts { dir, manifest, rankings, records, evaluation })
}
