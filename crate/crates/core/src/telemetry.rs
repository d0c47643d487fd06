//! Per-call latency and token records, their summaries, and dollar costs.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Task;
use crate::provider::Usage;
use crate::quantile::{five_number, FiveNumber};

const REFERENCE_PRICING: &str = include_str!("../assets/pricing.json");

#[derive(Debug, Error)]
pub enum TelemetryError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("pricing: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("telemetry line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, TelemetryError>;

/// One completed (possibly retried) model call.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallRecord {
    pub run_id: String,
    pub task: Task,
    pub sample_id: String,
    pub latency_ms: u64,
    pub usage: Usage,
    pub model_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent_id: Option<String>,
}

/// Append-only JSONL writer; safe to share between threads.
pub struct TelemetrySink {
    out: Mutex<BufWriter<File>>,
}

impl TelemetrySink {
    pub fn append_to(path: impl AsRef<Path>) -> Result<Self> {
        let f = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(TelemetrySink { out: Mutex::new(BufWriter::new(f)) })
    }

    pub fn record(&self, r: &CallRecord) -> Result<()> {
        let line = serde_json::to_string(r).expect("record serializes");
        let mut w = self.out.lock().expect("sink lock");
        writeln!(w, "{line}")?;
        Ok(())
    }

    pub fn flush(&self) -> Result<()> {
        self.out.lock().expect("sink lock").flush()?;
        Ok(())
    }
}

/// Read a telemetry file. Lines without a `sample_id` (such as a header) are skipped.
pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<CallRecord>> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v: serde_json::Value = serde_json::from_str(&line)
            .map_err(|e| TelemetryError::Malformed { line: i + 1, reason: e.to_string() })?;
        if v.get("sample_id").is_none() {
            continue;
        }
        out.push(
            serde_json::from_value(v).map_err(|e| TelemetryError::Malformed { line: i + 1, reason: e.to_string() })?,
        );
    }
    Ok(out)
}

/// Collapse calls to one record per (run, task, sample): latency and usage summed,
/// first-seen order kept. Records for mixed models keep the first model id.
pub fn per_sample(records: &[CallRecord]) -> Vec<CallRecord> {
    let mut slot: BTreeMap<(&str, Task, &str), usize> = BTreeMap::new();
    let mut out: Vec<CallRecord> = Vec::new();
    for r in records {
        match slot.get(&(r.run_id.as_str(), r.task, r.sample_id.as_str())) {
            Some(&i) => {
                out[i].latency_ms += r.latency_ms;
                out[i].usage += r.usage;
            }
            None => {
                slot.insert((r.run_id.as_str(), r.task, r.sample_id.as_str()), out.len());
                out.push(CallRecord { agent_id: None, ..r.clone() });
            }
        }
    }
    out
}

/// Five-number latency summary in seconds.
pub fn summarize_latency(records: &[CallRecord]) -> Result<FiveNumber<f64>> {
    let secs: Vec<f64> = records.iter().map(|r| r.latency_ms as f64 / 1000.0).collect();
    five_number(&secs).ok_or_else(|| TelemetryError::Argument("no records to summarize".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TokenSummary {
    pub count: usize,
    pub prompt_sum: u64,
    pub completion_sum: u64,
    pub prompt_mean: f64,
    pub completion_mean: f64,
}

impl TokenSummary {
    pub fn from_sums(count: usize, prompt_sum: u64, completion_sum: u64) -> Result<Self> {
        if count == 0 {
            return Err(TelemetryError::Argument("token summary over zero records".into()));
        }
        Ok(TokenSummary {
            count,
            prompt_sum,
            completion_sum,
            prompt_mean: prompt_sum as f64 / count as f64,
            completion_mean: completion_sum as f64 / count as f64,
        })
    }

    /// Pool two summaries, as when stacking document and chunk rows.
    pub fn combine(&self, other: &TokenSummary) -> TokenSummary {
        TokenSummary::from_sums(
            self.count + other.count,
            self.prompt_sum + other.prompt_sum,
            self.completion_sum + other.completion_sum,
        )
        .expect("non-empty")
    }
}

pub fn summarize_tokens(records: &[CallRecord]) -> Result<TokenSummary> {
    let u: Usage = records.iter().map(|r| r.usage).sum();
    TokenSummary::from_sums(records.len(), u.prompt_tokens, u.completion_tokens)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Price {
    /// USD per million prompt tokens.
    pub prompt: f64,
    /// USD per million completion tokens.
    pub completion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingTable {
    pub models: BTreeMap<String, Price>,
}

impl PricingTable {
    /// The two reference tiers plus a free `mock` entry.
    pub fn reference() -> Self {
        Self::from_json(REFERENCE_PRICING).expect("reference pricing is valid")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let t: PricingTable = serde_json::from_str(s).map_err(|e| TelemetryError::Config(e.to_string()))?;
        for (m, p) in &t.models {
            if !(p.prompt >= 0.0 && p.completion >= 0.0 && p.prompt.is_finite() && p.completion.is_finite()) {
                return Err(TelemetryError::Config(format!("{m}: prices must be finite and non-negative")));
            }
        }
        Ok(t)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn price(&self, model_id: &str) -> Result<Price> {
        self.models
            .get(model_id)
            .copied()
            .ok_or_else(|| TelemetryError::Config(format!("no price for model {model_id:?}")))
    }
}

/// Unrounded dollar amounts; round only for display.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostSummary {
    pub prompt_usd: f64,
    pub completion_usd: f64,
    pub combined_usd: f64,
}

impl CostSummary {
    /// Prompt, completion and combined cost rounded to cents.
    pub fn cents(&self) -> [f64; 3] {
        [self.prompt_usd, self.completion_usd, self.combined_usd].map(|x| (x * 100.0).round() / 100.0)
    }
}

impl std::ops::Add for CostSummary {
    type Output = CostSummary;
    fn add(self, o: CostSummary) -> CostSummary {
        let prompt_usd = self.prompt_usd + o.prompt_usd;
        let completion_usd = self.completion_usd + o.completion_usd;
        CostSummary { prompt_usd, completion_usd, combined_usd: prompt_usd + completion_usd }
    }
}

pub fn compute_cost(tokens: &TokenSummary, model_id: &str, pricing: &PricingTable) -> Result<CostSummary> {
    let p = pricing.price(model_id)?;
    let prompt_usd = tokens.prompt_sum as f64 * p.prompt / 1e6;
    let completion_usd = tokens.completion_sum as f64 * p.completion / 1e6;
    Ok(CostSummary { prompt_usd, completion_usd, combined_usd: prompt_usd + completion_usd })
}

/// One line of the latency / token / cost table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityRow {
    pub run_id: String,
    /// "Document", "Chunk" or "Combined".
    pub task: String,
    pub latency: FiveNumber<f64>,
    pub tokens: TokenSummary,
    pub cost: CostSummary,
}

fn row(run_id: &str, label: &str, samples: &[CallRecord], pricing: &PricingTable) -> Result<FeasibilityRow> {
    let mut by_model: BTreeMap<&str, Vec<CallRecord>> = BTreeMap::new();
    for r in samples {
        by_model.entry(r.model_id.as_str()).or_default().push(r.clone());
    }
    let mut cost = CostSummary::default();
    for (model, rs) in &by_model {
        cost = cost + compute_cost(&summarize_tokens(rs)?, model, pricing)?;
    }
    Ok(FeasibilityRow {
        run_id: run_id.to_string(),
        task: label.to_string(),
        latency: summarize_latency(samples)?,
        tokens: summarize_tokens(samples)?,
        cost,
    })
}

/// Document, Chunk and Combined rows per run, over per-sample totals.
pub fn feasibility_rows(records: &[CallRecord], pricing: &PricingTable) -> Result<Vec<FeasibilityRow>> {
    let samples = per_sample(records);
    let mut runs: BTreeMap<&str, Vec<CallRecord>> = BTreeMap::new();
    for r in &samples {
        runs.entry(r.run_id.as_str()).or_default().push(r.clone());
    }
    let mut out = Vec::new();
    for (run, rs) in &runs {
        let doc: Vec<CallRecord> = rs.iter().filter(|r| r.task == Task::DocumentRanking).cloned().collect();
        let chunk: Vec<CallRecord> = rs.iter().filter(|r| r.task == Task::ChunkRanking).cloned().collect();
        if !doc.is_empty() {
            out.push(row(run, "Document", &doc, pricing)?);
        }
        if !chunk.is_empty() {
            out.push(row(run, "Chunk", &chunk, pricing)?);
        }
        if !doc.is_empty() && !chunk.is_empty() {
            out.push(row(run, "Combined", rs, pricing)?);
        }
    }
    Ok(out)
}

fn num(x: f64) -> String {
    let r = (x * 1000.0).round() / 1000.0;
    format!("{r}")
}

pub fn write_feasibility_csv<W: Write>(w: W, rows: &[FeasibilityRow]) -> Result<()> {
    let mut w = w;
    writeln!(
        w,
        "run_id,task,latency_min_s,latency_q1_s,latency_median_s,latency_q3_s,latency_max_s,\
         prompt_tokens_sum,completion_tokens_sum,prompt_tokens_mean,completion_tokens_mean,\
         cost_prompt_usd,cost_completion_usd,cost_combined_usd"
    )?;
    for r in rows {
        let l = &r.latency;
        let c = r.cost.cents();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{:.2},{:.2},{:.2},{:.2},{:.2}",
            r.run_id,
            r.task,
            num(l.min),
            num(l.q1),
            num(l.median),
            num(l.q3),
            num(l.max),
            r.tokens.prompt_sum,
            r.tokens.completion_sum,
            r.tokens.prompt_mean,
            r.tokens.completion_mean,
            c[0],
            c[1],
            c[2]
        )?;
    }
    Ok(())
}

/// Box-plot input: one latency point per sample.
pub fn write_latency_points_csv<W: Write>(w: W, records: &[CallRecord]) -> Result<()> {
    let mut w = w;
    writeln!(w, "run_id,task,sample_id,latency_s")?;
    for r in per_sample(records) {
        writeln!(w, "{},{},{},{}", r.run_id, r.task, r.sample_id, num(r.latency_ms as f64 / 1000.0))?;
    }
    Ok(())
}

/// Bar-chart input: token sums per run and row.
pub fn write_token_bars_csv<W: Write>(w: W, rows: &[FeasibilityRow]) -> Result<()> {
    let mut w = w;
    writeln!(w, "run_id,task,prompt_tokens,completion_tokens")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.run_id, r.task, r.tokens.prompt_sum, r.tokens.completion_sum)?;
    }
    Ok(())
}
