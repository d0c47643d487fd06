use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Result, RunConfig, RunError};
use crate::agents::StageTrace;
use crate::corpus::Task;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RANKINGS_FILE: &str = "rankings.jsonl";
pub const TELEMETRY_FILE: &str = "telemetry.jsonl";
pub const SCORES_FILE: &str = "scores.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub package: String,
    pub prompts: String,
    pub index_format: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleFailure {
    pub sample_id: String,
    pub task: Task,
    pub error: String,
}

/// One line of the rankings file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingEntry {
    pub sample_id: String,
    pub task: Task,
    pub ranking: Vec<usize>,
    pub scores: Vec<f64>,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleTrace {
    pub sample_id: String,
    pub task: Task,
    pub trace: Vec<StageTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub records: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub manifest_hash: String,
    pub run_id: String,
    pub seed: u64,
    pub config: RunConfig,
    pub versions: Versions,
    pub provider: String,
    /// False for live backends: reruns may differ.
    pub deterministic: bool,
    pub dataset: DatasetInfo,
    pub samples: usize,
    pub failures: Vec<SampleFailure>,
    pub stage_traces: Vec<SampleTrace>,
    /// File name to SHA-256 of its bytes.
    pub artifacts: BTreeMap<String, String>,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let p = path.as_ref();
        serde_json::from_str(&std::fs::read_to_string(p)?)
            .map_err(|e| RunError::Malformed { path: p.display().to_string(), reason: e.to_string() })
    }
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    let mut f = File::open(path)?;
    let mut h = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

/// Hash of everything in the manifest except the hash itself and the artifact
/// digests, which are computed after the sibling files embed this value.
pub fn manifest_hash(m: &Manifest) -> String {
    let core = Manifest { manifest_hash: String::new(), artifacts: BTreeMap::new(), ..m.clone() };
    sha256_hex(serde_json::to_string(&core).expect("manifest serializes").as_bytes())
}

pub(crate) fn jsonl_header(hash: &str) -> String {
    serde_json::json!({ "manifest_hash": hash }).to_string()
}

/// Read a rankings file, returning the header hash (if any) and the entries.
pub fn read_rankings(path: impl AsRef<Path>) -> Result<(Option<String>, Vec<RankingEntry>)> {
    let p = path.as_ref();
    let bad = |line: usize, e: serde_json::Error| RunError::Malformed {
        path: p.display().to_string(),
        reason: format!("line {line}: {e}"),
    };
    let mut hash = None;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(File::open(p)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v: serde_json::Value = serde_json::from_str(&line).map_err(|e| bad(i + 1, e))?;
        if v.get("sample_id").is_none() {
            if let Some(h) = v.get("manifest_hash").and_then(|h| h.as_str()) {
                hash = Some(h.to_string());
            }
            continue;
        }
        out.push(serde_json::from_value(v).map_err(|e| bad(i + 1, e))?);
    }
    Ok((hash, out))
}
