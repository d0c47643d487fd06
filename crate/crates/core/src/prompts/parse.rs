//! Extraction and repair of structured score payloads from model output.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{PromptError, Result};
use crate::corpus::DocType;

/// Output contract a prompt asks for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SchemaId {
    #[serde(rename = "scores_v1")]
    ScoresV1,
    #[serde(rename = "filter_v1")]
    FilterV1,
    #[serde(rename = "weights_v1")]
    WeightsV1,
}

impl SchemaId {
    pub fn as_str(self) -> &'static str {
        match self {
            SchemaId::ScoresV1 => "scores_v1",
            SchemaId::FilterV1 => "filter_v1",
            SchemaId::WeightsV1 => "weights_v1",
        }
    }

    fn top_key(self) -> &'static str {
        match self {
            SchemaId::ScoresV1 | SchemaId::FilterV1 => "scores",
            SchemaId::WeightsV1 => "weights",
        }
    }
}

impl fmt::Display for SchemaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub chunk_index: usize,
    pub relevance_score: u8,
    pub reasoning: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreList {
    pub scores: Vec<ScoreEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filtered_indices: Option<Vec<usize>>,
    pub repaired: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub repair_log: Vec<String>,
}

impl ScoreList {
    pub fn score_of(&self, index: usize) -> Option<u8> {
        self.scores.iter().find(|e| e.chunk_index == index).map(|e| e.relevance_score)
    }
}

/// Byte offset one past the `}` matching the `{` at `start`, honoring JSON strings.
fn matching_brace(bytes: &[u8], start: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_str = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(start) {
        if in_str {
            match (escaped, b) {
                (true, _) => escaped = false,
                (false, b'\\') => escaped = true,
                (false, b'"') => in_str = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_str = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

/// Drop commas that directly precede `}` or `]` outside strings.
fn strip_trailing_commas(s: &str) -> String {
    let chars: Vec<char> = s.chars().collect();
    let mut out = String::with_capacity(s.len());
    let mut in_str = false;
    let mut escaped = false;
    for (i, &c) in chars.iter().enumerate() {
        if in_str {
            out.push(c);
            match (escaped, c) {
                (true, _) => escaped = false,
                (false, '\\') => escaped = true,
                (false, '"') => in_str = false,
                _ => {}
            }
            continue;
        }
        if c == '"' {
            in_str = true;
        }
        if c == ',' {
            let next = chars[i + 1..].iter().find(|c| !c.is_whitespace());
            if matches!(next, Some('}') | Some(']')) {
                continue;
            }
        }
        out.push(c);
    }
    out
}

fn parse_object(s: &str) -> Option<Map<String, Value>> {
    let parsed = serde_json::from_str::<Value>(s)
        .ok()
        .or_else(|| serde_json::from_str::<Value>(&strip_trailing_commas(s)).ok())?;
    match parsed {
        Value::Object(m) => Some(m),
        _ => None,
    }
}

/// All well-formed JSON objects in `raw`, outermost first, in text order.
fn objects(raw: &str) -> Vec<Map<String, Value>> {
    let bytes = raw.as_bytes();
    let mut found = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' {
            if let Some(end) = matching_brace(bytes, i) {
                if let Some(obj) = parse_object(&raw[i..end]) {
                    found.push(obj);
                    i = end;
                    continue;
                }
            }
        }
        i += 1;
    }
    found
}

/// First well-formed object in `raw` that carries `key`, or else the first well-formed object.
pub fn extract_json_object(raw: &str, key: Option<&str>) -> Option<Map<String, Value>> {
    let mut all = objects(raw);
    if let Some(k) = key {
        if let Some(pos) = all.iter().position(|o| o.contains_key(k)) {
            return Some(all.swap_remove(pos));
        }
        // look one level down: e.g. {"result": {"scores": [...]}}
        for o in &all {
            for v in o.values() {
                if let Value::Object(inner) = v {
                    if inner.contains_key(k) {
                        return Some(inner.clone());
                    }
                }
            }
        }
    }
    all.into_iter().next()
}

fn as_index(v: &Value) -> Option<usize> {
    match v {
        Value::Number(n) => {
            if let Some(u) = n.as_u64() {
                return Some(u as usize);
            }
            let f = n.as_f64()?;
            (f >= 0.0 && f.fract() == 0.0 && f < 1e15).then_some(f as usize)
        }
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

fn as_score(v: &Value) -> Option<f64> {
    let f = match v {
        Value::Number(n) => n.as_f64()?,
        Value::String(s) => s.trim().parse().ok()?,
        _ => return None,
    };
    f.is_finite().then_some(f)
}

/// Parse a score payload for the presented `expected` indices, repairing what can be repaired.
///
/// Out-of-range scores are clamped to 1..=10, duplicate indices keep their first
/// occurrence, unknown indices are dropped, and missing indices are appended with score 1.
pub fn parse_scores(raw: &str, expected: &BTreeSet<usize>, schema: SchemaId) -> Result<ScoreList> {
    if expected.is_empty() {
        return Err(PromptError::ContractViolation("no expected indices".into()));
    }
    if schema == SchemaId::WeightsV1 {
        return Err(PromptError::ContractViolation("weights_v1 carries no scores".into()));
    }
    let obj = extract_json_object(raw, Some(schema.top_key()))
        .ok_or_else(|| PromptError::ParseFailure("no well-formed JSON object in output".into()))?;

    let mut log = Vec::new();
    let items = match obj.get("scores") {
        Some(Value::Array(a)) => a.as_slice(),
        Some(Value::Null) | None => &[],
        Some(_) => {
            log.push("scores is not an array".to_string());
            &[]
        }
    };

    let mut seen = HashSet::new();
    let mut scores = Vec::with_capacity(expected.len());
    for (pos, item) in items.iter().enumerate() {
        let Value::Object(entry) = item else {
            log.push(format!("entry {pos}: not an object, dropped"));
            continue;
        };
        let Some(index) = entry.get("chunk_index").and_then(as_index) else {
            log.push(format!("entry {pos}: missing or invalid chunk_index, dropped"));
            continue;
        };
        if !expected.contains(&index) {
            log.push(format!("entry {pos}: chunk_index {index} was not presented, dropped"));
            continue;
        }
        if seen.contains(&index) {
            log.push(format!("entry {pos}: duplicate chunk_index {index}, dropped"));
            continue;
        }
        let Some(raw_score) = entry.get("relevance_score").and_then(as_score) else {
            log.push(format!("entry {pos}: missing or invalid relevance_score, dropped"));
            continue;
        };
        let rounded = raw_score.round();
        let clamped = rounded.clamp(1.0, 10.0);
        if clamped != raw_score {
            log.push(format!("chunk {index}: relevance_score {raw_score} clamped to {clamped}"));
        }
        let reasoning = match entry.get("reasoning") {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Null) | None => String::new(),
            Some(other) => other.to_string(),
        };
        seen.insert(index);
        scores.push(ScoreEntry { chunk_index: index, relevance_score: clamped as u8, reasoning });
    }

    if scores.is_empty() {
        return Err(PromptError::ContractViolation(
            "scores array is empty after repair".into(),
        ));
    }

    for &index in expected {
        if !seen.contains(&index) {
            log.push(format!("chunk {index}: missing, scored 1"));
            scores.push(ScoreEntry { chunk_index: index, relevance_score: 1, reasoning: "repaired: missing".into() });
        }
    }

    let filtered_indices = if schema == SchemaId::FilterV1 {
        match obj.get("filtered_indices") {
            Some(Value::Array(a)) => {
                let mut kept = BTreeSet::new();
                for v in a {
                    match as_index(v) {
                        Some(i) if expected.contains(&i) => {
                            kept.insert(i);
                        }
                        _ => log.push(format!("filtered_indices: dropped {v}")),
                    }
                }
                Some(kept.into_iter().collect())
            }
            _ => {
                log.push("filtered_indices missing".to_string());
                None
            }
        }
    } else {
        None
    };

    for line in &log {
        log::debug!("parse_scores: {line}");
    }
    Ok(ScoreList { scores, filtered_indices, repaired: !log.is_empty(), repair_log: log })
}

/// Per-type weights as returned by the question analyzer, before validation.
pub fn parse_weights(raw: &str) -> Result<BTreeMap<DocType, f64>> {
    let obj = extract_json_object(raw, Some("weights"))
        .ok_or_else(|| PromptError::ParseFailure("no well-formed JSON object in output".into()))?;
    let Some(Value::Object(w)) = obj.get("weights") else {
        return Err(PromptError::ContractViolation("weights object missing".into()));
    };
    let mut out = BTreeMap::new();
    for (k, v) in w {
        let t: DocType = k
            .parse()
            .map_err(|e: String| PromptError::ContractViolation(e))?;
        let x = as_score(v)
            .ok_or_else(|| PromptError::ContractViolation(format!("weight for {k} is not a number")))?;
        out.insert(t, x);
    }
    Ok(out)
}
