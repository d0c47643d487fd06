//! Ranking datasets: JSONL ingestion and exploratory analyses
//! (rank distribution per filing type, rank-1 keyword ratios, chunk length summaries).

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quantile::{five_number, FiveNumber};
use crate::text::{tokenize, word_count};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("empty group: no {0} chunks")]
    EmptyGroup(&'static str),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, CorpusError>;

/// The two ranking tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    #[serde(rename = "document")]
    DocumentRanking,
    #[serde(rename = "chunk")]
    ChunkRanking,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::DocumentRanking => "document",
            Task::ChunkRanking => "chunk",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "document" => Ok(Task::DocumentRanking),
            "chunk" => Ok(Task::ChunkRanking),
            other => Err(format!("unknown task {other:?}")),
        }
    }
}

/// SEC filing kinds. Declaration order is the canonical tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum DocType {
    Def14A,
    TenK,
    TenQ,
    EightK,
    Earnings,
}

impl DocType {
    pub const ALL: [DocType; 5] = [
        DocType::Def14A,
        DocType::TenK,
        DocType::TenQ,
        DocType::EightK,
        DocType::Earnings,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DocType::Def14A => "DEF 14A",
            DocType::TenK => "10-K",
            DocType::TenQ => "10-Q",
            DocType::EightK => "8-K",
            DocType::Earnings => "Earnings",
        }
    }

    /// Position in [`DocType::ALL`].
    pub fn ordinal(self) -> usize {
        self as usize
    }
}

impl fmt::Display for DocType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DocType {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_uppercase();
        match key.as_str() {
            "DEF14A" => Ok(DocType::Def14A),
            "10K" | "TENK" => Ok(DocType::TenK),
            "10Q" | "TENQ" => Ok(DocType::TenQ),
            "8K" | "EIGHTK" => Ok(DocType::EightK),
            "EARNINGS" | "EARNINGSTRANSCRIPT" | "EARNINGSTRANSCRIPTS" => Ok(DocType::Earnings),
            _ => Err(format!("unknown document type {s:?}")),
        }
    }
}

impl TryFrom<String> for DocType {
    type Error = String;
    fn try_from(s: String) -> std::result::Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<DocType> for String {
    fn from(d: DocType) -> String {
        d.as_str().to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc_type: Option<DocType>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub sample_id: String,
    pub task: Task,
    pub query: String,
    pub candidates: Vec<Candidate>,
    /// Relevance gains aligned with `candidates`.
    #[serde(default, rename = "gains", skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<Vec<u32>>,
}

impl Sample {
    /// Position of the candidate with `index` in `candidates`.
    pub fn position_of(&self, index: usize) -> Option<usize> {
        self.candidates.iter().position(|c| c.index == index)
    }

    /// Gain for the candidate with the given index.
    pub fn gain_of(&self, index: usize) -> Option<u32> {
        let gains = self.ground_truth.as_ref()?;
        self.position_of(index).map(|p| gains[p])
    }

    /// Candidate indices ordered by descending gain, ties by list order.
    pub fn ideal_order(&self) -> Option<Vec<usize>> {
        let gains = self.ground_truth.as_ref()?;
        let mut pos: Vec<usize> = (0..self.candidates.len()).collect();
        pos.sort_by(|&a, &b| gains[b].cmp(&gains[a]).then(a.cmp(&b)));
        Some(pos.into_iter().map(|p| self.candidates[p].index).collect())
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.candidates.is_empty() {
            return Err("no candidates".into());
        }
        let mut seen = HashSet::new();
        for c in &self.candidates {
            if !seen.insert(c.index) {
                return Err(format!("duplicate candidate index {}", c.index));
            }
        }
        if let Some(g) = &self.ground_truth {
            if g.len() != self.candidates.len() {
                return Err(format!(
                    "gain list length {} does not match {} candidates",
                    g.len(),
                    self.candidates.len()
                ));
            }
        }
        match self.task {
            Task::DocumentRanking => {
                if self.candidates.len() != 5 {
                    return Err(format!(
                        "document sample needs 5 candidates, found {}",
                        self.candidates.len()
                    ));
                }
                let types: BTreeSet<DocType> =
                    self.candidates.iter().filter_map(|c| c.doc_type).collect();
                if types.len() != 5 || self.candidates.iter().any(|c| c.doc_type.is_none()) {
                    return Err("document sample needs exactly one candidate per document type".into());
                }
            }
            Task::ChunkRanking => {
                if let Some(c) = self.candidates.iter().find(|c| c.text.trim().is_empty()) {
                    return Err(format!("chunk {} has empty text", c.index));
                }
            }
        }
        Ok(())
    }
}

/// A record that parsed but failed a per-sample check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub line: usize,
    pub sample_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSet {
    pub samples: Vec<Sample>,
    pub rejected: Vec<Rejection>,
    /// Non-blank lines read.
    pub record_count: usize,
}

impl SampleSet {
    pub fn new(samples: Vec<Sample>) -> Self {
        let record_count = samples.len();
        SampleSet { samples, rejected: Vec::new(), record_count }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn of_task(&self, task: Task) -> impl Iterator<Item = &Sample> {
        self.samples.iter().filter(move |s| s.task == task)
    }
}

#[derive(Deserialize)]
struct RawCandidate {
    index: Option<i64>,
    doc_type: Option<String>,
    text: Option<String>,
}

#[derive(Deserialize)]
struct RawRecord {
    sample_id: Option<serde_json::Value>,
    task: Option<String>,
    query: Option<String>,
    candidates: Option<Vec<RawCandidate>>,
    gains: Option<Vec<i64>>,
}

enum Parsed {
    Sample(Sample),
    Reject(String, String),
}

fn parse_record(line_no: usize, line: &str) -> Result<Parsed> {
    let malformed = |reason: String| CorpusError::Malformed { line: line_no, reason };
    let raw: RawRecord =
        serde_json::from_str(line).map_err(|e| malformed(format!("invalid JSON: {e}")))?;
    let sample_id = match raw.sample_id {
        Some(serde_json::Value::String(s)) => s,
        Some(serde_json::Value::Number(n)) => n.to_string(),
        Some(_) => return Err(malformed("sample_id must be a string".into())),
        None => return Err(malformed("missing sample_id".into())),
    };
    let query = raw.query.ok_or_else(|| malformed("missing query".into()))?;
    let task: Task = raw
        .task
        .ok_or_else(|| malformed("missing task".into()))?
        .parse()
        .map_err(malformed)?;
    let raw_candidates = raw.candidates.ok_or_else(|| malformed("missing candidates".into()))?;

    let mut candidates = Vec::with_capacity(raw_candidates.len());
    for (i, rc) in raw_candidates.into_iter().enumerate() {
        let index = rc
            .index
            .ok_or_else(|| malformed(format!("candidate {i}: missing index")))?;
        if index < 0 {
            return Err(malformed(format!("candidate {i}: negative index")));
        }
        let doc_type = match rc.doc_type {
            Some(s) => Some(s.parse::<DocType>().map_err(|e| malformed(format!("candidate {i}: {e}")))?),
            None => None,
        };
        let text = rc
            .text
            .ok_or_else(|| malformed(format!("candidate {i}: missing text")))?;
        candidates.push(Candidate { index: index as usize, doc_type, text });
    }

    let ground_truth = match raw.gains {
        None => None,
        Some(g) => {
            if let Some(bad) = g.iter().find(|v| **v < 0) {
                return Ok(Parsed::Reject(sample_id, format!("negative gain {bad}")));
            }
            Some(g.into_iter().map(|v| v as u32).collect())
        }
    };

    let sample = Sample { sample_id: sample_id.clone(), task, query, candidates, ground_truth };
    Ok(match sample.validate() {
        Ok(()) => Parsed::Sample(sample),
        Err(reason) => Parsed::Reject(sample_id, reason),
    })
}

/// Read a JSONL dataset. With `task = Some(t)`, records of the other task are
/// rejected with reason `task mismatch`.
pub fn load_dataset(path: impl AsRef<Path>, task: Option<Task>) -> Result<SampleSet> {
    let path = path.as_ref();
    let io_err = |source| CorpusError::Io { path: path.display().to_string(), source };
    let reader = BufReader::new(File::open(path).map_err(io_err)?);
    let mut set = SampleSet::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let line_no = i + 1;
        set.record_count += 1;
        match parse_record(line_no, &line)? {
            Parsed::Sample(s) if task.map_or(true, |t| t == s.task) => set.samples.push(s),
            Parsed::Sample(s) => set.rejected.push(Rejection {
                line: line_no,
                sample_id: s.sample_id,
                reason: format!("task mismatch: record is {}", s.task),
            }),
            Parsed::Reject(sample_id, reason) => {
                log::warn!("line {line_no}: rejecting sample {sample_id}: {reason}");
                set.rejected.push(Rejection { line: line_no, sample_id, reason })
            }
        }
    }
    Ok(set)
}

/// Write samples back out in the dataset JSONL format.
pub fn write_dataset(path: impl AsRef<Path>, samples: &[Sample]) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| CorpusError::Io { path: path.display().to_string(), source };
    let mut out = std::io::BufWriter::new(File::create(path).map_err(io_err)?);
    for s in samples {
        let line = serde_json::to_string(s).expect("sample serializes");
        writeln!(out, "{line}").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Counts of (document type, true rank) over document-ranking samples.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RankTable {
    /// `counts[type ordinal][rank - 1]`
    pub counts: [[usize; 5]; 5],
    pub counted: usize,
    pub skipped: usize,
}

impl RankTable {
    pub fn get(&self, doc_type: DocType, rank: usize) -> usize {
        self.counts[doc_type.ordinal()][rank - 1]
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["doc_type", "rank_1", "rank_2", "rank_3", "rank_4", "rank_5"])?;
        for t in DocType::ALL {
            let mut row = vec![t.as_str().to_string()];
            row.extend(self.counts[t.ordinal()].iter().map(|c| c.to_string()));
            wtr.write_record(&row)?;
        }
        wtr.flush().map_err(|e| CorpusError::Io { path: "<csv>".into(), source: e })?;
        Ok(())
    }
}

/// Document types of a sample ordered by true rank (rank 1 first).
fn true_type_order(sample: &Sample) -> Option<Vec<DocType>> {
    let order = sample.ideal_order()?;
    order
        .into_iter()
        .map(|idx| sample.position_of(idx).and_then(|p| sample.candidates[p].doc_type))
        .collect()
}

pub fn rank_distribution<'a>(samples: impl IntoIterator<Item = &'a Sample>) -> RankTable {
    let mut table = RankTable::default();
    for s in samples {
        if s.task != Task::DocumentRanking {
            table.skipped += 1;
            continue;
        }
        match true_type_order(s) {
            Some(order) => {
                for (rank0, t) in order.into_iter().enumerate() {
                    table.counts[t.ordinal()][rank0] += 1;
                }
                table.counted += 1;
            }
            None => table.skipped += 1,
        }
    }
    table
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeywordRatio {
    pub keyword: String,
    pub ratio: f64,
    /// Number of rank-1 samples of this type whose query contains the keyword.
    pub frequency: usize,
}

/// Per document type, the `top_n` query keywords of samples where that type ranks first.
pub fn keyword_ratios<'a>(
    samples: impl IntoIterator<Item = &'a Sample>,
    stopwords: &HashSet<String>,
    top_n: usize,
) -> Result<BTreeMap<DocType, Vec<KeywordRatio>>> {
    if top_n < 1 {
        return Err(CorpusError::Argument("top_n must be at least 1".into()));
    }
    let mut doc_freq: BTreeMap<DocType, BTreeMap<String, usize>> = BTreeMap::new();
    let mut totals: BTreeMap<DocType, usize> = BTreeMap::new();
    for s in samples {
        if s.task != Task::DocumentRanking {
            continue;
        }
        let Some(first) = true_type_order(s).and_then(|o| o.first().copied()) else {
            continue;
        };
        *totals.entry(first).or_default() += 1;
        let distinct: BTreeSet<String> = tokenize(&s.query)
            .into_iter()
            .filter(|t| !stopwords.contains(t))
            .collect();
        let freq = doc_freq.entry(first).or_default();
        for tok in distinct {
            *freq.entry(tok).or_default() += 1;
        }
    }

    let mut out = BTreeMap::new();
    for t in DocType::ALL {
        let total = totals.get(&t).copied().unwrap_or(0);
        let mut list: Vec<KeywordRatio> = doc_freq
            .remove(&t)
            .unwrap_or_default()
            .into_iter()
            .map(|(keyword, frequency)| KeywordRatio {
                keyword,
                ratio: frequency as f64 / total as f64,
                frequency,
            })
            .collect();
        list.sort_by(|a, b| {
            b.ratio
                .total_cmp(&a.ratio)
                .then(b.frequency.cmp(&a.frequency))
                .then_with(|| a.keyword.cmp(&b.keyword))
        });
        list.truncate(top_n);
        out.insert(t, list);
    }
    Ok(out)
}

pub fn write_keyword_csv<W: Write>(w: W, ratios: &BTreeMap<DocType, Vec<KeywordRatio>>) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["doc_type", "keyword", "ratio", "frequency"])?;
    for (t, list) in ratios {
        for k in list {
            wtr.write_record([t.as_str(), &k.keyword, &format!("{:.4}", k.ratio), &k.frequency.to_string()])?;
        }
    }
    wtr.flush().map_err(|e| CorpusError::Io { path: "<csv>".into(), source: e })?;
    Ok(())
}

/// Built-in English stopword list.
pub fn default_stopwords() -> HashSet<String> {
    include_str!("../assets/stopwords.txt").lines().map(|l| l.trim().to_string()).filter(|l| !l.is_empty()).collect()
}

/// Read a stopword file: one word per line, lowercased, blank lines ignored.
pub fn load_stopwords(path: impl AsRef<Path>) -> Result<HashSet<String>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| CorpusError::Io { path: path.display().to_string(), source })?;
    Ok(text
        .lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty())
        .collect())
}

/// Unit used to measure chunk length.
pub enum LengthUnit<'a> {
    /// Whitespace word count.
    Words,
    /// Caller-supplied token counter.
    Tokens(&'a dyn Fn(&str) -> usize),
}

impl LengthUnit<'_> {
    fn count(&self, text: &str) -> usize {
        match self {
            LengthUnit::Words => word_count(text),
            LengthUnit::Tokens(f) => f(text),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            LengthUnit::Words => "words",
            LengthUnit::Tokens(_) => "tokens",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RelevanceGroup {
    Relevant,
    Irrelevant,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LengthSummary {
    pub group: RelevanceGroup,
    #[serde(flatten)]
    pub summary: FiveNumber<f64>,
}

/// Five-number length summaries of relevant (gain > 0) and irrelevant chunks.
pub fn length_stats<'a>(
    samples: impl IntoIterator<Item = &'a Sample>,
    unit: &LengthUnit<'_>,
) -> Result<(LengthSummary, LengthSummary)> {
    let mut relevant = Vec::new();
    let mut irrelevant = Vec::new();
    for s in samples {
        if s.task != Task::ChunkRanking {
            continue;
        }
        let Some(gains) = &s.ground_truth else { continue };
        for (c, g) in s.candidates.iter().zip(gains) {
            let len = unit.count(&c.text) as f64;
            if *g > 0 {
                relevant.push(len);
            } else {
                irrelevant.push(len);
            }
        }
    }
    let rel = five_number(&relevant).ok_or(CorpusError::EmptyGroup("relevant"))?;
    let irr = five_number(&irrelevant).ok_or(CorpusError::EmptyGroup("irrelevant"))?;
    Ok((
        LengthSummary { group: RelevanceGroup::Relevant, summary: rel },
        LengthSummary { group: RelevanceGroup::Irrelevant, summary: irr },
    ))
}

pub fn write_length_csv<W: Write>(w: W, unit: &str, groups: &[&LengthSummary]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["group", "unit", "count", "min", "q1", "median", "q3", "max"])?;
    for g in groups {
        let s = &g.summary;
        let name = match g.group {
            RelevanceGroup::Relevant => "relevant",
            RelevanceGroup::Irrelevant => "irrelevant",
        };
        wtr.write_record([
            name.to_string(),
            unit.to_string(),
            s.count.to_string(),
            s.min.to_string(),
            s.q1.to_string(),
            s.median.to_string(),
            s.q3.to_string(),
            s.max.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| CorpusError::Io { path: "<csv>".into(), source: e })?;
    Ok(())
}
