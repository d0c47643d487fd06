use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{PromptError, Result, SchemaId};
use crate::corpus::{Candidate, Task};
use crate::text::one_line;

/// Placeholders a template body may use.
pub const PLACEHOLDERS: [&str; 3] = ["question", "candidates", "examples"];

/// Default rendered-length budget, in characters.
pub const DEFAULT_CHAR_BUDGET: usize = 3_500_000;

/// The four non-agentic prompt variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PromptVariant {
    P1,
    P2,
    P3,
    P4,
}

impl PromptVariant {
    pub const ALL: [PromptVariant; 4] = [PromptVariant::P1, PromptVariant::P2, PromptVariant::P3, PromptVariant::P4];

    pub fn as_str(self) -> &'static str {
        match self {
            PromptVariant::P1 => "P1",
            PromptVariant::P2 => "P2",
            PromptVariant::P3 => "P3",
            PromptVariant::P4 => "P4",
        }
    }
}

impl fmt::Display for PromptVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptVariant {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_uppercase().as_str() {
            "P1" => Ok(PromptVariant::P1),
            "P2" => Ok(PromptVariant::P2),
            "P3" => Ok(PromptVariant::P3),
            "P4" => Ok(PromptVariant::P4),
            _ => Err(format!("unknown prompt variant {s:?}")),
        }
    }
}

/// How a role template combines with a base variant body.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Compose {
    Standalone,
    RoleThenBase,
    BaseThenRole,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub id: String,
    pub task: Task,
    pub body: String,
    pub schema: SchemaId,
}

/// Split `body` into literal text and placeholder names.
enum Piece<'a> {
    Text(&'a str),
    Slot(&'a str),
}

fn pieces(body: &str) -> Vec<Piece<'_>> {
    let bytes = body.as_bytes();
    let mut out = Vec::new();
    let mut lit_start = 0;
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' {
            let mut j = i + 1;
            while j < bytes.len() && (bytes[j].is_ascii_lowercase() || bytes[j] == b'_') {
                j += 1;
            }
            if j > i + 1 && j < bytes.len() && bytes[j] == b'}' {
                if lit_start < i {
                    out.push(Piece::Text(&body[lit_start..i]));
                }
                out.push(Piece::Slot(&body[i + 1..j]));
                i = j + 1;
                lit_start = i;
                continue;
            }
        }
        i += 1;
    }
    if lit_start < body.len() {
        out.push(Piece::Text(&body[lit_start..]));
    }
    out
}

impl PromptTemplate {
    pub fn new(id: impl Into<String>, task: Task, body: impl Into<String>, schema: SchemaId) -> Result<Self> {
        let t = PromptTemplate { id: id.into(), task, body: body.into(), schema };
        for p in pieces(&t.body) {
            if let Piece::Slot(name) = p {
                if !PLACEHOLDERS.contains(&name) {
                    return Err(PromptError::UnknownPlaceholder {
                        template: t.id.clone(),
                        placeholder: name.to_string(),
                    });
                }
            }
        }
        Ok(t)
    }

    /// Placeholders referenced by the body, in first-use order.
    pub fn placeholders(&self) -> Vec<&str> {
        let mut seen = Vec::new();
        for p in pieces(&self.body) {
            if let Piece::Slot(name) = p {
                if !seen.contains(&name) {
                    seen.push(name);
                }
            }
        }
        seen
    }
}

/// Values substituted into a template.
#[derive(Debug, Clone, Copy)]
pub struct PromptInputs<'a> {
    pub question: Option<&'a str>,
    pub candidates: Option<&'a [Candidate]>,
    /// Few-shot block; when `None` the `{examples}` line is removed.
    pub examples: Option<&'a str>,
    pub char_budget: usize,
}

impl<'a> PromptInputs<'a> {
    pub fn new(question: &'a str, candidates: &'a [Candidate]) -> Self {
        PromptInputs {
            question: Some(question),
            candidates: Some(candidates),
            examples: None,
            char_budget: DEFAULT_CHAR_BUDGET,
        }
    }

    pub fn with_examples(mut self, examples: Option<&'a str>) -> Self {
        self.examples = examples;
        self
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.char_budget = budget;
        self
    }
}

/// One `[index] text` line per candidate, whitespace collapsed.
pub fn format_candidates(candidates: &[Candidate]) -> String {
    candidates
        .iter()
        .map(|c| match c.doc_type {
            Some(t) => format!("[{}] {}: {}", c.index, t, one_line(&c.text)),
            None => format!("[{}] {}", c.index, one_line(&c.text)),
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Remove lines consisting only of `{examples}` together with one following blank line.
fn elide_examples_line(body: &str) -> String {
    let mut out: Vec<&str> = Vec::new();
    let mut skip_blank = false;
    for line in body.split('\n') {
        if line.trim() == "{examples}" {
            skip_blank = true;
            continue;
        }
        if skip_blank && line.trim().is_empty() {
            skip_blank = false;
            continue;
        }
        skip_blank = false;
        out.push(line);
    }
    out.join("\n")
}

pub fn render_prompt(template: &PromptTemplate, inputs: &PromptInputs<'_>) -> Result<String> {
    let owned;
    let body = if inputs.examples.is_none() {
        owned = elide_examples_line(&template.body);
        owned.as_str()
    } else {
        template.body.as_str()
    };

    let mut out = String::with_capacity(body.len() + 256);
    for p in pieces(body) {
        match p {
            Piece::Text(t) => out.push_str(t),
            Piece::Slot("question") => out.push_str(
                inputs
                    .question
                    .ok_or_else(|| PromptError::MissingPlaceholder("question".into()))?,
            ),
            Piece::Slot("candidates") => out.push_str(&format_candidates(
                inputs
                    .candidates
                    .ok_or_else(|| PromptError::MissingPlaceholder("candidates".into()))?,
            )),
            Piece::Slot("examples") => out.push_str(inputs.examples.unwrap_or("")),
            Piece::Slot(other) => return Err(PromptError::MissingPlaceholder(other.to_string())),
        }
    }

    let len = out.chars().count();
    if len > inputs.char_budget {
        return Err(PromptError::BudgetExceeded {
            len,
            budget: inputs.char_budget,
            overflow: len - inputs.char_budget,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Deserialize)]
struct ManifestEntry {
    id: String,
    task: Task,
    file: String,
    schema: SchemaId,
    compose: Compose,
}

#[derive(Debug, Clone, Deserialize)]
struct Manifest {
    version: String,
    templates: Vec<ManifestEntry>,
}

macro_rules! builtin_assets {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../../assets/prompts/", $name)))),*]
    };
}

static BUILTIN_MANIFEST: &str = include_str!("../../assets/prompts/manifest.json");
static BUILTIN_FILES: &[(&str, &str)] = builtin_assets![
    "p1_document.txt", "p1_chunk.txt", "p2_document.txt", "p2_chunk.txt",
    "p3_document.txt", "p3_chunk.txt", "p4_document.txt", "p4_chunk.txt",
    "role_analyzer.txt",
    "role_expert_def14a.txt", "role_expert_10k.txt", "role_expert_10q.txt",
    "role_expert_8k.txt", "role_expert_earnings.txt",
    "role_a1_ceo.txt", "role_a1_financial_analyst.txt", "role_a1_operation_manager.txt",
    "role_a1_risk_analyst.txt",
    "role_a2_noise_remover.txt", "role_a2_candidate_selector.txt", "role_a2_relevance_scorer.txt",
    "role_a2_contextual_reasoner.txt", "role_a2_evidence_extractor.txt", "role_a2_diversity.txt",
    "role_a3_quick_filter.txt", "role_a3_relevance_scorer.txt", "role_a3_contextual_reasoner.txt",
    "role_a3_evidence_extractor.txt",
    "role_a4_financial_analyst.txt", "role_a4_risk_analyst.txt",
];

#[derive(Debug, Clone)]
struct Entry {
    template: PromptTemplate,
    compose: Compose,
}

/// Immutable set of templates keyed by (id, task).
#[derive(Debug, Clone)]
pub struct TemplateRegistry {
    version: String,
    entries: BTreeMap<(String, Task), Entry>,
}

impl TemplateRegistry {
    /// Templates compiled into the crate.
    pub fn builtin() -> Self {
        Self::from_manifest(BUILTIN_MANIFEST, |file| {
            BUILTIN_FILES
                .iter()
                .find(|(n, _)| *n == file)
                .map(|(_, body)| body.to_string())
                .ok_or_else(|| PromptError::Asset(format!("missing builtin asset {file}")))
        })
        .expect("builtin prompt assets are valid")
    }

    /// Load `manifest.json` and the files it names from a directory.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest = std::fs::read_to_string(dir.join("manifest.json"))
            .map_err(|e| PromptError::Asset(format!("{}: {e}", dir.join("manifest.json").display())))?;
        Self::from_manifest(&manifest, |file| {
            std::fs::read_to_string(dir.join(file))
                .map_err(|e| PromptError::Asset(format!("{}: {e}", dir.join(file).display())))
        })
    }

    fn from_manifest(manifest: &str, mut read: impl FnMut(&str) -> Result<String>) -> Result<Self> {
        let m: Manifest =
            serde_json::from_str(manifest).map_err(|e| PromptError::Asset(format!("manifest: {e}")))?;
        let mut entries = BTreeMap::new();
        for e in m.templates {
            let body = read(&e.file)?;
            let body = body.strip_suffix('\n').unwrap_or(&body).to_string();
            let template = PromptTemplate::new(e.id.clone(), e.task, body, e.schema)?;
            if entries.insert((e.id.clone(), e.task), Entry { template, compose: e.compose }).is_some() {
                return Err(PromptError::Asset(format!("duplicate template {} ({})", e.id, e.task)));
            }
        }
        Ok(TemplateRegistry { version: m.version, entries })
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn get(&self, id: &str, task: Task) -> Result<&PromptTemplate> {
        self.entries
            .get(&(id.to_string(), task))
            .map(|e| &e.template)
            .ok_or_else(|| PromptError::UnknownTemplate(format!("{id} ({task})")))
    }

    pub fn variant(&self, v: PromptVariant, task: Task) -> Result<&PromptTemplate> {
        self.get(v.as_str(), task)
    }

    /// Resolve a role template against a base variant.
    pub fn compose(&self, role_id: &str, task: Task, base: PromptVariant) -> Result<PromptTemplate> {
        let entry = self
            .entries
            .get(&(role_id.to_string(), task))
            .ok_or_else(|| PromptError::UnknownTemplate(format!("{role_id} ({task})")))?;
        let role = &entry.template;
        let body = match entry.compose {
            Compose::Standalone => return Ok(role.clone()),
            Compose::RoleThenBase => format!("{}\n\n{}", role.body, self.variant(base, task)?.body),
            Compose::BaseThenRole => format!("{}\n\n{}", self.variant(base, task)?.body, role.body),
        };
        PromptTemplate::new(format!("{role_id}+{base}"), task, body, role.schema)
    }

    pub fn ids(&self) -> impl Iterator<Item = (&str, Task)> {
        self.entries.keys().map(|(id, t)| (id.as_str(), *t))
    }
}
