use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Exemplar, ExemplarError, Result};

/// Number of retrieved exemplars placed in the prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum IclK {
    Icl5,
    Icl10,
    Icl15,
}

impl IclK {
    pub fn k(self) -> usize {
        match self {
            IclK::Icl5 => 5,
            IclK::Icl10 => 10,
            IclK::Icl15 => 15,
        }
    }
}

impl TryFrom<u32> for IclK {
    type Error = String;
    fn try_from(k: u32) -> std::result::Result<Self, String> {
        match k {
            5 => Ok(IclK::Icl5),
            10 => Ok(IclK::Icl10),
            15 => Ok(IclK::Icl15),
            other => Err(format!("ICL k must be 5, 10 or 15, got {other}")),
        }
    }
}

impl From<IclK> for u32 {
    fn from(k: IclK) -> u32 {
        k.k() as u32
    }
}

impl fmt::Display for IclK {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ICL-{}", self.k())
    }
}

/// Numbered example sections in retrieval order, at most `k` of them.
pub fn format_few_shot(results: &[&Exemplar], k: IclK) -> Result<String> {
    if results.is_empty() {
        return Err(ExemplarError::Argument(
            "no exemplars to format; omit the examples block instead".into(),
        ));
    }
    let mut out = String::from("Here are solved examples of similar questions:");
    for (i, e) in results.iter().take(k.k()).enumerate() {
        out.push_str(&format!(
            "\n\nExample {}:\nQuestion: {}\nRanking: {}",
            i + 1,
            crate::text::one_line(&e.query),
            e.answer_ranking.join(" > ")
        ));
    }
    Ok(out)
}
