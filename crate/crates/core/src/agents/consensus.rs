use std::collections::{BTreeMap, BTreeSet};

use super::{AgentError, Result};
use crate::prompts::PromptError;

/// Per-agent scores over a fixed candidate set. Absent cells mean "not scored".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreMatrix {
    candidates: BTreeSet<usize>,
    rows: BTreeMap<String, BTreeMap<usize, f64>>,
}

impl ScoreMatrix {
    pub fn new(candidates: impl IntoIterator<Item = usize>) -> Self {
        ScoreMatrix { candidates: candidates.into_iter().collect(), rows: BTreeMap::new() }
    }

    pub fn set(&mut self, agent_id: &str, candidate: usize, score: f64) -> Result<()> {
        if !self.candidates.contains(&candidate) {
            return Err(AgentError::Argument(format!("{agent_id} scored unknown candidate {candidate}")));
        }
        if !score.is_finite() {
            return Err(AgentError::Argument(format!("{agent_id}: non-finite score for {candidate}")));
        }
        self.rows.entry(agent_id.to_string()).or_default().insert(candidate, score);
        Ok(())
    }

    pub fn agents(&self) -> impl Iterator<Item = &str> {
        self.rows.keys().map(String::as_str)
    }

    pub fn candidates(&self) -> impl Iterator<Item = usize> + '_ {
        self.candidates.iter().copied()
    }

    pub fn get(&self, agent_id: &str, candidate: usize) -> Option<f64> {
        self.rows.get(agent_id)?.get(&candidate).copied()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Consensus {
    pub order: Vec<usize>,
    pub scores: Vec<f64>,
    /// Candidates nobody scored, ascending.
    pub unscored: Vec<usize>,
}

/// Weighted mean over the agents that scored each candidate; descending, ties by index.
pub fn consensus(matrix: &ScoreMatrix, weights: Option<&BTreeMap<String, f64>>) -> Result<Consensus> {
    if matrix.is_empty() {
        return Err(AgentError::Argument("consensus over an empty score matrix".into()));
    }
    if let Some(w) = weights {
        let agents: BTreeSet<&str> = matrix.agents().collect();
        let given: BTreeSet<&str> = w.keys().map(String::as_str).collect();
        if agents != given {
            return Err(AgentError::Argument("consensus weights must name exactly the scoring agents".into()));
        }
        if let Some((a, x)) = w.iter().find(|(_, x)| !(x.is_finite() && **x > 0.0)) {
            return Err(AgentError::Argument(format!("weight {x} for {a} is not positive")));
        }
    }
    let mut agg = Vec::new();
    let mut unscored = Vec::new();
    for c in matrix.candidates() {
        let (mut num, mut den) = (0.0, 0.0);
        for (agent, row) in &matrix.rows {
            if let Some(s) = row.get(&c) {
                let w = weights.map_or(1.0, |w| w[agent]);
                num += w * s;
                den += w;
            }
        }
        if den > 0.0 {
            agg.push((c, num / den));
        } else {
            log::warn!("candidate {c} has no scores; excluded from consensus");
            unscored.push(c);
        }
    }
    agg.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(Consensus {
        order: agg.iter().map(|x| x.0).collect(),
        scores: agg.iter().map(|x| x.1).collect(),
        unscored,
    })
}

/// Keep `kept` if it has at least `min(floor, total)` entries, otherwise keep everything.
pub fn enforce_filter_floor(total: usize, kept: &[usize], floor: usize) -> Result<Vec<usize>> {
    if let Some(bad) = kept.iter().find(|&&i| i >= total) {
        return Err(PromptError::ContractViolation(format!("kept index {bad} is outside 0..{total}")).into());
    }
    let distinct: BTreeSet<usize> = kept.iter().copied().collect();
    if distinct.len() >= floor.min(total) {
        Ok(kept.to_vec())
    } else {
        log::warn!(
            "filter kept {} of {total}, below the floor of {}; keeping all",
            distinct.len(),
            floor.min(total)
        );
        Ok((0..total).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn matrix(rows: &[&[f64]]) -> ScoreMatrix {
        let mut m = ScoreMatrix::new(0..rows[0].len());
        for (a, row) in rows.iter().enumerate() {
            for (c, s) in row.iter().enumerate() {
                m.set(&format!("agent{a}"), c, *s).unwrap();
            }
        }
        m
    }

    #[test]
    fn symmetric_tie_breaks_by_index() {
        let c = consensus(&matrix(&[&[3.0, 5.0], &[5.0, 3.0]]), None).unwrap();
        assert_eq!(c.order, vec![0, 1]);
        assert_eq!(c.scores, vec![4.0, 4.0]);
    }

    #[test]
    fn single_agent_order() {
        let c = consensus(&matrix(&[&[2.0, 9.0, 5.0]]), None).unwrap();
        assert_eq!(c.order, vec![1, 2, 0]);
    }

    #[test]
    fn weighted_mean() {
        let m = matrix(&[&[10.0, 1.0], &[1.0, 4.0]]);
        let w = BTreeMap::from([("agent0".to_string(), 1.0), ("agent1".to_string(), 3.0)]);
        let c = consensus(&m, Some(&w)).unwrap();
        // (10 + 3) / 4 = 3.25 vs (1 + 12) / 4 = 3.25: tie, index order
        assert_eq!(c.order, vec![0, 1]);
        let w = BTreeMap::from([("agent0".to_string(), 1.0)]);
        assert!(consensus(&m, Some(&w)).is_err());
    }

    #[test]
    fn unscored_candidates_excluded() {
        let mut m = ScoreMatrix::new(0..3);
        m.set("a", 2, 5.0).unwrap();
        m.set("a", 0, 7.0).unwrap();
        let c = consensus(&m, None).unwrap();
        assert_eq!(c.order, vec![0, 2]);
        assert_eq!(c.unscored, vec![1]);
        assert!(m.set("a", 3, 1.0).is_err());
        assert!(consensus(&ScoreMatrix::new(0..3), None).is_err());
    }

    #[test]
    fn floor_examples() {
        let kept: Vec<usize> = (0..120).collect();
        assert_eq!(enforce_filter_floor(250, &kept, 100).unwrap(), kept);
        let kept: Vec<usize> = (0..50).collect();
        assert_eq!(enforce_filter_floor(80, &kept, 100).unwrap(), (0..80).collect::<Vec<_>>());
        let kept: Vec<usize> = (0..100).collect();
        assert_eq!(enforce_filter_floor(100, &kept, 100).unwrap(), kept);
        assert!(matches!(
            enforce_filter_floor(5, &[1, 5], 100),
            Err(AgentError::Prompt(PromptError::ContractViolation(_)))
        ));
    }

    proptest! {
        #[test]
        fn scaling_preserves_order(
            rows in prop::collection::vec(prop::collection::vec(1u8..=10, 12), 1..5),
            exp in -3i32..7,
        ) {
            // power-of-two factors scale exactly, so ties stay ties
            let factor = 2f64.powi(exp);
            let base: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|&x| x as f64).collect()).collect();
            let scaled: Vec<Vec<f64>> = base.iter().map(|r| r.iter().map(|x| x * factor).collect()).collect();
            let a: Vec<&[f64]> = base.iter().map(|r| r.as_slice()).collect();
            let b: Vec<&[f64]> = scaled.iter().map(|r| r.as_slice()).collect();
            prop_assert_eq!(consensus(&matrix(&a), None).unwrap().order, consensus(&matrix(&b), None).unwrap().order);
        }
    }
}
