use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{RankingEntry, Result, RunError};
use crate::corpus::{SampleSet, Task};
use crate::eval::{ndcg_at_k, GainScheme};

/// Cutoff used for every reported score.
pub const EVAL_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleScore {
    pub sample_id: String,
    pub task: Task,
    pub ndcg: f64,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_sample: Vec<SampleScore>,
    /// Mean over every scored sample, both tasks pooled.
    pub aggregate: f64,
    pub per_task: BTreeMap<Task, f64>,
}

/// NDCG@5 of each ranked sample against its gains. Failed samples score 0.
pub fn evaluate_run(entries: &[RankingEntry], dataset: &SampleSet) -> Result<EvalReport> {
    let labeled: HashMap<(Task, &str), _> =
        dataset.samples.iter().map(|s| ((s.task, s.sample_id.as_str()), s)).collect();
    let matched: Vec<_> = entries
        .iter()
        .filter_map(|e| labeled.get(&(e.task, e.sample_id.as_str())).map(|s| (e, *s)))
        .collect();
    if matched.is_empty() {
        return Err(RunError::Eval("no ranked sample appears in the dataset".into()));
    }
    if matched.len() < entries.len() {
        log::warn!("{} ranked samples are not in the dataset and were skipped", entries.len() - matched.len());
    }
    let unlabeled: Vec<&str> =
        matched.iter().filter(|(_, s)| s.ground_truth.is_none()).map(|(e, _)| e.sample_id.as_str()).collect();
    if !unlabeled.is_empty() {
        return Err(RunError::Eval(format!("samples without gains: {}", unlabeled.join(", "))));
    }

    let mut per_sample = Vec::with_capacity(matched.len());
    for (e, s) in matched {
        let ndcg = if e.failed {
            0.0
        } else {
            let gains: Vec<i64> = s.ground_truth.as_ref().expect("checked").iter().map(|&g| g as i64).collect();
            let positions = e
                .ranking
                .iter()
                .map(|&i| s.position_of(i))
                .collect::<Option<Vec<usize>>>()
                .ok_or_else(|| RunError::Eval(format!("{}: ranking names an unknown candidate", e.sample_id)))?;
            ndcg_at_k::<f64>(&positions, &gains, EVAL_K, GainScheme::Exponential)
                .map_err(|err| RunError::Eval(format!("{}: {err}", e.sample_id)))?
        };
        per_sample.push(SampleScore { sample_id: e.sample_id.clone(), task: e.task, ndcg, failed: e.failed });
    }

    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let all: Vec<f64> = per_sample.iter().map(|s| s.ndcg).collect();
    let mut per_task = BTreeMap::new();
    for task in [Task::DocumentRanking, Task::ChunkRanking] {
        let xs: Vec<f64> = per_sample.iter().filter(|s| s.task == task).map(|s| s.ndcg).collect();
        if !xs.is_empty() {
            per_task.insert(task, mean(&xs));
        }
    }
    Ok(EvalReport { aggregate: mean(&all), per_sample, per_task })
}

/// Per-sample rows followed by `mean` rows for each task and for all samples.
pub fn write_scores_csv<W: Write>(w: W, report: &EvalReport, manifest_hash: Option<&str>) -> Result<()> {
    let mut w = w;
    if let Some(h) = manifest_hash {
        writeln!(w, "# manifest_hash={h}")?;
    }
    writeln!(w, "sample_id,task,ndcg_at_5,failed")?;
    for s in &report.per_sample {
        writeln!(w, "{},{},{},{}", s.sample_id, s.task, s.ndcg, s.failed)?;
    }
    for (t, m) in &report.per_task {
        writeln!(w, "mean,{t},{m},")?;
    }
    writeln!(w, "mean,all,{},", report.aggregate)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Candidate, Sample};

    fn sample(id: &str, gains: Option<Vec<u32>>) -> Sample {
        Sample {
            sample_id: id.into(),
            task: Task::ChunkRanking,
            query: "q".into(),
            candidates: (0..5).map(|i| Candidate { index: i, doc_type: None, text: "t".into() }).collect(),
            ground_truth: gains,
        }
    }

    fn entry(id: &str, ranking: Vec<usize>) -> RankingEntry {
        RankingEntry { sample_id: id.into(), task: Task::ChunkRanking, scores: vec![0.0; ranking.len()], ranking, failed: false }
    }

    #[test]
    fn ideal_and_reversed() {
        let ds = SampleSet::new(vec![sample("a", Some(vec![4, 3, 2, 1, 0])), sample("b", Some(vec![0, 1, 2, 3, 4]))]);
        let r = evaluate_run(&[entry("a", vec![0, 1, 2, 3, 4]), entry("b", vec![4, 3, 2, 1, 0])], &ds).unwrap();
        assert_eq!(r.aggregate, 1.0);
        let r = evaluate_run(&[entry("a", vec![0, 1, 2, 3, 4]), entry("b", vec![0, 1, 2, 3, 4])], &ds).unwrap();
        assert!((r.aggregate - 0.756_437_976_581_358_8).abs() < 1e-9, "{}", r.aggregate);
        assert!((r.per_task[&Task::ChunkRanking] - r.aggregate).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        let ds = SampleSet::new(vec![sample("a", None), sample("b", Some(vec![1, 0, 0, 0, 0]))]);
        let err = evaluate_run(&[entry("a", vec![0, 1, 2, 3, 4])], &ds).unwrap_err();
        assert!(err.to_string().contains("a"));
        assert!(evaluate_run(&[entry("zzz", vec![0])], &ds).is_err());
        let mut failed = entry("b", vec![]);
        failed.failed = true;
        assert_eq!(evaluate_run(&[failed], &ds).unwrap().aggregate, 0.0);
    }
}
