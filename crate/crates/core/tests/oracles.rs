use std::collections::{BTreeMap, BTreeSet, HashSet};

use finrank_core::corpus::{
    keyword_ratios, length_stats, rank_distribution, Candidate, DocType, LengthUnit, Sample, Task,
};
use finrank_core::eval::descriptive_stats;
use finrank_core::prompts::{parse_scores, render_prompt, PromptInputs, PromptVariant, TemplateRegistry};
use finrank_core::provider::{ChatProvider, ChatRequest, MockProvider, Usage};
use finrank_core::synth::synthetic_dataset;
use finrank_core::telemetry::{summarize_latency, CallRecord};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{LogNormal, Normal};

fn doc_sample(id: usize, query: &str, gains: [u32; 5]) -> Sample {
    Sample {
        sample_id: format!("s{id}"),
        task: Task::DocumentRanking,
        query: query.into(),
        candidates: DocType::ALL
            .iter()
            .enumerate()
            .map(|(i, t)| Candidate { index: i, doc_type: Some(*t), text: t.to_string() })
            .collect(),
        ground_truth: Some(gains.to_vec()),
    }
}

#[test]
fn rank_distribution_matches_hand_tally() {
    // gains listed in DEF 14A, 10-K, 10-Q, 8-K, Earnings order; rank = 5 - gain
    let gains = [
        [4, 3, 2, 1, 0],
        [4, 3, 2, 1, 0],
        [0, 4, 3, 2, 1],
        [1, 0, 4, 3, 2],
        [2, 1, 0, 4, 3],
        [3, 2, 1, 0, 4],
        [0, 4, 3, 2, 1],
        [3, 4, 2, 1, 0],
        [4, 0, 1, 2, 3],
        [0, 1, 2, 3, 4],
    ];
    let samples: Vec<Sample> = gains.iter().enumerate().map(|(i, g)| doc_sample(i, "q", *g)).collect();
    let t = rank_distribution(&samples);
    let tally = [[3, 2, 1, 1, 3], [3, 2, 1, 2, 2], [1, 2, 4, 2, 1], [1, 2, 3, 3, 1], [2, 2, 1, 2, 3]];
    assert_eq!(t.counts, tally);
    assert_eq!((t.counted, t.skipped), (10, 0));
}

#[test]
fn keyword_ratios_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let planted = ["dividend", "merger", "proxy", "guidance", "quarterly", "risk"];
    let filler = ["the", "company", "what", "did", "report", "about", "year", "its"];
    let samples: Vec<Sample> = (0..20)
        .map(|i| {
            let mut words: Vec<&str> = filler.choose_multiple(&mut rng, 4).copied().collect();
            let n = rng.gen_range(1..4);
            words.extend(planted.choose_multiple(&mut rng, n));
            words.shuffle(&mut rng);
            let mut g = [0u32, 1, 2, 3, 4];
            g.shuffle(&mut rng);
            doc_sample(i, &words.join(" "), g)
        })
        .collect();
    let stop: HashSet<String> = ["the", "what", "did", "about"].iter().map(|s| s.to_string()).collect();
    let got = keyword_ratios(&samples, &stop, 100).unwrap();

    for (ti, t) in DocType::ALL.iter().enumerate() {
        let firsts: Vec<&Sample> =
            samples.iter().filter(|s| s.ground_truth.as_ref().unwrap()[ti] == 4).collect();
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for s in &firsts {
            let words: BTreeSet<String> = s
                .query
                .split(|c: char| !c.is_alphanumeric())
                .map(|w| w.to_lowercase())
                .filter(|w| w.len() >= 2 && !stop.contains(w))
                .collect();
            for w in words {
                *counts.entry(w).or_default() += 1;
            }
        }
        let mut want: Vec<(String, f64, usize)> =
            counts.into_iter().map(|(w, c)| (w, c as f64 / firsts.len() as f64, c)).collect();
        want.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(b.2.cmp(&a.2)).then(a.0.cmp(&b.0)));
        let have: Vec<(String, f64, usize)> =
            got[t].iter().map(|k| (k.keyword.clone(), k.ratio, k.frequency)).collect();
        assert_eq!(have, want, "{t}");
        assert!(have.iter().all(|k| k.1 > 0.0 && k.1 <= 1.0));
    }
    let top2 = keyword_ratios(&samples, &stop, 2).unwrap();
    assert!(top2.values().all(|v| v.len() <= 2));
}

/// Interpolated quantile by walking a sorted copy.
fn scan_quantile(xs: &[f64], p: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = p * (v.len() - 1) as f64;
    let below = pos as usize;
    if below + 1 >= v.len() {
        return v[v.len() - 1];
    }
    v[below] * (1.0 - (pos - below as f64)) + v[below + 1] * (pos - below as f64)
}

#[test]
fn lognormal_lengths_match_sorted_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let dist = LogNormal::new(3.5, 0.6).unwrap();
    let lens: Vec<usize> = (0..1000).map(|_| (dist.sample(&mut rng) as usize).max(1)).collect();
    let sample = Sample {
        sample_id: "c".into(),
        task: Task::ChunkRanking,
        query: "q".into(),
        candidates: lens
            .iter()
            .enumerate()
            .map(|(i, &n)| Candidate { index: i, doc_type: None, text: vec!["w"; n].join(" ") })
            .collect(),
        // every third chunk relevant
        ground_truth: Some((0..1000).map(|i| u32::from(i % 3 == 0)).collect()),
    };
    let (rel, irr) = length_stats([&sample], &LengthUnit::Words).unwrap();
    for (group, s, keep) in [("relevant", rel.summary, 0usize), ("irrelevant", irr.summary, 1)] {
        let xs: Vec<f64> =
            lens.iter().enumerate().filter(|(i, _)| usize::from(i % 3 != 0) == keep).map(|(_, &n)| n as f64).collect();
        assert_eq!(s.count, xs.len(), "{group}");
        for (got, p) in [(s.min, 0.0), (s.q1, 0.25), (s.median, 0.5), (s.q3, 0.75), (s.max, 1.0)] {
            assert!((got - scan_quantile(&xs, p)).abs() < 1e-9, "{group} p={p}: {got}");
        }
    }
}

#[test]
fn latency_summary_matches_sorted_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    let ms: Vec<u64> = (0..200).map(|_| rng.gen_range(1_500..250_000)).collect();
    let records: Vec<CallRecord> = ms
        .iter()
        .enumerate()
        .map(|(i, &m)| CallRecord {
            run_id: "r".into(),
            task: Task::ChunkRanking,
            sample_id: i.to_string(),
            latency_ms: m,
            usage: Usage::default(),
            model_id: "m".into(),
            agent_id: None,
        })
        .collect();
    let secs: Vec<f64> = ms.iter().map(|&m| m as f64 / 1000.0).collect();
    let s = summarize_latency(&records).unwrap();
    for (got, p) in [(s.min, 0.0), (s.q1, 0.25), (s.median, 0.5), (s.q3, 0.75), (s.max, 1.0)] {
        assert!((got - scan_quantile(&secs, p)).abs() < 1e-9, "p={p}");
    }
}

#[test]
fn confidence_interval_shrinks_with_n() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let dist = Normal::new(0.7, 0.01).unwrap();
    let draws: Vec<f64> = (0..100).map(|_| dist.sample(&mut rng)).collect();
    let small = descriptive_stats(&draws[..10], 0.05).unwrap();
    let large = descriptive_stats(&draws, 0.05).unwrap();
    assert!(large.ci_high - large.ci_low < small.ci_high - small.ci_low);
}

#[test]
fn mock_scores_parse_without_repair() {
    let reg = TemplateRegistry::builtin();
    let p = MockProvider::new(17);
    for s in synthetic_dataset(10, 10, 25, 3) {
        for v in PromptVariant::ALL {
            let t = reg.variant(v, s.task).unwrap();
            let system = render_prompt(t, &PromptInputs::new(&s.query, &s.candidates)).unwrap();
            let raw = p.send(&ChatRequest::new("mock", system, s.query.clone(), t.schema)).unwrap();
            let expected: BTreeSet<usize> = s.candidates.iter().map(|c| c.index).collect();
            let list = parse_scores(&raw.text, &expected, t.schema).unwrap();
            assert!(!list.repaired, "{} {v}: {:?}", s.sample_id, list.repair_log);
            assert_eq!(list.scores.len(), expected.len());
        }
    }
}
