//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits non-zero on any failure.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use finrank_core::agents::{
    consensus, run_chunk_ranking, run_document_ranking, AgentKind, Architecture, GraphConfig, GraphEnv, ScoreMatrix,
};
use finrank_core::corpus::{Sample, SampleSet, Task};
use finrank_core::eval::{descriptive_stats, ndcg_at_k, welch_t_test, GainScheme};
use finrank_core::exemplars::{build_index, Exemplar, FlatIndex, IclK};
use finrank_core::prompts::{parse_scores, render_prompt, PromptError, PromptInputs, PromptVariant, SchemaId, TemplateRegistry};
use finrank_core::provider::{ChatProvider, ChatRequest, MockEmbedder, MockProvider, RetryPolicy};
use finrank_core::runner::{run_experiment, RunConfig, RunEnv, TaskConfig};
use finrank_core::synth::synthetic_dataset;
use finrank_core::telemetry::{compute_cost, PricingTable, TokenSummary};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

const RUN12: [f64; 5] = [0.66537, 0.67366, 0.68523, 0.68579, 0.69019];
const RUN15: [f64; 4] = [0.69640, 0.69735, 0.70630, 0.70977];
const RUN18: [f64; 4] = [0.70187, 0.70455, 0.70551, 0.71446];
const RUN19: [f64; 9] = [0.70491, 0.70827, 0.70865, 0.70923, 0.71181, 0.71277, 0.71375, 0.71713, 0.71818];

fn close(got: f64, want: f64, tol: f64, what: &str) {
    // slack for printed values that sit exactly on a rounding boundary
    assert!((got - want).abs() <= tol + 1e-12, "{what}: got {got}, want {want} ± {tol}");
}

fn criterion_1() {
    let rows: [(&str, &[f64], [f64; 5], f64); 4] = [
        ("12", &RUN12, [0.68005, 0.01023, 0.66734, 0.69276, 0.0], 1.50489),
        ("15", &RUN15, [0.70246, 0.00661, 0.69194, 0.71297, 0.0], 0.94078),
        ("18", &RUN18, [0.70660, 0.00546, 0.69790, 0.71529, 0.0], 0.77319),
        ("19", &RUN19, [0.71163, 0.00433, 0.70830, 0.71496, 0.0], 0.60861),
    ];
    for (run, scores, [mean, sd, lo, hi, _], cv) in rows {
        let s = descriptive_stats(scores, 0.05).unwrap();
        assert_eq!(s.n, scores.len());
        close(s.mean, mean, 5e-6, &format!("run {run} mean"));
        close(s.sd, sd, 5e-6, &format!("run {run} sd"));
        close(s.cv.unwrap(), cv, 5e-5, &format!("run {run} cv"));
        close(s.ci_low, lo, 5e-5, &format!("run {run} ci low"));
        close(s.ci_high, hi, 5e-5, &format!("run {run} ci high"));
    }
}

fn criterion_2() {
    for (b, t, p) in [(&RUN15[..], -3.96943, 0.00573), (&RUN18[..], -4.98117, 0.00218), (&RUN19[..], -6.58157, 0.00141)] {
        let w = welch_t_test(&RUN12, b, 0.05).unwrap();
        close(w.t, t, 1e-3, "t");
        close(w.p, p, 5e-4, "p");
        assert!(w.significant);
    }
}

fn criterion_3() {
    // (run, model, [document, chunk, combined] as (prompt, completion, [cost cells]))
    type Row = (u64, u64, [f64; 3]);
    let table: [(&str, &str, [Row; 3]); 7] = [
        ("2", "gpt-5-mini", [(150541, 61904, [0.04, 0.12, 0.16]), (15010574, 519830, [3.75, 1.04, 4.79]), (15161115, 581734, [3.79, 1.16, 4.95])]),
        ("9", "gpt-5-mini", [(241941, 68752, [0.06, 0.14, 0.20]), (14963931, 490556, [3.74, 0.98, 4.72]), (15205872, 559308, [3.80, 1.12, 4.92])]),
        ("12", "gpt-5-mini", [(327741, 297498, [0.08, 0.59, 0.68]), (15214202, 2271311, [3.80, 4.54, 8.35]), (15541943, 2568809, [3.89, 5.14, 9.02])]),
        ("13", "gpt-5-mini", [(426941, 84369, [0.11, 0.17, 0.28]), (19200124, 1734012, [4.80, 3.47, 8.27]), (19627065, 1818381, [4.91, 3.64, 8.54])]),
        ("15", "gpt-5", [(426941, 180699, [0.53, 1.81, 2.34]), (19170218, 3159981, [23.96, 31.60, 55.56]), (19597159, 3340680, [24.50, 33.41, 57.90])]),
        ("17", "gpt-5-mini", [(639755, 97236, [0.16, 0.19, 0.35]), (46978904, 2079562, [11.74, 4.16, 15.90]), (47618659, 2176798, [11.90, 4.35, 16.26])]),
        ("19", "gpt-5", [(639755, 230297, [0.80, 2.30, 3.10]), (19159387, 3141812, [23.95, 31.42, 55.37]), (19799142, 3372109, [24.75, 33.72, 58.47])]),
    ];
    let pricing = PricingTable::from_json(
        r#"{"models": {"gpt-5-mini": {"prompt": 0.25, "completion": 2.00}, "gpt-5": {"prompt": 1.25, "completion": 10.00}}}"#,
    )
    .unwrap();
    for (run, model, rows) in table {
        let sums: Vec<TokenSummary> = rows
            .iter()
            .zip([200, 200, 400])
            .map(|((p, c, _), n)| TokenSummary::from_sums(n, *p, *c).unwrap())
            .collect();
        let combined = sums[0].combine(&sums[1]);
        assert_eq!((combined.prompt_sum, combined.completion_sum), (sums[2].prompt_sum, sums[2].completion_sum), "run {run} additivity");
        assert_eq!(combined.count, 400);
        for (s, (_, _, cells)) in sums.iter().zip(&rows) {
            let cost = compute_cost(s, model, &pricing).unwrap();
            for (got, want) in cost.cents().into_iter().zip(cells) {
                close(got, *want, 0.01, &format!("run {run} cost"));
            }
        }
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for at in 0..=p.len() {
            let mut q = p.clone();
            q.insert(at, n - 1);
            out.push(q);
        }
    }
    out
}

fn oracle_dcg(order: &[usize], gains: &[i64]) -> f64 {
    order.iter().take(5).enumerate().map(|(r, &i)| (2f64.powi(gains[i] as i32) - 1.0) / ((r + 2) as f64).log2()).sum()
}

fn criterion_4() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for round in 0..200 {
        let n = 1 + round % 6;
        let gains: Vec<i64> = (0..n).map(|_| rng.gen_range(0..=4)).collect();
        let perms = permutations(n);
        let best = perms.iter().map(|p| oracle_dcg(p, &gains)).fold(f64::MIN, f64::max);
        let mut desc: Vec<usize> = (0..n).collect();
        desc.sort_by(|a, b| gains[*b].cmp(&gains[*a]));
        let top: f64 = ndcg_at_k(&desc, &gains, 5, GainScheme::Exponential).unwrap();
        for p in &perms {
            let got: f64 = ndcg_at_k(p, &gains, 5, GainScheme::Exponential).unwrap();
            assert!((0.0..=1.0).contains(&got), "{gains:?} {p:?}: {got}");
            assert!(got <= top + 1e-12);
            let want = if best > 0.0 { oracle_dcg(p, &gains) / best } else { 0.0 };
            assert!((got - want).abs() < 1e-12, "{gains:?} {p:?}: {got} vs {want}");
        }
        if best > 0.0 {
            assert!((top - 1.0).abs() < 1e-12);
        }
    }
    let gains = [4, 3, 2, 1, 0];
    let reversed = [4, 3, 2, 1, 0];
    let got: f64 = ndcg_at_k(&reversed, &gains, 5, GainScheme::Exponential).unwrap();
    let want = oracle_dcg(&reversed, &gains) / oracle_dcg(&[0, 1, 2, 3, 4], &gains);
    close(want, 0.512876, 1e-6, "oracle");
    close(got, 0.512876, 1e-6, "ndcg");
}

fn criterion_5() {
    const DIM: usize = 256;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for round in 0..50 {
        // one full-size index, the rest log-uniform in 1..=2000
        let size = if round == 0 { 2000 } else { (2000f64.powf(rng.gen::<f64>()) as usize).clamp(1, 2000) };
        let vectors: Vec<Vec<f32>> = (0..size).map(|_| (0..DIM).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let mut index = FlatIndex::<f32>::new(DIM);
        for (i, v) in vectors.iter().enumerate() {
            index.insert(&format!("e{round}-{i}"), v).unwrap();
        }
        for _ in 0..20 {
            let q: Vec<f32> = if rng.gen_bool(0.2) {
                vectors[rng.gen_range(0..size)].clone()
            } else {
                (0..DIM).map(|_| rng.gen_range(-1.0..1.0)).collect()
            };
            let k = rng.gen_range(1..=25);
            let mut scan: Vec<(f64, usize)> = vectors
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let ss: f64 = v.iter().zip(&q).map(|(a, b)| (*a as f64 - *b as f64).powi(2)).sum();
                    (ss.sqrt(), i)
                })
                .collect();
            scan.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            scan.truncate(k);
            let hits = index.search(&q, k).unwrap();
            assert_eq!(hits.len(), scan.len());
            for (h, (d, i)) in hits.iter().zip(&scan) {
                assert_eq!(h.id, format!("e{round}-{i}"));
                assert!((h.distance - d).abs() <= 1e-9, "{} vs {d}", h.distance);
            }
        }
        for (i, v) in vectors.iter().enumerate() {
            let h = &index.search(v, 1).unwrap()[0];
            assert_eq!((h.id.as_str(), h.distance), (format!("e{round}-{i}").as_str(), 0.0));
        }
    }
}

fn chunk_samples(count: usize, seed: u64) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let n = if i % 4 == 0 { rng.gen_range(101..=250) } else { rng.gen_range(1..=100) };
            let mut s = synthetic_dataset(0, 1, n, rng.gen()).remove(0);
            s.sample_id = format!("c{i}");
            s
        })
        .collect()
}

/// Mean of each agent's score per candidate, then a stable descending sort.
fn consensus_oracle(rows: &[Vec<Option<f64>>], n: usize) -> Vec<(usize, f64)> {
    let mut means: Vec<(usize, f64)> = (0..n)
        .filter_map(|c| {
            let xs: Vec<f64> = rows.iter().filter_map(|r| r[c]).collect();
            (!xs.is_empty()).then(|| (c, xs.iter().sum::<f64>() / xs.len() as f64))
        })
        .collect();
    means.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    means
}

fn criterion_6() {
    let registry = TemplateRegistry::builtin();
    let policy = RetryPolicy::default();
    let samples = chunk_samples(100, 6);
    let docs = synthetic_dataset(100, 0, 0, 66);
    let strict = MockProvider::new(6).with_keep_threshold(8);
    let loose = MockProvider::new(6);

    for arch in [Architecture::A1, Architecture::A2, Architecture::A3, Architecture::A4, Architecture::DocEnsemble] {
        let config = GraphConfig::standard(arch);
        let pool = if arch == Architecture::DocEnsemble { &docs } else { &samples };
        for (i, s) in pool.iter().enumerate() {
            let provider: &dyn ChatProvider = if i % 2 == 0 { &strict } else { &loose };
            let env = GraphEnv::new(provider, &policy, &registry, "gpt-5").with_base(PromptVariant::P4);
            let run = |env: &GraphEnv<'_>| {
                if arch.is_chunk() {
                    run_chunk_ranking(s, &config, env).unwrap()
                } else {
                    run_document_ranking(s, &config, env).unwrap()
                }
            };
            let par = run(&env.clone().with_parallelism(4));
            let seq = run(&env.clone().with_parallelism(1));
            assert_eq!(serde_json::to_vec(&par).unwrap(), serde_json::to_vec(&seq).unwrap(), "{arch} {}", s.sample_id);

            let n = s.candidates.len();
            let mut order = par.order.clone();
            order.sort_unstable();
            assert_eq!(order, (0..n).collect::<Vec<_>>(), "{arch} {}", s.sample_id);
            assert_eq!(par.scores.len(), n);

            if matches!(arch, Architecture::A2 | Architecture::A3) {
                let last = config.stages().last().unwrap().0;
                for t in par.trace.iter().filter(|t| t.stage == last) {
                    assert!(t.survivors >= n.min(100), "{arch} {}: {} scored of {n}", s.sample_id, t.survivors);
                }
            }
            if matches!(arch, Architecture::A1 | Architecture::A4) {
                // every scorer sees every candidate; rebuild the consensus from raw agent output
                let mut rows = Vec::new();
                let mut specs: Vec<_> = config.agents.iter().filter(|a| a.kind == AgentKind::Scorer).collect();
                specs.sort_by(|a, b| a.agent_id.cmp(&b.agent_id));
                for spec in specs {
                    let t = registry.compose(&spec.role_prompt_id, Task::ChunkRanking, PromptVariant::P4).unwrap();
                    let system = render_prompt(&t, &PromptInputs::new(&s.query, &s.candidates)).unwrap();
                    let raw = provider.send(&ChatRequest::new("gpt-5", system, s.query.clone(), t.schema)).unwrap();
                    let expected: BTreeSet<usize> = (0..n).collect();
                    let list = parse_scores(&raw.text, &expected, t.schema).unwrap();
                    rows.push((0..n).map(|c| list.score_of(c).map(f64::from)).collect::<Vec<_>>());
                }
                let want = consensus_oracle(&rows, n);
                assert_eq!(par.order, want.iter().map(|x| x.0).collect::<Vec<_>>(), "{arch} {}", s.sample_id);
                for (got, (_, w)) in par.scores.iter().zip(&want) {
                    assert!((got - w).abs() < 1e-12);
                }
            }
        }
    }

    // consensus on random sparse matrices
    let mut rng = ChaCha8Rng::seed_from_u64(60);
    for _ in 0..100 {
        let n = rng.gen_range(1..=40);
        let agents = rng.gen_range(1..=5);
        let rows: Vec<Vec<Option<f64>>> = (0..agents)
            .map(|_| (0..n).map(|_| rng.gen_bool(0.8).then(|| rng.gen_range(1..=10) as f64)).collect())
            .collect();
        let mut m = ScoreMatrix::new(0..n);
        for (a, row) in rows.iter().enumerate() {
            for (c, x) in row.iter().enumerate() {
                if let Some(x) = x {
                    m.set(&format!("agent{a}"), c, *x).unwrap();
                }
            }
        }
        if rows.iter().all(|r| r.iter().all(Option::is_none)) {
            continue;
        }
        let got = consensus(&m, None).unwrap();
        let want = consensus_oracle(&rows, n);
        assert_eq!(got.order, want.iter().map(|x| x.0).collect::<Vec<_>>());
        for (g, (_, w)) in got.scores.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12);
        }
    }
}

fn criterion_7() {
    let dataset = SampleSet::new(synthetic_dataset(25, 25, 60, 7));
    let mut config = RunConfig::new("19", 19);
    config.document = Some(TaskConfig::new(PromptVariant::P4, "gpt-5").with_icl(IclK::Icl5, "mock"));
    config.chunk = Some(TaskConfig::new(PromptVariant::P4, "gpt-5"));
    let once = || {
        let train: Vec<Exemplar> = synthetic_dataset(40, 0, 0, 700).iter().filter_map(Exemplar::from_sample).collect();
        let store = build_index(train, &MockEmbedder::new(1)).unwrap();
        let env = RunEnv::new(Arc::new(MockProvider::new(19))).with_exemplars(
            Task::DocumentRanking,
            store,
            Arc::new(MockEmbedder::new(1)),
        );
        let dir = tempfile::tempdir().unwrap();
        let a = run_experiment(&config, &dataset, &env, dir.path()).unwrap();
        assert_eq!(a.failure_count(), 0);
        let files: BTreeMap<&str, Vec<u8>> = ["manifest.json", "rankings.jsonl", "telemetry.jsonl", "scores.csv"]
            .into_iter()
            .map(|f| (f, std::fs::read(dir.path().join(f)).unwrap()))
            .collect();
        (a.manifest.manifest_hash, files)
    };
    let (h1, f1) = once();
    let (h2, f2) = once();
    assert_eq!(h1, h2);
    for (name, bytes) in &f1 {
        assert!(bytes == &f2[name], "{name} differs between runs");
    }
}

fn criterion_8() {
    println!(
        "  note: leaderboard NDCG@5 values such as 0.71818 are not reproducible offline. They need the withheld \
         validation labels and the commercial models. The ranking pipeline is accepted on criteria 4 to 7."
    );
}

fn fuzz_case(rng: &mut ChaCha8Rng, expected: &BTreeSet<usize>) -> (String, bool) {
    let idx: Vec<usize> = expected.iter().copied().collect();
    let any_index = |rng: &mut ChaCha8Rng| -> serde_json::Value {
        match rng.gen_range(0..6) {
            0 => json!(idx.choose(rng).unwrap().to_string()),
            1 => json!(-1),
            2 => json!(idx.iter().max().unwrap() + rng.gen_range(1..5)),
            3 => json!(null),
            _ => json!(*idx.choose(rng).unwrap()),
        }
    };
    let any_score = |rng: &mut ChaCha8Rng| -> serde_json::Value {
        match rng.gen_range(0..8) {
            0 => json!(rng.gen_range(-50..=0)),
            1 => json!(rng.gen_range(11..=1000)),
            2 => json!(rng.gen_range(-5.0..15.0)),
            3 => json!(rng.gen_range(1..=10).to_string()),
            4 => json!(null),
            5 => json!("high"),
            _ => json!(rng.gen_range(1..=10)),
        }
    };
    let kind = rng.gen_range(0..10);
    match kind {
        // nothing extractable
        0 => {
            let words = ["sure", "here", "is", "ranking", "chunk", "7", "score:", "[1, 2]", "none"];
            let text: Vec<&str> = (0..rng.gen_range(0..12)).map(|_| *words.choose(rng).unwrap()).collect();
            (text.join(" "), true)
        }
        1 => (["", "{", "{{{", "}{", "{\"scores\": [", "```json\n{\n```"][rng.gen_range(0..6)].to_string(), true),
        _ => {
            let entries: Vec<serde_json::Value> = (0..rng.gen_range(0..idx.len() * 2 + 2))
                .map(|_| {
                    if rng.gen_bool(0.1) {
                        json!("not an entry")
                    } else {
                        json!({"chunk_index": any_index(rng), "relevance_score": any_score(rng), "reasoning": "r"})
                    }
                })
                .collect();
            let mut body = match kind {
                2 => json!({"scores": {"0": 5}}),
                3 => json!({"result": {"scores": entries}}),
                4 => json!({"scores": entries, "filtered_indices": [idx[0], 99999]}),
                _ => json!({"scores": entries}),
            }
            .to_string();
            match rng.gen_range(0..5) {
                0 => body = format!("Here you go:\n```json\n{body}\n```\nThanks"),
                1 => body = format!("{body} trailing {{ junk"),
                2 => {
                    let cut = rng.gen_range(0..=body.len());
                    body.truncate(cut);
                }
                _ => {}
            }
            (body, false)
        }
    }
}

fn criterion_9() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut ok, mut failed) = (0, 0);
    for case in 0..500 {
        let expected: BTreeSet<usize> = (0..rng.gen_range(1..=30)).map(|_| rng.gen_range(0..60)).collect();
        let (raw, unextractable) = fuzz_case(&mut rng, &expected);
        let schema = if rng.gen_bool(0.5) { SchemaId::ScoresV1 } else { SchemaId::FilterV1 };
        match parse_scores(&raw, &expected, schema) {
            Ok(list) => {
                assert!(!unextractable, "case {case}: parsed {raw:?}");
                ok += 1;
                let mut seen = BTreeSet::new();
                for e in &list.scores {
                    assert!((1..=10).contains(&e.relevance_score), "case {case}: {raw:?}");
                    assert!(seen.insert(e.chunk_index), "case {case}: duplicate {}", e.chunk_index);
                }
                assert_eq!(seen, expected, "case {case}: {raw:?}");
            }
            Err(e) => {
                failed += 1;
                if unextractable {
                    assert!(matches!(e, PromptError::ParseFailure(_)), "case {case}: {e:?}");
                } else {
                    assert!(matches!(e, PromptError::ParseFailure(_) | PromptError::ContractViolation(_)), "case {case}: {e:?}");
                }
            }
        }
    }
    assert!(ok > 0 && failed > 0, "fuzz corpus should exercise both outcomes ({ok} ok, {failed} failed)");
}

fn main() {
    let criteria: [(&str, fn()); 9] = [
        ("statistics golden values", criterion_1),
        ("Welch golden values", criterion_2),
        ("cost golden values and token additivity", criterion_3),
        ("NDCG property suite", criterion_4),
        ("retrieval oracle equivalence", criterion_5),
        ("graph invariants", criterion_6),
        ("end-to-end determinism", criterion_7),
        ("leaderboard scores are out of scope", criterion_8),
        ("parser robustness", criterion_9),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(()) => println!("criterion {}: PASS  {name} ({secs:.2}s)", i + 1),
            Err(e) => {
                failures += 1;
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                println!("criterion {}: FAIL  {name} ({secs:.2}s): {msg}", i + 1);
            }
        }
    }
    if failures > 0 {
        std::process::exit(1);
    }
}
