//! Seeded synthetic ranking datasets for offline runs and tests.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Candidate, DocType, Sample, Task};

const TOPICS: [(DocType, &str, &[&str]); 5] = [
    (DocType::Def14A, "executive compensation and board voting", &["compensation", "director", "board", "proxy", "vote"]),
    (DocType::TenK, "annual risk factors and business strategy", &["risk", "strategy", "annual", "segment", "competition"]),
    (DocType::TenQ, "quarterly revenue and interim margins", &["quarterly", "revenue", "margin", "interim", "liquidity"]),
    (DocType::EightK, "material acquisition and leadership change", &["acquisition", "merger", "appointed", "resigned", "agreement"]),
    (DocType::Earnings, "management guidance on the earnings call", &["guidance", "outlook", "analysts", "call", "expect"]),
];

const FILLER: [&str; 16] = [
    "the", "company", "reported", "table", "amounts", "million", "fiscal", "period", "note", "statements",
    "including", "related", "certain", "other", "basis", "presented",
];

const COMPANIES: [&str; 6] = ["Acme", "Globex", "Initech", "Umbrella", "Stark", "Wayne"];

fn sentence(rng: &mut ChaCha8Rng, keywords: &[&str], planted: usize, len: usize) -> String {
    let mut words: Vec<&str> = (0..len).map(|_| *FILLER.choose(rng).expect("non-empty")).collect();
    for k in keywords.choose_multiple(rng, planted) {
        let at = rng.gen_range(0..=words.len());
        words.insert(at, k);
    }
    words.join(" ")
}

/// `n_doc` document samples and `n_chunk` chunk samples of `chunks` candidates each.
///
/// Gains favour the topic's document type and chunks that contain topic keywords,
/// so lexical rankers do better than chance.
pub fn synthetic_dataset(n_doc: usize, n_chunk: usize, chunks: usize, seed: u64) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_doc + n_chunk);
    for i in 0..n_doc {
        let (t, topic, kws) = TOPICS[rng.gen_range(0..TOPICS.len())];
        let company = COMPANIES.choose(&mut rng).expect("non-empty");
        let mut rest: Vec<u32> = vec![0, 1, 2, 3];
        rest.shuffle(&mut rng);
        let mut rest = rest.into_iter();
        let gains = DocType::ALL.iter().map(|d| if *d == t { 4 } else { rest.next().expect("four") }).collect();
        out.push(Sample {
            sample_id: format!("doc-{i:04}"),
            task: Task::DocumentRanking,
            query: format!("What does {company} disclose about {topic}, including {}?", kws[0]),
            candidates: DocType::ALL
                .iter()
                .enumerate()
                .map(|(j, d)| Candidate { index: j, doc_type: Some(*d), text: format!("{company} {d} filing") })
                .collect(),
            ground_truth: Some(gains),
        });
    }
    for i in 0..n_chunk {
        let (_, topic, kws) = TOPICS[rng.gen_range(0..TOPICS.len())];
        let company = COMPANIES.choose(&mut rng).expect("non-empty");
        let mut candidates = Vec::with_capacity(chunks);
        let mut gains = Vec::with_capacity(chunks);
        for j in 0..chunks {
            let planted = if rng.gen_bool(0.25) { rng.gen_range(1..=3) } else { 0 };
            let len = rng.gen_range(12..40);
            candidates.push(Candidate { index: j, doc_type: None, text: sentence(&mut rng, kws, planted, len) });
            gains.push(match planted {
                0 => 0,
                1 => 1,
                _ => 2,
            });
        }
        out.push(Sample {
            sample_id: format!("chunk-{i:04}"),
            task: Task::ChunkRanking,
            query: format!("{company} {topic}: {} {}", kws[0], kws[1]),
            candidates,
            ground_truth: Some(gains),
        });
    }
    out
}
