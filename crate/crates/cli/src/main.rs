use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use finrank_core::corpus::{
    default_stopwords, keyword_ratios, length_stats, load_dataset, load_stopwords, rank_distribution,
    write_dataset, write_keyword_csv, write_length_csv, LengthUnit, Task,
};
use finrank_core::exemplars::{build_index, Exemplar};
use finrank_core::provider::embedding_provider;
use finrank_core::runner::{
    evaluate_run, read_rankings, read_run_scores, run_experiment, write_descriptive_csv, write_scores_csv,
    write_welch_csv, RunConfig, RunEnv,
};
use finrank_core::synth::synthetic_dataset;
use finrank_core::telemetry::{
    feasibility_rows, read_records, write_feasibility_csv, write_latency_points_csv, write_token_bars_csv,
    PricingTable,
};

#[derive(Parser)]
#[command(name = "finrank", version, about = "LLM ranking experiments over financial filings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a dataset (or generate a synthetic one) and write it with a rejection report.
    Ingest {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, required_unless_present = "synthetic")]
        dataset: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Keep only samples of this task (document | chunk).
        #[arg(long)]
        task: Option<Task>,
        /// Generate N document and N chunk samples instead of reading a file.
        #[arg(long)]
        synthetic: Option<usize>,
        /// Chunks per synthetic chunk sample.
        #[arg(long, default_value_t = 20)]
        chunks: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Rank distribution, rank-1 keyword ratios and chunk length statistics.
    Eda {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// One stopword per line; a built-in list is used otherwise.
        #[arg(long)]
        stopwords: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        top_n: usize,
    },
    /// Embed training samples and write an exemplar index.
    IndexBuild {
        /// Run config; its ICL embedding provider and seed are used.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        task: Task,
        #[arg(long, default_value = "mock")]
        embedding: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Execute a run config over a dataset.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a rankings file against dataset gains (NDCG@5).
    Eval {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Defaults to `<out>/rankings.jsonl`.
        #[arg(long)]
        rankings: Option<PathBuf>,
    },
    /// Descriptive statistics and Welch tests over repeated-run scores (`run_id,score` CSV).
    Stats {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Run compared against every other run.
        #[arg(long)]
        baseline: Option<String>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Latency, token and cost tables from telemetry files.
    Report {
        /// Pricing JSON; the reference tiers are used otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        /// One or more telemetry JSONL files.
        #[arg(long, num_args = 1.., required = true)]
        dataset: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let p = dir.join(name);
    Ok(BufWriter::new(File::create(&p).with_context(|| format!("creating {}", p.display()))?))
}

fn ingest(
    dataset: Option<PathBuf>,
    out: &Path,
    task: Option<Task>,
    synthetic: Option<usize>,
    chunks: usize,
    seed: u64,
) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let (samples, rejected, records) = match synthetic {
        Some(n) => {
            let s: Vec<_> = synthetic_dataset(n, n, chunks, seed)
                .into_iter()
                .filter(|s| task.map_or(true, |t| s.task == t))
                .collect();
            let count = s.len();
            (s, Vec::new(), count)
        }
        None => {
            let path = dataset.expect("clap requires --dataset without --synthetic");
            let set = load_dataset(&path, task).with_context(|| format!("loading {}", path.display()))?;
            (set.samples, set.rejected, set.record_count)
        }
    };
    write_dataset(out.join("dataset.jsonl"), &samples)?;
    let mut w = create(out, "rejections.jsonl")?;
    for r in &rejected {
        serde_json::to_writer(&mut w, r)?;
        std::io::Write::write_all(&mut w, b"\n")?;
    }
    let docs = samples.iter().filter(|s| s.task == Task::DocumentRanking).count();
    println!(
        "{records} records: {} accepted ({docs} document, {} chunk), {} rejected",
        samples.len(),
        samples.len() - docs,
        rejected.len()
    );
    Ok(())
}

fn eda(dataset: &Path, out: &Path, stopwords: Option<PathBuf>, top_n: usize) -> Result<()> {
    let set = load_dataset(dataset, None)?;
    std::fs::create_dir_all(out)?;
    let table = rank_distribution(&set.samples);
    table.write_csv(create(out, "rank_distribution.csv")?)?;
    let stop = match stopwords {
        Some(p) => load_stopwords(p)?,
        None => default_stopwords(),
    };
    let docs: Vec<_> = set.of_task(Task::DocumentRanking).collect();
    if !docs.is_empty() {
        write_keyword_csv(create(out, "keyword_ratios.csv")?, &keyword_ratios(docs, &stop, top_n)?)?;
    }
    let chunks: Vec<_> = set.of_task(Task::ChunkRanking).collect();
    if !chunks.is_empty() {
        match length_stats(chunks, &LengthUnit::Words) {
            Ok((rel, irr)) => write_length_csv(create(out, "chunk_lengths.csv")?, "words", &[&rel, &irr])?,
            Err(e) => log::warn!("chunk length statistics skipped: {e}"),
        }
    }
    println!("{} document samples ranked, {} skipped", table.counted, table.skipped);
    Ok(())
}

fn index_build(config: Option<PathBuf>, dataset: &Path, out: &Path, task: Task, embedding: String, seed: u64) -> Result<()> {
    let (embedding, seed) = match config {
        Some(p) => {
            let c = RunConfig::load(&p)?;
            let icl = c
                .task(task)
                .and_then(|t| t.icl.clone())
                .with_context(|| format!("{} configures no ICL for the {task} task", p.display()))?;
            (icl.embedding, c.seed)
        }
        None => (embedding, seed),
    };
    let set = load_dataset(dataset, Some(task))?;
    let exemplars: Vec<Exemplar> = set.samples.iter().filter_map(Exemplar::from_sample).collect();
    if exemplars.is_empty() {
        bail!("no labeled {task} samples in {}", dataset.display());
    }
    let embedder = embedding_provider(&embedding, seed)?;
    let store = build_index(exemplars, embedder.as_ref())?;
    store.save(out)?;
    println!("indexed {} exemplars (dimension {}) into {}", store.len(), store.index.dimension(), out.display());
    Ok(())
}

fn run(config: &Path, dataset: &Path, out: &Path) -> Result<ExitCode> {
    let c = RunConfig::load(config)?;
    let set = load_dataset(dataset, None)?;
    let base = config.parent().unwrap_or(Path::new("."));
    let env = RunEnv::for_config(&c, base)?;
    let a = run_experiment(&c, &set, &env, out)?;
    println!("run {} -> {} (manifest {})", c.run_id, out.display(), a.manifest.manifest_hash);
    println!("{} samples, {} failed", a.rankings.len(), a.failure_count());
    if let Some(ev) = &a.evaluation {
        for (t, m) in &ev.per_task {
            println!("NDCG@5 {t}: {m:.5}");
        }
        println!("NDCG@5 all: {:.5}", ev.aggregate);
    }
    Ok(if a.failure_count() > 0 { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn eval(dataset: &Path, out: &Path, rankings: Option<PathBuf>) -> Result<()> {
    let set = load_dataset(dataset, None)?;
    let path = rankings.unwrap_or_else(|| out.join("rankings.jsonl"));
    let (hash, entries) = read_rankings(&path).with_context(|| format!("reading {}", path.display()))?;
    let report = evaluate_run(&entries, &set)?;
    std::fs::create_dir_all(out)?;
    write_scores_csv(create(out, "eval_scores.csv")?, &report, hash.as_deref())?;
    for (t, m) in &report.per_task {
        println!("NDCG@5 {t}: {m:.5}");
    }
    println!("NDCG@5 all: {:.5}", report.aggregate);
    Ok(())
}

fn stats(dataset: &Path, out: &Path, baseline: Option<String>, alpha: f64) -> Result<()> {
    let runs = read_run_scores(dataset)?;
    if runs.is_empty() {
        bail!("{} has no scores", dataset.display());
    }
    std::fs::create_dir_all(out)?;
    write_descriptive_csv(create(out, "descriptive.csv")?, &runs, alpha)?;
    let baseline = baseline.unwrap_or_else(|| runs[0].0.clone());
    if runs.len() > 1 {
        write_welch_csv(create(out, "welch.csv")?, &runs, &baseline, alpha)?;
    }
    println!("{} runs summarized; baseline {baseline}", runs.len());
    Ok(())
}

fn report(config: Option<PathBuf>, telemetry: &[PathBuf], out: &Path) -> Result<()> {
    let pricing = match config {
        Some(p) => PricingTable::from_file(p)?,
        None => PricingTable::reference(),
    };
    let mut records = Vec::new();
    for p in telemetry {
        records.extend(read_records(p).with_context(|| format!("reading {}", p.display()))?);
    }
    let rows = feasibility_rows(&records, &pricing)?;
    std::fs::create_dir_all(out)?;
    write_feasibility_csv(create(out, "feasibility.csv")?, &rows)?;
    write_latency_points_csv(create(out, "latency_points.csv")?, &records)?;
    write_token_bars_csv(create(out, "token_bars.csv")?, &rows)?;
    println!("{} rows from {} calls", rows.len(), records.len());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest { dataset, out, task, synthetic, chunks, seed, .. } => {
            ingest(dataset, &out, task, synthetic, chunks, seed).map(|_| ExitCode::SUCCESS)
        }
        Command::Eda { dataset, out, stopwords, top_n, .. } => eda(&dataset, &out, stopwords, top_n).map(|_| ExitCode::SUCCESS),
        Command::IndexBuild { config, dataset, out, task, embedding, seed } => {
            index_build(config, &dataset, &out, task, embedding, seed).map(|_| ExitCode::SUCCESS)
        }
        Command::Run { config, dataset, out } => run(&config, &dataset, &out),
        Command::Eval { dataset, out, rankings, .. } => eval(&dataset, &out, rankings).map(|_| ExitCode::SUCCESS),
        Command::Stats { dataset, out, baseline, alpha, .. } => stats(&dataset, &out, baseline, alpha).map(|_| ExitCode::SUCCESS),
        Command::Report { config, dataset, out } => report(config, &dataset, &out).map(|_| ExitCode::SUCCESS),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
