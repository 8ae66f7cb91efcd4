use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use digrank::config::{ProviderConfig, RunConfig};
use digrank::dataset::{self, CePair, MarginGroup};
use digrank::dig::{self, DigTriplet, Query};
use digrank::error::{Error, Result};
use digrank::eval::{evaluate_em, OrderingPolicy};
use digrank::io::{check_digest, read_jsonl, write_jsonl};
use digrank::lm::{HttpLm, LmProvider, MockLm};
use digrank::model::ScorerModel;
use digrank::pipeline::{self, PipelineConfig};
use digrank::retrieval::{Corpus, CorpusDoc};
use digrank::trainer;
use digrank::world;

#[derive(Parser)]
#[command(name = "digrank", about = "Information-gain reranking pipeline", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a default run configuration.
    InitConfig {
        /// Destination path for the JSON config.
        path: PathBuf,
    },
    /// Generate the synthetic world into the working directory.
    World {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        dir: PathBuf,
    },
    /// BM25 search against the generated corpus (debugging aid).
    Search {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        query: String,
        #[arg(long, default_value_t = 6)]
        top_k: usize,
    },
    /// Score every (query, candidate) pair and write the gain triplets.
    Collect {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        dir: PathBuf,
        /// Continue an interrupted run, keeping already-scored pairs.
        #[arg(long)]
        resume: bool,
        /// Accept artifacts produced under a different configuration.
        #[arg(long)]
        force: bool,
    },
    /// Build the binary and group-ranking training sets from the triplets.
    Dataset {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Train the reranker on the prepared sets.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Evaluate exact match on the held-out queries under each ordering.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Full in-memory run with a fixed seed; prints the exact-match table.
    Demo {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Optional directory for the run report.
        #[arg(long)]
        dir: Option<PathBuf>,
    },
}

fn provider_from(config: &RunConfig) -> Result<Box<dyn LmProvider>> {
    Ok(match &config.provider {
        ProviderConfig::Mock(spec) => Box::new(MockLm::new(spec.clone())?),
        ProviderConfig::Http(cfg) => Box::new(HttpLm::new(cfg.clone())?),
    })
}

fn header(config: &RunConfig) -> serde_json::Value {
    json!({ "config_digest": config.digest() })
}

fn load_world(dir: &Path) -> Result<(Vec<Query>, Corpus)> {
    let (_, queries): (_, Vec<Query>) = read_jsonl(&dir.join("queries.jsonl"))?;
    let (_, docs): (_, Vec<CorpusDoc>) = read_jsonl(&dir.join("corpus.jsonl"))?;
    Ok((queries, Corpus::build(docs)?))
}

fn cmd_world(config: &RunConfig, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let w = world::generate(&config.world)?;
    let h = header(config);
    write_jsonl(&dir.join("queries.jsonl"), Some(&h), &w.queries)?;
    write_jsonl(&dir.join("corpus.jsonl"), Some(&h), w.corpus.documents())?;
    println!("wrote {} queries and {} documents to {}", w.queries.len(), w.corpus.len(), dir.display());
    Ok(())
}

fn cmd_search(config: &RunConfig, dir: &Path, query: &str, top_k: usize) -> Result<()> {
    let (_, corpus) = load_world(dir)?;
    let _ = config;
    for hit in corpus.bm25_search(query, top_k)? {
        println!("{:>2}  {:<16} {:.4}", hit.rank, hit.doc_id, hit.score);
    }
    Ok(())
}

fn cmd_collect(config: &RunConfig, dir: &Path, resume: bool, force: bool) -> Result<()> {
    let (queries, corpus) = load_world(dir)?;
    let (train_queries, _) = world::split_queries(&queries, config.pipeline.holdout_every);
    let path = dir.join("triplets.jsonl");
    let mut done = BTreeSet::new();
    let mut existing: Vec<DigTriplet> = Vec::new();
    if resume && path.exists() {
        let (h, rows): (_, Vec<DigTriplet>) = read_jsonl(&path)?;
        check_digest(h.as_ref(), &config.digest(), force)?;
        for t in &rows {
            done.insert((t.query_id.clone(), t.doc_id.clone()));
        }
        existing = rows;
    }
    let provider = provider_from(config)?;
    let out = dig::collect(&train_queries, &corpus, &provider, &config.pipeline.collect, &done)?;
    println!(
        "scored {} new pairs ({} kept from a previous run, {} failed docs, {} skipped queries)",
        out.triplets.len(),
        existing.len(),
        out.stats.failed_docs,
        out.stats.skipped_queries
    );
    existing.extend(out.triplets);
    write_jsonl(&path, Some(&header(config)), &existing)?;
    Ok(())
}

fn cmd_dataset(config: &RunConfig, dir: &Path, force: bool) -> Result<()> {
    let (h, triplets): (_, Vec<DigTriplet>) = read_jsonl(&dir.join("triplets.jsonl"))?;
    check_digest(h.as_ref(), &config.digest(), force)?;
    let p = &config.pipeline.dataset;
    let ce = dataset::build_ce(&triplets, p.b1, p.b2, p.seed)?;
    let margin = dataset::build_margin(&triplets, p)?;
    let hh = header(config);
    write_jsonl(&dir.join("ce.jsonl"), Some(&hh), &ce)?;
    write_jsonl(&dir.join("margin.jsonl"), Some(&hh), &margin)?;
    println!("built {} binary pairs and {} ranking groups", ce.len(), margin.len());
    Ok(())
}

fn cmd_train(config: &RunConfig, dir: &Path, force: bool) -> Result<()> {
    let digest = config.digest();
    let (queries, corpus) = load_world(dir)?;
    let (hc, ce_pairs): (_, Vec<CePair>) = read_jsonl(&dir.join("ce.jsonl"))?;
    check_digest(hc.as_ref(), &digest, force)?;
    let (hm, margin_groups): (_, Vec<MarginGroup>) = read_jsonl(&dir.join("margin.jsonl"))?;
    check_digest(hm.as_ref(), &digest, force)?;

    let cfg = &config.pipeline;
    let ce = pipeline::featurize_ce(&ce_pairs, &queries, &corpus, &cfg.features)?;
    let margin = pipeline::featurize_margin(&margin_groups, &queries, &corpus, &cfg.features)?;
    let mut model = ScorerModel::new(cfg.features.clone(), &cfg.hidden, cfg.train.seed)?;
    let metrics = trainer::train(&mut model, &ce, &margin, None, &cfg.train, |_, _| {})?;
    write_jsonl(&dir.join("metrics.jsonl"), Some(&header(config)), &metrics)?;
    std::fs::write(&dir.join("model.json"), serde_json::to_string(&model)?)?;
    let last = metrics.last().expect("training ran at least one step");
    println!("trained {} steps, final loss {:.6} (ce {:.6}, margin {:.6})", metrics.len(), last.total, last.ce, last.margin);
    Ok(())
}

struct EmTable {
    gain: f64,
    gain_unfiltered: f64,
    retrieval: f64,
    random: f64,
}

fn em_table<P: LmProvider>(
    held: &[Query],
    corpus: &Corpus,
    provider: &P,
    model: &ScorerModel,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<EmTable> {
    let k = cfg.collect.top_k;
    let infer = &cfg.infer;
    let model_id = cfg.collect.model_id.as_str();
    Ok(EmTable {
        gain: evaluate_em(held, corpus, provider, Some(model), OrderingPolicy::Model, true, k, infer, model_id)?.exact_match,
        gain_unfiltered: evaluate_em(held, corpus, provider, Some(model), OrderingPolicy::Model, false, k, infer, model_id)?.exact_match,
        retrieval: evaluate_em(held, corpus, provider, None, OrderingPolicy::Retrieval, false, k, infer, model_id)?.exact_match,
        random: evaluate_em(held, corpus, provider, None, OrderingPolicy::Random { seed }, false, k, infer, model_id)?.exact_match,
    })
}

fn print_table(t: &EmTable, held: usize) {
    println!("exact match over {held} held-out queries");
    println!("  gain (rerank + filter)   {:.3}", t.gain);
    println!("  gain (rerank only)       {:.3}", t.gain_unfiltered);
    println!("  retrieval order          {:.3}", t.retrieval);
    println!("  random order             {:.3}", t.random);
}

fn cmd_eval(config: &RunConfig, dir: &Path, force: bool) -> Result<()> {
    let (queries, corpus) = load_world(dir)?;
    let (_, held) = world::split_queries(&queries, config.pipeline.holdout_every);
    let model: ScorerModel = serde_json::from_str(&std::fs::read_to_string(dir.join("model.json"))?)?;
    let (hm, _): (_, Vec<serde_json::Value>) = read_jsonl(&dir.join("metrics.jsonl"))?;
    check_digest(hm.as_ref(), &config.digest(), force)?;
    let provider = provider_from(config)?;
    let t = em_table(&held, &corpus, &provider, &model, &config.pipeline, config.world.seed)?;
    print_table(&t, held.len());
    let report = json!({
        "config_digest": config.digest(),
        "held_out_queries": held.len(),
        "exact_match": {
            "gain": t.gain,
            "gain_unfiltered": t.gain_unfiltered,
            "retrieval": t.retrieval,
            "random": t.random,
        },
    });
    std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    Ok(())
}

fn cmd_demo(seed: u64, dir: Option<&Path>) -> Result<()> {
    let mut config = RunConfig::default();
    config.world.seed = seed;
    config.pipeline.train.seed = seed;
    config.pipeline.dataset.seed = seed;
    config.validate()?;
    let w = world::generate(&config.world)?;
    let provider = provider_from(&config)?;
    let trained = pipeline::run_training(&w.queries, &w.corpus, &provider, &config.pipeline)?;
    let t = em_table(&trained.held_queries, &w.corpus, &provider, &trained.model, &config.pipeline, seed)?;
    println!("demo seed {seed}");
    print_table(&t, trained.held_queries.len());
    let report = json!({
        "seed": seed,
        "config_digest": config.digest(),
        "train_queries": trained.train_queries.len(),
        "held_out_queries": trained.held_queries.len(),
        "triplets": trained.triplets.len(),
        "final_loss": trained.metrics.last().map(|m| m.total),
        "exact_match": {
            "gain": t.gain,
            "gain_unfiltered": t.gain_unfiltered,
            "retrieval": t.retrieval,
            "random": t.random,
        },
    });
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    }
    Ok(())
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::InitConfig { path } => {
            let cfg = RunConfig::default();
            cfg.save(&path)?;
            println!("wrote default config to {}", path.display());
            Ok(())
        }
        Command::World { config, dir } => cmd_world(&RunConfig::load(&config)?, &dir),
        Command::Search { config, dir, query, top_k } => {
            cmd_search(&RunConfig::load(&config)?, &dir, &query, top_k)
        }
        Command::Collect { config, dir, resume, force } => {
            cmd_collect(&RunConfig::load(&config)?, &dir, resume, force)
        }
        Command::Dataset { config, dir, force } => cmd_dataset(&RunConfig::load(&config)?, &dir, force),
        Command::Train { config, dir, force } => cmd_train(&RunConfig::load(&config)?, &dir, force),
        Command::Eval { config, dir, force } => cmd_eval(&RunConfig::load(&config)?, &dir, force),
        Command::Demo { seed, dir } => cmd_demo(seed, dir.as_deref()),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, Error::DigestMismatch { .. }) {
                ExitCode::from(3)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
