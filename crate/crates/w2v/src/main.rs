//! Command-line interface for training, benchmarking, and evaluating
//! skip-gram negative-sampling word vectors.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use w2v::bench;
use w2v::corpus::Vocabulary;
use w2v::distsim::{self, SyncPolicy};
use w2v::eval;
use w2v::model::{load_vectors, EmbeddingModel};
use w2v::sampling::{NegativeSampleTable, Rng};
use w2v::trainer;
use w2v::{SigmoidMode, TrainerKind, TrainingConfig};

#[derive(Parser)]
#[command(
    name = "w2v",
    version,
    about = "Skip-gram negative-sampling word vectors: train, benchmark, evaluate",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train word vectors on a whitespace-tokenized corpus.
    Train(TrainArgs),
    /// Run both trainers across thread counts and record throughput.
    Bench(BenchArgs),
    /// Score saved vectors on similarity and analogy benchmarks.
    Eval(EvalArgs),
    /// Build a vocabulary and save it as "token count" lines.
    Vocab(VocabArgs),
}

/// Hyperparameters shared by `train` and `bench`. Flag names follow the
/// classic word2vec tool (`-size` → `--dim`, `-iter` → `--iter`, ...).
#[derive(Args)]
struct HyperParams {
    /// Embedding dimensionality.
    #[arg(long, default_value_t = 100)]
    dim: usize,

    /// Negative samples per context word.
    #[arg(long, default_value_t = 5)]
    negative: usize,

    /// Maximum window half-width; per position the effective half-width is
    /// drawn uniformly from 1..=window.
    #[arg(long, default_value_t = 5)]
    window: u32,

    /// Frequent-word subsampling threshold; 0 disables subsampling.
    #[arg(long, default_value_t = 1e-4)]
    sample: f64,

    /// Drop tokens with fewer corpus occurrences than this.
    #[arg(long, default_value_t = 5)]
    min_count: u64,

    /// Initial learning rate (decays linearly over training).
    #[arg(long, default_value_t = 0.025)]
    alpha: f64,

    /// Passes over the corpus.
    #[arg(long = "iter", default_value_t = 5)]
    iterations: usize,

    /// Trainer threads (default: all logical cpus).
    #[arg(long)]
    threads: Option<usize>,

    /// "hogwild" (scalar per-pair updates) or "hogbatch" (shared-negative
    /// minibatches).
    #[arg(long, default_value_t = TrainerKind::Hogbatch)]
    trainer: TrainerKind,

    /// Consecutive window positions fused into one batched step (hogbatch).
    #[arg(long, default_value_t = 1)]
    batch_windows: usize,

    /// "exact" or "table" logistic evaluation.
    #[arg(long, default_value_t = SigmoidMode::Exact)]
    sigmoid_mode: SigmoidMode,

    /// Exponent applied to unigram counts in the negative-sample table.
    #[arg(long, default_value_t = 0.75)]
    negative_power: f64,

    /// Slots in the negative-sample table.
    #[arg(long, default_value_t = 100_000_000)]
    table_size: usize,

    /// RNG seed; the W2V_SEED environment variable overrides this flag.
    #[arg(long, default_value_t = 1)]
    seed: u64,

    /// Keep negative draws that hit the window's target word instead of
    /// redrawing.
    #[arg(long)]
    allow_target_negative: bool,

    /// Save vectors in binary format instead of text.
    #[arg(long)]
    binary: bool,
}

impl HyperParams {
    fn to_config(&self) -> anyhow::Result<TrainingConfig> {
        let mut cfg = TrainingConfig::default();
        cfg.dim = self.dim;
        cfg.negative = self.negative;
        cfg.window = self.window;
        cfg.sample = self.sample;
        cfg.min_count = self.min_count;
        cfg.alpha0 = self.alpha;
        cfg.iterations = self.iterations;
        if let Some(threads) = self.threads {
            cfg.threads = threads;
        }
        cfg.trainer = self.trainer;
        cfg.batch_windows = self.batch_windows;
        cfg.sigmoid_mode = self.sigmoid_mode;
        cfg.negative_power = self.negative_power;
        cfg.table_size = self.table_size;
        cfg.seed = match std::env::var("W2V_SEED") {
            Ok(text) => text
                .trim()
                .parse()
                .with_context(|| format!("W2V_SEED must be an unsigned integer, got {text:?}"))?,
            Err(_) => self.seed,
        };
        cfg.allow_target_negative = self.allow_target_negative;
        cfg.binary_output = self.binary;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Training corpus (whitespace-tokenized text).
    corpus: PathBuf,

    /// Output vector file.
    #[arg(short, long, default_value = "vectors.txt")]
    output: PathBuf,

    #[command(flatten)]
    params: HyperParams,

    /// Data-parallel worker replicas; 1 trains the shared model directly.
    #[arg(long, default_value_t = 1)]
    workers: usize,

    /// Words between model synchronizations when workers > 1 (default: sync
    /// once per epoch).
    #[arg(long)]
    sync_period_words: Option<u64>,
}

#[derive(Args)]
struct BenchArgs {
    /// Benchmark corpus (whitespace-tokenized text).
    corpus: PathBuf,

    #[command(flatten)]
    params: HyperParams,

    /// Comma-separated thread counts to benchmark.
    #[arg(long, default_value = "1,2,4,8", value_delimiter = ',')]
    thread_list: Vec<usize>,

    /// Corpus prefix cap in megabytes.
    #[arg(long, default_value_t = 100)]
    prefix_mb: u64,

    /// CSV output path.
    #[arg(long, default_value = "bench.csv")]
    csv: PathBuf,

    /// SVG plot output path.
    #[arg(long, default_value = "bench.svg")]
    svg: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Saved vector file (text or binary).
    vectors: PathBuf,

    /// Word-similarity file: two words and a human score per line.
    #[arg(long)]
    similarity: Option<PathBuf>,

    /// Analogy file: ": section" headers and four words per line.
    #[arg(long)]
    analogy: Option<PathBuf>,

    /// Restrict analogy candidates to the most frequent words.
    #[arg(long, default_value_t = 30_000)]
    top_vocab: usize,
}

#[derive(Args)]
struct VocabArgs {
    /// Corpus to scan (whitespace-tokenized text).
    corpus: PathBuf,

    /// Vocabulary output path.
    #[arg(short, long, default_value = "vocab.txt")]
    output: PathBuf,

    /// Drop tokens with fewer corpus occurrences than this.
    #[arg(long, default_value_t = 5)]
    min_count: u64,
}

fn cmd_train(args: &TrainArgs) -> anyhow::Result<()> {
    let cfg = args.params.to_config()?;
    eprintln!("building vocabulary from {}", args.corpus.display());
    let vocab = Vocabulary::build(&args.corpus, cfg.min_count)?;
    eprintln!("vocabulary: {} words, {} corpus tokens kept", vocab.len(), vocab.total_words());
    let table = NegativeSampleTable::build(&vocab, cfg.negative_power, cfg.table_size)?;
    let mut rng = Rng::new(cfg.seed);
    let model = EmbeddingModel::<f32>::init(vocab.len(), cfg.dim, &mut rng);

    let report_json = if args.workers > 1 {
        let policy = match args.sync_period_words {
            Some(words) => SyncPolicy::words(words),
            None => SyncPolicy::every_epoch(),
        };
        eprintln!("training {} worker replicas", args.workers);
        let report =
            distsim::run_distributed(&model, &vocab, &table, &args.corpus, &cfg, args.workers, &policy)?;
        serde_json::to_string_pretty(&report)?
    } else {
        eprintln!("training with {} threads ({})", cfg.threads, cfg.trainer);
        let report = trainer::run(&model, &vocab, &table, &args.corpus, &cfg)?;
        serde_json::to_string_pretty(&report)?
    };

    model.save_vectors(&vocab, &args.output, cfg.binary_output)?;
    eprintln!("vectors saved to {}", args.output.display());
    println!("{report_json}");
    Ok(())
}

fn cmd_bench(args: &BenchArgs) -> anyhow::Result<()> {
    let cfg = args.params.to_config()?;
    let cap = args.prefix_mb.saturating_mul(1024 * 1024);
    eprintln!(
        "benchmarking {} at thread counts {:?} (prefix cap {} MB)",
        args.corpus.display(),
        args.thread_list,
        args.prefix_mb
    );
    let report = bench::run_bench(&args.corpus, &cfg, &args.thread_list, cap)?;
    for failure in &report.failures {
        eprintln!(
            "run failed: trainer={} threads={}: {}",
            failure.trainer, failure.threads, failure.message
        );
    }
    bench::write_csv(&report, &args.csv)?;
    bench::write_svg(&report, &args.svg)?;
    eprintln!("wrote {} and {}", args.csv.display(), args.svg.display());
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> anyhow::Result<()> {
    anyhow::ensure!(
        args.similarity.is_some() || args.analogy.is_some(),
        "nothing to evaluate: pass --similarity and/or --analogy"
    );
    let vectors = load_vectors(&args.vectors)?;
    eprintln!("loaded {} vectors of dimension {}", vectors.len(), vectors.dim());

    let mut out = serde_json::Map::new();
    if let Some(path) = &args.similarity {
        let pairs = eval::load_similarity_pairs(path)?;
        let report = eval::similarity_eval(&vectors, &pairs)?;
        out.insert("spearman".into(), json!(report.spearman));
        out.insert("pairs_used".into(), json!(report.pairs_used));
        out.insert("pairs_skipped".into(), json!(report.pairs_skipped));
    }
    if let Some(path) = &args.analogy {
        let questions = eval::load_analogy_questions(path)?;
        let report = eval::analogy_eval(&vectors, &questions, args.top_vocab);
        let sections: serde_json::Map<String, serde_json::Value> = report
            .sections
            .iter()
            .map(|s| {
                let entry = json!({
                    "correct": s.correct,
                    "total": s.total,
                    "accuracy": s.accuracy,
                });
                (s.section.clone(), entry)
            })
            .collect();
        out.insert("analogy_overall".into(), json!(report.overall));
        out.insert("analogy_by_section".into(), sections.into());
        out.insert("questions_skipped".into(), json!(report.skipped));
    }
    println!("{}", serde_json::to_string_pretty(&serde_json::Value::Object(out))?);
    Ok(())
}

fn cmd_vocab(args: &VocabArgs) -> anyhow::Result<()> {
    let vocab = Vocabulary::build(&args.corpus, args.min_count)?;
    vocab.save(&args.output)?;
    let summary = json!({
        "vocab_size": vocab.len(),
        "total_words": vocab.total_words(),
        "output": args.output,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Vocab(args) => cmd_vocab(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
