//! Command-line driver. Every subcommand prints a one-line JSON summary on
//! stdout. Usage errors exit with 2, operational failures with 1.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::corpus::{gen_synthetic, load_corpus, sample_ordering, sample_relevance, split_corpus, Corpus, Task};
use crate::encoder::{load_word_vectors, EmbeddingTable, WordVectors};
use crate::eval::{
    accuracy, export_embeddings, ip_error_curve, random_baseline_curve, write_curve_csv, Examples, DEFAULT_FRACTIONS,
};
use crate::heads::gradcheck::{gradient_check, REL_ERROR_FLOOR};
use crate::heads::{load_checkpoint, save_checkpoint, train, write_metrics_csv, ExplanationMode, ModelParams, Problem, TrainConfig};
use crate::ordersolve::{solve_problem_file, ProblemFile, DEFAULT_EPS};
use crate::{Error, Result};

const SPLIT_RATIOS: (f64, f64, f64) = (0.8, 0.1, 0.1);

#[derive(Debug, Parser)]
#[command(name = "procembed", version, about = "Task and step embeddings with exact step ordering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic corpus with planted topic and order signal.
    GenSynthetic {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        tasks: usize,
        #[arg(long, default_value_t = 5)]
        min_steps: usize,
        #[arg(long, default_value_t = 8)]
        max_steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Validate and flatten an article corpus into one task per line.
    Ingest {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split a corpus 80/10/10 into train/validation/test JSONL files.
    Split {
        #[arg(long)]
        corpus: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train a model and write its best checkpoint.
    Train(TrainArgs),
    /// Relevance and ordering accuracy on a held-out part.
    Eval {
        #[command(flatten)]
        model: ModelArgs,
        /// Examples sampled per problem.
        #[arg(long, default_value_t = 1000)]
        examples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve one ordering problem file.
    Order {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_EPS)]
        eps: f64,
        /// Seconds.
        #[arg(long, default_value_t = 5.0)]
        time_limit: f64,
    },
    /// Ambiguity-versus-error curve against the random-abstention baseline.
    Curve {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',')]
        fractions: Option<Vec<f64>>,
        #[arg(long, default_value_t = DEFAULT_EPS)]
        eps: f64,
        /// Seconds per solve.
        #[arg(long, default_value_t = 5.0)]
        time_limit: f64,
        /// Tasks with more steps are skipped.
        #[arg(long, default_value_t = 12)]
        max_steps: usize,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Title embeddings of randomly chosen tasks as TSV.
    ExportEmbeddings {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 50)]
        count: usize,
    },
    /// Compare analytic and finite-difference gradients on random models.
    Gradcheck {
        /// Largest embedding dimension tried.
        #[arg(long, default_value_t = 4)]
        dim: usize,
        #[arg(long, default_value_t = 50)]
        configs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Word vectors in GloVe text format. Without it, hashed vectors over the
    /// corpus vocabulary are generated and written next to the checkpoint.
    #[arg(long)]
    vectors: Option<PathBuf>,
    /// Checkpoint path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    metrics: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    dim: usize,
    #[arg(long, default_value_t = 128)]
    hidden: usize,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, default_value_t = 64)]
    batch: usize,
    #[arg(long, default_value_t = 5000)]
    iters: usize,
    #[arg(long, default_value_t = 100)]
    val_interval: usize,
    #[arg(long, default_value_t = 1000)]
    val_examples: usize,
    #[arg(long, default_value = "lstm")]
    mode: ExplanationMode,
    #[arg(long, default_value = "joint")]
    problem: Problem,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct ModelArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    /// Defaults to the vectors file written beside the checkpoint.
    #[arg(long)]
    vectors: Option<PathBuf>,
    /// Which split of the corpus to use; `all` takes the file as is.
    #[arg(long, default_value = "test")]
    part: Part,
    /// Split seed; must match the one used for training.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum Part {
    Train,
    Validation,
    Test,
    All,
}

/// Runs the command line in `argv` (including the program name) and returns
/// the process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Path of the hashed vectors file written beside a checkpoint.
pub fn vectors_path(checkpoint: &Path) -> PathBuf {
    let mut name = checkpoint.as_os_str().to_owned();
    name.push(".vectors");
    PathBuf::from(name)
}

/// Fails with the path in the message when an input file is missing.
fn require(path: &Path) -> Result<&Path> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("{}: no such file", path.display()),
        )))
    }
}

fn seconds(s: f64) -> Result<Duration> {
    Duration::try_from_secs_f64(s).map_err(|e| Error::Domain(format!("time limit {s}: {e}")))
}

fn execute(command: Command) -> Result<Value> {
    match command {
        Command::GenSynthetic { out, tasks, min_steps, max_steps, seed } => {
            let corpus = gen_synthetic(seed, tasks, min_steps..=max_steps)?;
            corpus.write_jsonl(&out)?;
            Ok(json!({"tasks": corpus.len(), "steps": corpus.step_count(), "out": out}))
        }
        Command::Ingest { corpus, out } => {
            let c = load_corpus(require(&corpus)?)?;
            c.write_jsonl(&out)?;
            Ok(json!({"tasks": c.len(), "steps": c.step_count(), "out": out}))
        }
        Command::Split { corpus, out, seed } => {
            let split = split_corpus(&load_corpus(require(&corpus)?)?, SPLIT_RATIOS, seed)?;
            std::fs::create_dir_all(&out)?;
            let mut summary = serde_json::Map::new();
            for (name, part) in [("train", &split.train), ("validation", &split.validation), ("test", &split.test)] {
                part.write_jsonl(&out.join(format!("{name}.jsonl")))?;
                summary.insert(name.into(), json!(part.len()));
            }
            Ok(Value::Object(summary))
        }
        Command::Train(args) => run_train(args),
        Command::Eval { model, examples, out } => {
            let (m, corpus) = load_model(&model)?;
            let rel = sample_relevance(&corpus, examples, model.seed)?;
            let ord = sample_ordering(&corpus, examples, model.seed ^ 1)?;
            let summary = json!({
                "relevance_accuracy": accuracy(&m, Examples::Relevance(&rel))?,
                "ordering_accuracy": accuracy(&m, Examples::Ordering(&ord))?,
                "examples": examples,
                "tasks": corpus.len(),
            });
            if let Some(out) = out {
                std::fs::write(out, format!("{summary:#}\n"))?;
            }
            Ok(summary)
        }
        Command::Order { problem, out, eps, time_limit } => {
            let file = ProblemFile::read(require(&problem)?)?;
            let solution = solve_problem_file(&file, eps, seconds(time_limit)?)?;
            solution.write(&out)?;
            Ok(json!({
                "task_id": file.task_id,
                "objective": solution.objective,
                "optimal": solution.optimal,
                "decided": solution.pairs.len(),
            }))
        }
        Command::Curve { model, out, fractions, eps, time_limit, max_steps, jobs } => {
            let (m, corpus) = load_model(&model)?;
            let tasks: Vec<Task> = corpus
                .tasks
                .into_iter()
                .filter(|t| (2..=max_steps).contains(&t.steps.len()))
                .collect();
            let fractions = fractions.unwrap_or_else(|| DEFAULT_FRACTIONS.to_vec());
            let mut grid = fractions.clone();
            if !grid.contains(&0.0) {
                grid.insert(0, 0.0);
            }
            let curve = ip_error_curve(&m, &tasks, &grid, eps, seconds(time_limit)?, jobs.max(1))?;
            let e0 = curve[grid.iter().position(|&a| a == 0.0).unwrap()].error_rate;
            let curve: Vec<_> = curve.into_iter().filter(|p| fractions.contains(&p.ambiguity)).collect();
            let baseline = random_baseline_curve(e0, &fractions);
            write_curve_csv(&out, &curve, &baseline)?;
            Ok(json!({
                "tasks": tasks.len(),
                "e0": e0,
                "fractions": fractions,
                "ip_error": curve.iter().map(|p| p.error_rate).collect::<Vec<_>>(),
                "baseline_error": baseline.iter().map(|p| p.error_rate).collect::<Vec<_>>(),
            }))
        }
        Command::ExportEmbeddings { model, out, count } => {
            let (m, corpus) = load_model(&model)?;
            let mut tasks = corpus.tasks;
            tasks.shuffle(&mut ChaCha8Rng::seed_from_u64(model.seed));
            tasks.truncate(count);
            export_embeddings(&m, &tasks, &out)?;
            Ok(json!({"tasks": tasks.len(), "dim": m.dim(), "out": out}))
        }
        Command::Gradcheck { dim, configs, seed } => {
            let report = gradient_check(dim, seed, configs)?;
            let pass = report.max_relative_error < REL_ERROR_FLOOR;
            let summary = json!({
                "configurations": report.configurations,
                "coordinates": report.coordinates,
                "max_relative_error": report.max_relative_error,
                "pass": pass,
            });
            if !pass {
                return Err(Error::Numeric(format!("gradient check failed: {summary}")));
            }
            Ok(summary)
        }
    }
}

fn run_train(args: TrainArgs) -> Result<Value> {
    let corpus = load_corpus(require(&args.corpus)?)?;
    let split = split_corpus(&corpus, SPLIT_RATIOS, args.seed)?;
    let (words, vectors_out) = match &args.vectors {
        Some(path) => (load_word_vectors(require(path)?, args.dim, 0)?.words, None),
        None => {
            let words = WordVectors::hashed(args.dim, &corpus.vocabulary())?;
            let path = vectors_path(&args.out);
            words.write_text(&path)?;
            (Arc::new(words), Some(path))
        }
    };
    let config = TrainConfig {
        dim: args.dim,
        hidden: args.hidden,
        lr: args.lr,
        batch: args.batch,
        iterations: args.iters,
        val_interval: args.val_interval,
        val_examples: args.val_examples,
        mode: args.mode,
        seed: args.seed,
    };
    let table = EmbeddingTable::new(words, args.seed);
    let outcome = train(&config, &split, table, args.problem)?;
    save_checkpoint(&outcome.model, &args.out)?;
    if let Some(path) = &args.metrics {
        write_metrics_csv(path, &outcome.metrics)?;
    }
    Ok(json!({
        "checkpoint": args.out,
        "vectors": vectors_out,
        "best_iteration": outcome.best_iteration,
        "best_val_acc": outcome.best_val_acc,
        "iterations": args.iters,
    }))
}

fn load_model(args: &ModelArgs) -> Result<(ModelParams, Corpus)> {
    let vectors = args.vectors.clone().unwrap_or_else(|| vectors_path(&args.checkpoint));
    let dim = checkpoint_dim(require(&args.checkpoint)?)?;
    let words = load_word_vectors(require(&vectors)?, dim, 0)?.words;
    let model = load_checkpoint(&args.checkpoint, words)?;
    let corpus = load_corpus(require(&args.corpus)?)?;
    let corpus = match args.part {
        Part::All => corpus,
        part => {
            let split = split_corpus(&corpus, SPLIT_RATIOS, args.seed)?;
            match part {
                Part::Train => split.train,
                Part::Validation => split.validation,
                _ => split.test,
            }
        }
    };
    Ok((model, corpus))
}

/// Reads the embedding dimension from a checkpoint header.
fn checkpoint_dim(path: &Path) -> Result<usize> {
    use std::io::Read;
    let mut header = [0u8; 13];
    std::fs::File::open(path)?
        .read_exact(&mut header)
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    if &header[..5] != crate::heads::MAGIC {
        return Err(Error::Checkpoint(format!("{}: not a checkpoint", path.display())));
    }
    Ok(u64::from_le_bytes(header[5..13].try_into().unwrap()) as usize)
}
