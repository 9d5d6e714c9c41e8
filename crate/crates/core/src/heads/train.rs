use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AdamState, ExplanationMode, ModelParams};
use crate::corpus::{sample_ordering, sample_relevance, OrderingExample, RelevanceExample, SplitCorpus};
use crate::encoder::EmbeddingTable;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Problem {
    Relevance,
    Ordering,
    /// Alternating relevance and ordering batches over shared encoders.
    Joint,
}

impl std::str::FromStr for Problem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relevance" => Ok(Problem::Relevance),
            "ordering" => Ok(Problem::Ordering),
            "joint" => Ok(Problem::Joint),
            other => Err(Error::Domain(format!("unknown problem `{other}`"))),
        }
    }
}

impl Problem {
    fn uses_relevance(self) -> bool {
        matches!(self, Problem::Relevance | Problem::Joint)
    }

    fn uses_ordering(self) -> bool {
        matches!(self, Problem::Ordering | Problem::Joint)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub dim: usize,
    pub hidden: usize,
    pub lr: f64,
    pub batch: usize,
    pub iterations: usize,
    pub val_interval: usize,
    /// Size of each fixed validation example set.
    pub val_examples: usize,
    pub mode: ExplanationMode,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 500,
            hidden: 128,
            lr: 0.001,
            batch: 64,
            iterations: 5000,
            val_interval: 100,
            val_examples: 1000,
            mode: ExplanationMode::Lstm,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        let positive = self.dim > 0
            && self.hidden > 0
            && self.lr > 0.0
            && self.batch > 0
            && self.val_interval > 0
            && self.val_examples > 0;
        if !positive {
            return Err(Error::Domain(format!("training configuration must be positive: {self:?}")));
        }
        if self.batch % 2 != 0 || self.val_examples % 2 != 0 {
            return Err(Error::Domain("batch and validation sizes must be even".into()));
        }
        Ok(())
    }
}

/// One learning-curve sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricRow {
    pub iteration: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Snapshot with the highest validation accuracy (earliest on ties).
    pub model: ModelParams,
    pub best_iteration: usize,
    pub best_val_acc: f64,
    pub metrics: Vec<MetricRow>,
}

/// Mean loss and accuracy, where a probability of exactly 0.5 counts wrong.
#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    loss: f64,
    correct: usize,
    count: usize,
}

impl Tally {
    fn add(&mut self, loss: f64, prob: f64, label: bool) {
        self.loss += loss;
        self.correct += super::is_correct(prob, label) as usize;
        self.count += 1;
    }

    fn loss(&self) -> f64 {
        self.loss / self.count as f64
    }

    fn acc(&self) -> f64 {
        self.correct as f64 / self.count as f64
    }
}

struct Validation {
    relevance: Vec<RelevanceExample>,
    ordering: Vec<OrderingExample>,
}

impl Validation {
    /// Per-problem tallies averaged with equal weight.
    fn evaluate(&self, model: &ModelParams) -> (f64, f64) {
        let mut parts = Vec::new();
        if !self.relevance.is_empty() {
            let mut t = Tally::default();
            for ex in &self.relevance {
                let (loss, p) = model.relevance_step(ex, None);
                t.add(loss, p, ex.label);
            }
            parts.push(t);
        }
        if !self.ordering.is_empty() {
            let mut t = Tally::default();
            for ex in &self.ordering {
                let (loss, p) = model.ordering_step(ex, None);
                t.add(loss, p, ex.label);
            }
            parts.push(t);
        }
        let n = parts.len() as f64;
        (
            parts.iter().map(Tally::loss).sum::<f64>() / n,
            parts.iter().map(Tally::acc).sum::<f64>() / n,
        )
    }
}

enum Batch {
    Relevance(Vec<RelevanceExample>),
    Ordering(Vec<OrderingExample>),
}

/// Mini-batch NLL training with Adam and validation-based model selection.
///
/// The model is initialized from `config.seed` on top of `table`. Every
/// `val_interval` iterations (and before the first one) validation accuracy
/// is measured on fixed example sets drawn from `split.validation`; the
/// returned model is the best such snapshot.
pub fn train(config: &TrainConfig, split: &SplitCorpus, table: EmbeddingTable, problem: Problem) -> Result<TrainOutcome> {
    config.validate()?;
    if table.dim() != config.dim {
        return Err(Error::Shape(format!(
            "word vectors have dim {}, configuration asks for {}",
            table.dim(),
            config.dim
        )));
    }
    let mut seeds = ChaCha8Rng::seed_from_u64(config.seed);
    let init_seed: u64 = seeds.gen();
    let val_seed: u64 = seeds.gen();
    let probe_seed: u64 = seeds.gen();
    let mut batch_seeds = ChaCha8Rng::seed_from_u64(seeds.gen());

    let validation = Validation {
        relevance: if problem.uses_relevance() {
            sample_relevance(&split.validation, config.val_examples, val_seed)?
        } else {
            Vec::new()
        },
        ordering: if problem.uses_ordering() {
            sample_ordering(&split.validation, config.val_examples, val_seed ^ 1)?
        } else {
            Vec::new()
        },
    };

    let draw = |iteration: usize, seed: u64| -> Result<Batch> {
        let relevance = match problem {
            Problem::Relevance => true,
            Problem::Ordering => false,
            Problem::Joint => iteration % 2 == 1,
        };
        Ok(if relevance {
            Batch::Relevance(sample_relevance(&split.train, config.batch, seed)?)
        } else {
            Batch::Ordering(sample_ordering(&split.train, config.batch, seed)?)
        })
    };

    let mut model = ModelParams::init(table, config.mode, config.hidden, init_seed);
    let shapes: Vec<usize> = model.tensors().iter().map(|t| t.len()).collect();
    let mut adam = AdamState::new(&shapes);

    // Iteration-0 training metrics come from a probe batch that is never
    // trained on.
    let mut running = Tally::default();
    match draw(1, probe_seed)? {
        Batch::Relevance(b) => b.iter().for_each(|ex| {
            let (l, p) = model.relevance_step(ex, None);
            running.add(l, p, ex.label);
        }),
        Batch::Ordering(b) => b.iter().for_each(|ex| {
            let (l, p) = model.ordering_step(ex, None);
            running.add(l, p, ex.label);
        }),
    }

    let mut metrics = Vec::new();
    let mut best = model.clone();
    let mut best_iteration = 0;
    let mut best_val_acc = f64::NEG_INFINITY;

    for iteration in 0..=config.iterations {
        if iteration > 0 {
            let batch = draw(iteration, batch_seeds.gen())?;
            let mut grads = model.zero_grads();
            let mut tally = Tally::default();
            let scale = 1.0 / config.batch as f64;
            match &batch {
                Batch::Relevance(b) => {
                    for ex in b {
                        let (l, p) = model.relevance_step(ex, Some((&mut grads, scale)));
                        tally.add(l, p, ex.label);
                    }
                }
                Batch::Ordering(b) => {
                    for ex in b {
                        let (l, p) = model.ordering_step(ex, Some((&mut grads, scale)));
                        tally.add(l, p, ex.label);
                    }
                }
            }
            if !tally.loss().is_finite() {
                return Err(Error::Training {
                    iteration,
                    message: format!("batch loss is {}", tally.loss()),
                });
            }
            running.loss += tally.loss;
            running.correct += tally.correct;
            running.count += tally.count;
            adam.step(&mut model.tensors_mut(), &grads.tensors(), config.lr)?;
        }

        if iteration % config.val_interval == 0 || iteration == config.iterations {
            let (val_loss, val_acc) = validation.evaluate(&model);
            if !val_loss.is_finite() {
                return Err(Error::Training {
                    iteration,
                    message: format!("validation loss is {val_loss}"),
                });
            }
            metrics.push(MetricRow {
                iteration,
                train_loss: running.loss(),
                train_acc: running.acc(),
                val_loss,
                val_acc,
            });
            running = Tally::default();
            if val_acc > best_val_acc {
                best_val_acc = val_acc;
                best_iteration = iteration;
                best = model.clone();
            }
        }
    }

    Ok(TrainOutcome {
        model: best,
        best_iteration,
        best_val_acc,
        metrics,
    })
}

pub fn write_metrics_csv(path: &Path, rows: &[MetricRow]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "iteration,train_loss,train_acc,val_loss,val_acc")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{}", r.iteration, r.train_loss, r.train_acc, r.val_loss, r.val_acc)?;
    }
    w.flush()?;
    Ok(())
}
