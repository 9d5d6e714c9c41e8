//! Train relevance models with and without explanations on the synthetic
//! corpus and compare held-out accuracy.
//!
//! cargo run --release --example train_synthetic

use std::sync::Arc;

use procembed::corpus::{gen_synthetic, sample_ordering, sample_relevance, split_corpus};
use procembed::encoder::{EmbeddingTable, WordVectors};
use procembed::eval::{accuracy, Examples};
use procembed::heads::{train, ExplanationMode, Problem, TrainConfig};

fn main() -> procembed::Result<()> {
    let corpus = gen_synthetic(0, 200, 5..=8)?;
    let split = split_corpus(&corpus, (0.8, 0.1, 0.1), 0)?;
    let words = Arc::new(WordVectors::hashed(16, &corpus.vocabulary())?);
    let rel_test = sample_relevance(&split.test, 1000, 1)?;
    let ord_test = sample_ordering(&split.test, 1000, 2)?;

    for mode in [ExplanationMode::Lstm, ExplanationMode::Bag, ExplanationMode::None] {
        let config = TrainConfig {
            dim: 16,
            hidden: 16,
            lr: 0.005,
            batch: 32,
            iterations: 3000,
            val_interval: 250,
            val_examples: 400,
            mode,
            seed: 0,
        };
        let out = train(&config, &split, EmbeddingTable::new(words.clone(), 0), Problem::Joint)?;
        println!(
            "{mode:?}: best iteration {}, relevance {:.3}, ordering {:.3}",
            out.best_iteration,
            accuracy(&out.model, Examples::Relevance(&rel_test))?,
            accuracy(&out.model, Examples::Ordering(&ord_test))?,
        );
    }
    Ok(())
}
