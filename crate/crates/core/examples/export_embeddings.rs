//! Train briefly, save and reload the checkpoint, then export title
//! embeddings of 50 tasks as TSV for an external t-SNE tool.
//!
//! cargo run --release --example export_embeddings -- [out.tsv]

use std::path::PathBuf;
use std::sync::Arc;

use procembed::corpus::{gen_synthetic, split_corpus};
use procembed::encoder::{EmbeddingTable, WordVectors};
use procembed::eval::export_embeddings;
use procembed::heads::{load_checkpoint, save_checkpoint, train, ExplanationMode, Problem, TrainConfig};

fn main() -> procembed::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("titles.tsv"));
    let corpus = gen_synthetic(3, 100, 4..=6)?;
    let split = split_corpus(&corpus, (0.8, 0.1, 0.1), 3)?;
    let words = Arc::new(WordVectors::hashed(8, &corpus.vocabulary())?);
    let config = TrainConfig {
        dim: 8,
        hidden: 8,
        lr: 0.01,
        batch: 16,
        iterations: 400,
        val_interval: 100,
        val_examples: 100,
        mode: ExplanationMode::Bag,
        seed: 3,
    };
    let trained = train(&config, &split, EmbeddingTable::new(words.clone(), 3), Problem::Relevance)?;

    let ckpt = std::env::temp_dir().join("titles.ckpt");
    save_checkpoint(&trained.model, &ckpt)?;
    let model = load_checkpoint(&ckpt, words)?;
    assert_eq!(model, trained.model);

    export_embeddings(&model, &corpus.tasks[..50], &out)?;
    println!("wrote {}", out.display());
    Ok(())
}
