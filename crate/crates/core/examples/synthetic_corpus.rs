//! Generate a synthetic corpus, split it and draw balanced training examples.
//!
//! cargo run --example synthetic_corpus

use procembed::corpus::{gen_synthetic, sample_ordering, sample_relevance, split_corpus};

fn main() -> procembed::Result<()> {
    let corpus = gen_synthetic(1, 200, 5..=8)?;
    println!("{} tasks, {} steps", corpus.len(), corpus.step_count());

    let task = &corpus.tasks[0];
    println!("\n{}: {}", task.task_id, task.title_tokens.join(" "));
    for step in &task.steps {
        println!("  {}. {} | {}", step.position + 1, step.gist_tokens.join(" "), step.explanation_tokens.join(" "));
    }

    let split = split_corpus(&corpus, (0.8, 0.1, 0.1), 1)?;
    println!("\nsplit: {} / {} / {}", split.train.len(), split.validation.len(), split.test.len());

    let rel = sample_relevance(&split.train, 6, 2)?;
    println!("\nrelevance examples:");
    for e in &rel {
        println!("  {:5}  {} <- {}", e.label, e.title.join(" "), e.step.gist.join(" "));
    }
    let ord = sample_ordering(&split.train, 4, 3)?;
    println!("\nordering examples:");
    for e in &ord {
        println!("  {:5}  {} ? {}", e.label, e.step1.gist.join(" "), e.step2.gist.join(" "));
    }
    Ok(())
}
