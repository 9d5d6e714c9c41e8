//! Error of the ordering solver as the ambiguity budget grows, against
//! abstaining on random pairs, for predictions with planted exchangeable
//! steps.
//!
//! cargo run --example ambiguity_curve

use std::time::Duration;

use procembed::eval::{ip_error_curve_from_probs, planted_ambiguity, random_baseline_curve, DEFAULT_FRACTIONS};

fn main() -> procembed::Result<()> {
    let planted = planted_ambiguity(7, 200, 5..=8, 0.4)?;
    let swaps: usize = planted.iter().map(|t| t.exchangeable.len()).sum();
    let tasks: Vec<_> = planted.into_iter().map(|t| (t.task_id, t.probs)).collect();
    let curve = ip_error_curve_from_probs(&tasks, &DEFAULT_FRACTIONS, 1e-9, Duration::from_secs(5), 1)?;
    let baseline = random_baseline_curve(curve[0].error_rate, &DEFAULT_FRACTIONS);

    println!("{} tasks, {swaps} exchangeable pairs", tasks.len());
    println!("fraction  ip_error  baseline");
    for (c, b) in curve.iter().zip(&baseline) {
        println!("{:8.1}  {:8.4}  {:8.4}", c.ambiguity, c.error_rate, b.error_rate);
    }
    Ok(())
}
