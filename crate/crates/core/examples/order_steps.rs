//! Recover a consistent partial order from pairwise precedence probabilities.
//!
//! cargo run --example order_steps

use std::time::Duration;

use procembed::ordersolve::{
    linearize, min_decided_for_ambiguity, solve_bruteforce, solve_exact, weights_from_probs, OrderProblem,
};

fn main() -> procembed::Result<()> {
    // probs[i][j]: predicted probability that step i comes before step j.
    // Steps 1 and 2 are nearly interchangeable.
    let probs = vec![
        vec![0.0, 0.90, 0.85, 0.95],
        vec![0.10, 0.0, 0.52, 0.80],
        vec![0.15, 0.48, 0.0, 0.90],
        vec![0.05, 0.20, 0.10, 0.0],
    ];
    let weights = weights_from_probs(&probs, 1e-9)?;

    for a in [0.0, 0.2, 0.5] {
        let d = min_decided_for_ambiguity(4, a);
        let problem = OrderProblem::new(weights.clone(), d)?;
        let s = solve_exact(&problem, Duration::from_secs(5))?;
        let oracle = solve_bruteforce(&problem)?;
        println!(
            "a = {a:.1} (D = {d}): pairs {:?}, objective {:.4} (brute force {:.4}), order {:?}",
            s.ordered_pairs(),
            s.objective,
            oracle.objective,
            linearize(&s)?
        );
    }
    Ok(())
}
