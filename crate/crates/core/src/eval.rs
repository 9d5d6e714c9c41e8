//! Prediction accuracy, the ambiguity-versus-error curve of the ordering
//! solver against a random-abstention baseline, and title-embedding export.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::ops::RangeInclusive;
use std::path::Path;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corpus::{OrderingExample, RelevanceExample, Task};
use crate::heads::{is_correct, ModelParams};
use crate::ordersolve::{min_decided_for_ambiguity, solve_exact, weights_from_probs, OrderProblem, OrderSolution, PairState};
use crate::{Error, Result};

/// Default grid of ambiguity fractions.
pub const DEFAULT_FRACTIONS: [f64; 6] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5];

#[derive(Debug, Clone, Copy)]
pub enum Examples<'a> {
    Relevance(&'a [RelevanceExample]),
    Ordering(&'a [OrderingExample]),
}

/// Fraction of examples whose thresholded prediction matches the label.
/// A probability of exactly 0.5 counts as wrong.
pub fn accuracy(model: &ModelParams, examples: Examples<'_>) -> Result<f64> {
    let (correct, total) = match examples {
        Examples::Relevance(ex) => {
            let mut c = 0;
            for e in ex {
                let p = model.relevance_probability(&e.title, &e.step.gist, &e.step.explanation)?;
                c += is_correct(p, e.label) as usize;
            }
            (c, ex.len())
        }
        Examples::Ordering(ex) => {
            let mut c = 0;
            for e in ex {
                let p = model.order_probability(
                    &e.title,
                    (&e.step1.gist, &e.step1.explanation),
                    (&e.step2.gist, &e.step2.explanation),
                )?;
                c += is_correct(p, e.label) as usize;
            }
            (c, ex.len())
        }
    };
    if total == 0 {
        return Err(Error::Domain("accuracy of an empty example set".into()));
    }
    Ok(correct as f64 / total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub ambiguity: f64,
    pub error_rate: f64,
}

/// `probs[i][j]` = predicted probability that step `i` precedes step `j`.
pub fn order_probabilities(model: &ModelParams, task: &Task) -> Result<Vec<Vec<f64>>> {
    let t = task.steps.len();
    let mut probs = vec![vec![0.0; t]; t];
    for (i, a) in task.steps.iter().enumerate() {
        for (j, b) in task.steps.iter().enumerate() {
            if i != j {
                probs[i][j] = model.order_probability(
                    &task.title_tokens,
                    (&a.gist_tokens, &a.explanation_tokens),
                    (&b.gist_tokens, &b.explanation_tokens),
                )?;
            }
        }
    }
    Ok(probs)
}

/// Decided pairs that reverse the reference (index) order, over all
/// unordered pairs. Undecided pairs never count.
pub fn ordering_error(solution: &OrderSolution) -> f64 {
    let states = solution.states();
    let wrong = states.iter().filter(|&&s| s == PairState::Backward).count();
    wrong as f64 / states.len() as f64
}

/// Curve from precomputed probability matrices whose reference order is the
/// index order. Per-task work runs on up to `jobs` threads; the average is
/// taken in task order.
pub fn ip_error_curve_from_probs(
    tasks: &[(String, Vec<Vec<f64>>)],
    fractions: &[f64],
    eps: f64,
    time_limit: Duration,
    jobs: usize,
) -> Result<Vec<CurvePoint>> {
    if tasks.is_empty() {
        return Err(Error::Domain("error curve over zero tasks".into()));
    }
    if let Some(a) = fractions.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(Error::Domain(format!("ambiguity fraction {a} outside [0, 1]")));
    }
    let per_task = |(task_id, probs): &(String, Vec<Vec<f64>>)| -> Result<Vec<f64>> {
        let wrap = |e: Error| Error::Task { task_id: task_id.clone(), source: Box::new(e) };
        let weights = weights_from_probs(probs, eps).map_err(wrap)?;
        fractions
            .iter()
            .map(|&a| {
                let d = min_decided_for_ambiguity(weights.len(), a);
                let problem = OrderProblem::new(weights.clone(), d).map_err(wrap)?;
                let solution = solve_exact(&problem, time_limit).map_err(wrap)?;
                Ok(ordering_error(&solution))
            })
            .collect()
    };
    let rows: Vec<Vec<f64>> = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Domain(format!("thread pool: {e}")))?;
        pool.install(|| tasks.par_iter().map(per_task).collect::<Result<_>>())?
    } else {
        tasks.iter().map(per_task).collect::<Result<_>>()?
    };
    Ok(fractions
        .iter()
        .enumerate()
        .map(|(k, &a)| CurvePoint {
            ambiguity: a,
            error_rate: rows.iter().map(|r| r[k]).sum::<f64>() / rows.len() as f64,
        })
        .collect())
}

pub fn ip_error_curve(
    model: &ModelParams,
    tasks: &[Task],
    fractions: &[f64],
    eps: f64,
    time_limit: Duration,
    jobs: usize,
) -> Result<Vec<CurvePoint>> {
    let mut matrices = Vec::with_capacity(tasks.len());
    for task in tasks {
        if task.steps.len() < 2 {
            return Err(Error::Task {
                task_id: task.task_id.clone(),
                source: Box::new(Error::Domain("needs at least 2 steps".into())),
            });
        }
        matrices.push((task.task_id.clone(), order_probabilities(model, task)?));
    }
    ip_error_curve_from_probs(&matrices, fractions, eps, time_limit, jobs)
}

/// Expected error when a fraction `a` of pairs is abstained on at random.
pub fn random_baseline_curve(base_error: f64, fractions: &[f64]) -> Vec<CurvePoint> {
    fractions
        .iter()
        .map(|&a| CurvePoint {
            ambiguity: a,
            error_rate: (1.0 - a) * base_error,
        })
        .collect()
}

pub fn write_curve_csv(path: &Path, ip: &[CurvePoint], baseline: &[CurvePoint]) -> Result<()> {
    if ip.len() != baseline.len() {
        return Err(Error::Shape("curves have different lengths".into()));
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "fraction,ip_error,baseline_error")?;
    for (a, b) in ip.iter().zip(baseline) {
        writeln!(w, "{},{},{}", a.ambiguity, a.error_rate, b.error_rate)?;
    }
    w.flush()?;
    Ok(())
}

/// TSV of `task_id`, title text and the title embedding, one task per row.
pub fn export_embeddings(model: &ModelParams, tasks: &[Task], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "task_id\ttitle")?;
    for k in 0..model.dim() {
        write!(w, "\te{k}")?;
    }
    writeln!(w)?;
    for task in tasks {
        write!(w, "{}\t{}", task.task_id, task.title_tokens.join(" "))?;
        for v in model.title_embedding(&task.title_tokens) {
            write!(w, "\t{v}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Synthetic pairwise predictions whose true order is the index order.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedTask {
    pub task_id: String,
    pub probs: Vec<Vec<f64>>,
    /// Adjacent pairs `(i, i + 1)` predicted near 0.5.
    pub exchangeable: Vec<(usize, usize)>,
}

/// Tasks where a random disjoint set of adjacent pairs (each picked with
/// probability `exchangeable`) gets `0.5 ± 0.04` in a random direction, and
/// every other pair is predicted correctly with probability in `[0.7, 0.97)`.
pub fn planted_ambiguity(
    seed: u64,
    n_tasks: usize,
    steps_per_task: RangeInclusive<usize>,
    exchangeable: f64,
) -> Result<Vec<PlantedTask>> {
    if *steps_per_task.start() < 2 || steps_per_task.is_empty() {
        return Err(Error::Domain(format!("invalid steps-per-task range {steps_per_task:?}")));
    }
    if !(0.0..=1.0).contains(&exchangeable) {
        return Err(Error::Domain(format!("exchangeable fraction {exchangeable} outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tasks = Vec::with_capacity(n_tasks);
    for k in 0..n_tasks {
        let t = rng.gen_range(steps_per_task.clone());
        let mut swaps = Vec::new();
        let mut i = 0;
        while i + 1 < t {
            if rng.gen_bool(exchangeable) {
                swaps.push((i, i + 1));
                i += 2;
            } else {
                i += 1;
            }
        }
        let mut probs = vec![vec![0.0; t]; t];
        for i in 0..t {
            for j in i + 1..t {
                let p = if swaps.contains(&(i, j)) {
                    let off = rng.gen_range(0.001..0.04);
                    if rng.gen_bool(0.5) {
                        0.5 + off
                    } else {
                        0.5 - off
                    }
                } else {
                    rng.gen_range(0.7..0.97)
                };
                probs[i][j] = p;
                probs[j][i] = 1.0 - p;
            }
        }
        tasks.push(PlantedTask {
            task_id: format!("planted{k:04}"),
            probs,
            exchangeable: swaps,
        });
    }
    Ok(tasks)
}
