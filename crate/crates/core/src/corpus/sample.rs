use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, Step, Tokens};
use crate::{Error, Result};

const MAX_REDRAWS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepText {
    pub gist: Tokens,
    pub explanation: Tokens,
}

impl From<&Step> for StepText {
    fn from(s: &Step) -> Self {
        StepText {
            gist: s.gist_tokens.clone(),
            explanation: s.explanation_tokens.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelevanceExample {
    pub title: Tokens,
    pub step: StepText,
    /// True when the step belongs to the titled task.
    pub label: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderingExample {
    pub title: Tokens,
    pub step1: StepText,
    pub step2: StepText,
    /// True when `step1` precedes `step2` in the reference order.
    pub label: bool,
}

/// Balanced relevance examples: `n / 2` positives pairing a task with one of
/// its own steps, `n / 2` negatives pairing a task with a step drawn from the
/// whole corpus and redrawn while it occurs in that task.
pub fn sample_relevance(corpus: &Corpus, n: usize, seed: u64) -> Result<Vec<RelevanceExample>> {
    if n % 2 != 0 {
        return Err(Error::Sampling(format!("relevance sample size must be even, got {n}")));
    }
    if corpus.len() < 2 {
        return Err(Error::Sampling("relevance sampling needs at least 2 tasks".into()));
    }
    let all_steps: Vec<&Step> = corpus.tasks.iter().flat_map(|t| &t.steps).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);

    for _ in 0..n / 2 {
        let task = &corpus.tasks[rng.gen_range(0..corpus.len())];
        let step = &task.steps[rng.gen_range(0..task.steps.len())];
        out.push(RelevanceExample {
            title: task.title_tokens.clone(),
            step: step.into(),
            label: true,
        });
    }
    for _ in 0..n / 2 {
        let task = &corpus.tasks[rng.gen_range(0..corpus.len())];
        let mut tries = 0;
        let step = loop {
            let candidate = all_steps[rng.gen_range(0..all_steps.len())];
            if !task.contains_step(&candidate.gist_tokens, &candidate.explanation_tokens) {
                break candidate;
            }
            tries += 1;
            if tries >= MAX_REDRAWS {
                return Err(Error::Sampling(format!(
                    "no foreign step found for task `{}` after {MAX_REDRAWS} redraws",
                    task.task_id
                )));
            }
        };
        out.push(RelevanceExample {
            title: task.title_tokens.clone(),
            step: step.into(),
            label: false,
        });
    }
    out.shuffle(&mut rng);
    Ok(out)
}

/// Ordering examples over tasks with at least two steps. A task is drawn
/// uniformly, then an unordered step pair, then a coin decides which step is
/// presented first.
pub fn sample_ordering(corpus: &Corpus, n: usize, seed: u64) -> Result<Vec<OrderingExample>> {
    let eligible: Vec<_> = corpus.tasks.iter().filter(|t| t.steps.len() >= 2).collect();
    if eligible.is_empty() {
        return Err(Error::Sampling("no task has two or more steps".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let task = eligible[rng.gen_range(0..eligible.len())];
        let t = task.steps.len();
        let a = rng.gen_range(0..t);
        let mut b = rng.gen_range(0..t - 1);
        if b >= a {
            b += 1;
        }
        let (lo, hi) = (a.min(b), a.max(b));
        let (first, second) = if rng.gen_bool(0.5) { (lo, hi) } else { (hi, lo) };
        let (s1, s2) = (&task.steps[first], &task.steps[second]);
        out.push(OrderingExample {
            title: task.title_tokens.clone(),
            step1: s1.into(),
            step2: s2.into(),
            label: s1.position < s2.position,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Article, ArticleStep, Section};

    fn corpus(steps_per_task: &[usize]) -> Corpus {
        let articles: Vec<Article> = steps_per_task
            .iter()
            .enumerate()
            .map(|(i, &n)| Article {
                id: format!("t{i}"),
                title: format!("task {i}"),
                sections: vec![Section {
                    title: None,
                    steps: (0..n)
                        .map(|k| ArticleStep {
                            gist: format!("gist {i} {k}"),
                            explanation: format!("expl {i} {k}"),
                        })
                        .collect(),
                }],
            })
            .collect();
        Corpus::from_articles(&articles).unwrap()
    }

    #[test]
    fn relevance_is_balanced_and_negatives_are_foreign() {
        let c = corpus(&[3, 4, 5, 2, 6]);
        let ex = sample_relevance(&c, 1000, 9).unwrap();
        assert_eq!(ex.iter().filter(|e| e.label).count(), 500);
        for e in &ex {
            let task = c.tasks.iter().find(|t| t.title_tokens == e.title).unwrap();
            assert_eq!(task.contains_step(&e.step.gist, &e.step.explanation), e.label);
        }
    }

    #[test]
    fn relevance_two_single_step_tasks() {
        let c = corpus(&[1, 1]);
        let ex = sample_relevance(&c, 2, 4).unwrap();
        let pos = ex.iter().find(|e| e.label).unwrap();
        let neg = ex.iter().find(|e| !e.label).unwrap();
        let neg_task = c.tasks.iter().find(|t| t.title_tokens == neg.title).unwrap();
        assert_ne!(neg_task.steps[0].gist_tokens, neg.step.gist);
        let pos_task = c.tasks.iter().find(|t| t.title_tokens == pos.title).unwrap();
        assert_eq!(pos_task.steps[0].gist_tokens, pos.step.gist);
    }

    #[test]
    fn relevance_errors() {
        assert!(matches!(sample_relevance(&corpus(&[3, 3]), 3, 0), Err(Error::Sampling(_))));
        assert!(matches!(sample_relevance(&corpus(&[3]), 2, 0), Err(Error::Sampling(_))));
    }

    #[test]
    fn relevance_redraw_cap_terminates() {
        // Two tasks holding identical step text: no step is foreign to either.
        let mut c = corpus(&[1, 1]);
        c.tasks[1].steps = c.tasks[0].steps.clone();
        assert!(matches!(sample_relevance(&c, 2, 0), Err(Error::Sampling(_))));
    }

    #[test]
    fn sampling_is_deterministic() {
        let c = corpus(&[3, 4, 5]);
        assert_eq!(sample_relevance(&c, 20, 5).unwrap(), sample_relevance(&c, 20, 5).unwrap());
        assert_eq!(sample_ordering(&c, 20, 5).unwrap(), sample_ordering(&c, 20, 5).unwrap());
    }

    #[test]
    fn ordering_labels_follow_positions() {
        let c = corpus(&[2, 5, 1, 7]);
        let ex = sample_ordering(&c, 10_000, 2).unwrap();
        let pos_of = |s: &StepText| {
            c.tasks
                .iter()
                .flat_map(|t| &t.steps)
                .find(|x| x.gist_tokens == s.gist)
                .unwrap()
                .position
        };
        for e in &ex {
            assert_ne!(e.step1, e.step2);
            assert_eq!(e.label, pos_of(&e.step1) < pos_of(&e.step2));
        }
        let frac = ex.iter().filter(|e| e.label).count() as f64 / ex.len() as f64;
        assert!((frac - 0.5).abs() <= 0.02, "label fraction {frac}");
    }

    #[test]
    fn ordering_two_step_task_labels() {
        let c = corpus(&[2]);
        let ex = sample_ordering(&c, 50, 1).unwrap();
        for e in ex {
            let first_is_a = e.step1.gist == c.tasks[0].steps[0].gist_tokens;
            assert_eq!(e.label, first_is_a);
        }
    }

    #[test]
    fn ordering_needs_an_eligible_task() {
        assert!(matches!(sample_ordering(&corpus(&[1, 1]), 4, 0), Err(Error::Sampling(_))));
    }
}
