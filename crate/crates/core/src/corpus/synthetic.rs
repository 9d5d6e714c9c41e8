//! Generated corpora with planted, learnable structure.
//!
//! Every task draws a topic and a detail word. The title names both; each step
//! gist starts with the ordinal marker of its position and names the topic;
//! each explanation repeats the marker, the detail and the topic after a few
//! noise words. Relevance is decidable from topic agreement (and, for tasks
//! sharing a topic, from the detail carried only by explanations); ordering is
//! decidable from the markers.

use std::ops::RangeInclusive;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Article, ArticleStep, Corpus, Section};
use crate::{Error, Result};

const TOPICS: [&str; 8] = ["kitchen", "garden", "laundry", "carpet", "window", "garage", "fence", "gutter"];
const DETAILS: [&str; 8] = ["quickly", "safely", "cheaply", "weekly", "outdoors", "gently", "thoroughly", "tonight"];
const VERBS: [&str; 6] = ["clean", "fix", "paint", "organize", "inspect", "prepare"];
const NOISE: [&str; 16] = [
    "then", "carefully", "some", "your", "with", "a", "small", "tool", "water", "soap", "cloth", "it", "before",
    "after", "using", "make",
];
const ORDINALS: [&str; 12] = [
    "first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth", "tenth", "eleventh",
    "twelfth",
];

/// Marker token for 0-based step `position`.
pub fn ordinal_marker(position: usize) -> String {
    ORDINALS
        .get(position)
        .map(|s| s.to_string())
        .unwrap_or_else(|| format!("ordinal{}", position + 1))
}

pub fn gen_synthetic(seed: u64, n_tasks: usize, steps_per_task: RangeInclusive<usize>) -> Result<Corpus> {
    if n_tasks < 3 {
        return Err(Error::Domain(format!("synthetic corpus needs at least 3 tasks, got {n_tasks}")));
    }
    if steps_per_task.is_empty() || *steps_per_task.start() == 0 {
        return Err(Error::Domain(format!("invalid steps-per-task range {steps_per_task:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut articles = Vec::with_capacity(n_tasks);
    for i in 0..n_tasks {
        let topic = *TOPICS.choose(&mut rng).unwrap();
        let detail = *DETAILS.choose(&mut rng).unwrap();
        let verb = *VERBS.choose(&mut rng).unwrap();
        let n_steps = rng.gen_range(steps_per_task.clone());
        let steps = (0..n_steps)
            .map(|k| {
                let marker = ordinal_marker(k);
                let step_verb = VERBS.choose(&mut rng).unwrap();
                let mut gist = format!("{marker} {step_verb} the {topic}");
                if rng.gen_bool(0.5) {
                    gist.push(' ');
                    gist.push_str(NOISE.choose(&mut rng).unwrap());
                }
                let n_noise = rng.gen_range(1..=3);
                let mut expl: Vec<&str> = (0..n_noise).map(|_| *NOISE.choose(&mut rng).unwrap()).collect();
                expl.extend([marker.as_str(), detail, topic]);
                ArticleStep {
                    gist,
                    explanation: expl.join(" "),
                }
            })
            .collect();
        articles.push(Article {
            id: format!("syn{i:05}"),
            title: format!("{verb} the {topic} {detail}"),
            sections: vec![Section { title: None, steps }],
        });
    }
    Corpus::from_articles(&articles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::sample_ordering;

    fn marker_rank(gist: &[String]) -> usize {
        let m = &gist[0];
        (0..64).find(|&k| &ordinal_marker(k) == m).expect("gist starts with a marker")
    }

    #[test]
    fn deterministic_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
        gen_synthetic(5, 3, 2..=4).unwrap().write_jsonl(&a).unwrap();
        gen_synthetic(5, 3, 2..=4).unwrap().write_jsonl(&b).unwrap();
        assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    }

    #[test]
    fn gists_carry_topic_of_title() {
        let c = gen_synthetic(1, 40, 3..=6).unwrap();
        for t in &c.tasks {
            let topic = &t.title_tokens[2];
            assert!(TOPICS.contains(&topic.as_str()));
            assert!(t.steps.iter().all(|s| s.gist_tokens.contains(topic)));
            assert!((3..=6).contains(&t.steps.len()));
        }
    }

    #[test]
    fn rule_based_ordering_is_perfect() {
        let c = gen_synthetic(2, 50, 5..=8).unwrap();
        let ex = sample_ordering(&c, 2000, 3).unwrap();
        let correct = ex
            .iter()
            .filter(|e| (marker_rank(&e.step1.gist) < marker_rank(&e.step2.gist)) == e.label)
            .count();
        assert_eq!(correct, ex.len());
    }

    #[test]
    fn round_trips_through_jsonl() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        let c = gen_synthetic(8, 10, 2..=5).unwrap();
        c.write_jsonl(&p).unwrap();
        assert_eq!(crate::corpus::load_corpus(&p).unwrap(), c);
    }

    #[test]
    fn rejects_tiny_corpora() {
        assert!(gen_synthetic(0, 2, 2..=3).is_err());
    }
}
