use std::sync::Arc;
use std::time::Duration;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use procembed::corpus::{
    gen_synthetic, sample_ordering, sample_relevance, split_corpus, tokenize, Article, ArticleStep, Corpus, Section,
};
use procembed::encoder::{encode_bag, encode_recurrent, EmbeddingTable, LstmParams, Lookup, WordVectors};
use procembed::eval::{accuracy, ip_error_curve_from_probs, ordering_error, Examples};
use procembed::heads::{read_checkpoint, write_checkpoint, ExplanationMode, ModelParams};
use procembed::ordersolve::{
    check_solution, linearize, solve_bruteforce, solve_exact, weights_from_probs, OrderProblem, PairState,
};

fn probs_strategy(max_steps: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2..=max_steps).prop_flat_map(|t| {
        prop::collection::vec(0.001f64..0.999, t * t).prop_map(move |v| {
            (0..t).map(|i| (0..t).map(|j| if i == j { 0.0 } else { v[i * t + j] }).collect()).collect()
        })
    })
}

fn problem(probs: &[Vec<f64>], d: usize) -> OrderProblem {
    let w = weights_from_probs(probs, 1e-9).unwrap();
    let d = d.min(w.pair_count());
    OrderProblem::new(w, d).unwrap()
}

fn word_list() -> Vec<String> {
    ["peel", "the", "apple", "slice", "it", "thin"].map(String::from).to_vec()
}

fn table(dim: usize) -> EmbeddingTable {
    EmbeddingTable::new(Arc::new(WordVectors::hashed(dim, &word_list()).unwrap()), 9)
}

fn articles_strategy() -> impl Strategy<Value = Vec<Article>> {
    let step = ("[a-z]{1,6}( [a-z]{1,6}){0,3}", "[a-z ]{0,20}").prop_map(|(gist, explanation)| ArticleStep { gist, explanation });
    let section = (prop::option::of("[a-z]{1,8}"), prop::collection::vec(step, 0..4))
        .prop_map(|(title, steps)| Section { title, steps });
    prop::collection::vec(("[a-z]{1,8}( [a-z]{1,8}){0,2}", prop::collection::vec(section, 1..4)), 1..6).prop_map(|arts| {
        arts.into_iter()
            .enumerate()
            .map(|(i, (title, sections))| Article { id: format!("a{i}"), title, sections })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tokenize_is_stable_under_rejoining(text in "\\PC{0,40}") {
        let tokens = tokenize(&text);
        prop_assert!(tokens.iter().all(|t| !t.is_empty() && !t.chars().any(char::is_whitespace)));
        prop_assert_eq!(tokenize(&tokens.join(" ")), tokens.clone());
        prop_assert!(tokens.iter().all(|t| *t == t.to_lowercase()));
    }

    #[test]
    fn flattening_conserves_steps(articles in articles_strategy()) {
        let input: usize = articles.iter().flat_map(|a| &a.sections).map(|s| s.steps.len()).sum();
        match Corpus::from_articles(&articles) {
            Ok(c) => prop_assert_eq!(c.step_count(), input),
            // Only blank gists or titles are rejected.
            Err(_) => {
                let blank = articles.iter().any(|a| {
                    tokenize(&a.title).is_empty()
                        || a.sections.iter().any(|s| {
                            s.title.as_deref().is_some_and(|t| tokenize(t).is_empty())
                                || s.steps.iter().any(|st| tokenize(&st.gist).is_empty())
                        })
                });
                prop_assert!(blank);
            }
        }
    }

    #[test]
    fn split_partitions(n in 3usize..60, seed in any::<u64>()) {
        let corpus = gen_synthetic(n as u64, n, 2..=3).unwrap();
        let s = split_corpus(&corpus, (0.8, 0.1, 0.1), seed).unwrap();
        let mut ids: Vec<&str> = s.train.tasks.iter().chain(&s.validation.tasks).chain(&s.test.tasks)
            .map(|t| t.task_id.as_str()).collect();
        prop_assert_eq!(ids.len(), n);
        ids.sort();
        ids.dedup();
        prop_assert_eq!(ids.len(), n);
        prop_assert_eq!(split_corpus(&corpus, (0.8, 0.1, 0.1), seed).unwrap(), s);
    }

    #[test]
    fn sampling_invariants(seed in any::<u64>(), half in 1usize..40) {
        let corpus = gen_synthetic(seed % 7, 8, 2..=5).unwrap();
        let rel = sample_relevance(&corpus, 2 * half, seed).unwrap();
        prop_assert_eq!(rel.iter().filter(|e| e.label).count(), half);
        for e in rel.iter().filter(|e| !e.label) {
            let task = corpus.tasks.iter().find(|t| t.title_tokens == e.title).unwrap();
            prop_assert!(!task.contains_step(&e.step.gist, &e.step.explanation));
        }
        let ord = sample_ordering(&corpus, 2 * half, seed).unwrap();
        for e in &ord {
            let task = corpus.tasks.iter().find(|t| t.title_tokens == e.title).unwrap();
            let pos = |g: &[String]| task.steps.iter().find(|s| s.gist_tokens == g).unwrap().position;
            prop_assert_eq!(e.label, pos(&e.step1.gist) < pos(&e.step2.gist));
        }
        prop_assert_eq!(sample_ordering(&corpus, 2 * half, seed).unwrap(), ord);
    }

    #[test]
    fn lookup_is_total(token in "[a-z]{1,8}") {
        let t = table(3);
        match t.resolve(&token) {
            Lookup::Known(row) => prop_assert_eq!(t.lookup(&token), row),
            Lookup::Unknown => prop_assert_eq!(t.lookup(&token), t.unk.as_slice()),
        }
    }

    #[test]
    fn bag_is_permutation_invariant(idx in prop::collection::vec(0usize..8, 0..10), seed in any::<u64>()) {
        let mut pool = word_list();
        pool.extend(["unseen".to_string(), "words".to_string()]);
        let tokens: Vec<String> = idx.iter().map(|&i| pool[i].clone()).collect();
        let mut shuffled = tokens.clone();
        rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut ChaCha8Rng::seed_from_u64(seed));
        let t = table(4);
        let (a, b) = (encode_bag(&t, &tokens), encode_bag(&t, &shuffled));
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn zero_recurrent_encoder_is_zero(idx in prop::collection::vec(0usize..6, 0..10)) {
        let tokens: Vec<String> = idx.iter().map(|&i| word_list()[i].clone()).collect();
        let out = encode_recurrent(&LstmParams::zeros(5), &table(5), &tokens).unwrap();
        prop_assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn solutions_are_feasible_and_match_oracle(probs in probs_strategy(5), d in 0usize..11) {
        let p = problem(&probs, d);
        let s = solve_exact(&p, Duration::from_secs(5)).unwrap();
        check_solution(&p, &s).unwrap();
        prop_assert!(s.optimal);
        let oracle = solve_bruteforce(&p).unwrap();
        prop_assert_eq!(s.objective.to_bits(), oracle.objective.to_bits());
        let order = linearize(&s).unwrap();
        for (i, j) in s.ordered_pairs() {
            let at = |x: usize| order.iter().position(|&y| y == x).unwrap();
            prop_assert!(at(i) < at(j));
        }
    }

    #[test]
    fn objective_non_increasing_in_budget(probs in probs_strategy(6)) {
        let t = probs.len();
        let mut prev = f64::INFINITY;
        for d in 0..=t * (t - 1) / 2 {
            let s = solve_exact(&problem(&probs, d), Duration::from_secs(5)).unwrap();
            prop_assert!(s.objective <= prev);
            prev = s.objective;
        }
    }

    #[test]
    fn scaling_preserves_optimality(probs in probs_strategy(6), d in 0usize..16, factor in 0.01f64..100.0) {
        let p = problem(&probs, d);
        let original = solve_exact(&p, Duration::from_secs(5)).unwrap();
        let scaled = OrderProblem::new(p.weights.scaled(factor).unwrap(), p.min_decided).unwrap();
        let s = solve_exact(&scaled, Duration::from_secs(5)).unwrap();
        let rescored: f64 = s.ordered_pairs().iter().map(|&(i, j)| p.weights.get(i, j)).sum();
        prop_assert!((rescored - original.objective).abs() <= 1e-9 * (1.0 + original.objective.abs()));
    }

    #[test]
    fn strictly_negative_zero_budget_is_empty(probs in probs_strategy(7)) {
        let s = solve_exact(&problem(&probs, 0), Duration::from_secs(5)).unwrap();
        prop_assert_eq!(s.decided_count, 0);
        prop_assert!(s.states().iter().all(|&st| st == PairState::Undecided));
    }

    #[test]
    fn error_ignores_undecided_pairs(probs in probs_strategy(6), d in 0usize..16) {
        let s = solve_exact(&problem(&probs, d), Duration::from_secs(5)).unwrap();
        let backward = s.states().iter().filter(|&&st| st == PairState::Backward).count();
        let pairs = s.states().len();
        prop_assert_eq!(ordering_error(&s), backward as f64 / pairs as f64);
        let curve = ip_error_curve_from_probs(&[("t".into(), probs.clone())], &[0.0], 1e-9, Duration::from_secs(5), 1).unwrap();
        prop_assert!((0.0..=1.0).contains(&curve[0].error_rate));
    }

    #[test]
    fn accuracy_is_a_permutation_invariant_fraction(seed in any::<u64>()) {
        let corpus = gen_synthetic(seed % 5, 6, 2..=4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let words = WordVectors::hashed(3, &corpus.vocabulary()).unwrap();
        let mut model = ModelParams::init(EmbeddingTable::new(Arc::new(words), 1), ExplanationMode::Bag, 3, seed);
        model.relevance.w2.iter_mut().for_each(|w| *w = rng.gen_range(-1.0..1.0));
        let mut ex = sample_relevance(&corpus, 20, seed).unwrap();
        let a = accuracy(&model, Examples::Relevance(&ex)).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        ex.reverse();
        prop_assert_eq!(accuracy(&model, Examples::Relevance(&ex)).unwrap(), a);
    }

    #[test]
    fn checkpoint_round_trips(seed in any::<u64>(), mode in 0u8..3) {
        let mode = ExplanationMode::from_tag(mode).unwrap();
        let words = Arc::new(WordVectors::hashed(3, &word_list()).unwrap());
        let model = ModelParams::init(EmbeddingTable::new(words.clone(), seed), mode, 2, seed);
        let bytes = write_checkpoint(&model);
        prop_assert_eq!(read_checkpoint(&bytes, words).unwrap(), model);
    }
}
