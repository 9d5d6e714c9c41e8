//! Central finite-difference check of the composed training loss.
//!
//! Random small models (every explanation mode) are scored on one relevance
//! and one ordering example containing known and unknown tokens. Each trainable
//! coordinate is perturbed by `±STEP` and the numeric slope is compared with
//! the analytic gradient.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ExplanationMode, ModelParams};
use crate::corpus::{OrderingExample, RelevanceExample, StepText};
use crate::encoder::{EmbeddingTable, WordVectors};
use crate::{Error, Result};

pub const STEP: f64 = 1e-5;
/// Denominator floor, so near-zero gradients are compared absolutely.
pub const REL_ERROR_FLOOR: f64 = 1e-4;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub configurations: usize,
    pub coordinates: usize,
    pub max_relative_error: f64,
}

/// A random model and example pair for gradient checking.
pub struct Probe {
    pub model: ModelParams,
    pub relevance: RelevanceExample,
    pub ordering: OrderingExample,
}

impl Probe {
    pub fn random(max_dim: usize, max_len: usize, mode: ExplanationMode, rng: &mut ChaCha8Rng) -> Result<Self> {
        if max_dim == 0 || max_len == 0 {
            return Err(Error::Domain("gradient check needs positive dim and length".into()));
        }
        let dim = rng.gen_range(1..=max_dim);
        let hidden = rng.gen_range(1..=8);
        let known: Vec<String> = ["wipe", "the", "oven", "first", "then", "dry"].map(String::from).to_vec();
        let words = WordVectors::hashed(dim, &known)?;
        let mut table = EmbeddingTable::new(Arc::new(words), rng.gen());
        table.unk.iter_mut().for_each(|u| *u = rng.gen_range(-0.5..0.5));
        let mut model = ModelParams::init(table, mode, hidden, rng.gen());
        // Non-zero output layers so every gradient path is exercised.
        for head in [&mut model.relevance, &mut model.ordering] {
            head.w2.iter_mut().for_each(|w| *w = rng.gen_range(-1.0..1.0));
            head.b1.iter_mut().for_each(|b| *b = rng.gen_range(-0.3..0.3));
        }

        let mut pool = known;
        pool.extend(["zzq", "qqz"].map(String::from));
        let mut seq = |min: usize| -> Vec<String> {
            let n = rng.gen_range(min..=max_len);
            (0..n).map(|_| pool.choose(rng).unwrap().clone()).collect()
        };
        let relevance = RelevanceExample {
            title: seq(1),
            step: StepText { gist: seq(1), explanation: seq(0) },
            label: true,
        };
        let ordering = OrderingExample {
            title: seq(1),
            step1: StepText { gist: seq(1), explanation: seq(0) },
            step2: StepText { gist: seq(1), explanation: seq(0) },
            label: false,
        };
        let label = rng.gen_bool(0.5);
        Ok(Probe {
            model,
            relevance: RelevanceExample { label, ..relevance },
            ordering: OrderingExample { label: !label, ..ordering },
        })
    }

    pub fn loss(&self, model: &ModelParams) -> f64 {
        model.relevance_step(&self.relevance, None).0 + model.ordering_step(&self.ordering, None).0
    }

    pub fn analytic(&self) -> Vec<f64> {
        let mut grads = self.model.zero_grads();
        self.model.relevance_step(&self.relevance, Some((&mut grads, 1.0)));
        self.model.ordering_step(&self.ordering, Some((&mut grads, 1.0)));
        grads.tensors().concat()
    }

    pub fn numeric(&self) -> Vec<f64> {
        let mut probe = self.model.clone();
        let sizes: Vec<usize> = probe.tensors().iter().map(|t| t.len()).collect();
        let mut out = Vec::new();
        for (ti, &n) in sizes.iter().enumerate() {
            for k in 0..n {
                let orig = probe.tensors()[ti][k];
                probe.tensors_mut()[ti][k] = orig + STEP;
                let up = self.loss(&probe);
                probe.tensors_mut()[ti][k] = orig - STEP;
                let down = self.loss(&probe);
                probe.tensors_mut()[ti][k] = orig;
                out.push((up - down) / (2.0 * STEP));
            }
        }
        out
    }
}

/// Checks `configurations` random models with dim in `1..=max_dim` and
/// sequences of at most 6 tokens, cycling through the explanation modes.
pub fn gradient_check(max_dim: usize, seed: u64, configurations: usize) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes = [ExplanationMode::Lstm, ExplanationMode::Bag, ExplanationMode::None];
    let mut report = GradCheckReport {
        configurations,
        coordinates: 0,
        max_relative_error: 0.0,
    };
    for c in 0..configurations {
        let probe = Probe::random(max_dim, 6, modes[c % modes.len()], &mut rng)?;
        let analytic = probe.analytic();
        let numeric = probe.numeric();
        for (a, n) in analytic.iter().zip(&numeric) {
            report.max_relative_error = report.max_relative_error.max(relative_error(*a, *n));
        }
        report.coordinates += analytic.len();
    }
    Ok(report)
}
