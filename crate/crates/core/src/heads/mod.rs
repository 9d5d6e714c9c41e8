//! Relevance and ordering classifiers over concatenated sequence embeddings.
//!
//! Each head is one tanh hidden layer followed by a two-way softmax; class 1
//! means "relevant" for the relevance head and "step 1 precedes step 2" for
//! the ordering head. Titles and gists always go through their own LSTM; the
//! explanation goes through a third LSTM, a bag encoder, or is left out,
//! depending on [`ExplanationMode`].

mod adam;
mod checkpoint;
pub mod gradcheck;
mod train;

pub use adam::{AdamState, BETA1, BETA2, EPSILON};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, MAGIC};
pub use train::{train, write_metrics_csv, MetricRow, Problem, TrainConfig, TrainOutcome};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{OrderingExample, RelevanceExample};
use crate::encoder::{bag_backward, encode_bag, EmbeddingTable, LstmParams, LstmTrace, MAX_EXPLANATION_TOKENS, MAX_SHORT_TOKENS};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExplanationMode {
    Lstm,
    Bag,
    None,
}

impl ExplanationMode {
    pub fn tag(self) -> u8 {
        match self {
            ExplanationMode::Lstm => 0,
            ExplanationMode::Bag => 1,
            ExplanationMode::None => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(ExplanationMode::Lstm),
            1 => Some(ExplanationMode::Bag),
            2 => Some(ExplanationMode::None),
            _ => None,
        }
    }

    /// Embeddings contributed by one step (gist, plus explanation if used).
    fn per_step(self) -> usize {
        match self {
            ExplanationMode::None => 1,
            _ => 2,
        }
    }
}

impl std::str::FromStr for ExplanationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lstm" => Ok(ExplanationMode::Lstm),
            "bag" => Ok(ExplanationMode::Bag),
            "none" => Ok(ExplanationMode::None),
            other => Err(Error::Domain(format!("unknown explanation mode `{other}`"))),
        }
    }
}

/// `hidden x input` weights `w1`, then `2 x hidden` output weights `w2`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams {
    pub input: usize,
    pub hidden: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl HeadParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        HeadParams {
            input,
            hidden,
            w1: vec![0.0; hidden * input],
            b1: vec![0.0; hidden],
            w2: vec![0.0; 2 * hidden],
            b2: vec![0.0; 2],
        }
    }

    /// Random hidden layer, zero output layer: every prediction starts at
    /// exactly 0.5.
    pub fn init<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let mut h = Self::zeros(input, hidden);
        let bound = 1.0 / (input as f64).sqrt();
        h.w1.iter_mut().for_each(|w| *w = rng.gen_range(-bound..bound));
        h
    }

    pub fn tensors(&self) -> [&[f64]; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    fn forward(&self, x: &[f64]) -> HeadTrace {
        let a: Vec<f64> = (0..self.hidden)
            .map(|r| {
                let row = &self.w1[r * self.input..(r + 1) * self.input];
                (self.b1[r] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()).tanh()
            })
            .collect();
        let logits = [0, 1].map(|k| {
            let row = &self.w2[k * self.hidden..(k + 1) * self.hidden];
            self.b2[k] + row.iter().zip(&a).map(|(w, v)| w * v).sum::<f64>()
        });
        HeadTrace { a, logits }
    }

    /// Accumulates parameter gradients for `dlogits` and returns dL/dx.
    fn backward(&self, x: &[f64], trace: &HeadTrace, dlogits: [f64; 2], grads: &mut HeadParams) -> Vec<f64> {
        let mut dpre = vec![0.0; self.hidden];
        for k in 0..2 {
            grads.b2[k] += dlogits[k];
            for r in 0..self.hidden {
                grads.w2[k * self.hidden + r] += dlogits[k] * trace.a[r];
                dpre[r] += self.w2[k * self.hidden + r] * dlogits[k];
            }
        }
        let mut dx = vec![0.0; self.input];
        for r in 0..self.hidden {
            let d = dpre[r] * (1.0 - trace.a[r] * trace.a[r]);
            if d == 0.0 {
                continue;
            }
            grads.b1[r] += d;
            let row = r * self.input..(r + 1) * self.input;
            for (g, v) in grads.w1[row.clone()].iter_mut().zip(x) {
                *g += d * v;
            }
            for (dxj, w) in dx.iter_mut().zip(&self.w1[row]) {
                *dxj += w * d;
            }
        }
        dx
    }
}

struct HeadTrace {
    a: Vec<f64>,
    logits: [f64; 2],
}

impl HeadTrace {
    fn log_softmax(&self) -> [f64; 2] {
        let m = self.logits[0].max(self.logits[1]);
        let lse = m + ((self.logits[0] - m).exp() + (self.logits[1] - m).exp()).ln();
        [self.logits[0] - lse, self.logits[1] - lse]
    }
}

/// Full model: embedding table (only `<unk>` trainable), encoders, two heads.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub mode: ExplanationMode,
    pub table: EmbeddingTable,
    pub title: LstmParams,
    pub gist: LstmParams,
    /// Present exactly when `mode` is [`ExplanationMode::Lstm`].
    pub explanation: Option<LstmParams>,
    pub relevance: HeadParams,
    pub ordering: HeadParams,
}

/// Gradient buffers shaped like the trainable part of [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub unk: Vec<f64>,
    pub title: LstmParams,
    pub gist: LstmParams,
    pub explanation: Option<LstmParams>,
    pub relevance: HeadParams,
    pub ordering: HeadParams,
}

#[derive(Clone, Copy)]
enum Field {
    Title,
    Gist,
    Explanation,
}

impl ModelParams {
    pub fn init(table: EmbeddingTable, mode: ExplanationMode, hidden: usize, seed: u64) -> Self {
        let d = table.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let title = LstmParams::init(d, &mut rng);
        let gist = LstmParams::init(d, &mut rng);
        let explanation = (mode == ExplanationMode::Lstm).then(|| LstmParams::init(d, &mut rng));
        let relevance = HeadParams::init(d * (1 + mode.per_step()), hidden, &mut rng);
        let ordering = HeadParams::init(d * (1 + 2 * mode.per_step()), hidden, &mut rng);
        ModelParams { mode, table, title, gist, explanation, relevance, ordering }
    }

    /// Zero encoders and heads: every prediction is exactly 0.5.
    pub fn zeros(table: EmbeddingTable, mode: ExplanationMode, hidden: usize) -> Self {
        let d = table.dim();
        ModelParams {
            mode,
            title: LstmParams::zeros(d),
            gist: LstmParams::zeros(d),
            explanation: (mode == ExplanationMode::Lstm).then(|| LstmParams::zeros(d)),
            relevance: HeadParams::zeros(d * (1 + mode.per_step()), hidden),
            ordering: HeadParams::zeros(d * (1 + 2 * mode.per_step()), hidden),
            table,
        }
    }

    pub fn dim(&self) -> usize {
        self.table.dim()
    }

    pub fn hidden(&self) -> usize {
        self.relevance.hidden
    }

    pub fn zero_grads(&self) -> ModelGrads {
        let d = self.dim();
        ModelGrads {
            unk: vec![0.0; d],
            title: LstmParams::zeros(d),
            gist: LstmParams::zeros(d),
            explanation: self.explanation.as_ref().map(|_| LstmParams::zeros(d)),
            relevance: HeadParams::zeros(self.relevance.input, self.relevance.hidden),
            ordering: HeadParams::zeros(self.ordering.input, self.ordering.hidden),
        }
    }

    /// Trainable tensors in checkpoint order: `<unk>`, title LSTM, gist LSTM,
    /// explanation LSTM (if any), relevance head, ordering head.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = vec![self.table.unk.as_slice()];
        out.extend(self.title.tensors());
        out.extend(self.gist.tensors());
        if let Some(e) = &self.explanation {
            out.extend(e.tensors());
        }
        out.extend(self.relevance.tensors());
        out.extend(self.ordering.tensors());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = vec![self.table.unk.as_mut_slice()];
        out.extend(self.title.tensors_mut());
        out.extend(self.gist.tensors_mut());
        if let Some(e) = &mut self.explanation {
            out.extend(e.tensors_mut());
        }
        out.extend(self.relevance.tensors_mut());
        out.extend(self.ordering.tensors_mut());
        out
    }

    fn check_dims(&self) -> Result<()> {
        let d = self.dim();
        let per = self.mode.per_step();
        let ok = self.title.dim == d
            && self.gist.dim == d
            && self.explanation.as_ref().map_or(true, |e| e.dim == d)
            && self.explanation.is_some() == (self.mode == ExplanationMode::Lstm)
            && self.relevance.input == d * (1 + per)
            && self.ordering.input == d * (1 + 2 * per);
        if ok {
            Ok(())
        } else {
            Err(Error::Shape("model dimensions are inconsistent".into()))
        }
    }

    fn encode(&self, field: Field, tokens: &[String]) -> (Vec<f64>, Option<LstmTrace>) {
        let (encoder, limit) = match field {
            Field::Title => (Some(&self.title), MAX_SHORT_TOKENS),
            Field::Gist => (Some(&self.gist), MAX_SHORT_TOKENS),
            Field::Explanation => (self.explanation.as_ref(), MAX_EXPLANATION_TOKENS),
        };
        let tokens = &tokens[..tokens.len().min(limit)];
        match encoder {
            Some(p) => {
                let trace = p.forward(&self.table, tokens);
                (trace.output(), Some(trace))
            }
            None => (encode_bag(&self.table, tokens), None),
        }
    }

    fn backward_field(
        &self,
        field: Field,
        tokens: &[String],
        trace: Option<&LstmTrace>,
        upstream: &[f64],
        grads: &mut ModelGrads,
    ) {
        let limit = match field {
            Field::Explanation => MAX_EXPLANATION_TOKENS,
            _ => MAX_SHORT_TOKENS,
        };
        let tokens = &tokens[..tokens.len().min(limit)];
        match (field, trace) {
            (Field::Title, Some(t)) => t.backward(&self.title, upstream, &mut grads.title, &mut grads.unk),
            (Field::Gist, Some(t)) => t.backward(&self.gist, upstream, &mut grads.gist, &mut grads.unk),
            (Field::Explanation, Some(t)) => {
                let params = self.explanation.as_ref().expect("trace implies LSTM explanation encoder");
                let g = grads.explanation.as_mut().expect("gradient buffer for LSTM explanation encoder");
                t.backward(params, upstream, g, &mut grads.unk)
            }
            (_, None) => bag_backward(&self.table, tokens, upstream, &mut grads.unk),
        }
    }

    /// Segments fed to a head, in concatenation order.
    fn segments<'a>(&self, title: &'a [String], steps: &[(&'a [String], &'a [String])]) -> Vec<(Field, &'a [String])> {
        let mut out = vec![(Field::Title, title)];
        for (gist, expl) in steps {
            out.push((Field::Gist, gist));
            if self.mode != ExplanationMode::None {
                out.push((Field::Explanation, expl));
            }
        }
        out
    }

    /// Forward pass, NLL loss and (optionally) backward pass for one example.
    /// Gradients are scaled by `scale` before accumulation. Returns the loss
    /// and the probability of class 1.
    fn run(
        &self,
        head: &HeadParams,
        segments: &[(Field, &[String])],
        label: bool,
        grads: Option<(&mut ModelGrads, f64, bool)>,
    ) -> (f64, f64) {
        let d = self.dim();
        let mut x = Vec::with_capacity(head.input);
        let mut traces = Vec::with_capacity(segments.len());
        for &(field, tokens) in segments {
            let (emb, trace) = self.encode(field, tokens);
            x.extend(emb);
            traces.push(trace);
        }
        let trace = head.forward(&x);
        let log_p = trace.log_softmax();
        let y = label as usize;
        let loss = -log_p[y];
        let prob = log_p[1].exp();

        if let Some((grads, scale, is_relevance)) = grads {
            let p = [log_p[0].exp(), log_p[1].exp()];
            let dlogits = [
                scale * (p[0] - (y == 0) as u8 as f64),
                scale * (p[1] - (y == 1) as u8 as f64),
            ];
            let head_grads = if is_relevance { &mut grads.relevance } else { &mut grads.ordering };
            let dx = head.backward(&x, &trace, dlogits, head_grads);
            for (k, (&(field, tokens), t)) in segments.iter().zip(&traces).enumerate() {
                self.backward_field(field, tokens, t.as_ref(), &dx[k * d..(k + 1) * d], grads);
            }
        }
        (loss, prob)
    }

    pub fn relevance_probability(&self, title: &[String], gist: &[String], explanation: &[String]) -> Result<f64> {
        self.check_dims()?;
        let segs = self.segments(title, &[(gist, explanation)]);
        let (_, p) = self.run(&self.relevance, &segs, true, None);
        finite_probability(p)
    }

    pub fn order_probability(
        &self,
        title: &[String],
        step1: (&[String], &[String]),
        step2: (&[String], &[String]),
    ) -> Result<f64> {
        self.check_dims()?;
        let segs = self.segments(title, &[step1, step2]);
        let (_, p) = self.run(&self.ordering, &segs, true, None);
        finite_probability(p)
    }

    /// Loss and class-1 probability for a relevance example; accumulates
    /// `scale`-weighted gradients when `grads` is given.
    pub fn relevance_step(&self, ex: &RelevanceExample, grads: Option<(&mut ModelGrads, f64)>) -> (f64, f64) {
        let segs = self.segments(&ex.title, &[(&ex.step.gist, &ex.step.explanation)]);
        self.run(&self.relevance, &segs, ex.label, grads.map(|(g, s)| (g, s, true)))
    }

    pub fn ordering_step(&self, ex: &OrderingExample, grads: Option<(&mut ModelGrads, f64)>) -> (f64, f64) {
        let segs = self.segments(
            &ex.title,
            &[(&ex.step1.gist, &ex.step1.explanation), (&ex.step2.gist, &ex.step2.explanation)],
        );
        self.run(&self.ordering, &segs, ex.label, grads.map(|(g, s)| (g, s, false)))
    }

    /// Title embedding as used by both heads.
    pub fn title_embedding(&self, title: &[String]) -> Vec<f64> {
        self.encode(Field::Title, title).0
    }
}

impl ModelGrads {
    /// Same order as [`ModelParams::tensors`].
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = vec![self.unk.as_slice()];
        out.extend(self.title.tensors());
        out.extend(self.gist.tensors());
        if let Some(e) = &self.explanation {
            out.extend(e.tensors());
        }
        out.extend(self.relevance.tensors());
        out.extend(self.ordering.tensors());
        out
    }
}

fn finite_probability(p: f64) -> Result<f64> {
    if p.is_finite() {
        Ok(p)
    } else {
        Err(Error::Numeric(format!("non-finite prediction {p}")))
    }
}

pub fn predict_relevance(model: &ModelParams, title: &[String], gist: &[String], explanation: &[String]) -> Result<f64> {
    model.relevance_probability(title, gist, explanation)
}

pub fn predict_order(
    model: &ModelParams,
    title: &[String],
    step1_gist: &[String],
    step1_expl: &[String],
    step2_gist: &[String],
    step2_expl: &[String],
) -> Result<f64> {
    model.order_probability(title, (step1_gist, step1_expl), (step2_gist, step2_expl))
}

/// Thresholded prediction at 0.5; a probability of exactly 0.5 is wrong for
/// either label.
pub fn is_correct(prob: f64, label: bool) -> bool {
    if label {
        prob > 0.5
    } else {
        prob < 0.5
    }
}

/// `-ln(prob)` for a true label, `-ln(1 - prob)` for a false one.
pub fn nll_loss(prob: f64, label: bool) -> Result<f64> {
    if !(prob > 0.0 && prob < 1.0) {
        return Err(Error::Domain(format!("probability {prob} outside (0, 1)")));
    }
    Ok(if label { -prob.ln() } else { -(1.0 - prob).ln() })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::corpus::StepText;
    use crate::encoder::WordVectors;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn table(dim: usize) -> EmbeddingTable {
        let words = WordVectors::hashed(dim, &toks("clean the sink first second rinse")).unwrap();
        EmbeddingTable::new(Arc::new(words), 3)
    }

    #[test]
    fn zero_model_predicts_one_half() {
        for mode in [ExplanationMode::Lstm, ExplanationMode::Bag, ExplanationMode::None] {
            let m = ModelParams::zeros(table(4), mode, 5);
            let p = predict_relevance(&m, &toks("clean the sink"), &toks("first rinse"), &toks("rinse it")).unwrap();
            assert_eq!(p, 0.5);
            let q = predict_order(&m, &toks("clean"), &toks("first"), &[], &toks("second"), &toks("x y")).unwrap();
            assert_eq!(q, 0.5);
        }
    }

    #[test]
    fn initialized_model_also_predicts_one_half() {
        let m = ModelParams::init(table(4), ExplanationMode::Lstm, 6, 9);
        let p = predict_relevance(&m, &toks("clean the sink"), &toks("first rinse"), &toks("rinse it")).unwrap();
        assert_eq!(p, 0.5);
    }

    #[test]
    fn hand_set_scalar_model_is_confident() {
        // dim 1, hidden 1: hidden = tanh(w1 . x + b1) with b1 = 2 > 0, then
        // logits (-10 a, +10 a) give p = 1 / (1 + e^{-20 a}).
        let mut m = ModelParams::zeros(table(1), ExplanationMode::None, 1);
        m.relevance.b1[0] = 2.0;
        m.relevance.w2 = vec![-10.0, 10.0];
        let a = 2.0f64.tanh();
        let expected = 1.0 / (1.0 + (-20.0 * a).exp());
        let p = predict_relevance(&m, &toks("clean"), &toks("rinse"), &[]).unwrap();
        assert!((p - expected).abs() < 1e-15);
        assert!(p > 0.99);
        assert_eq!(p, predict_relevance(&m, &toks("clean"), &toks("rinse"), &[]).unwrap());
    }

    #[test]
    fn swapped_order_predictions_stay_in_range() {
        let m = ModelParams::init(table(3), ExplanationMode::Bag, 4, 2);
        let mut m2 = m.clone();
        m2.ordering.w2.iter_mut().enumerate().for_each(|(i, w)| *w = (i as f64 - 2.0) * 0.7);
        let (a, b) = (toks("first rinse"), toks("second clean"));
        let p = predict_order(&m2, &toks("sink"), &a, &a, &b, &b).unwrap();
        let q = predict_order(&m2, &toks("sink"), &b, &b, &a, &a).unwrap();
        assert!(p > 0.0 && p < 1.0 && q > 0.0 && q < 1.0);
    }

    #[test]
    fn nll_values() {
        assert!((nll_loss(0.5, true).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((nll_loss(0.5, false).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(nll_loss(1.0 - 1e-12, true).unwrap() < 1e-11);
        assert!((nll_loss(0.9, false).unwrap() - 2.302585092994046).abs() < 1e-12);
        assert!(matches!(nll_loss(0.0, true), Err(Error::Domain(_))));
        assert!(matches!(nll_loss(1.0, false), Err(Error::Domain(_))));
        assert!(nll_loss(f64::NAN, false).is_err());
    }

    #[test]
    fn step_loss_matches_nll_of_probability() {
        let mut m = ModelParams::init(table(3), ExplanationMode::Lstm, 4, 5);
        m.relevance.w2.iter_mut().enumerate().for_each(|(i, w)| *w = 0.3 * i as f64 - 0.5);
        let ex = RelevanceExample {
            title: toks("clean the sink"),
            step: StepText { gist: toks("first rinse"), explanation: toks("rinse unknownword") },
            label: false,
        };
        let (loss, p) = m.relevance_step(&ex, None);
        assert!((loss - nll_loss(p, false).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn tensor_views_agree() {
        for mode in [ExplanationMode::Lstm, ExplanationMode::Bag, ExplanationMode::None] {
            let m = ModelParams::init(table(3), mode, 4, 1);
            let g = m.zero_grads();
            let a: Vec<usize> = m.tensors().iter().map(|t| t.len()).collect();
            let b: Vec<usize> = g.tensors().iter().map(|t| t.len()).collect();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("bag".parse::<ExplanationMode>().unwrap(), ExplanationMode::Bag);
        assert!("gru".parse::<ExplanationMode>().is_err());
        for m in [ExplanationMode::Lstm, ExplanationMode::Bag, ExplanationMode::None] {
            assert_eq!(ExplanationMode::from_tag(m.tag()), Some(m));
        }
    }
}
