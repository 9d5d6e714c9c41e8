//! Sequence encoders over pretrained word vectors.
//!
//! Two encoders share the [`EmbeddingTable`]: the mean of the word vectors
//! ("bag") and an LSTM whose final hidden state is the embedding. Both map an
//! empty sequence to the zero vector. Only the `<unk>` vector of the table is
//! trainable.

mod lstm;
mod table;

pub use lstm::{Gate, GateParams, LstmParams, LstmTrace, GATES};
pub use table::{load_word_vectors, EmbeddingTable, Lookup, WordVectors};

use crate::{Error, Result};

/// Token limit for titles and gists.
pub const MAX_SHORT_TOKENS: usize = 30;
/// Token limit for explanations.
pub const MAX_EXPLANATION_TOKENS: usize = 100;

pub type SequenceEmbedding = Vec<f64>;

#[derive(Debug, Clone, PartialEq)]
pub enum SequenceEncoder {
    Bag,
    Recurrent(LstmParams),
}

impl SequenceEncoder {
    pub fn encode(&self, table: &EmbeddingTable, tokens: &[String]) -> SequenceEmbedding {
        match self {
            SequenceEncoder::Bag => encode_bag(table, tokens),
            SequenceEncoder::Recurrent(p) => p.forward(table, tokens).output(),
        }
    }
}

/// Gradients of `upstream · embedding` for one encoder call.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderGradients {
    /// `None` for the bag encoder, which has no parameters.
    pub params: Option<LstmParams>,
    pub unk: Vec<f64>,
}

pub fn encode_bag(table: &EmbeddingTable, tokens: &[String]) -> SequenceEmbedding {
    let mut out = vec![0.0; table.dim()];
    if tokens.is_empty() {
        return out;
    }
    for tok in tokens {
        for (o, v) in out.iter_mut().zip(table.lookup(tok)) {
            *o += v;
        }
    }
    let k = tokens.len() as f64;
    out.iter_mut().for_each(|o| *o /= k);
    out
}

/// Adds the bag encoder's `<unk>` gradient for `upstream` into `unk_grad`.
pub fn bag_backward(table: &EmbeddingTable, tokens: &[String], upstream: &[f64], unk_grad: &mut [f64]) {
    let unknown = tokens.iter().filter(|t| table.words.row(t).is_none()).count();
    if unknown == 0 {
        return;
    }
    let share = unknown as f64 / tokens.len() as f64;
    for (u, g) in unk_grad.iter_mut().zip(upstream) {
        *u += share * g;
    }
}

pub fn encode_recurrent(params: &LstmParams, table: &EmbeddingTable, tokens: &[String]) -> Result<SequenceEmbedding> {
    if params.dim != table.dim() {
        return Err(Error::Shape(format!(
            "encoder dim {} does not match word dim {}",
            params.dim,
            table.dim()
        )));
    }
    if !params.is_finite() || !table.unk.iter().all(|v| v.is_finite()) {
        return Err(Error::Numeric("non-finite encoder parameter".into()));
    }
    let out = params.forward(table, tokens).output();
    if !out.iter().all(|v| v.is_finite()) {
        return Err(Error::Numeric("non-finite encoder output".into()));
    }
    Ok(out)
}

pub fn encoder_gradients(
    encoder: &SequenceEncoder,
    table: &EmbeddingTable,
    tokens: &[String],
    upstream: &[f64],
) -> Result<EncoderGradients> {
    let d = table.dim();
    if upstream.len() != d {
        return Err(Error::Shape(format!("upstream has {} entries, expected {d}", upstream.len())));
    }
    let mut unk = vec![0.0; d];
    match encoder {
        SequenceEncoder::Bag => {
            bag_backward(table, tokens, upstream, &mut unk);
            Ok(EncoderGradients { params: None, unk })
        }
        SequenceEncoder::Recurrent(p) => {
            if p.dim != d {
                return Err(Error::Shape(format!("encoder dim {} does not match word dim {d}", p.dim)));
            }
            let mut grads = LstmParams::zeros(d);
            p.forward(table, tokens).backward(p, upstream, &mut grads, &mut unk);
            Ok(EncoderGradients { params: Some(grads), unk })
        }
    }
}
