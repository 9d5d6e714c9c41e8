//! Binary checkpoint format.
//!
//! ```text
//! magic      5 bytes   "PROC1"
//! dim        u64 LE
//! hidden     u64 LE
//! mode       u8        0 = lstm, 1 = bag, 2 = none
//! vocab      u64 LE    WordVectors::reference_hash of the frozen table
//! tensors    f64 LE    ModelParams::tensors order, no padding
//! ```
//!
//! The frozen word vectors are not stored; loading needs the same table.

use std::path::Path;
use std::sync::Arc;

use super::{ExplanationMode, ModelParams};
use crate::encoder::{EmbeddingTable, WordVectors};
use crate::{Error, Result};

pub const MAGIC: &[u8; 5] = b"PROC1";
const HEADER_LEN: usize = 5 + 8 + 8 + 1 + 8;

pub fn write_checkpoint(model: &ModelParams) -> Vec<u8> {
    let tensors = model.tensors();
    let n: usize = tensors.iter().map(|t| t.len()).sum();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * n);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(model.dim() as u64).to_le_bytes());
    out.extend_from_slice(&(model.hidden() as u64).to_le_bytes());
    out.push(model.mode.tag());
    out.extend_from_slice(&model.table.words.reference_hash().to_le_bytes());
    for t in tensors {
        for v in t {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn read_checkpoint(bytes: &[u8], words: Arc<WordVectors>) -> Result<ModelParams> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Checkpoint(format!("truncated header ({} bytes)", bytes.len())));
    }
    if &bytes[..5] != MAGIC {
        return Err(Error::Checkpoint("bad magic or unsupported version".into()));
    }
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let dim = u64_at(5) as usize;
    let hidden = u64_at(13) as usize;
    let mode = ExplanationMode::from_tag(bytes[21])
        .ok_or_else(|| Error::Checkpoint(format!("unknown mode tag {}", bytes[21])))?;
    let hash = u64_at(22);

    if dim != words.dim() {
        return Err(Error::Checkpoint(format!(
            "checkpoint has dim {dim}, word vectors have dim {}",
            words.dim()
        )));
    }
    if hash != words.reference_hash() {
        return Err(Error::Checkpoint("checkpoint was trained against different word vectors".into()));
    }
    if hidden == 0 {
        return Err(Error::Checkpoint("hidden size is zero".into()));
    }

    let mut model = ModelParams::zeros(EmbeddingTable { unk: vec![0.0; dim], words }, mode, hidden);
    let expected: usize = model.tensors().iter().map(|t| t.len()).sum();
    let body = &bytes[HEADER_LEN..];
    if body.len() != expected * 8 {
        return Err(Error::Checkpoint(format!(
            "expected {} tensor bytes, found {}",
            expected * 8,
            body.len()
        )));
    }
    let mut values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    for t in model.tensors_mut() {
        for v in t.iter_mut() {
            *v = values.next().unwrap();
        }
    }
    Ok(model)
}

pub fn save_checkpoint(model: &ModelParams, path: &Path) -> Result<()> {
    std::fs::write(path, write_checkpoint(model))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path, words: Arc<WordVectors>) -> Result<ModelParams> {
    read_checkpoint(&std::fs::read(path)?, words)
}
