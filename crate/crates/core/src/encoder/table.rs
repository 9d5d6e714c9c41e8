use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::{Error, Result};

/// Frozen pretrained word vectors. Shared between model snapshots; never
/// receives gradient.
#[derive(Debug, PartialEq)]
pub struct WordVectors {
    dim: usize,
    tokens: Vec<String>,
    vocab: HashMap<String, usize>,
    matrix: Vec<f64>,
}

impl WordVectors {
    pub fn new(dim: usize, rows: Vec<(String, Vec<f64>)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Shape("word vector dimension must be positive".into()));
        }
        let mut tokens = Vec::with_capacity(rows.len());
        let mut vocab = HashMap::with_capacity(rows.len());
        let mut matrix = Vec::with_capacity(rows.len() * dim);
        for (token, vec) in rows {
            if vec.len() != dim {
                return Err(Error::Shape(format!(
                    "vector for `{token}` has {} components, expected {dim}",
                    vec.len()
                )));
            }
            if vocab.insert(token.clone(), tokens.len()).is_some() {
                return Err(Error::Ingest(format!("duplicate word vector for `{token}`")));
            }
            tokens.push(token);
            matrix.extend(vec);
        }
        Ok(WordVectors { dim, tokens, vocab, matrix })
    }

    /// Pseudo-random vectors keyed by token text alone, uniform in (-1, 1).
    /// The same token always gets the same vector for a given `dim`, so any
    /// vocabulary can be covered without a vectors file.
    pub fn hashed(dim: usize, tokens: &[String]) -> Result<Self> {
        let rows = tokens
            .iter()
            .map(|t| {
                let digest = Sha256::digest(t.as_bytes());
                let mut seed = [0u8; 32];
                seed.copy_from_slice(&digest);
                let mut rng = ChaCha8Rng::from_seed(seed);
                (t.clone(), (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
            })
            .collect();
        Self::new(dim, rows)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn row(&self, token: &str) -> Option<&[f64]> {
        self.vocab
            .get(token)
            .map(|&i| &self.matrix[i * self.dim..(i + 1) * self.dim])
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Writes the GloVe text format read by [`load_word_vectors`]. Values use
    /// the shortest round-trip representation, so reloading is exact.
    pub fn write_text(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for (i, tok) in self.tokens.iter().enumerate() {
            w.write_all(tok.as_bytes())?;
            for v in &self.matrix[i * self.dim..(i + 1) * self.dim] {
                write!(w, " {v}")?;
            }
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Identifies the vocabulary and its vectors; stored in checkpoints.
    pub fn reference_hash(&self) -> u64 {
        let mut h = Sha256::new();
        h.update((self.dim as u64).to_le_bytes());
        for (i, tok) in self.tokens.iter().enumerate() {
            h.update((tok.len() as u64).to_le_bytes());
            h.update(tok.as_bytes());
            for v in &self.matrix[i * self.dim..(i + 1) * self.dim] {
                h.update(v.to_le_bytes());
            }
        }
        let digest = h.finalize();
        u64::from_le_bytes(digest[..8].try_into().unwrap())
    }
}

/// Result of resolving one token against the table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lookup<'a> {
    Known(&'a [f64]),
    Unknown,
}

/// Frozen word vectors plus the learned `<unk>` vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub words: Arc<WordVectors>,
    pub unk: Vec<f64>,
}

impl EmbeddingTable {
    /// `<unk>` starts uniform in (-0.05, 0.05) from `seed`.
    pub fn new(words: Arc<WordVectors>, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let unk = (0..words.dim()).map(|_| rng.gen_range(-0.05..0.05)).collect();
        EmbeddingTable { words, unk }
    }

    pub fn dim(&self) -> usize {
        self.words.dim()
    }

    pub fn resolve(&self, token: &str) -> Lookup<'_> {
        match self.words.row(token) {
            Some(v) => Lookup::Known(v),
            None => Lookup::Unknown,
        }
    }

    /// Total: unknown tokens resolve to the `<unk>` vector.
    pub fn lookup(&self, token: &str) -> &[f64] {
        self.words.row(token).unwrap_or(&self.unk)
    }
}

/// Reads GloVe-format text: `token v1 ... v_dim` per line.
pub fn load_word_vectors(path: &Path, dim: usize, seed: u64) -> Result<EmbeddingTable> {
    let file = File::open(path)?;
    let mut rows = Vec::new();
    let mut seen = HashMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else { continue };
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let values = fields
            .map(|f| f.parse::<f64>().map_err(|e| parse_err(format!("bad float `{f}`: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != dim {
            return Err(parse_err(format!("expected {dim} values, found {}", values.len())));
        }
        if let Some(prev) = seen.insert(token.to_string(), i + 1) {
            return Err(parse_err(format!("duplicate token `{token}` (first on line {prev})")));
        }
        rows.push((token.to_string(), values));
    }
    Ok(EmbeddingTable::new(Arc::new(WordVectors::new(dim, rows)?), seed))
}
