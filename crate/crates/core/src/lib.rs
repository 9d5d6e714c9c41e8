//! Task and step embeddings learned from instruction corpora.
//!
//! The crate covers the full pipeline: ingesting articles into tasks
//! ([`corpus`]), encoding token sequences ([`encoder`]), classifier heads with
//! training and checkpoints ([`heads`]), exact recovery of a consistent partial
//! step order from pairwise predictions ([`ordersolve`]), evaluation metrics
//! ([`eval`]) and the command-line driver ([`cli`]).
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

pub mod cli;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod heads;
pub mod ordersolve;

pub use error::{Error, Result};
