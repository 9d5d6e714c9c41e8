//! Instruction corpora: ingestion, tokenization, splitting and example sampling.
//!
//! Articles arrive as JSON lines (one article per line):
//!
//! ```text
//! {"id": "...", "title": "...", "sections": [{"title": null, "steps": [{"gist": "...", "explanation": "..."}]}]}
//! ```
//!
//! A flat article is a single untitled section and becomes one [`Task`]. Every
//! titled section of a hierarchical article becomes its own task, titled by the
//! section title alone.

mod sample;
mod synthetic;

pub use sample::{sample_ordering, sample_relevance, OrderingExample, RelevanceExample, StepText};
pub use synthetic::{gen_synthetic, ordinal_marker};

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type Tokens = Vec<String>;

/// Lowercases, splits on whitespace and detaches leading/trailing punctuation
/// as one token per character. Interior punctuation (`you've`, `2-3`) stays.
pub fn tokenize(text: &str) -> Tokens {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let lower = chunk.to_lowercase();
        let chars: Vec<char> = lower.chars().collect();
        let start = chars.iter().position(|c| c.is_alphanumeric());
        let Some(start) = start else {
            out.extend(chars.iter().map(|c| c.to_string()));
            continue;
        };
        let end = chars.iter().rposition(|c| c.is_alphanumeric()).unwrap() + 1;
        out.extend(chars[..start].iter().map(|c| c.to_string()));
        out.push(chars[start..end].iter().collect());
        out.extend(chars[end..].iter().map(|c| c.to_string()));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub gist_tokens: Tokens,
    pub explanation_tokens: Tokens,
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub task_id: String,
    pub title_tokens: Tokens,
    pub steps: Vec<Step>,
}

impl Task {
    pub fn contains_step(&self, gist: &[String], explanation: &[String]) -> bool {
        self.steps
            .iter()
            .any(|s| s.gist_tokens == gist && s.explanation_tokens == explanation)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub tasks: Vec<Task>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitCorpus {
    pub train: Corpus,
    pub validation: Corpus,
    pub test: Corpus,
}

/// One line of the corpus JSONL file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Article {
    pub id: String,
    pub title: String,
    pub sections: Vec<Section>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub title: Option<String>,
    pub steps: Vec<ArticleStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArticleStep {
    pub gist: String,
    pub explanation: String,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn step_count(&self) -> usize {
        self.tasks.iter().map(|t| t.steps.len()).sum()
    }

    /// Flattens articles into tasks, rejecting duplicate task ids.
    pub fn from_articles(articles: &[Article]) -> Result<Self> {
        let mut tasks = Vec::new();
        let mut seen = HashSet::new();
        for article in articles {
            for task in flatten_article(article)? {
                if !seen.insert(task.task_id.clone()) {
                    return Err(Error::Ingest(format!("duplicate task id `{}`", task.task_id)));
                }
                tasks.push(task);
            }
        }
        Ok(Corpus { tasks })
    }

    /// Every task as a flat article. Token lists are joined with single
    /// spaces, which re-tokenize to the same tokens.
    pub fn to_articles(&self) -> Vec<Article> {
        self.tasks
            .iter()
            .map(|task| Article {
                id: task.task_id.clone(),
                title: task.title_tokens.join(" "),
                sections: vec![Section {
                    title: None,
                    steps: task
                        .steps
                        .iter()
                        .map(|s| ArticleStep {
                            gist: s.gist_tokens.join(" "),
                            explanation: s.explanation_tokens.join(" "),
                        })
                        .collect(),
                }],
            })
            .collect()
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for article in self.to_articles() {
            serde_json::to_writer(&mut w, &article)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    /// Distinct tokens over titles, gists and explanations in first-seen order.
    pub fn vocabulary(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        let mut vocab = Vec::new();
        for task in &self.tasks {
            let step_tokens = task
                .steps
                .iter()
                .flat_map(|s| s.gist_tokens.iter().chain(&s.explanation_tokens));
            for tok in task.title_tokens.iter().chain(step_tokens) {
                if seen.insert(tok.as_str()) {
                    vocab.push(tok.clone());
                }
            }
        }
        vocab
    }
}

fn flatten_article(article: &Article) -> Result<Vec<Task>> {
    let non_empty: Vec<(usize, &Section)> = article
        .sections
        .iter()
        .enumerate()
        .filter(|(_, s)| !s.steps.is_empty())
        .collect();
    let single_flat = non_empty.len() == 1 && non_empty[0].1.title.is_none();

    let mut tasks = Vec::with_capacity(non_empty.len());
    for (index, section) in non_empty {
        let (task_id, title) = if single_flat {
            (article.id.clone(), article.title.as_str())
        } else {
            let title = section.title.as_deref().unwrap_or(&article.title);
            (format!("{}#{}", article.id, index), title)
        };
        let title_tokens = tokenize(title);
        if title_tokens.is_empty() {
            return Err(Error::Ingest(format!("task `{task_id}` has an empty title")));
        }
        let mut steps = Vec::with_capacity(section.steps.len());
        for (position, step) in section.steps.iter().enumerate() {
            let gist_tokens = tokenize(&step.gist);
            if gist_tokens.is_empty() {
                return Err(Error::Ingest(format!(
                    "task `{task_id}` step {position} has an empty gist"
                )));
            }
            steps.push(Step {
                gist_tokens,
                explanation_tokens: tokenize(&step.explanation),
                position,
            });
        }
        tasks.push(Task { task_id, title_tokens, steps });
    }
    Ok(tasks)
}

pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let file = File::open(path)?;
    let mut articles = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let article: Article = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        articles.push(article);
    }
    Corpus::from_articles(&articles)
}

/// Seeded shuffle, then floor the validation and test counts and give the
/// remainder to training. Each part keeps the input's relative task order.
pub fn split_corpus(corpus: &Corpus, ratios: (f64, f64, f64), seed: u64) -> Result<SplitCorpus> {
    let (r_train, r_val, r_test) = ratios;
    if !(r_train > 0.0 && r_val > 0.0 && r_test > 0.0) {
        return Err(Error::Split(format!("ratios must be positive, got {ratios:?}")));
    }
    if (r_train + r_val + r_test - 1.0).abs() > 1e-9 {
        return Err(Error::Split(format!("ratios must sum to 1, got {ratios:?}")));
    }
    let n = corpus.len();
    if n < 3 {
        return Err(Error::Split(format!("need at least 3 tasks, got {n}")));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = (n as f64 * r_val).floor() as usize;
    let n_test = (n as f64 * r_test).floor() as usize;
    let n_train = n - n_val - n_test;

    let take = |idx: &[usize]| {
        let mut idx = idx.to_vec();
        idx.sort_unstable();
        Corpus {
            tasks: idx.into_iter().map(|i| corpus.tasks[i].clone()).collect(),
        }
    };
    Ok(SplitCorpus {
        train: take(&order[..n_train]),
        validation: take(&order[n_train..n_train + n_val]),
        test: take(&order[n_train + n_val..]),
    })
}
