//! Multinomial naive Bayes for sentence relevance.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use crate::text::word_tokens;

#[derive(Debug, Error)]
pub enum NbError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("training line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("training data has no {0} examples")]
    MissingClass(&'static str),
    #[error("smoothing must be positive, got {0}")]
    BadAlpha(f64),
}

/// Two-class (relevant / irrelevant) multinomial model.
#[derive(Debug, Clone, PartialEq)]
pub struct NbModel {
    alpha: f64,
    vocab: BTreeMap<String, [u64; 2]>,
    totals: [u64; 2],
    docs: [u64; 2],
}

const RELEVANT: usize = 0;
const IRRELEVANT: usize = 1;

impl NbModel {
    pub fn train<'a, I>(samples: I, alpha: f64) -> Result<Self, NbError>
    where
        I: IntoIterator<Item = (bool, &'a str)>,
    {
        if alpha.is_nan() || alpha <= 0.0 {
            return Err(NbError::BadAlpha(alpha));
        }
        let mut model = NbModel {
            alpha,
            vocab: BTreeMap::new(),
            totals: [0; 2],
            docs: [0; 2],
        };
        for (relevant, sentence) in samples {
            let class = if relevant { RELEVANT } else { IRRELEVANT };
            model.docs[class] += 1;
            for tok in word_tokens(sentence) {
                model.vocab.entry(tok.norm).or_default()[class] += 1;
                model.totals[class] += 1;
            }
        }
        if model.docs[RELEVANT] == 0 {
            return Err(NbError::MissingClass("relevant"));
        }
        if model.docs[IRRELEVANT] == 0 {
            return Err(NbError::MissingClass("irrelevant"));
        }
        Ok(model)
    }

    /// Parse `relevant\t<sentence>` / `irrelevant\t<sentence>` lines.
    pub fn parse_training(src: &str, alpha: f64) -> Result<Self, NbError> {
        let mut samples = Vec::new();
        for (i, line) in src.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (label, sentence) = line.split_once('\t').ok_or_else(|| NbError::Malformed {
                line: i + 1,
                msg: "expected <label><TAB><sentence>".into(),
            })?;
            let relevant = match label.trim() {
                "relevant" => true,
                "irrelevant" => false,
                other => {
                    return Err(NbError::Malformed {
                        line: i + 1,
                        msg: format!("unknown label {other:?}"),
                    })
                }
            };
            samples.push((relevant, sentence));
        }
        Self::train(samples, alpha)
    }

    pub fn load(path: &Path, alpha: f64) -> Result<Self, NbError> {
        let src = std::fs::read_to_string(path).map_err(|source| NbError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse_training(&src, alpha)
    }

    /// Unnormalized log posteriors `[relevant, irrelevant]`. Tokens outside the
    /// vocabulary are ignored.
    pub fn log_scores(&self, sentence: &str) -> [f64; 2] {
        let v = self.vocab.len() as f64;
        let n_docs = (self.docs[0] + self.docs[1]) as f64;
        let mut scores = [0.0; 2];
        for (class, score) in scores.iter_mut().enumerate() {
            *score = (self.docs[class] as f64 / n_docs).ln();
            let denom = self.totals[class] as f64 + self.alpha * v;
            for tok in word_tokens(sentence) {
                if let Some(counts) = self.vocab.get(&tok.norm) {
                    *score += ((counts[class] as f64 + self.alpha) / denom).ln();
                }
            }
        }
        scores
    }

    pub fn is_relevant(&self, sentence: &str) -> bool {
        let s = self.log_scores(sentence);
        s[RELEVANT] > s[IRRELEVANT]
    }

    pub fn vocabulary_size(&self) -> usize {
        self.vocab.len()
    }
}

/// Second-stage gate. Sentences without tokens never pass; without a model all others pass.
pub fn relevance_stage(sentence: &str, model: Option<&NbModel>) -> bool {
    if word_tokens(sentence).is_empty() {
        return false;
    }
    model.is_none_or(|m| m.is_relevant(sentence))
}
