//! Examples, corpora and the file formats they travel in.

mod jsonl;
mod lexicon;
mod subsample;
mod synthetic;
mod towe;
mod transforms;

pub use jsonl::{load_jsonl, parse_jsonl, save_jsonl, write_jsonl};
pub use lexicon::{AspectGroup, Lexicon, WordRole};
pub use subsample::subsample_annotations;
pub use synthetic::{generate_synthetic, SyntheticSpec};
pub use towe::{import_towe, parse_towe, ToweImport};
pub use transforms::{add_diff, group_by_sentence, rev_non, RevNonOutcome};

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("example {id}: {message}")]
    Invalid { id: String, message: String },
    #[error("lexicon: {0}")]
    Lexicon(String),
    #[error("transform: {0}")]
    Transform(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Sentiment polarity of an aspect. Class indices follow declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarity {
    #[serde(rename = "POS")]
    Positive,
    #[serde(rename = "NEG")]
    Negative,
    #[serde(rename = "NEU")]
    Neutral,
}

impl Polarity {
    pub const ALL: [Polarity; 3] = [Polarity::Positive, Polarity::Negative, Polarity::Neutral];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Positive and negative swap; neutral has no opposite.
    pub fn opposite(self) -> Option<Self> {
        match self {
            Polarity::Positive => Some(Polarity::Negative),
            Polarity::Negative => Some(Polarity::Positive),
            Polarity::Neutral => None,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Polarity::Positive => "POS",
            Polarity::Negative => "NEG",
            Polarity::Neutral => "NEU",
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Polarity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pos" | "positive" | "p" | "1" => Ok(Polarity::Positive),
            "neg" | "negative" | "n" | "-1" => Ok(Polarity::Negative),
            "neu" | "neutral" | "o" | "0" => Ok(Polarity::Neutral),
            other => Err(format!("unknown polarity `{other}`")),
        }
    }
}

/// One (sentence, aspect) pair.
///
/// `opinion_indices` may be present on an unannotated example: the mask is
/// then hidden from training and only used when scoring explanations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub tokens: Vec<String>,
    pub aspect_span: [usize; 2],
    pub polarity: Polarity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub opinion_indices: Option<Vec<usize>>,
    pub annotated: bool,
}

impl Example {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn aspect_range(&self) -> std::ops::Range<usize> {
        self.aspect_span[0]..self.aspect_span[1]
    }

    pub fn is_aspect(&self, i: usize) -> bool {
        self.aspect_range().contains(&i)
    }

    pub fn aspect_tokens(&self) -> &[String] {
        &self.tokens[self.aspect_range()]
    }

    /// Gold opinion indices, whether or not they are visible to training.
    pub fn gold_opinions(&self) -> &[usize] {
        self.opinion_indices.as_deref().unwrap_or(&[])
    }

    /// 0/1 mask visible to the training loss; `None` when unannotated.
    pub fn training_mask(&self) -> Option<Vec<f64>> {
        if !self.annotated {
            return None;
        }
        self.opinion_indices.as_ref().map(|idx| {
            let mut mask = vec![0.0; self.tokens.len()];
            for &i in idx {
                mask[i] = 1.0;
            }
            mask
        })
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let fail = |message: String| {
            Err(DataError::Invalid {
                id: self.id.clone(),
                message,
            })
        };
        let [start, end] = self.aspect_span;
        if self.tokens.is_empty() {
            return fail("empty token list".into());
        }
        if start >= end || end > self.tokens.len() {
            return fail(format!(
                "aspect span [{start}, {end}) invalid for {} tokens",
                self.tokens.len()
            ));
        }
        if let Some(idx) = &self.opinion_indices {
            if idx.iter().any(|&i| i >= self.tokens.len()) {
                return fail("opinion index out of range".into());
            }
            if idx.windows(2).any(|w| w[0] >= w[1]) {
                return fail("opinion indices must be strictly increasing".into());
            }
        }
        if self.annotated && self.opinion_indices.as_ref().map_or(true, |v| v.is_empty()) {
            return fail("annotated example without opinion words".into());
        }
        Ok(())
    }
}

pub const UNK_TOKEN: &str = "<unk>";
pub const UNK_ID: usize = 0;

/// Token to id map with id 0 reserved for unknown tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::from_tokens(Vec::<String>::new())
    }
}

impl Vocabulary {
    /// Builds from tokens in first-seen order; duplicates and the reserved
    /// unknown token are ignored.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut vocab = Self {
            tokens: vec![UNK_TOKEN.to_string()],
            index: HashMap::from([(UNK_TOKEN.to_string(), UNK_ID)]),
        };
        for t in tokens {
            vocab.insert(t.as_ref());
        }
        vocab
    }

    pub fn build<'a>(examples: impl IntoIterator<Item = &'a Example>) -> Self {
        Self::from_tokens(examples.into_iter().flat_map(|e| e.tokens.iter()))
    }

    fn insert(&mut self, token: &str) {
        if !self.index.contains_key(token) {
            self.index.insert(token.to_string(), self.tokens.len());
            self.tokens.push(token.to_string());
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() <= 1
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

impl Serialize for Vocabulary {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.tokens.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vocabulary {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let tokens = Vec::<String>::deserialize(d)?;
        if tokens.first().map(String::as_str) != Some(UNK_TOKEN) {
            return Err(serde::de::Error::custom("vocabulary must start with <unk>"));
        }
        Ok(Self::from_tokens(tokens.into_iter().skip(1)))
    }
}

/// Named splits plus the vocabulary built from the training split.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub splits: BTreeMap<String, Vec<Example>>,
    pub vocabulary: Vocabulary,
}

impl Corpus {
    pub fn new(splits: BTreeMap<String, Vec<Example>>) -> Self {
        let vocabulary = Vocabulary::build(splits.get("train").into_iter().flatten());
        Self { splits, vocabulary }
    }

    pub fn split(&self, name: &str) -> Option<&[Example]> {
        self.splits.get(name).map(Vec::as_slice)
    }

    pub fn train(&self) -> &[Example] {
        self.split("train").unwrap_or(&[])
    }
}

/// Lowercased whitespace tokenization.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_lowercase).collect()
}
