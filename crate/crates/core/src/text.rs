//! Tokenization, vocabulary and index encoding of titles.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

pub const DEFAULT_MAX_SEQ_LEN: usize = 30;

/// Lowercases and splits on anything that is not alphanumeric. Runs of
/// punctuation and whitespace produce no tokens.
pub fn tokenize(title: &str) -> Vec<String> {
    title
        .to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    min_count: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VocabFile {
    tokens: Vec<String>,
    min_count: usize,
}

impl Vocabulary {
    /// Ranks tokens by descending count, then lexicographically; drops tokens
    /// seen fewer than `min_count` times and anything past `max_size`
    /// (which counts PAD and UNK).
    pub fn build<S: AsRef<str>>(corpus: &[Vec<S>], max_size: Option<usize>, min_count: usize) -> Self {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for doc in corpus {
            for t in doc {
                *counts.entry(t.as_ref()).or_default() += 1;
            }
        }
        let mut ranked: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|&(t, c)| c >= min_count && t != PAD_TOKEN && t != UNK_TOKEN)
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let mut tokens = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        let room = max_size.map_or(usize::MAX, |m| m.saturating_sub(2));
        tokens.extend(ranked.into_iter().take(room).map(|(t, _)| t.to_string()));
        Vocabulary::from_tokens(tokens, min_count).expect("built vocabulary is well-formed")
    }

    /// Rebuilds a vocabulary from its ordered token list (PAD and UNK first).
    pub fn from_tokens(tokens: Vec<String>, min_count: usize) -> Result<Self> {
        if tokens.len() < 2 || tokens[PAD] != PAD_TOKEN || tokens[UNK] != UNK_TOKEN {
            return Err(Error::Data(format!(
                "vocabulary must start with {PAD_TOKEN:?}, {UNK_TOKEN:?}"
            )));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Data(format!("duplicate vocabulary token {t:?}")));
            }
        }
        Ok(Vocabulary {
            tokens,
            index,
            min_count,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn min_count(&self) -> usize {
        self.min_count
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn index_of(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&VocabFile {
            tokens: self.tokens.clone(),
            min_count: self.min_count,
        })
        .expect("vocabulary serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: VocabFile =
            serde_json::from_str(text).map_err(|e| Error::Data(format!("vocabulary json: {e}")))?;
        Vocabulary::from_tokens(file.tokens, file.min_count)
    }

    pub(crate) fn to_value(&self) -> serde_json::Value {
        serde_json::json!({ "tokens": self.tokens, "min_count": self.min_count })
    }

    pub(crate) fn from_value(v: serde_json::Value) -> Result<Self> {
        let file: VocabFile = serde_json::from_value(v)
            .map_err(|e| Error::ModelFormat(format!("vocabulary: {e}")))?;
        Vocabulary::from_tokens(file.tokens, file.min_count)
            .map_err(|e| Error::ModelFormat(e.to_string()))
    }
}

/// Vocabulary indices for one title, unpadded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    indices: Vec<usize>,
}

impl TokenSequence {
    pub fn new(indices: Vec<usize>, vocab_size: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptyTitle);
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= vocab_size || i == PAD) {
            return Err(Error::Data(format!(
                "token index {bad} invalid for vocabulary of {vocab_size}"
            )));
        }
        Ok(TokenSequence { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Indices right-padded with PAD up to `width`; longer sequences are
    /// cut to `width`.
    pub fn padded(&self, width: usize) -> Vec<usize> {
        let mut v: Vec<usize> = self.indices.iter().copied().take(width).collect();
        v.resize(width, PAD);
        v
    }

    pub fn reversed(&self) -> TokenSequence {
        TokenSequence {
            indices: self.indices.iter().rev().copied().collect(),
        }
    }
}

/// Tokenizes and maps to indices, truncating to the first `max_seq_len`
/// tokens. Returns the token strings alongside the sequence.
pub fn encode_with_tokens(
    title: &str,
    vocab: &Vocabulary,
    max_seq_len: usize,
) -> Result<(Vec<String>, TokenSequence)> {
    if max_seq_len == 0 {
        return Err(Error::Config("max_seq_len must be at least 1".into()));
    }
    let mut tokens = tokenize(title);
    if tokens.is_empty() {
        return Err(Error::EmptyTitle);
    }
    tokens.truncate(max_seq_len);
    let indices = tokens.iter().map(|t| vocab.index_of(t)).collect();
    Ok((tokens, TokenSequence { indices }))
}

pub fn encode(title: &str, vocab: &Vocabulary, max_seq_len: usize) -> Result<TokenSequence> {
    encode_with_tokens(title, vocab, max_seq_len).map(|(_, s)| s)
}

pub fn decode(seq: &TokenSequence, vocab: &Vocabulary) -> Vec<String> {
    seq.indices
        .iter()
        .map(|&i| vocab.token(i).unwrap_or(UNK_TOKEN).to_string())
        .collect()
}
