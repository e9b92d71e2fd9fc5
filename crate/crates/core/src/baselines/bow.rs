use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::text::{TokenSequence, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BowMode {
    #[default]
    Counts,
    Binary,
}

/// Sparse token-count vector over a vocabulary; entries sorted by index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BowVector {
    dim: usize,
    entries: Vec<(usize, u32)>,
}

impl BowVector {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, u32)] {
        &self.entries
    }

    pub fn count(&self, index: usize) -> u32 {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map_or(0, |pos| self.entries[pos].1)
    }

    pub fn total(&self) -> u64 {
        self.entries.iter().map(|&(_, c)| c as u64).sum()
    }

    pub fn dot(&self, w: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, c)| w[i] * c as f64).sum()
    }
}

pub fn bow_featurize(seq: &TokenSequence, vocab: &Vocabulary, mode: BowMode) -> BowVector {
    let mut counts: BTreeMap<usize, u32> = BTreeMap::new();
    for &i in seq.indices() {
        *counts.entry(i).or_default() += 1;
    }
    let entries = counts
        .into_iter()
        .map(|(i, c)| match mode {
            BowMode::Counts => (i, c),
            BowMode::Binary => (i, 1),
        })
        .collect();
    BowVector {
        dim: vocab.len(),
        entries,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::{encode, tokenize, UNK};
    use proptest::prelude::*;

    fn vocab() -> Vocabulary {
        Vocabulary::build(&[tokenize("a b a c")], None, 1)
    }

    #[test]
    fn counts_and_binary() {
        let v = vocab();
        let seq = encode("a b a", &v, 10).unwrap();
        let bow = bow_featurize(&seq, &v, BowMode::Counts);
        assert_eq!(bow.count(v.index_of("a")), 2);
        assert_eq!(bow.count(v.index_of("b")), 1);
        assert_eq!(bow.dim(), v.len());
        let seq = encode("a a", &v, 10).unwrap();
        assert_eq!(bow_featurize(&seq, &v, BowMode::Binary).count(v.index_of("a")), 1);
    }

    #[test]
    fn unknown_words_count_as_unk() {
        let v = vocab();
        let seq = encode("zzz yyy", &v, 10).unwrap();
        let bow = bow_featurize(&seq, &v, BowMode::Counts);
        assert_eq!(bow.entries(), &[(UNK, 2)]);
    }

    proptest! {
        #[test]
        fn counts_sum_to_length(words in prop::collection::vec("[a-e]{1,2}", 1..20)) {
            let v = vocab();
            let seq = encode(&words.join(" "), &v, 64).unwrap();
            let bow = bow_featurize(&seq, &v, BowMode::Counts);
            prop_assert_eq!(bow.total(), seq.len() as u64);
            prop_assert_eq!(bow.count(crate::text::PAD), 0);
        }
    }
}
