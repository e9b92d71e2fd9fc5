//! Seeded synthetic corpora with known labeling rules, for sanity runs and
//! model comparisons where the right answer is known in advance.

use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Headline, Label, LabeledExample};
use crate::embeddings::Pretrained;
use crate::error::Result;

pub const DEFAULT_MARKER: &str = "viral";
pub const ORDER_FIRST: &str = "alpha";
pub const ORDER_SECOND: &str = "omega";

const ONSETS: [&str; 14] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"];
const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];

/// `count` distinct lowercase pseudo-words of two or three syllables,
/// none equal to any of `exclude`.
pub fn filler_words(count: usize, seed: u64, exclude: &[&str]) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen: BTreeSet<String> = exclude.iter().map(|s| s.to_string()).collect();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let syllables = rng.gen_range(2..=3);
        let word: String = (0..syllables)
            .map(|_| {
                format!(
                    "{}{}",
                    ONSETS[rng.gen_range(0..ONSETS.len())],
                    VOWELS[rng.gen_range(0..VOWELS.len())]
                )
            })
            .collect();
        if seen.insert(word.clone()) {
            out.push(word);
        }
    }
    out
}

fn example(prefix: &str, i: usize, words: &[String], label: Label) -> Result<LabeledExample> {
    let metric = label.as_f64();
    let h = Headline::new(format!("{prefix}{i:05}"), words.join(" "), metric, "synthetic")?;
    Ok(LabeledExample::new(h, label))
}

/// Titles of filler words; exactly half (rounded down) contain `marker`,
/// and the label is whether it is present.
pub fn marker_corpus(n: usize, marker: &str, seed: u64) -> Result<Vec<LabeledExample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fillers = filler_words(60, seed ^ 0x5eed, &[marker]);
    let mut labels: Vec<bool> = (0..n).map(|i| i < n / 2).collect();
    labels.shuffle(&mut rng);
    labels
        .into_iter()
        .enumerate()
        .map(|(i, popular)| {
            let len = rng.gen_range(4..=8);
            let mut words: Vec<String> = (0..len)
                .map(|_| fillers.choose(&mut rng).unwrap().clone())
                .collect();
            if popular {
                let at = rng.gen_range(0..len);
                words[at] = marker.to_string();
            }
            example("m", i, &words, Label::from_bool(popular))
        })
        .collect()
}

/// Every title holds both [`ORDER_FIRST`] and [`ORDER_SECOND`] once among
/// fillers; it is popular iff the first precedes the second. Word counts
/// are identical across classes, so bag-of-words features carry no signal.
pub fn order_corpus(n: usize, seed: u64) -> Result<Vec<LabeledExample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fillers = filler_words(80, seed ^ 0x0dde, &[ORDER_FIRST, ORDER_SECOND]);
    let mut labels: Vec<bool> = (0..n).map(|i| i < n / 2).collect();
    labels.shuffle(&mut rng);
    labels
        .into_iter()
        .enumerate()
        .map(|(i, popular)| {
            let len = rng.gen_range(5..=10);
            let mut words: Vec<String> = (0..len)
                .map(|_| fillers.choose(&mut rng).unwrap().clone())
                .collect();
            let a = rng.gen_range(0..len);
            let mut b = rng.gen_range(0..len - 1);
            if b >= a {
                b += 1;
            }
            let (first, second) = if popular { (a.min(b), a.max(b)) } else { (a.max(b), a.min(b)) };
            words[first] = ORDER_FIRST.to_string();
            words[second] = ORDER_SECOND.to_string();
            example("o", i, &words, Label::from_bool(popular))
        })
        .collect()
}

/// A corpus whose label is carried by one "cue" word per title, drawn from
/// a positive or a negative cue list, plus the vocabulary split needed to
/// build a matching pretrained embedding.
#[derive(Debug, Clone)]
pub struct CueCorpus {
    pub examples: Vec<LabeledExample>,
    pub positive: Vec<String>,
    pub negative: Vec<String>,
    pub fillers: Vec<String>,
}

impl CueCorpus {
    /// Vectors for every word of the corpus: component 0 is +1 for positive
    /// cues, -1 for negative cues and 0 for fillers; the rest is uniform
    /// noise in [-0.5, 0.5).
    pub fn pretrained(&self, dim: usize, seed: u64) -> Result<Pretrained> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut map = HashMap::new();
        for (words, sign) in [(&self.positive, 1.0), (&self.negative, -1.0), (&self.fillers, 0.0)] {
            for w in words {
                let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-0.5..0.5)).collect();
                v[0] = sign;
                map.insert(w.clone(), v);
            }
        }
        Pretrained::from_map(map)
    }
}

pub fn cue_corpus(n: usize, cues_per_class: usize, seed: u64) -> Result<CueCorpus> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut words = filler_words(2 * cues_per_class + 100, seed ^ 0xc0e, &[]);
    let fillers = words.split_off(2 * cues_per_class);
    let negative = words.split_off(cues_per_class);
    let positive = words;
    let mut labels: Vec<bool> = (0..n).map(|i| i < n / 2).collect();
    labels.shuffle(&mut rng);
    let examples = labels
        .into_iter()
        .enumerate()
        .map(|(i, popular)| {
            let len = rng.gen_range(5..=9);
            let mut title: Vec<String> = (0..len)
                .map(|_| fillers.choose(&mut rng).unwrap().clone())
                .collect();
            let cues = if popular { &positive } else { &negative };
            let at = rng.gen_range(0..len);
            title[at] = cues.choose(&mut rng).unwrap().clone();
            example("c", i, &title, Label::from_bool(popular))
        })
        .collect::<Result<_>>()?;
    Ok(CueCorpus {
        examples,
        positive,
        negative,
        fillers,
    })
}
