//! Comparison systems: bag-of-words with a linear SVM, and a word-level CNN.

mod bow;
mod cnn;
mod svm;

pub use bow::{bow_featurize, BowMode, BowVector};
pub use cnn::{conv_name, CnnConfig, CnnModel, ConvLayer, DropoutMask, DENSE_B, DENSE_W};
pub use svm::{svm_predict, svm_train, SvmConfig, SvmParams, SvmPrediction, SvmTrainReport};

use crate::error::Result;
use crate::text::{encode, Vocabulary};

/// Bag-of-words featurizer plus trained SVM weights.
#[derive(Debug, Clone, PartialEq)]
pub struct BowSvmModel {
    pub vocab: Vocabulary,
    pub mode: BowMode,
    pub max_seq_len: usize,
    pub params: SvmParams,
}

impl BowSvmModel {
    pub fn featurize(&self, title: &str) -> Result<BowVector> {
        let seq = encode(title, &self.vocab, self.max_seq_len)?;
        Ok(bow_featurize(&seq, &self.vocab, self.mode))
    }

    pub fn predict_title(&self, title: &str) -> Result<SvmPrediction> {
        svm_predict(&self.params, &self.featurize(title)?)
    }
}
