//! A trained classifier of any supported kind, behind one scoring surface.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{BowSvmModel, CnnModel};
use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::recurrent::{Introspection, RecurrentKind, RecurrentModel};
use crate::text::{TokenSequence, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    BowSvm,
    Cnn,
    Lstm,
    #[serde(rename = "bilstm")]
    BiLstm,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::BowSvm => "bow_svm",
            ModelKind::Cnn => "cnn",
            ModelKind::Lstm => "lstm",
            ModelKind::BiLstm => "bilstm",
        }
    }

    pub fn is_recurrent(self) -> bool {
        matches!(self, ModelKind::Lstm | ModelKind::BiLstm)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bow_svm" => Ok(ModelKind::BowSvm),
            "cnn" => Ok(ModelKind::Cnn),
            "lstm" => Ok(ModelKind::Lstm),
            "bilstm" => Ok(ModelKind::BiLstm),
            other => Err(Error::Config(format!(
                "unknown model kind {other:?} (expected bow_svm, cnn, lstm or bilstm)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub probability: f64,
    pub label: Label,
}

impl Prediction {
    /// Popular iff the probability is strictly above one half.
    pub fn from_probability(probability: f64) -> Self {
        Prediction {
            probability,
            label: Label::from_bool(probability > 0.5),
        }
    }
}

/// Summary served alongside predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub kind: ModelKind,
    /// Recurrent hidden size (0 for non-recurrent models).
    #[serde(rename = "H")]
    pub hidden: usize,
    /// Embedding dimension (0 for bag-of-words).
    pub d: usize,
    pub version: u32,
    pub max_seq_len: usize,
    pub vocab_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Recurrent(RecurrentModel),
    Cnn(CnnModel),
    BowSvm(BowSvmModel),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Recurrent(m) => match m.config.kind {
                RecurrentKind::Lstm => ModelKind::Lstm,
                RecurrentKind::BiLstm => ModelKind::BiLstm,
            },
            Model::Cnn(_) => ModelKind::Cnn,
            Model::BowSvm(_) => ModelKind::BowSvm,
        }
    }

    pub fn vocab(&self) -> &Vocabulary {
        match self {
            Model::Recurrent(m) => &m.vocab,
            Model::Cnn(m) => &m.vocab,
            Model::BowSvm(m) => &m.vocab,
        }
    }

    pub fn max_seq_len(&self) -> usize {
        match self {
            Model::Recurrent(m) => m.config.max_seq_len,
            Model::Cnn(m) => m.config.max_seq_len,
            Model::BowSvm(m) => m.max_seq_len,
        }
    }

    pub fn info(&self) -> ModelInfo {
        let (hidden, d) = match self {
            Model::Recurrent(m) => (m.config.hidden, m.config.embed_dim),
            Model::Cnn(m) => (0, m.config.embed_dim),
            Model::BowSvm(_) => (0, 0),
        };
        ModelInfo {
            kind: self.kind(),
            hidden,
            d,
            version: crate::persist::FORMAT_VERSION,
            max_seq_len: self.max_seq_len(),
            vocab_size: self.vocab().len(),
        }
    }

    pub fn encode(&self, title: &str) -> Result<TokenSequence> {
        crate::text::encode(title, self.vocab(), self.max_seq_len())
    }

    /// Probability of the popular class for an encoded title.
    pub fn score_seq(&self, seq: &TokenSequence) -> Result<f64> {
        match self {
            Model::Recurrent(m) => m.score(seq),
            Model::Cnn(m) => m.score(seq),
            Model::BowSvm(m) => {
                let x = crate::baselines::bow_featurize(seq, &m.vocab, m.mode);
                Ok(crate::baselines::svm_predict(&m.params, &x)?.score)
            }
        }
    }

    pub fn score_title(&self, title: &str) -> Result<f64> {
        self.score_seq(&self.encode(title)?)
    }

    pub fn predict(&self, title: &str) -> Result<Prediction> {
        match self {
            // the SVM decides on the margin sign; sigmoid(0) = 0.5 agrees
            Model::BowSvm(m) => {
                let p = m.predict_title(title)?;
                Ok(Prediction {
                    probability: p.score,
                    label: p.label,
                })
            }
            _ => Ok(Prediction::from_probability(self.score_title(title)?)),
        }
    }

    /// Per-word contributions; only recurrent models support this.
    pub fn introspect(&self, title: &str) -> Result<Introspection> {
        match self {
            Model::Recurrent(m) => m.introspect_title(title),
            other => Err(Error::Config(format!(
                "introspection needs an lstm or bilstm model, got {}",
                other.kind()
            ))),
        }
    }

    pub fn as_recurrent(&self) -> Option<&RecurrentModel> {
        match self {
            Model::Recurrent(m) => Some(m),
            _ => None,
        }
    }
}
