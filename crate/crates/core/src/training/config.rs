use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::baselines::{BowMode, CnnConfig};
use crate::error::{Error, Result};
use crate::model::ModelKind;
use crate::text::DEFAULT_MAX_SEQ_LEN;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingMode {
    /// Embedding rows are frozen after initialization.
    Static,
    #[default]
    FineTune,
}

impl EmbeddingMode {
    pub fn trainable(self) -> bool {
        self == EmbeddingMode::FineTune
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CnnSettings {
    pub filters: usize,
    pub width: usize,
    pub blocks: usize,
    pub pool: usize,
    pub dropout: f64,
    pub l2: f64,
    /// Inputs are padded or truncated to this many tokens.
    pub max_seq_len: usize,
}

impl Default for CnnSettings {
    fn default() -> Self {
        let s = CnnConfig::standard(1);
        CnnSettings {
            filters: s.filters,
            width: s.width,
            blocks: s.blocks,
            pool: s.pool,
            dropout: s.dropout,
            l2: s.l2,
            max_seq_len: s.max_seq_len,
        }
    }
}

impl CnnSettings {
    pub fn to_config(&self, embed_dim: usize) -> CnnConfig {
        CnnConfig {
            embed_dim,
            filters: self.filters,
            width: self.width,
            blocks: self.blocks,
            pool: self.pool,
            dropout: self.dropout,
            l2: self.l2,
            max_seq_len: self.max_seq_len,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmSettings {
    pub lambda: f64,
    pub epochs: usize,
    pub features: BowMode,
}

impl Default for SvmSettings {
    fn default() -> Self {
        SvmSettings {
            lambda: 1e-4,
            epochs: 50,
            features: BowMode::Counts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub model_kind: ModelKind,
    #[serde(rename = "H")]
    pub hidden: usize,
    #[serde(rename = "d")]
    pub embed_dim: usize,
    pub embedding_mode: EmbeddingMode,
    pub glove_path: Option<PathBuf>,
    /// Name shown in the embeddings column of result tables. Defaults to
    /// the GloVe file stem, or "random" without pretrained vectors.
    pub embeddings_label: Option<String>,
    pub batch_size: usize,
    pub max_epochs: usize,
    #[serde(alias = "alpha")]
    pub learning_rate: f64,
    pub plateau_patience: usize,
    pub plateau_factor: f64,
    pub early_stop_patience: usize,
    pub min_delta: f64,
    pub seed: u64,
    pub validation_fraction: f64,
    /// Titles are truncated to this many tokens (recurrent and BoW models).
    pub max_seq_len: usize,
    pub min_count: usize,
    pub max_vocab: Option<usize>,
    pub cnn: CnnSettings,
    pub svm: SvmSettings,
    /// Where the last good parameters are written if training diverges.
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model_kind: ModelKind::BiLstm,
            hidden: 128,
            embed_dim: 100,
            embedding_mode: EmbeddingMode::FineTune,
            glove_path: None,
            embeddings_label: None,
            batch_size: 32,
            max_epochs: 100,
            learning_rate: 1e-3,
            plateau_patience: 3,
            plateau_factor: 0.2,
            early_stop_patience: 10,
            min_delta: 1e-4,
            seed: 0,
            validation_fraction: 0.1,
            max_seq_len: DEFAULT_MAX_SEQ_LEN,
            min_count: 1,
            max_vocab: None,
            cnn: CnnSettings::default(),
            svm: SvmSettings::default(),
            checkpoint_dir: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.plateau_factor > 0.0 && self.plateau_factor < 1.0) {
            return bad(format!("plateau_factor {} outside (0, 1)", self.plateau_factor));
        }
        if self.plateau_patience == 0 || self.early_stop_patience == 0 {
            return bad("patience values must be at least 1".into());
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction <= 0.5) {
            return bad(format!(
                "validation_fraction {} outside (0, 0.5]",
                self.validation_fraction
            ));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!("learning rate {} must be positive", self.learning_rate));
        }
        if !(self.min_delta.is_finite() && self.min_delta >= 0.0) {
            return bad(format!("min_delta {} must be non-negative", self.min_delta));
        }
        if self.max_seq_len == 0 {
            return bad("max_seq_len must be at least 1".into());
        }
        if self.min_count == 0 {
            return bad("min_count must be at least 1".into());
        }
        match self.model_kind {
            ModelKind::Lstm | ModelKind::BiLstm => {
                if self.hidden == 0 || self.embed_dim == 0 {
                    return bad("H and d must be positive".into());
                }
            }
            ModelKind::Cnn => self.cnn.to_config(self.embed_dim).validate()?,
            ModelKind::BowSvm => {
                if !(self.svm.lambda.is_finite() && self.svm.lambda > 0.0) {
                    return bad(format!("svm lambda {} must be positive", self.svm.lambda));
                }
                if self.svm.epochs == 0 {
                    return bad("svm epochs must be at least 1".into());
                }
            }
        }
        if let Some(label) = &self.embeddings_label {
            if label.contains(['|', '\n', '\r']) || label.trim().is_empty() {
                return bad(format!("embeddings_label {label:?} is not a valid table cell"));
            }
        }
        Ok(())
    }

    /// Sequence window used when encoding titles for this model kind.
    pub fn effective_max_seq_len(&self) -> usize {
        match self.model_kind {
            ModelKind::Cnn => self.cnn.max_seq_len,
            _ => self.max_seq_len,
        }
    }
}
