use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::embeddings::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::numerics::{dot, sigmoid, Mat, ParamSet, ParamStore};
use crate::recurrent::lstm::{backprop_chain, backward_cached, forward_cached, LstmParams};
use crate::text::{encode_with_tokens, TokenSequence, Vocabulary};
use crate::training::{bce_logit_grad, bce_loss};

pub const EMBEDDING: &str = "embedding";
pub const HEAD_W: &str = "head.w";
pub const HEAD_B: &str = "head.b";
const FWD: &str = "fwd";
const BWD: &str = "bwd";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecurrentKind {
    Lstm,
    BiLstm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrentConfig {
    pub kind: RecurrentKind,
    pub hidden: usize,
    pub embed_dim: usize,
    pub max_seq_len: usize,
}

/// Per-token popularity read from the head applied at one position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordContribution {
    pub token: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Introspection {
    pub contributions: Vec<WordContribution>,
    /// Head applied to the late-fusion pair; identical to the model score.
    pub fused_score: f64,
}

/// LSTM or BiLSTM encoder over an embedding layer, with a single sigmoid
/// unit reading the last forward state (and, for BiLSTM, the last backward
/// state, i.e. the backward state at the first word).
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentModel {
    pub config: RecurrentConfig,
    pub vocab: Vocabulary,
    pub embedding: EmbeddingMatrix,
    pub forward: LstmParams,
    pub backward: Option<LstmParams>,
    /// `1 x F` where F is H (LSTM) or 2H (BiLSTM).
    pub head_w: Mat,
    pub head_b: Mat,
}

impl RecurrentModel {
    /// Glorot-initialized encoder and head around a prepared embedding.
    pub fn new(
        config: RecurrentConfig,
        vocab: Vocabulary,
        embedding: EmbeddingMatrix,
        seed: u64,
    ) -> Result<Self> {
        if config.hidden == 0 {
            return Err(Error::Config("hidden size must be positive".into()));
        }
        if config.max_seq_len == 0 {
            return Err(Error::Config("max_seq_len must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (h, d) = (config.hidden, config.embed_dim);
        let forward = LstmParams::glorot(h, d, &mut rng);
        let backward = match config.kind {
            RecurrentKind::BiLstm => Some(LstmParams::glorot(h, d, &mut rng)),
            RecurrentKind::Lstm => None,
        };
        let width = feature_width(&config);
        let limit = (6.0 / (width + 1) as f64).sqrt();
        let head_w = Mat::from_fn(1, width, |_, _| rng.gen_range(-limit..limit));
        let model = RecurrentModel {
            config,
            vocab,
            embedding,
            forward,
            backward,
            head_w,
            head_b: Mat::zeros(1, 1),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.config;
        if self.embedding.dim() != c.embed_dim {
            return Err(Error::Shape(format!(
                "embedding dim {} but config says {}",
                self.embedding.dim(),
                c.embed_dim
            )));
        }
        if self.embedding.vocab_size() != self.vocab.len() {
            return Err(Error::Shape(format!(
                "embedding has {} rows for a vocabulary of {}",
                self.embedding.vocab_size(),
                self.vocab.len()
            )));
        }
        let dirs: Vec<&LstmParams> = std::iter::once(&self.forward).chain(self.backward.as_ref()).collect();
        for p in dirs {
            p.validate()?;
            if p.hidden() != c.hidden || p.input() != c.embed_dim {
                return Err(Error::Shape(format!(
                    "LSTM direction is {}x{}, config says {}x{}",
                    p.hidden(),
                    p.input(),
                    c.hidden,
                    c.embed_dim
                )));
            }
        }
        match (c.kind, &self.backward) {
            (RecurrentKind::BiLstm, None) | (RecurrentKind::Lstm, Some(_)) => {
                return Err(Error::Shape("direction count does not match model kind".into()))
            }
            _ => {}
        }
        if self.head_w.shape() != (1, feature_width(c)) || self.head_b.shape() != (1, 1) {
            return Err(Error::Shape(format!(
                "head is {:?}+{:?}, expected (1, {})",
                self.head_w.shape(),
                self.head_b.shape(),
                feature_width(c)
            )));
        }
        Ok(())
    }

    pub fn feature_width(&self) -> usize {
        feature_width(&self.config)
    }

    pub fn encode_title(&self, title: &str) -> Result<(Vec<String>, TokenSequence)> {
        encode_with_tokens(title, &self.vocab, self.config.max_seq_len)
    }

    fn check_seq(&self, seq: &TokenSequence) -> Result<()> {
        if seq.is_empty() {
            return Err(Error::EmptyTitle);
        }
        if seq.indices().iter().any(|&i| i >= self.vocab.len()) {
            return Err(Error::Data("token index outside vocabulary".into()));
        }
        Ok(())
    }

    /// Hidden-state pairs `(forward h_t, backward h_t)` for every position.
    /// The backward half is empty for a unidirectional model.
    pub fn hidden_pairs(&self, seq: &TokenSequence) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
        self.check_seq(seq)?;
        let xs = self.embedding.lookup(seq);
        let fwd = forward_cached(&self.forward, &xs)?;
        let mut bwd: Vec<Vec<f64>> = match &self.backward {
            Some(p) => backward_cached(p, &xs)?.into_iter().map(|s| s.h).collect(),
            None => vec![Vec::new(); xs.rows()],
        };
        bwd.reverse();
        Ok(fwd.into_iter().map(|s| s.h).zip(bwd).collect())
    }

    fn head(&self, fwd: &[f64], bwd: &[f64]) -> f64 {
        let w = self.head_w.as_slice();
        let h = fwd.len();
        let logit = self.head_b.get(0, 0) + dot(&w[..h], fwd) + dot(&w[h..], bwd);
        sigmoid(logit)
    }

    /// Probability of the popular class.
    pub fn score(&self, seq: &TokenSequence) -> Result<f64> {
        let pairs = self.hidden_pairs(seq)?;
        let n = pairs.len();
        // late fusion: last forward state with the backward state at position 1
        let p = self.head(&pairs[n - 1].0, &pairs[0].1);
        if !p.is_finite() {
            return Err(Error::NonFinite("model score".into()));
        }
        Ok(p)
    }

    pub fn score_title(&self, title: &str) -> Result<f64> {
        let (_, seq) = self.encode_title(title)?;
        self.score(&seq)
    }

    /// Applies the head to each position's `(forward, backward)` pair.
    /// Tokens are named from the vocabulary (unknown words show as UNK).
    pub fn introspect(&self, seq: &TokenSequence) -> Result<Introspection> {
        let tokens = crate::text::decode(seq, &self.vocab);
        self.introspect_with_tokens(seq, tokens)
    }

    /// Like [`RecurrentModel::introspect`] but labels contributions with the
    /// title's own (lowercased) words.
    pub fn introspect_title(&self, title: &str) -> Result<Introspection> {
        let (tokens, seq) = self.encode_title(title)?;
        self.introspect_with_tokens(&seq, tokens)
    }

    fn introspect_with_tokens(&self, seq: &TokenSequence, tokens: Vec<String>) -> Result<Introspection> {
        let pairs = self.hidden_pairs(seq)?;
        let n = pairs.len();
        let contributions = pairs
            .iter()
            .zip(tokens)
            .map(|((f, b), token)| WordContribution {
                token,
                score: self.head(f, b),
            })
            .collect();
        Ok(Introspection {
            contributions,
            fused_score: self.head(&pairs[n - 1].0, &pairs[0].1),
        })
    }

    pub fn zero_grads(&self) -> ParamSet {
        let mut g = ParamSet::new();
        self.forward.zero_grads(FWD, &mut g).expect("unique names");
        if let Some(b) = &self.backward {
            b.zero_grads(BWD, &mut g).expect("unique names");
        }
        g.insert(HEAD_W, Mat::zeros(1, self.feature_width())).expect("unique");
        g.insert(HEAD_B, Mat::zeros(1, 1)).expect("unique");
        if self.embedding.trainable {
            let m = &self.embedding.matrix;
            g.insert(EMBEDDING, Mat::zeros(m.rows(), m.cols())).expect("unique");
        }
        g
    }

    pub fn export_params(&self) -> ParamSet {
        let mut p = ParamSet::new();
        self.forward.export(FWD, &mut p).expect("unique names");
        if let Some(b) = &self.backward {
            b.export(BWD, &mut p).expect("unique names");
        }
        p.insert(HEAD_W, self.head_w.clone()).expect("unique");
        p.insert(HEAD_B, self.head_b.clone()).expect("unique");
        p.insert(EMBEDDING, self.embedding.matrix.clone()).expect("unique");
        p
    }

    pub fn import_params(&mut self, params: &ParamSet) -> Result<()> {
        self.forward.import(FWD, params)?;
        if let Some(b) = &mut self.backward {
            b.import(BWD, params)?;
        }
        for (name, dst) in [
            (HEAD_W, &mut self.head_w),
            (HEAD_B, &mut self.head_b),
            (EMBEDDING, &mut self.embedding.matrix),
        ] {
            let src = params
                .get(name)
                .ok_or_else(|| Error::ModelFormat(format!("missing parameter {name}")))?;
            if src.shape() != dst.shape() {
                return Err(Error::Shape(format!(
                    "{name} is {:?}, expected {:?}",
                    src.shape(),
                    dst.shape()
                )));
            }
            *dst = src.clone();
        }
        Ok(())
    }

    /// Loss for one example with its gradient added into `grads` (which
    /// must come from [`RecurrentModel::zero_grads`]).
    pub fn accumulate_grads(&self, seq: &TokenSequence, label: Label, grads: &mut ParamSet) -> Result<f64> {
        self.check_seq(seq)?;
        let y = label.as_f64();
        let xs = self.embedding.lookup(seq);
        let n = xs.rows();
        let hidden = self.config.hidden;

        let fwd = forward_cached(&self.forward, &xs)?;
        let bwd = match &self.backward {
            Some(p) => Some(backward_cached(p, &xs)?),
            None => None,
        };
        let last_fwd = &fwd[n - 1].h;
        // backward chain runs over reversed input; its last step sits at word 1
        let last_bwd: &[f64] = bwd.as_ref().map_or(&[], |b| b[n - 1].h.as_slice());
        let p = self.head(last_fwd, last_bwd);
        let loss = bce_loss(p, y);
        if !loss.is_finite() {
            return Err(Error::NonFinite("loss".into()));
        }
        let dlogit = bce_logit_grad(p, y);

        {
            let gw = grads
                .get_mut(HEAD_W)
                .ok_or_else(|| Error::Shape("gradient buffer missing head.w".into()))?;
            let gw = gw.as_mut_slice();
            for (g, v) in gw.iter_mut().zip(last_fwd.iter().chain(last_bwd)) {
                *g += dlogit * v;
            }
        }
        grads
            .get_mut(HEAD_B)
            .ok_or_else(|| Error::Shape("gradient buffer missing head.b".into()))?
            .as_mut_slice()[0] += dlogit;

        let w = self.head_w.as_slice();
        let mut dh_fwd: Vec<Option<Vec<f64>>> = vec![None; n];
        dh_fwd[n - 1] = Some(w[..hidden].iter().map(|v| dlogit * v).collect());
        let dxs_fwd = backprop_chain(&self.forward, &fwd, &dh_fwd, FWD, grads)?;

        let mut dxs = dxs_fwd;
        if let (Some(params), Some(caches)) = (&self.backward, &bwd) {
            let mut dh_bwd: Vec<Option<Vec<f64>>> = vec![None; n];
            dh_bwd[n - 1] = Some(w[hidden..].iter().map(|v| dlogit * v).collect());
            let dxs_rev = backprop_chain(params, caches, &dh_bwd, BWD, grads)?;
            for t in 0..n {
                for (a, b) in dxs.row_mut(t).iter_mut().zip(dxs_rev.row(n - 1 - t)) {
                    *a += b;
                }
            }
        }

        if self.embedding.trainable {
            let g = grads
                .get_mut(EMBEDDING)
                .ok_or_else(|| Error::Shape("gradient buffer missing embedding".into()))?;
            EmbeddingMatrix::scatter_grad(g, seq.indices(), &dxs);
        }
        Ok(loss)
    }

    /// BCE loss and fresh gradients for one example.
    pub fn backward(&self, seq: &TokenSequence, label: Label) -> Result<(f64, ParamSet)> {
        let mut grads = self.zero_grads();
        let loss = self.accumulate_grads(seq, label, &mut grads)?;
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradients".into()));
        }
        Ok((loss, grads))
    }
}

fn feature_width(c: &RecurrentConfig) -> usize {
    match c.kind {
        RecurrentKind::Lstm => c.hidden,
        RecurrentKind::BiLstm => 2 * c.hidden,
    }
}

impl ParamStore for RecurrentModel {
    fn param_mut(&mut self, name: &str) -> Option<&mut Mat> {
        match name {
            HEAD_W => Some(&mut self.head_w),
            HEAD_B => Some(&mut self.head_b),
            EMBEDDING => Some(&mut self.embedding.matrix),
            _ => {
                let (prefix, rest) = name.split_once('.')?;
                match prefix {
                    FWD => self.forward.param_mut(rest),
                    BWD => self.backward.as_mut()?.param_mut(rest),
                    _ => None,
                }
            }
        }
    }
}
