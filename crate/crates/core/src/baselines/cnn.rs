use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::embeddings::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::numerics::{dot, sigmoid, Mat, ParamSet, ParamStore};
use crate::recurrent::EMBEDDING;
use crate::text::{encode_with_tokens, TokenSequence, Vocabulary};
use crate::training::{bce_logit_grad, bce_loss};

pub const DENSE_W: &str = "dense.w";
pub const DENSE_B: &str = "dense.b";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnConfig {
    pub embed_dim: usize,
    pub filters: usize,
    pub width: usize,
    pub blocks: usize,
    pub pool: usize,
    pub dropout: f64,
    pub l2: f64,
    pub max_seq_len: usize,
}

impl CnnConfig {
    /// Three blocks of 256 width-5 filters, pool 2, dropout 0.5, l2 1e-4 on
    /// a 40-token window.
    pub fn standard(embed_dim: usize) -> Self {
        CnnConfig {
            embed_dim,
            filters: 256,
            width: 5,
            blocks: 3,
            pool: 2,
            dropout: 0.5,
            l2: 1e-4,
            max_seq_len: 40,
        }
    }

    /// `(conv_len, pooled_len)` per block; errors if any stage collapses.
    pub fn stage_lengths(&self) -> Result<Vec<(usize, usize)>> {
        if self.width == 0 || self.pool == 0 || self.filters == 0 || self.blocks == 0 {
            return Err(Error::Config("CNN width, pool, filters and blocks must be positive".into()));
        }
        let mut len = self.max_seq_len;
        let mut out = Vec::with_capacity(self.blocks);
        for block in 0..self.blocks {
            if len < self.width {
                return Err(Error::Config(format!(
                    "max_seq_len {} too small: block {} sees length {len} < filter width {}",
                    self.max_seq_len,
                    block + 1,
                    self.width
                )));
            }
            let conv = len - self.width + 1;
            let pooled = conv / self.pool;
            if pooled == 0 {
                return Err(Error::Config(format!(
                    "max_seq_len {} too small: block {} pools length {conv} to 0",
                    self.max_seq_len,
                    block + 1
                )));
            }
            out.push((conv, pooled));
            len = pooled;
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        self.stage_lengths()?;
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return Err(Error::Config(format!("l2 {} must be non-negative", self.l2)));
        }
        if self.embed_dim == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        Ok(())
    }

    pub fn flat_len(&self) -> Result<usize> {
        Ok(self.stage_lengths()?.last().unwrap().1 * self.filters)
    }
}

/// One convolution block: `filters x (width * in_channels)` weights, one
/// bias per filter.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub w: Mat,
    pub b: Mat,
}

impl ConvLayer {
    fn in_channels(&self, width: usize) -> usize {
        self.w.cols() / width
    }
}

/// Word-level CNN: embedding, repeated (conv, ReLU, max-pool), dropout,
/// dense unit with l2 penalty and a sigmoid.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel {
    pub config: CnnConfig,
    pub vocab: Vocabulary,
    pub embedding: EmbeddingMatrix,
    pub conv: Vec<ConvLayer>,
    pub dense_w: Mat,
    pub dense_b: Mat,
}

/// Inverted-dropout multipliers for the flattened features (0 or 1/(1-p)).
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask(pub Vec<f64>);

impl DropoutMask {
    pub fn sample(len: usize, rate: f64, rng: &mut impl Rng) -> Self {
        let keep = 1.0 - rate;
        DropoutMask(
            (0..len)
                .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
                .collect(),
        )
    }

    pub fn ones(len: usize) -> Self {
        DropoutMask(vec![1.0; len])
    }
}

struct BlockCache {
    input: Mat,
    pre: Mat,
    /// Index into the conv output selected by each pooled cell.
    argmax: Vec<usize>,
}

struct ForwardCache {
    padded: Vec<usize>,
    blocks: Vec<BlockCache>,
    /// Flattened features after dropout.
    features: Vec<f64>,
    prob: f64,
}

pub fn conv_name(block: usize, part: &str) -> String {
    format!("conv{block}.{part}")
}

impl CnnModel {
    pub fn new(config: CnnConfig, vocab: Vocabulary, embedding: EmbeddingMatrix, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut conv = Vec::with_capacity(config.blocks);
        let mut in_ch = config.embed_dim;
        for _ in 0..config.blocks {
            let fan_in = config.width * in_ch;
            let fan_out = config.width * config.filters;
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            conv.push(ConvLayer {
                w: Mat::from_fn(config.filters, fan_in, |_, _| rng.gen_range(-limit..limit)),
                b: Mat::zeros(config.filters, 1),
            });
            in_ch = config.filters;
        }
        let flat = config.flat_len()?;
        let limit = (6.0 / (flat + 1) as f64).sqrt();
        let dense_w = Mat::from_fn(1, flat, |_, _| rng.gen_range(-limit..limit));
        let model = CnnModel {
            config,
            vocab,
            embedding,
            conv,
            dense_w,
            dense_b: Mat::zeros(1, 1),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.config;
        c.validate()?;
        if self.embedding.dim() != c.embed_dim || self.embedding.vocab_size() != self.vocab.len() {
            return Err(Error::Shape(format!(
                "embedding {:?} does not match vocabulary {} x dim {}",
                self.embedding.matrix.shape(),
                self.vocab.len(),
                c.embed_dim
            )));
        }
        if self.conv.len() != c.blocks {
            return Err(Error::Shape(format!("{} conv blocks, config says {}", self.conv.len(), c.blocks)));
        }
        let mut in_ch = c.embed_dim;
        for (k, layer) in self.conv.iter().enumerate() {
            if layer.w.shape() != (c.filters, c.width * in_ch) || layer.b.shape() != (c.filters, 1) {
                return Err(Error::Shape(format!(
                    "conv block {k} is {:?}/{:?}, expected ({}, {})",
                    layer.w.shape(),
                    layer.b.shape(),
                    c.filters,
                    c.width * in_ch
                )));
            }
            in_ch = c.filters;
        }
        if self.dense_w.shape() != (1, c.flat_len()?) || self.dense_b.shape() != (1, 1) {
            return Err(Error::Shape(format!("dense layer is {:?}", self.dense_w.shape())));
        }
        Ok(())
    }

    pub fn encode_title(&self, title: &str) -> Result<(Vec<String>, TokenSequence)> {
        encode_with_tokens(title, &self.vocab, self.config.max_seq_len)
    }

    fn forward_cached(&self, seq: &TokenSequence, mask: Option<&DropoutMask>) -> Result<ForwardCache> {
        if seq.is_empty() {
            return Err(Error::EmptyTitle);
        }
        let c = &self.config;
        let padded = seq.padded(c.max_seq_len);
        let mut x = self.embedding.lookup_padded(&padded);
        let mut blocks = Vec::with_capacity(c.blocks);
        for layer in &self.conv {
            let in_ch = layer.in_channels(c.width);
            let conv_len = x.rows() - c.width + 1;
            let mut pre = Mat::zeros(conv_len, c.filters);
            let window_len = c.width * in_ch;
            for t in 0..conv_len {
                // rows t..t+width are contiguous in row-major storage
                let window = &x.as_slice()[t * in_ch..t * in_ch + window_len];
                let out = pre.row_mut(t);
                for f in 0..c.filters {
                    out[f] = layer.b.as_slice()[f] + dot(layer.w.row(f), window);
                }
            }
            let pooled_len = conv_len / c.pool;
            let mut pooled = Mat::zeros(pooled_len, c.filters);
            let mut argmax = vec![0usize; pooled_len * c.filters];
            for u in 0..pooled_len {
                for f in 0..c.filters {
                    let mut best_t = u * c.pool;
                    let mut best = pre.get(best_t, f).max(0.0);
                    for t in u * c.pool + 1..(u + 1) * c.pool {
                        let v = pre.get(t, f).max(0.0);
                        // strict comparison keeps the first maximum on ties
                        if v > best {
                            best = v;
                            best_t = t;
                        }
                    }
                    pooled.set(u, f, best);
                    argmax[u * c.filters + f] = best_t;
                }
            }
            blocks.push(BlockCache { input: x, pre, argmax });
            x = pooled;
        }
        let mut features = x.into_vec();
        if let Some(mask) = mask {
            if mask.0.len() != features.len() {
                return Err(Error::Shape(format!(
                    "dropout mask of {} for {} features",
                    mask.0.len(),
                    features.len()
                )));
            }
            for (v, m) in features.iter_mut().zip(&mask.0) {
                *v *= m;
            }
        }
        let logit = self.dense_b.get(0, 0) + dot(self.dense_w.as_slice(), &features);
        let prob = sigmoid(logit);
        if !prob.is_finite() {
            return Err(Error::NonFinite("CNN output".into()));
        }
        Ok(ForwardCache {
            padded,
            blocks,
            features,
            prob,
        })
    }

    /// Inference-mode probability (no dropout).
    pub fn score(&self, seq: &TokenSequence) -> Result<f64> {
        Ok(self.forward_cached(seq, None)?.prob)
    }

    /// Probability with an explicit dropout mask, as seen during training.
    pub fn score_train(&self, seq: &TokenSequence, mask: &DropoutMask) -> Result<f64> {
        Ok(self.forward_cached(seq, Some(mask))?.prob)
    }

    pub fn score_title(&self, title: &str) -> Result<f64> {
        let (_, seq) = self.encode_title(title)?;
        self.score(&seq)
    }

    pub fn l2_penalty(&self) -> f64 {
        0.5 * self.config.l2 * self.dense_w.sum_squares()
    }

    /// Training loss (BCE plus the l2 penalty on the dense weights) under the
    /// given dropout mask.
    pub fn loss(&self, seq: &TokenSequence, label: Label, mask: Option<&DropoutMask>) -> Result<f64> {
        let cache = self.forward_cached(seq, mask)?;
        Ok(bce_loss(cache.prob, label.as_f64()) + self.l2_penalty())
    }

    pub fn zero_grads(&self) -> ParamSet {
        let mut g = ParamSet::new();
        for (k, layer) in self.conv.iter().enumerate() {
            g.insert(conv_name(k, "w"), Mat::zeros(layer.w.rows(), layer.w.cols())).expect("unique");
            g.insert(conv_name(k, "b"), Mat::zeros(layer.b.rows(), 1)).expect("unique");
        }
        g.insert(DENSE_W, Mat::zeros(1, self.dense_w.cols())).expect("unique");
        g.insert(DENSE_B, Mat::zeros(1, 1)).expect("unique");
        if self.embedding.trainable {
            let m = &self.embedding.matrix;
            g.insert(EMBEDDING, Mat::zeros(m.rows(), m.cols())).expect("unique");
        }
        g
    }

    pub fn export_params(&self) -> ParamSet {
        let mut p = ParamSet::new();
        for (k, layer) in self.conv.iter().enumerate() {
            p.insert(conv_name(k, "w"), layer.w.clone()).expect("unique");
            p.insert(conv_name(k, "b"), layer.b.clone()).expect("unique");
        }
        p.insert(DENSE_W, self.dense_w.clone()).expect("unique");
        p.insert(DENSE_B, self.dense_b.clone()).expect("unique");
        p.insert(EMBEDDING, self.embedding.matrix.clone()).expect("unique");
        p
    }

    pub fn import_params(&mut self, params: &ParamSet) -> Result<()> {
        let names: Vec<String> = params.names().map(str::to_owned).collect();
        let expected = self.export_params();
        for name in expected.names() {
            if !params.contains(name) {
                return Err(Error::ModelFormat(format!("missing parameter {name}")));
            }
        }
        for name in names {
            let src = params.get(&name).unwrap();
            let dst = self
                .param_mut(&name)
                .ok_or_else(|| Error::ModelFormat(format!("unknown parameter {name}")))?;
            if dst.shape() != src.shape() {
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

    /// Loss (BCE + l2) for one example, gradients added into `grads`.
    pub fn accumulate_grads(
        &self,
        seq: &TokenSequence,
        label: Label,
        mask: Option<&DropoutMask>,
        grads: &mut ParamSet,
    ) -> Result<f64> {
        let c = &self.config;
        let cache = self.forward_cached(seq, mask)?;
        let y = label.as_f64();
        let loss = bce_loss(cache.prob, y) + self.l2_penalty();
        let dlogit = bce_logit_grad(cache.prob, y);

        {
            let gw = grads
                .get_mut(DENSE_W)
                .ok_or_else(|| Error::Shape("gradient buffer missing dense.w".into()))?
                .as_mut_slice();
            for ((g, v), w) in gw.iter_mut().zip(&cache.features).zip(self.dense_w.as_slice()) {
                *g += dlogit * v + c.l2 * w;
            }
        }
        grads
            .get_mut(DENSE_B)
            .ok_or_else(|| Error::Shape("gradient buffer missing dense.b".into()))?
            .as_mut_slice()[0] += dlogit;

        // gradient w.r.t. the pooled output of the last block
        let mut d_out: Vec<f64> = self.dense_w.as_slice().iter().map(|w| dlogit * w).collect();
        if let Some(mask) = mask {
            for (d, m) in d_out.iter_mut().zip(&mask.0) {
                *d *= m;
            }
        }

        for (k, (layer, block)) in self.conv.iter().zip(&cache.blocks).enumerate().rev() {
            let in_ch = layer.in_channels(c.width);
            let window_len = c.width * in_ch;
            let conv_len = block.pre.rows();
            // unpool + ReLU
            let mut d_pre = Mat::zeros(conv_len, c.filters);
            for (cell, &t) in block.argmax.iter().enumerate() {
                let f = cell % c.filters;
                if block.pre.get(t, f) > 0.0 {
                    let cur = d_pre.get(t, f);
                    d_pre.set(t, f, cur + d_out[cell]);
                }
            }
            let mut d_input = Mat::zeros(block.input.rows(), in_ch);
            {
                let gw = grads
                    .get_mut(&conv_name(k, "w"))
                    .ok_or_else(|| Error::Shape(format!("gradient buffer missing conv{k}.w")))?;
                for t in 0..conv_len {
                    let window = &block.input.as_slice()[t * in_ch..t * in_ch + window_len];
                    for f in 0..c.filters {
                        let d = d_pre.get(t, f);
                        if d == 0.0 {
                            continue;
                        }
                        for (g, x) in gw.row_mut(f).iter_mut().zip(window) {
                            *g += d * x;
                        }
                        let dwin = &mut d_input.as_mut_slice()[t * in_ch..t * in_ch + window_len];
                        for (dx, w) in dwin.iter_mut().zip(layer.w.row(f)) {
                            *dx += d * w;
                        }
                    }
                }
            }
            let gb = grads
                .get_mut(&conv_name(k, "b"))
                .ok_or_else(|| Error::Shape(format!("gradient buffer missing conv{k}.b")))?
                .as_mut_slice();
            for t in 0..conv_len {
                for (g, d) in gb.iter_mut().zip(d_pre.row(t)) {
                    *g += d;
                }
            }
            d_out = d_input.into_vec();
        }

        if self.embedding.trainable {
            let d_emb = Mat::from_vec(cache.padded.len(), c.embed_dim, d_out)?;
            let g = grads
                .get_mut(EMBEDDING)
                .ok_or_else(|| Error::Shape("gradient buffer missing embedding".into()))?;
            EmbeddingMatrix::scatter_grad(g, &cache.padded, &d_emb);
        }
        Ok(loss)
    }

    pub fn backward(&self, seq: &TokenSequence, label: Label, mask: Option<&DropoutMask>) -> Result<(f64, ParamSet)> {
        let mut grads = self.zero_grads();
        let loss = self.accumulate_grads(seq, label, mask, &mut grads)?;
        if !grads.is_finite() {
            return Err(Error::NonFinite("CNN gradients".into()));
        }
        Ok((loss, grads))
    }
}

impl ParamStore for CnnModel {
    fn param_mut(&mut self, name: &str) -> Option<&mut Mat> {
        match name {
            DENSE_W => Some(&mut self.dense_w),
            DENSE_B => Some(&mut self.dense_b),
            EMBEDDING => Some(&mut self.embedding.matrix),
            _ => {
                let (block, part) = name.strip_prefix("conv")?.split_once('.')?;
                let layer = self.conv.get_mut(block.parse::<usize>().ok()?)?;
                match part {
                    "w" => Some(&mut layer.w),
                    "b" => Some(&mut layer.b),
                    _ => None,
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::tokenize;

    fn tiny(embed_dim: usize, max_seq_len: usize) -> CnnConfig {
        CnnConfig {
            embed_dim,
            filters: 2,
            width: 2,
            blocks: 3,
            pool: 2,
            dropout: 0.0,
            l2: 1e-3,
            max_seq_len,
        }
    }

    fn model(cfg: CnnConfig) -> CnnModel {
        let vocab = Vocabulary::build(&[tokenize("the cat sat on a mat")], None, 1);
        let emb = EmbeddingMatrix::build(&vocab, None, cfg.embed_dim, 1, true).unwrap();
        CnnModel::new(cfg, vocab, emb, 2).unwrap()
    }

    #[test]
    fn stage_geometry() {
        let mut cfg = CnnConfig::standard(300);
        cfg.max_seq_len = 30;
        let err = cfg.stage_lengths().unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        cfg.max_seq_len = 40;
        assert_eq!(cfg.stage_lengths().unwrap(), [(36, 18), (14, 7), (3, 1)]);
        assert_eq!(cfg.flat_len().unwrap(), 256);
    }

    #[test]
    fn zero_weights_give_half() {
        let mut m = model(tiny(3, 16));
        for layer in &mut m.conv {
            layer.w.fill(0.0);
        }
        m.dense_w.fill(0.0);
        let (_, seq) = m.encode_title("the cat").unwrap();
        assert_eq!(m.score(&seq).unwrap(), 0.5);
    }

    #[test]
    fn unit_mask_equals_inference() {
        let m = model(tiny(3, 16));
        let (_, seq) = m.encode_title("the cat sat").unwrap();
        let flat = m.config.flat_len().unwrap();
        assert_eq!(m.score(&seq).unwrap(), m.score_train(&seq, &DropoutMask::ones(flat)).unwrap());
    }

    #[test]
    fn static_embedding_has_no_embedding_grads() {
        let mut m = model(tiny(3, 16));
        m.embedding.trainable = false;
        let (_, seq) = m.encode_title("a mat").unwrap();
        let (_, g) = m.backward(&seq, Label::Popular, None).unwrap();
        assert!(!g.contains(EMBEDDING));
    }

    #[test]
    fn param_names_resolve() {
        let mut m = model(tiny(3, 16));
        for name in m.export_params().names().map(str::to_owned).collect::<Vec<_>>() {
            assert!(m.param_mut(&name).is_some(), "{name}");
        }
        assert!(m.param_mut("conv9.w").is_none());
    }
}
