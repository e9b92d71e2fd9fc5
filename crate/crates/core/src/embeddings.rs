//! GloVe text-format parsing and the vocabulary-indexed embedding matrix.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::Mat;
use crate::text::{TokenSequence, Vocabulary, PAD};

/// Range of the uniform init for rows missing from the pretrained vectors.
pub const OOV_INIT_RANGE: f64 = 0.05;

/// Word vectors loaded from a GloVe-style text file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Pretrained {
    vectors: HashMap<String, Vec<f64>>,
    dim: Option<usize>,
    /// Number of lines whose token had already been seen (last one wins).
    pub duplicates: usize,
}

impl Pretrained {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds from in-memory vectors; all must share one dimension.
    pub fn from_map(vectors: HashMap<String, Vec<f64>>) -> Result<Self> {
        let mut p = Pretrained::new();
        let mut entries: Vec<_> = vectors.into_iter().collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        for (token, v) in entries {
            p.insert(token, v, 0)?;
        }
        Ok(p)
    }

    fn insert(&mut self, token: String, v: Vec<f64>, line: usize) -> Result<()> {
        if v.is_empty() {
            return Err(Error::parse(line, format!("token {token:?} has no components")));
        }
        match self.dim {
            Some(d) if d != v.len() => {
                return Err(Error::parse(
                    line,
                    format!("dim mismatch at line {line}: expected {d}, found {}", v.len()),
                ))
            }
            None => self.dim = Some(v.len()),
            _ => {}
        }
        if self.vectors.insert(token, v).is_some() {
            self.duplicates += 1;
        }
        Ok(())
    }

    /// Vector dimension; errors if nothing was loaded.
    pub fn dim(&self) -> Result<usize> {
        self.dim
            .ok_or_else(|| Error::Data("pretrained vectors are empty; dimension undefined".into()))
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

pub fn parse_glove(path: &Path) -> Result<Pretrained> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_glove_reader(BufReader::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn parse_glove_str(text: &str) -> Result<Pretrained> {
    parse_glove_reader(text.as_bytes())
}

/// One `token v1 v2 ... vd` record per line, whitespace separated, no header.
pub fn parse_glove_reader<R: BufRead>(reader: R) -> Result<Pretrained> {
    let mut out = Pretrained::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| match e.kind() {
            std::io::ErrorKind::InvalidData => Error::parse(line_no, "invalid UTF-8"),
            _ => Error::io("<glove>", e),
        })?;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else {
            continue;
        };
        let vector = fields
            .map(|f| match f.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::parse(line_no, format!("non-numeric component {f:?}"))),
            })
            .collect::<Result<Vec<f64>>>()?;
        out.insert(token.to_string(), vector, line_no)?;
    }
    Ok(out)
}

/// Vocabulary-indexed word vectors (row v belongs to vocabulary index v).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub matrix: Mat,
    pub trainable: bool,
    /// Fraction of non-PAD vocabulary rows copied from pretrained vectors.
    pub coverage: f64,
}

impl EmbeddingMatrix {
    /// Copies pretrained rows where available; every other non-PAD row is
    /// drawn from U(-0.05, 0.05) with the given seed. The PAD row is zero.
    pub fn build(
        vocab: &Vocabulary,
        pretrained: Option<&Pretrained>,
        dim: usize,
        seed: u64,
        trainable: bool,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        if let Some(p) = pretrained.filter(|p| !p.is_empty()) {
            let pd = p.dim()?;
            if pd != dim {
                return Err(Error::Config(format!(
                    "pretrained vectors have dimension {pd}, model expects {dim}"
                )));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut matrix = Mat::zeros(vocab.len(), dim);
        let mut found = 0usize;
        for (v, token) in vocab.tokens().iter().enumerate() {
            if v == PAD {
                continue;
            }
            let row = matrix.row_mut(v);
            match pretrained.and_then(|p| p.get(token)) {
                Some(vec) => {
                    row.copy_from_slice(vec);
                    found += 1;
                }
                None => {
                    for x in row.iter_mut() {
                        *x = rng.gen_range(-OOV_INIT_RANGE..OOV_INIT_RANGE);
                    }
                }
            }
        }
        let denom = vocab.len().saturating_sub(1);
        let coverage = if denom == 0 { 0.0 } else { found as f64 / denom as f64 };
        Ok(EmbeddingMatrix {
            matrix,
            trainable,
            coverage,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn vocab_size(&self) -> usize {
        self.matrix.rows()
    }

    /// Rows for each token of `seq`, shape `len x d`.
    pub fn lookup(&self, seq: &TokenSequence) -> Mat {
        let d = self.dim();
        let mut out = Mat::zeros(seq.len(), d);
        for (t, &idx) in seq.indices().iter().enumerate() {
            out.row_mut(t).copy_from_slice(self.matrix.row(idx));
        }
        out
    }

    /// Lookup of a fixed-width padded index list (PAD rows are zero).
    pub fn lookup_padded(&self, indices: &[usize]) -> Mat {
        let mut out = Mat::zeros(indices.len(), self.dim());
        for (t, &idx) in indices.iter().enumerate() {
            out.row_mut(t).copy_from_slice(self.matrix.row(idx));
        }
        out
    }

    /// Adds `row_grads[t]` into the gradient row of token `indices[t]`,
    /// skipping PAD.
    pub(crate) fn scatter_grad(grad: &mut Mat, indices: &[usize], row_grads: &Mat) {
        for (t, &idx) in indices.iter().enumerate() {
            if idx == PAD {
                continue;
            }
            for (g, d) in grad.row_mut(idx).iter_mut().zip(row_grads.row(t)) {
                *g += d;
            }
        }
    }
}
