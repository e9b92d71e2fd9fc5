//! Versioned JSON model files.
//!
//! ```text
//! {"format":"headpop-model","version":1,"model_kind":"bilstm",
//!  "config":{...},"vocab":{"tokens":[...],"min_count":1},
//!  "embedding":{"trainable":true,"coverage":0.93},
//!  "params":{"fwd.w_i":{"rows":8,"cols":14,"data":[...]},...}}
//! ```
//!
//! Floats are written in shortest round-trip form and parsed back exactly,
//! so save/load is bit-exact.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::baselines::{BowMode, BowSvmModel, CnnConfig, CnnModel, SvmParams};
use crate::embeddings::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::model::{Model, ModelKind};
use crate::numerics::{Mat, ParamSet};
use crate::recurrent::{LstmParams, RecurrentConfig, RecurrentKind, RecurrentModel, EMBEDDING};
use crate::text::Vocabulary;

pub const FORMAT_NAME: &str = "headpop-model";
pub const FORMAT_VERSION: u32 = 1;

const SVM_W: &str = "svm.w";
const SVM_B: &str = "svm.b";

#[derive(Serialize, Deserialize)]
struct MatRecord {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmbeddingMeta {
    trainable: bool,
    coverage: f64,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
#[serde(deny_unknown_fields)]
struct BowSvmConfig {
    mode: BowMode,
    max_seq_len: usize,
    lambda: f64,
}

#[derive(Serialize)]
struct Envelope<'a, C: Serialize> {
    format: &'static str,
    version: u32,
    model_kind: ModelKind,
    config: &'a C,
    vocab: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    embedding: Option<EmbeddingMeta>,
    params: BTreeMap<&'a str, MatRecord>,
}

fn records(params: &ParamSet) -> BTreeMap<&str, MatRecord> {
    params
        .iter()
        .map(|(name, m)| {
            (
                name,
                MatRecord {
                    rows: m.rows(),
                    cols: m.cols(),
                    data: m.as_slice().to_vec(),
                },
            )
        })
        .collect()
}

fn emb_meta(e: &EmbeddingMatrix) -> EmbeddingMeta {
    EmbeddingMeta {
        trainable: e.trainable,
        coverage: e.coverage,
    }
}

/// Serializes a model to its JSON envelope.
pub fn to_json(model: &Model) -> Result<String> {
    let kind = model.kind();
    let vocab = model.vocab().to_value();
    let out = match model {
        Model::Recurrent(m) => {
            let params = m.export_params();
            serde_json::to_string(&Envelope {
                format: FORMAT_NAME,
                version: FORMAT_VERSION,
                model_kind: kind,
                config: &m.config,
                vocab,
                embedding: Some(emb_meta(&m.embedding)),
                params: records(&params),
            })
        }
        Model::Cnn(m) => {
            let params = m.export_params();
            serde_json::to_string(&Envelope {
                format: FORMAT_NAME,
                version: FORMAT_VERSION,
                model_kind: kind,
                config: &m.config,
                vocab,
                embedding: Some(emb_meta(&m.embedding)),
                params: records(&params),
            })
        }
        Model::BowSvm(m) => {
            let mut params = ParamSet::new();
            params.insert(SVM_W, Mat::from_vec(1, m.params.w.len(), m.params.w.clone())?)?;
            params.insert(SVM_B, Mat::scalar(m.params.b)?)?;
            serde_json::to_string(&Envelope {
                format: FORMAT_NAME,
                version: FORMAT_VERSION,
                model_kind: kind,
                config: &BowSvmConfig {
                    mode: m.mode,
                    max_seq_len: m.max_seq_len,
                    lambda: m.params.lambda,
                },
                vocab,
                embedding: None,
                params: records(&params),
            })
        }
    };
    out.map_err(|e| Error::ModelFormat(e.to_string()))
}

/// Writes atomically: a temporary file in the target directory is renamed
/// over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(contents).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    write_atomic(path, to_json(model)?.as_bytes())
}

pub fn load_model(path: &Path) -> Result<Model> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_slice(&bytes)
}

pub fn from_json(text: &str) -> Result<Model> {
    from_slice(text.as_bytes())
}

fn field<'a>(obj: &'a serde_json::Map<String, Value>, key: &str) -> Result<&'a Value> {
    obj.get(key)
        .ok_or_else(|| Error::ModelFormat(format!("missing field {key:?}")))
}

fn typed<T: for<'de> Deserialize<'de>>(v: &Value, what: &str) -> Result<T> {
    T::deserialize(v).map_err(|e| Error::ModelFormat(format!("{what}: {e}")))
}

pub fn from_slice(bytes: &[u8]) -> Result<Model> {
    let value: Value = serde_json::from_slice(bytes).map_err(|e| {
        if e.is_eof() {
            Error::Truncated
        } else {
            Error::ModelFormat(e.to_string())
        }
    })?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::ModelFormat("top level is not an object".into()))?;
    if field(obj, "format")?.as_str() != Some(FORMAT_NAME) {
        return Err(Error::ModelFormat(format!("not a {FORMAT_NAME} file")));
    }
    let version = field(obj, "version")?;
    if version.as_u64() != Some(FORMAT_VERSION as u64) {
        let found = match version {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        return Err(Error::Version {
            found,
            expected: FORMAT_VERSION,
        });
    }
    let kind: ModelKind = typed(field(obj, "model_kind")?, "model_kind")?;
    let vocab = Vocabulary::from_value(field(obj, "vocab")?.clone())?;
    let raw_params: BTreeMap<String, MatRecord> = typed(field(obj, "params")?, "params")?;
    let mut params = ParamSet::new();
    for (name, rec) in raw_params {
        let m = Mat::from_vec(rec.rows, rec.cols, rec.data)
            .map_err(|e| Error::Shape(format!("parameter {name}: {e}")))?;
        params.insert(name, m)?;
    }
    let config = field(obj, "config")?;

    let model = match kind {
        ModelKind::Lstm | ModelKind::BiLstm => {
            let config: RecurrentConfig = typed(config, "config")?;
            let expected = if kind == ModelKind::Lstm {
                RecurrentKind::Lstm
            } else {
                RecurrentKind::BiLstm
            };
            if config.kind != expected {
                return Err(Error::ModelFormat("config kind disagrees with model_kind".into()));
            }
            let embedding = load_embedding(obj, &params, &vocab, config.embed_dim)?;
            let (h, d) = (config.hidden, config.embed_dim);
            let mut m = RecurrentModel {
                backward: (expected == RecurrentKind::BiLstm).then(|| LstmParams::zeros(h, d)),
                forward: LstmParams::zeros(h, d),
                head_w: Mat::zeros(1, if expected == RecurrentKind::BiLstm { 2 * h } else { h }),
                head_b: Mat::zeros(1, 1),
                config,
                vocab,
                embedding,
            };
            check_no_extra(&params, &m.export_params())?;
            m.import_params(&params)?;
            m.validate()?;
            Model::Recurrent(m)
        }
        ModelKind::Cnn => {
            let config: CnnConfig = typed(config, "config")?;
            config.validate().map_err(|e| Error::ModelFormat(e.to_string()))?;
            let embedding = load_embedding(obj, &params, &vocab, config.embed_dim)?;
            let mut conv = Vec::with_capacity(config.blocks);
            let mut in_ch = config.embed_dim;
            for _ in 0..config.blocks {
                conv.push(crate::baselines::ConvLayer {
                    w: Mat::zeros(config.filters, config.width * in_ch),
                    b: Mat::zeros(config.filters, 1),
                });
                in_ch = config.filters;
            }
            let flat = config.flat_len()?;
            let mut m = CnnModel {
                config,
                vocab,
                embedding,
                conv,
                dense_w: Mat::zeros(1, flat),
                dense_b: Mat::zeros(1, 1),
            };
            check_no_extra(&params, &m.export_params())?;
            m.import_params(&params)?;
            m.validate()?;
            Model::Cnn(m)
        }
        ModelKind::BowSvm => {
            let config: BowSvmConfig = typed(config, "config")?;
            let w = params
                .get(SVM_W)
                .ok_or_else(|| Error::ModelFormat("missing parameter svm.w".into()))?;
            let b = params
                .get(SVM_B)
                .ok_or_else(|| Error::ModelFormat("missing parameter svm.b".into()))?;
            if w.shape() != (1, vocab.len()) || b.shape() != (1, 1) {
                return Err(Error::Shape(format!(
                    "svm weights {:?} for vocabulary of {}",
                    w.shape(),
                    vocab.len()
                )));
            }
            if params.len() != 2 {
                return Err(Error::ModelFormat("unexpected parameters in bow_svm model".into()));
            }
            Model::BowSvm(BowSvmModel {
                vocab,
                mode: config.mode,
                max_seq_len: config.max_seq_len,
                params: SvmParams {
                    w: w.as_slice().to_vec(),
                    b: b.get(0, 0),
                    lambda: config.lambda,
                },
            })
        }
    };
    Ok(model)
}

fn load_embedding(
    obj: &serde_json::Map<String, Value>,
    params: &ParamSet,
    vocab: &Vocabulary,
    dim: usize,
) -> Result<EmbeddingMatrix> {
    let meta: EmbeddingMeta = typed(field(obj, "embedding")?, "embedding")?;
    let matrix = params
        .get(EMBEDDING)
        .ok_or_else(|| Error::ModelFormat("missing parameter embedding".into()))?;
    if matrix.shape() != (vocab.len(), dim) {
        return Err(Error::Shape(format!(
            "embedding is {:?}, expected ({}, {dim})",
            matrix.shape(),
            vocab.len()
        )));
    }
    Ok(EmbeddingMatrix {
        matrix: matrix.clone(),
        trainable: meta.trainable,
        coverage: meta.coverage,
    })
}

fn check_no_extra(found: &ParamSet, expected: &ParamSet) -> Result<()> {
    match found.names().find(|n| !expected.contains(n)) {
        Some(extra) => Err(Error::ModelFormat(format!("unexpected parameter {extra}"))),
        None => Ok(()),
    }
}
