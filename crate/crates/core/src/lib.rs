//! Headline popularity prediction.
//!
//! A title is tokenized, mapped through a vocabulary to embedding rows and
//! read by a (bidirectional) LSTM whose last states feed a single sigmoid
//! unit. Applying that unit at each position gives a per-word popularity
//! read-out. Bag-of-words SVM and word-level CNN baselines, a training loop
//! with Adam, plateau decay and early stopping, k-fold evaluation and a
//! versioned model file format are included.
//!
//! ```no_run
//! use headpop::{corpus, training};
//!
//! let data = corpus::load_labeled("labeled.jsonl".as_ref(), corpus::DatasetFormat::Jsonl)?;
//! let config = training::TrainConfig { hidden: 32, embed_dim: 16, ..Default::default() };
//! let (model, report) = training::fit(&data, &config)?;
//! println!("best epoch {} -> {:.3}", report.best_epoch, model.score_title("Cats do the thing")?);
//! # Ok::<(), headpop::Error>(())
//! ```

pub mod baselines;
pub mod corpus;
pub mod embeddings;
mod error;
pub mod model;
pub mod numerics;
pub mod persist;
pub mod recurrent;
pub mod synth;
pub mod text;
pub mod training;

pub use error::{Error, Result};
pub use model::{Model, ModelInfo, ModelKind, Prediction};
pub use persist::{load_model, save_model};
