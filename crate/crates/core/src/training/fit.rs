use std::collections::HashSet;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    bow_featurize, svm_predict, svm_train, BowSvmModel, BowVector, CnnModel, DropoutMask, SvmConfig,
};
use crate::corpus::{fisher_yates, Label, LabeledExample};
use crate::embeddings::{parse_glove, EmbeddingMatrix, Pretrained};
use crate::error::{Error, Result};
use crate::model::{Model, ModelKind};
use crate::numerics::{sigmoid, AdamConfig, AdamState, ParamSet, ParamStore, GRAD_CLIP_NORM};
use crate::persist::save_model;
use crate::recurrent::{RecurrentConfig, RecurrentKind, RecurrentModel};
use crate::text::{encode, tokenize, TokenSequence, Vocabulary};

use super::config::TrainConfig;
use super::eval::EvalReport;
use super::loss::{bce_loss, mean_bce};
use super::schedule::PlateauSchedule;

/// File name of the parameters saved when training diverges.
pub const DIVERGENCE_CHECKPOINT: &str = "last-good.model.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    EarlyStop,
    MaxEpochs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// Accuracy on the training portion after the epoch's last update.
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
    /// Learning rate in effect during this epoch.
    pub learning_rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub model_kind: ModelKind,
    pub train_size: usize,
    pub validation_size: usize,
    pub vocab_size: usize,
    pub embedding_coverage: Option<f64>,
    pub epochs: Vec<EpochRecord>,
    pub stop_reason: StopReason,
    /// 1-indexed epoch whose parameters were kept.
    pub best_epoch: usize,
    /// Not serialized and ignored by `==`, so same-seed runs compare equal.
    #[serde(skip)]
    pub wall_time: Duration,
}

impl PartialEq for FitReport {
    fn eq(&self, other: &Self) -> bool {
        self.model_kind == other.model_kind
            && self.train_size == other.train_size
            && self.validation_size == other.validation_size
            && self.vocab_size == other.vocab_size
            && self.embedding_coverage == other.embedding_coverage
            && self.epochs == other.epochs
            && self.stop_reason == other.stop_reason
            && self.best_epoch == other.best_epoch
    }
}

impl FitReport {
    pub fn best(&self) -> Option<&EpochRecord> {
        self.epochs.iter().find(|e| e.epoch == self.best_epoch)
    }

    /// First epoch whose validation accuracy reaches `target`.
    pub fn epochs_to_accuracy(&self, target: f64) -> Option<usize> {
        self.epochs
            .iter()
            .find(|e| e.val_accuracy >= target)
            .map(|e| e.epoch)
    }
}

/// Splits off `fraction` of each class as a held-out set. Within a class,
/// examples are ordered by id and shuffled with `seed`, so the split only
/// depends on ids, labels and the seed. Both returned parts keep input order.
pub fn stratified_split(
    data: &[LabeledExample],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<&LabeledExample>, Vec<&LabeledExample>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!("split fraction {fraction} outside (0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut held: HashSet<usize> = HashSet::new();
    for label in [Label::Unpopular, Label::Popular] {
        let mut idx: Vec<usize> = (0..data.len()).filter(|&i| data[i].label == label).collect();
        if idx.len() < 2 {
            return Err(Error::Data(format!(
                "class {} has {} example(s); at least 2 are needed to split",
                label.name(),
                idx.len()
            )));
        }
        idx.sort_by(|&a, &b| data[a].id().cmp(data[b].id()));
        fisher_yates(&mut idx, &mut rng);
        let take = ((idx.len() as f64 * fraction).round() as usize).clamp(1, idx.len() - 1);
        held.extend(&idx[..take]);
    }
    let (rest, out): (Vec<_>, Vec<_>) = (0..data.len()).partition(|i| !held.contains(i));
    Ok((
        rest.into_iter().map(|i| &data[i]).collect(),
        out.into_iter().map(|i| &data[i]).collect(),
    ))
}

/// Loads the GloVe file named in the config, if any.
pub fn load_pretrained(config: &TrainConfig) -> Result<Option<Pretrained>> {
    match &config.glove_path {
        Some(path) => Ok(Some(parse_glove(path)?)),
        None => Ok(None),
    }
}

/// Trains the configured model. Pretrained vectors come from
/// `config.glove_path` when set.
pub fn fit(train: &[LabeledExample], config: &TrainConfig) -> Result<(Model, FitReport)> {
    config.validate()?;
    let pretrained = load_pretrained(config)?;
    fit_with_pretrained(train, config, pretrained.as_ref())
}

/// Like [`fit`], with pretrained vectors supplied directly (the config's
/// `glove_path` is ignored).
pub fn fit_with_pretrained(
    train: &[LabeledExample],
    config: &TrainConfig,
    pretrained: Option<&Pretrained>,
) -> Result<(Model, FitReport)> {
    config.validate()?;
    let started = Instant::now();
    let (train_part, val_part) = stratified_split(train, config.validation_fraction, config.seed)?;

    let token_lists: Vec<Vec<String>> = train.iter().map(|ex| tokenize(ex.title())).collect();
    let vocab = Vocabulary::build(&token_lists, config.max_vocab, config.min_count);
    let max_len = config.effective_max_seq_len();

    let (model, mut report) = match config.model_kind {
        ModelKind::BowSvm => fit_svm(&train_part, &val_part, vocab, config)?,
        kind => {
            let train_set = Encoded::new(&train_part, &vocab, max_len)?;
            let val_set = Encoded::new(&val_part, &vocab, max_len)?;
            let embedding = EmbeddingMatrix::build(
                &vocab,
                pretrained,
                config.embed_dim,
                config.seed.wrapping_add(1),
                config.embedding_mode.trainable(),
            )?;
            let coverage = pretrained.map(|_| embedding.coverage);
            let init_seed = config.seed.wrapping_add(2);
            let mut model = if kind == ModelKind::Cnn {
                let cnn = CnnModel::new(config.cnn.to_config(config.embed_dim), vocab, embedding, init_seed)?;
                Model::Cnn(cnn)
            } else {
                let kind = if kind == ModelKind::Lstm {
                    RecurrentKind::Lstm
                } else {
                    RecurrentKind::BiLstm
                };
                let rc = RecurrentConfig {
                    kind,
                    hidden: config.hidden,
                    embed_dim: config.embed_dim,
                    max_seq_len: config.max_seq_len,
                };
                Model::Recurrent(RecurrentModel::new(rc, vocab, embedding, init_seed)?)
            };
            let outcome = match &mut model {
                Model::Recurrent(m) => train_loop(m, &train_set, &val_set, config),
                Model::Cnn(m) => train_loop(m, &train_set, &val_set, config),
                Model::BowSvm(_) => unreachable!("handled above"),
            };
            match outcome {
                Ok(run) => {
                    let report = FitReport {
                        model_kind: model.kind(),
                        train_size: train_set.len(),
                        validation_size: val_set.len(),
                        vocab_size: model.vocab().len(),
                        embedding_coverage: coverage,
                        epochs: run.epochs,
                        stop_reason: run.stop_reason,
                        best_epoch: run.best_epoch,
                        wall_time: Duration::ZERO,
                    };
                    (model, report)
                }
                Err(LoopError::Fail(e)) => return Err(e),
                Err(LoopError::Diverged { epoch, reason }) => {
                    let checkpoint = match &config.checkpoint_dir {
                        Some(dir) => {
                            let path = dir.join(DIVERGENCE_CHECKPOINT);
                            save_model(&model, &path)?;
                            Some(path)
                        }
                        None => None,
                    };
                    log::error!("training diverged at epoch {epoch}: {reason}");
                    return Err(Error::Divergence {
                        epoch,
                        reason,
                        checkpoint,
                    });
                }
            }
        }
    };
    report.wall_time = started.elapsed();
    Ok((model, report))
}

struct Encoded {
    seqs: Vec<TokenSequence>,
    labels: Vec<Label>,
}

impl Encoded {
    fn new(examples: &[&LabeledExample], vocab: &Vocabulary, max_len: usize) -> Result<Self> {
        let mut seqs = Vec::with_capacity(examples.len());
        for ex in examples {
            seqs.push(encode(ex.title(), vocab, max_len).map_err(|e| match e {
                Error::EmptyTitle => Error::Data(format!("example {:?} has no tokens", ex.id())),
                other => other,
            })?);
        }
        Ok(Encoded {
            seqs,
            labels: examples.iter().map(|ex| ex.label).collect(),
        })
    }

    fn len(&self) -> usize {
        self.seqs.len()
    }
}

/// The pieces of a neural model the mini-batch loop needs.
trait Trainable: ParamStore {
    fn grad_buffer(&self) -> ParamSet;
    fn example_grads(
        &self,
        seq: &TokenSequence,
        label: Label,
        rng: &mut ChaCha8Rng,
        grads: &mut ParamSet,
    ) -> Result<f64>;
    fn probability(&self, seq: &TokenSequence) -> Result<f64>;
    fn snapshot(&self) -> ParamSet;
    fn restore(&mut self, params: &ParamSet) -> Result<()>;
}

impl Trainable for RecurrentModel {
    fn grad_buffer(&self) -> ParamSet {
        self.zero_grads()
    }

    fn example_grads(
        &self,
        seq: &TokenSequence,
        label: Label,
        _rng: &mut ChaCha8Rng,
        grads: &mut ParamSet,
    ) -> Result<f64> {
        self.accumulate_grads(seq, label, grads)
    }

    fn probability(&self, seq: &TokenSequence) -> Result<f64> {
        self.score(seq)
    }

    fn snapshot(&self) -> ParamSet {
        self.export_params()
    }

    fn restore(&mut self, params: &ParamSet) -> Result<()> {
        self.import_params(params)
    }
}

impl Trainable for CnnModel {
    fn grad_buffer(&self) -> ParamSet {
        self.zero_grads()
    }

    fn example_grads(
        &self,
        seq: &TokenSequence,
        label: Label,
        rng: &mut ChaCha8Rng,
        grads: &mut ParamSet,
    ) -> Result<f64> {
        if self.config.dropout > 0.0 {
            let mask = DropoutMask::sample(self.config.flat_len()?, self.config.dropout, rng);
            self.accumulate_grads(seq, label, Some(&mask), grads)
        } else {
            self.accumulate_grads(seq, label, None, grads)
        }
    }

    fn probability(&self, seq: &TokenSequence) -> Result<f64> {
        self.score(seq)
    }

    fn snapshot(&self) -> ParamSet {
        self.export_params()
    }

    fn restore(&mut self, params: &ParamSet) -> Result<()> {
        self.import_params(params)
    }
}

struct LoopRun {
    epochs: Vec<EpochRecord>,
    stop_reason: StopReason,
    best_epoch: usize,
}

enum LoopError {
    /// The model has already been restored to its best parameters.
    Diverged { epoch: usize, reason: String },
    Fail(Error),
}

impl From<Error> for LoopError {
    fn from(e: Error) -> Self {
        LoopError::Fail(e)
    }
}

fn score_all<M: Trainable>(model: &M, set: &Encoded) -> Result<Vec<(f64, Label)>> {
    set.seqs
        .iter()
        .zip(&set.labels)
        .map(|(seq, &y)| Ok((model.probability(seq)?, y)))
        .collect()
}

fn diverged<M: Trainable>(
    model: &mut M,
    best: &ParamSet,
    epoch: usize,
    what: String,
) -> std::result::Result<LoopRun, LoopError> {
    model.restore(best)?;
    Err(LoopError::Diverged {
        epoch,
        reason: format!("non-finite value in {what}"),
    })
}

fn train_loop<M: Trainable>(
    model: &mut M,
    train: &Encoded,
    val: &Encoded,
    config: &TrainConfig,
) -> std::result::Result<LoopRun, LoopError> {
    let mut adam = AdamState::new(AdamConfig {
        learning_rate: config.learning_rate,
        ..AdamConfig::default()
    })?;
    let mut schedule = PlateauSchedule::new(
        config.plateau_patience,
        config.early_stop_patience,
        config.min_delta,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(3));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut grads = model.grad_buffer();
    let mut best = model.snapshot();
    let mut epochs = Vec::new();
    let mut stop_reason = StopReason::MaxEpochs;

    for epoch in 1..=config.max_epochs {
        let learning_rate = adam.learning_rate();
        fisher_yates(&mut order, &mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            grads.fill_zero();
            let mut batch_loss = 0.0;
            for &i in batch {
                match model.example_grads(&train.seqs[i], train.labels[i], &mut rng, &mut grads) {
                    Ok(l) => batch_loss += l,
                    Err(Error::NonFinite(what)) => return diverged(model, &best, epoch, what),
                    Err(e) => return Err(e.into()),
                }
            }
            if !batch_loss.is_finite() || !grads.is_finite() {
                return diverged(model, &best, epoch, "training loss or gradient".into());
            }
            grads.scale(1.0 / batch.len() as f64);
            grads.clip_global_norm(GRAD_CLIP_NORM);
            adam.step(model, &grads)?;
            loss_sum += batch_loss;
        }
        let train_loss = loss_sum / train.len() as f64;

        let scored = match score_all(model, train).and_then(|train_scored| {
            let acc = EvalReport::from_scores(train_scored)?.accuracy;
            Ok((acc, score_all(model, val)?))
        }) {
            Ok(s) => s,
            Err(Error::NonFinite(what)) => return diverged(model, &best, epoch, what),
            Err(e) => return Err(e.into()),
        };
        let (train_accuracy, scored) = scored;
        let val_loss = mean_bce(&scored.iter().map(|&(p, y)| (p, y.as_f64())).collect::<Vec<_>>());
        if !val_loss.is_finite() {
            return diverged(model, &best, epoch, "validation loss".into());
        }
        let val_accuracy = EvalReport::from_scores(scored)?.accuracy;
        log::info!(
            "epoch {epoch}: train_loss={train_loss:.6} train_acc={train_accuracy:.4} val_loss={val_loss:.6} val_acc={val_accuracy:.4} lr={learning_rate}"
        );
        epochs.push(EpochRecord {
            epoch,
            train_loss,
            train_accuracy,
            val_loss,
            val_accuracy,
            learning_rate,
        });

        let action = schedule.observe(epoch, val_loss);
        if action.checkpoint {
            best = model.snapshot();
        }
        if action.reduce_lr {
            let lr = learning_rate * config.plateau_factor;
            log::info!("validation loss plateaued; learning rate {learning_rate} -> {lr}");
            adam.set_learning_rate(lr);
        }
        if action.stop {
            log::info!("early stop at epoch {epoch}; best epoch {}", schedule.best_epoch());
            stop_reason = StopReason::EarlyStop;
            break;
        }
    }
    model.restore(&best)?;
    Ok(LoopRun {
        epochs,
        stop_reason,
        best_epoch: schedule.best_epoch(),
    })
}

fn fit_svm(
    train: &[&LabeledExample],
    val: &[&LabeledExample],
    vocab: Vocabulary,
    config: &TrainConfig,
) -> Result<(Model, FitReport)> {
    let mode = config.svm.features;
    let max_len = config.max_seq_len;
    let featurize = |set: &[&LabeledExample]| -> Result<Vec<(BowVector, Label)>> {
        set.iter()
            .map(|ex| {
                let seq = encode(ex.title(), &vocab, max_len).map_err(|e| match e {
                    Error::EmptyTitle => Error::Data(format!("example {:?} has no tokens", ex.id())),
                    other => other,
                })?;
                Ok((bow_featurize(&seq, &vocab, mode), ex.label))
            })
            .collect()
    };
    let train_x = featurize(train)?;
    let val_x = featurize(val)?;
    let svm = SvmConfig {
        lambda: config.svm.lambda,
        epochs: config.svm.epochs,
        seed: config.seed,
    };
    let (params, svm_report) = svm_train(&train_x, svm)?;

    let mut train_pairs = Vec::with_capacity(train_x.len());
    for (x, y) in &train_x {
        train_pairs.push((svm_predict(&params, x)?.label, *y));
    }
    let mut val_loss = 0.0;
    let mut pairs = Vec::with_capacity(val_x.len());
    for (x, y) in &val_x {
        let p = svm_predict(&params, x)?;
        val_loss += bce_loss(sigmoid(p.margin), y.as_f64());
        pairs.push((p.label, *y));
    }
    val_loss /= val_x.len() as f64;
    let steps = (config.svm.epochs * train_x.len()) as f64;
    let report = FitReport {
        model_kind: ModelKind::BowSvm,
        train_size: train_x.len(),
        validation_size: val_x.len(),
        vocab_size: vocab.len(),
        embedding_coverage: None,
        epochs: vec![EpochRecord {
            epoch: 1,
            train_loss: *svm_report.objectives.last().expect("at least one epoch"),
            train_accuracy: EvalReport::from_predictions(train_pairs)?.accuracy,
            val_loss,
            val_accuracy: EvalReport::from_predictions(pairs)?.accuracy,
            learning_rate: 1.0 / (config.svm.lambda * steps),
        }],
        stop_reason: StopReason::MaxEpochs,
        best_epoch: 1,
        wall_time: Duration::ZERO,
    };
    let model = Model::BowSvm(BowSvmModel {
        vocab,
        mode,
        max_seq_len: max_len,
        params,
    });
    Ok((model, report))
}
