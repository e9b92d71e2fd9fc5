use serde::{Deserialize, Serialize};

use crate::corpus::{Label, LabeledExample};
use crate::error::{Error, Result};
use crate::model::Model;

/// Decision threshold: popular iff the score is strictly above it.
pub const THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub n: usize,
}

impl EvalReport {
    /// Builds the confusion counts from `(predicted, actual)` pairs.
    pub fn from_predictions(pairs: impl IntoIterator<Item = (Label, Label)>) -> Result<Self> {
        let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
        for (pred, actual) in pairs {
            match (pred, actual) {
                (Label::Popular, Label::Popular) => tp += 1,
                (Label::Popular, Label::Unpopular) => fp += 1,
                (Label::Unpopular, Label::Unpopular) => tn += 1,
                (Label::Unpopular, Label::Popular) => fn_ += 1,
            }
        }
        let n = tp + fp + tn + fn_;
        if n == 0 {
            return Err(Error::Data("cannot evaluate on an empty test set".into()));
        }
        Ok(EvalReport {
            accuracy: (tp + tn) as f64 / n as f64,
            tp,
            fp,
            tn,
            fn_,
            n,
        })
    }

    pub fn from_scores(pairs: impl IntoIterator<Item = (f64, Label)>) -> Result<Self> {
        Self::from_predictions(
            pairs
                .into_iter()
                .map(|(score, y)| (Label::from_bool(score > THRESHOLD), y)),
        )
    }
}

pub fn evaluate(model: &Model, test: &[LabeledExample]) -> Result<EvalReport> {
    evaluate_refs(model, test.iter())
}

pub fn evaluate_refs<'a>(
    model: &Model,
    test: impl IntoIterator<Item = &'a LabeledExample>,
) -> Result<EvalReport> {
    let mut pairs = Vec::new();
    for ex in test {
        let pred = model.predict(ex.title()).map_err(|e| match e {
            Error::EmptyTitle => Error::Data(format!("example {:?} has no tokens", ex.id())),
            other => other,
        })?;
        pairs.push((pred.label, ex.label));
    }
    EvalReport::from_predictions(pairs)
}
