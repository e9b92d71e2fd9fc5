use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{make_folds, LabeledExample};
use crate::embeddings::Pretrained;
use crate::error::Result;

use super::config::TrainConfig;
use super::eval::{evaluate_refs, EvalReport};
use super::fit::{fit_with_pretrained, load_pretrained, FitReport};
use super::table::ResultsRow;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub eval: EvalReport,
    pub fit: FitReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KFoldReport {
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<FoldResult>,
    pub mean_accuracy: f64,
    /// Sample standard deviation across folds.
    pub std_accuracy: f64,
    pub row: ResultsRow,
}

/// k-fold cross-validation. Each fold trains on the other k-1 folds (with
/// its own validation carve-out for early stopping) and tests on itself.
/// Folds run in parallel; results are ordered by fold index.
pub fn run_kfold(data: &[LabeledExample], config: &TrainConfig, k: usize) -> Result<KFoldReport> {
    config.validate()?;
    let pretrained = load_pretrained(config)?;
    run_kfold_with_pretrained(data, config, k, pretrained.as_ref())
}

pub fn run_kfold_with_pretrained(
    data: &[LabeledExample],
    config: &TrainConfig,
    k: usize,
    pretrained: Option<&Pretrained>,
) -> Result<KFoldReport> {
    config.validate()?;
    let plan = make_folds(data, k, config.seed)?;
    let folds: Vec<FoldResult> = (0..k)
        .into_par_iter()
        .map(|fold| -> Result<FoldResult> {
            let (train, test) = plan.split(data, fold);
            let train: Vec<LabeledExample> = train.into_iter().cloned().collect();
            let (model, fit) = fit_with_pretrained(&train, config, pretrained)?;
            let eval = evaluate_refs(&model, test.iter().copied())?;
            log::info!("fold {fold}: accuracy {:.4} on {} examples", eval.accuracy, eval.n);
            Ok(FoldResult {
                fold,
                train_size: train.len(),
                test_size: test.len(),
                eval,
                fit,
            })
        })
        .collect::<Result<_>>()?;
    let accs: Vec<f64> = folds.iter().map(|f| f.eval.accuracy).collect();
    let (mean_accuracy, std_accuracy) = mean_std(&accs);
    Ok(KFoldReport {
        k,
        seed: config.seed,
        folds,
        mean_accuracy,
        std_accuracy,
        row: ResultsRow::describe(config, pretrained.is_some(), mean_accuracy),
    })
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_matches_hand_values() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[0.7]), (0.7, 0.0));
    }
}
