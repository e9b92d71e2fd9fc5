//! Loss, the mini-batch training loop with plateau schedule and early
//! stopping, accuracy evaluation, k-fold runs and result tables.

mod config;
mod eval;
mod fit;
mod kfold;
mod loss;
mod schedule;
mod table;

pub use config::{CnnSettings, EmbeddingMode, SvmSettings, TrainConfig};
pub use eval::{evaluate, evaluate_refs, EvalReport, THRESHOLD};
pub use fit::{
    fit, fit_with_pretrained, load_pretrained, stratified_split, EpochRecord, FitReport, StopReason,
    DIVERGENCE_CHECKPOINT,
};
pub use kfold::{mean_std, run_kfold, run_kfold_with_pretrained, FoldResult, KFoldReport};
pub use loss::{bce_logit_grad, bce_loss, clamp_prob, mean_bce, PROB_CLAMP};
pub use schedule::{PlateauSchedule, ScheduleAction};
pub use table::{emit_table, parse_table, ResultsRow, COLUMNS};
