//! Cross-validation, metrics and majority-vote ensembles.

mod cv;
mod ensemble;
mod folds;
mod metrics;
pub mod report;
mod search;
mod vote;

use thiserror::Error;

use crate::classifiers::ClassifierError;
use crate::transforms::TransformError;

pub use cv::{
    cross_validate, prepare_folds, EvalMode, EvaluationReport, FoldData, OutOfFold,
    PipelineOptions, PreparedFolds,
};
pub use ensemble::{
    check_alignment, combine, run_ensemble, EnsembleMember, EnsemblePreset, EnsembleReport,
    EnsembleSpec,
};
pub use folds::FoldPlan;
pub use metrics::{confusion_and_accuracy, roc_auc, ConfusionMatrix, RocCurve, RocPoint};
pub use search::{compare_entries, grid_search, GridSearchResult, LeaderboardEntry, TIE_TOLERANCE};
pub use vote::majority_vote;

#[derive(Debug, Error)]
pub enum EvaluationError {
    #[error("invalid evaluation setup: {0}")]
    Config(String),
    #[error("expected {expected} {what}, found {found}")]
    Length {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("AUC is undefined when only one class is present")]
    UndefinedAuc,
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: ClassifierError,
    },
    #[error("ensemble members are not aligned: {0}")]
    Misaligned(String),
}
