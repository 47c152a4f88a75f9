//! Class balancing and dimensionality reduction.

mod pca;
mod smote;

use thiserror::Error;

pub use pca::{fit_pca, PcaConfig, PcaModel};
pub use smote::{smote_resample, Resampled, RowOrigin, SmoteConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransformError {
    #[error("expected {expected} columns, found {found}")]
    Shape { expected: usize, found: usize },
    #[error("PCA needs at least 2 rows, got {rows}")]
    TooFewRows { rows: usize },
    #[error("zero total variance: all rows are identical")]
    Degenerate,
    #[error("non-finite input value")]
    NonFinite,
    #[error("minority class has {minority} rows; SMOTE with k = {k} needs more than k")]
    MinorityTooSmall { minority: usize, k: usize },
    #[error("{0}")]
    Config(String),
}
