//! Ingestion of measurement tables and feature matrices, sample-wise fusion,
//! label derivation and model bundle persistence.

mod bundle;
mod features;
mod fusion;
mod labeled;
mod measurements;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use bundle::{
    bundle_bytes, bundle_from_bytes, digest_json, load_bundle, save_bundle, BundleError,
    ModelBundle, BUNDLE_SCHEMA_VERSION,
};
pub use features::{load_feature_matrix, FeatureKind, FeatureManifest, FeatureMatrix};
pub use fusion::{fuse, tabular_matrix, FusionOptions, TabularFeature};
pub use labeled::{build_labeled_dataset, LabeledDataset, Task};
pub use measurements::{
    load_measurements, write_measurements, Exclusion, MeasurementTable, Provenance,
    MEASUREMENT_COLUMNS, MEASUREMENT_SCHEMA_VERSION,
};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Csv { path: PathBuf, message: String },
    #[error("{}: missing column `{column}`", path.display())]
    MissingColumn { path: PathBuf, column: String },
    #[error("{}: duplicate egg_id `{egg_id}` at row {row}", path.display())]
    DuplicateId {
        path: PathBuf,
        egg_id: String,
        row: usize,
    },
    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),
    #[error("{}: row {row}, column `{column}`: cannot parse `{value}`", path.display())]
    Parse {
        path: PathBuf,
        row: usize,
        column: String,
        value: String,
    },
    #[error("{}: row {row}, column `{column}`: non-finite value `{value}`", path.display())]
    NonFinite {
        path: PathBuf,
        row: usize,
        column: String,
        value: String,
    },
    #[error("{}: row {row} has {found} fields, expected {expected}", path.display())]
    Ragged {
        path: PathBuf,
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("{}: manifest declares {expected} columns but file has {found}", path.display())]
    Dimension {
        path: PathBuf,
        expected: usize,
        found: usize,
    },
    #[error("{}: invalid manifest: {message}", path.display())]
    Manifest { path: PathBuf, message: String },
    #[error("matrix shape {found:?} does not match ids x columns {expected:?}")]
    Shape {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("{} egg id(s) have no measurement row: {}", missing.len(), preview(missing))]
    Alignment { missing: Vec<String> },
    #[error("invalid tabular feature spec: {0}")]
    TabularSpec(String),
    #[error("{task} dataset has only class `{present}`; both classes are required")]
    SingleClass { task: Task, present: String },
    #[error("{task} dataset is empty")]
    Empty { task: Task },
}

fn preview(ids: &[String]) -> String {
    const MAX: usize = 10;
    let mut s = ids.iter().take(MAX).cloned().collect::<Vec<_>>().join(", ");
    if ids.len() > MAX {
        s.push_str(", ...");
    }
    s
}

impl DatasetError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        DatasetError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn csv(path: &Path, err: csv::Error) -> Self {
        DatasetError::Csv {
            path: path.to_path_buf(),
            message: err.to_string(),
        }
    }

    /// Attaches a file path to errors raised before the path was known.
    pub(crate) fn with_path(self, p: &Path) -> Self {
        match self {
            DatasetError::DuplicateId { egg_id, row, .. } => DatasetError::DuplicateId {
                path: p.to_path_buf(),
                egg_id,
                row,
            },
            DatasetError::NonFinite {
                row, column, value, ..
            } => DatasetError::NonFinite {
                path: p.to_path_buf(),
                row,
                column,
                value,
            },
            other => other,
        }
    }
}
