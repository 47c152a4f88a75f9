use std::fmt;

use eggq_core::classifiers::ClassifierError;
use eggq_core::dataset::{BundleError, DatasetError};
use eggq_core::domain::DomainError;
use eggq_core::evaluation::EvaluationError;
use eggq_core::transforms::TransformError;

/// Process exit status by failure class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    /// Unreadable, malformed or inconsistent input data.
    Data = 2,
    /// Invalid configuration or arguments.
    Config = 3,
    /// Numerical failure: degenerate or non-finite values.
    Numeric = 4,
    Other = 1,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ExitKind,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        Self {
            kind: ExitKind::Config,
            error: anyhow::anyhow!(msg.into()),
        }
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Self {
            kind: ExitKind::Data,
            error: anyhow::anyhow!(msg.into()),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind as i32
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

fn transform_kind(e: &TransformError) -> ExitKind {
    match e {
        TransformError::Degenerate | TransformError::NonFinite => ExitKind::Numeric,
        TransformError::Config(_) => ExitKind::Config,
        _ => ExitKind::Data,
    }
}

fn classifier_kind(e: &ClassifierError) -> ExitKind {
    match e {
        ClassifierError::UnknownFamily(_) | ClassifierError::Hyperparameter { .. } => {
            ExitKind::Config
        }
        ClassifierError::NonFinite { .. } => ExitKind::Numeric,
        _ => ExitKind::Data,
    }
}

/// Classifies an error by the first recognised cause in its chain.
pub fn classify(error: &anyhow::Error) -> ExitKind {
    for cause in error.chain() {
        if cause.is::<DatasetError>() || cause.is::<BundleError>() || cause.is::<DomainError>() {
            return ExitKind::Data;
        }
        if let Some(e) = cause.downcast_ref::<TransformError>() {
            return transform_kind(e);
        }
        if let Some(e) = cause.downcast_ref::<ClassifierError>() {
            return classifier_kind(e);
        }
        if let Some(e) = cause.downcast_ref::<EvaluationError>() {
            return match e {
                EvaluationError::Config(_) => ExitKind::Config,
                EvaluationError::Transform(t) => transform_kind(t),
                EvaluationError::Classifier(c) | EvaluationError::Fold { source: c, .. } => {
                    classifier_kind(c)
                }
                _ => ExitKind::Data,
            };
        }
        if cause.is::<toml::de::Error>() {
            return ExitKind::Config;
        }
        if let Some(e) = cause.downcast_ref::<std::io::Error>() {
            if e.kind() == std::io::ErrorKind::NotFound {
                return ExitKind::Data;
            }
        }
    }
    ExitKind::Other
}

impl From<anyhow::Error> for CliError {
    fn from(error: anyhow::Error) -> Self {
        Self {
            kind: classify(&error),
            error,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use anyhow::Context;

    #[test]
    fn classes_follow_the_cause_chain() {
        let e: anyhow::Error =
            anyhow::Error::from(TransformError::Degenerate).context("fitting PCA");
        assert_eq!(classify(&e), ExitKind::Numeric);
        let e = Err::<(), _>(EvaluationError::Config("bad k".into()))
            .context("x")
            .unwrap_err();
        assert_eq!(classify(&e), ExitKind::Config);
        let e = anyhow::Error::from(ClassifierError::Empty);
        assert_eq!(classify(&e), ExitKind::Data);
        assert_eq!(classify(&anyhow::anyhow!("boom")), ExitKind::Other);
        let missing = std::io::Error::new(std::io::ErrorKind::NotFound, "gone");
        assert_eq!(
            classify(&anyhow::Error::from(missing).context("reading x")),
            ExitKind::Data
        );
    }
}
