use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cv::{cross_validate, summarize, EvaluationReport, PreparedFolds};
use super::vote::majority_vote;
use super::EvaluationError;
use crate::classifiers::{best_preset, ClassifierSpec, Family};
use crate::dataset::Task;

/// One voter: a classifier trained on one feature extractor's features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMember {
    pub extractor: String,
    pub spec: ClassifierSpec,
}

impl EnsembleMember {
    pub fn label(&self) -> String {
        format!("{}+{}", self.spec.family.display_name(), self.extractor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub name: String,
    pub members: Vec<EnsembleMember>,
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<(), EvaluationError> {
        if self.members.len() < 2 {
            return Err(EvaluationError::Config(format!(
                "ensemble `{}` needs at least 2 members, got {}",
                self.name,
                self.members.len()
            )));
        }
        if self.members.len().is_multiple_of(2) {
            log::warn!(
                "ensemble `{}` has an even member count; ties fall back to mean probability",
                self.name
            );
        }
        for m in &self.members {
            m.spec.validate()?;
        }
        Ok(())
    }
}

/// The four three-member ensembles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnsemblePreset {
    GradeMultimodal,
    GradeImage,
    FreshnessMultimodal,
    FreshnessImage,
}

impl EnsemblePreset {
    pub const ALL: [EnsemblePreset; 4] = [
        EnsemblePreset::GradeMultimodal,
        EnsemblePreset::GradeImage,
        EnsemblePreset::FreshnessMultimodal,
        EnsemblePreset::FreshnessImage,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EnsemblePreset::GradeMultimodal => "grade-multimodal",
            EnsemblePreset::GradeImage => "grade-image",
            EnsemblePreset::FreshnessMultimodal => "freshness-multimodal",
            EnsemblePreset::FreshnessImage => "freshness-image",
        }
    }

    pub fn task(self) -> Task {
        match self {
            EnsemblePreset::GradeMultimodal | EnsemblePreset::GradeImage => Task::Grade,
            _ => Task::Freshness,
        }
    }

    /// Whether members see image features fused with tabular features.
    pub fn multimodal(self) -> bool {
        matches!(
            self,
            EnsemblePreset::GradeMultimodal | EnsemblePreset::FreshnessMultimodal
        )
    }

    /// `(family, extractor)` per member.
    pub fn layout(self) -> [(Family, &'static str); 3] {
        use Family::*;
        match self {
            EnsemblePreset::GradeMultimodal => [
                (XGBoostStyle, "ResNet152"),
                (Mlp, "DenseNet169"),
                (Svc, "ResNet152V2"),
            ],
            EnsemblePreset::GradeImage => [
                (RandomForest, "ResNet152"),
                (Mlp, "DenseNet169"),
                (RandomForest, "ResNet152V2"),
            ],
            EnsemblePreset::FreshnessMultimodal => [
                (XGBoostStyle, "ResNet152"),
                (Svc, "DenseNet169"),
                (Mlp, "ResNet152V2"),
            ],
            EnsemblePreset::FreshnessImage => [
                (Mlp, "ResNet152"),
                (LogisticRegression, "DenseNet169"),
                (RandomForest, "ResNet152V2"),
            ],
        }
    }

    /// Members with each family's preset hyperparameters.
    pub fn spec(self, seed: u64) -> EnsembleSpec {
        EnsembleSpec {
            name: self.name().to_string(),
            members: self
                .layout()
                .into_iter()
                .map(|(family, extractor)| EnsembleMember {
                    extractor: extractor.to_string(),
                    spec: ClassifierSpec::new(family, best_preset(family), seed),
                })
                .collect(),
        }
    }
}

impl fmt::Display for EnsemblePreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnsemblePreset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown ensemble preset `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleReport {
    pub spec: EnsembleSpec,
    pub members: Vec<EvaluationReport>,
    pub ensemble: EvaluationReport,
}

/// Checks that two fold sets evaluate the same rows in the same folds.
pub fn check_alignment(a: &PreparedFolds, b: &PreparedFolds) -> Result<(), EvaluationError> {
    if a.labels != b.labels {
        return Err(EvaluationError::Misaligned("labels differ".into()));
    }
    if a.plan.assignments != b.plan.assignments {
        return Err(EvaluationError::Misaligned(
            "fold assignments differ".into(),
        ));
    }
    let same_origin = a
        .origins
        .iter()
        .zip(&b.origins)
        .all(|(x, y)| x.is_synthetic() == y.is_synthetic() && x.base() == y.base());
    if !same_origin {
        return Err(EvaluationError::Misaligned("row origins differ".into()));
    }
    Ok(())
}

/// Votes over member out-of-fold predictions. Every report must come from
/// folds aligned with `prepared`.
pub fn combine(
    name: &str,
    members: &[EvaluationReport],
    prepared: &PreparedFolds,
) -> Result<EvaluationReport, EvaluationError> {
    let n = prepared.n_rows();
    for m in members {
        if m.oof.predictions.len() != n || m.oof.labels != prepared.labels {
            return Err(EvaluationError::Misaligned(format!(
                "member `{}` covers different rows",
                m.name
            )));
        }
    }
    let predictions: Vec<Vec<usize>> = members.iter().map(|m| m.oof.predictions.clone()).collect();
    let probabilities: Vec<Array2<f64>> = members
        .iter()
        .map(|m| Array2::from_shape_fn((n, 2), |(i, c)| m.oof.probabilities[i][c]))
        .collect();
    let votes = majority_vote(&predictions, &probabilities)?;
    let k = members.len() as f64;
    let mean: Vec<[f64; 2]> = (0..n)
        .map(|i| {
            let p1 = members
                .iter()
                .map(|m| m.oof.probabilities[i][1])
                .sum::<f64>()
                / k;
            [1.0 - p1, p1]
        })
        .collect();
    summarize(name.to_string(), None, prepared, mean, votes)
}

/// Cross-validates each member on its own folds and votes.
/// `prepared[i]` holds the features for `spec.members[i]`.
pub fn run_ensemble(
    spec: &EnsembleSpec,
    prepared: &[&PreparedFolds],
) -> Result<EnsembleReport, EvaluationError> {
    spec.validate()?;
    if prepared.len() != spec.members.len() {
        return Err(EvaluationError::Length {
            what: "member fold sets",
            expected: spec.members.len(),
            found: prepared.len(),
        });
    }
    for p in &prepared[1..] {
        check_alignment(prepared[0], p)?;
    }
    let members: Vec<EvaluationReport> = spec
        .members
        .par_iter()
        .zip(prepared.par_iter())
        .map(|(m, p)| {
            let mut r = cross_validate(&m.spec, p)?;
            r.name = m.label();
            Ok(r)
        })
        .collect::<Result<_, EvaluationError>>()?;
    let ensemble = combine(&spec.name, &members, prepared[0])?;
    Ok(EnsembleReport {
        spec: spec.clone(),
        members,
        ensemble,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_three_member_and_valid() {
        for p in EnsemblePreset::ALL {
            let s = p.spec(0);
            assert_eq!(s.members.len(), 3);
            s.validate().unwrap();
            assert_eq!(p.name().parse::<EnsemblePreset>().unwrap(), p);
        }
        let s = EnsemblePreset::GradeMultimodal.spec(0);
        assert_eq!(s.members[0].label(), "XGBoost+ResNet152");
    }

    #[test]
    fn rejects_one_member() {
        let mut s = EnsemblePreset::GradeImage.spec(0);
        s.members.truncate(1);
        assert!(s.validate().is_err());
    }
}
