//! Binary classifiers behind one training interface.
//!
//! Every family is implemented in this crate. A [`ClassifierSpec`] names the
//! family, its hyperparameters and a seed; [`train`] turns it into a
//! [`ClassifierModel`] whose [`predict_proba`](ClassifierModel::predict_proba)
//! returns one `[P(class 0), P(class 1)]` row per sample.

mod adaboost;
mod boosting;
mod forest;
mod grid;
pub mod logistic;
pub mod mlp;
mod params;
mod svc;
mod tree;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adaboost::{AdaBoostModel, AdaBoostParams, BaseEstimator};
pub use boosting::{BoostMode, BoostParams, BoostedModel};
pub use forest::{ForestParams, RandomForest};
pub use grid::{best_preset, complexity_key, default_grid, HyperparameterGrid};
pub use logistic::{LogisticModel, LogisticParams, Penalty};
pub use mlp::{Activation, MlpModel, MlpParams, Solver};
pub use params::{ClassWeight, Hyperparameters, ParamValue};
pub use svc::{Kernel, SvcModel, SvcParams};
pub use tree::{Criterion, DecisionTree, TreeParams};

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("unknown classifier family `{0}`")]
    UnknownFamily(String),
    #[error("{family}: invalid hyperparameter `{name}`: {reason}")]
    Hyperparameter {
        family: Family,
        name: String,
        reason: String,
    },
    #[error("{rows} feature rows but {labels} labels")]
    LabelCount { rows: usize, labels: usize },
    #[error("labels must be 0 or 1, found {0}")]
    NonBinaryLabel(usize),
    #[error("training data has only class {0}")]
    SingleClass(usize),
    #[error("training data is empty")]
    Empty,
    #[error("non-finite feature value at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },
    #[error("model expects {expected} features, got {found}")]
    FeatureCount { expected: usize, found: usize },
}

/// Classifier families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    LogisticRegression,
    DecisionTree,
    RandomForest,
    #[serde(rename = "SVC")]
    Svc,
    GradientBoosting,
    #[serde(rename = "MLP")]
    Mlp,
    XGBoostStyle,
    LightGBMStyle,
    AdaBoost,
}

impl Family {
    /// All families in leaderboard order.
    pub const ALL: [Family; 9] = [
        Family::LogisticRegression,
        Family::DecisionTree,
        Family::RandomForest,
        Family::Svc,
        Family::GradientBoosting,
        Family::Mlp,
        Family::XGBoostStyle,
        Family::LightGBMStyle,
        Family::AdaBoost,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::LogisticRegression => "LogisticRegression",
            Family::DecisionTree => "DecisionTree",
            Family::RandomForest => "RandomForest",
            Family::Svc => "SVC",
            Family::GradientBoosting => "GradientBoosting",
            Family::Mlp => "MLP",
            Family::XGBoostStyle => "XGBoostStyle",
            Family::LightGBMStyle => "LightGBMStyle",
            Family::AdaBoost => "AdaBoost",
        }
    }

    /// Human-readable name for tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Family::LogisticRegression => "Logistic Regression",
            Family::DecisionTree => "Decision Tree",
            Family::RandomForest => "Random Forest",
            Family::Svc => "SVC",
            Family::GradientBoosting => "Gradient Boosting",
            Family::Mlp => "MLP",
            Family::XGBoostStyle => "XGBoost",
            Family::LightGBMStyle => "LightGBM",
            Family::AdaBoost => "AdaBoost",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = ClassifierError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        Ok(match key.as_str() {
            "logisticregression" | "lr" | "logistic" => Family::LogisticRegression,
            "decisiontree" | "dt" | "tree" => Family::DecisionTree,
            "randomforest" | "rf" | "forest" => Family::RandomForest,
            "svc" | "svm" => Family::Svc,
            "gradientboosting" | "gb" => Family::GradientBoosting,
            "mlp" => Family::Mlp,
            "xgboost" | "xgbooststyle" | "xgb" => Family::XGBoostStyle,
            "lightgbm" | "lightgbmstyle" | "lgbm" => Family::LightGBMStyle,
            "adaboost" | "ada" => Family::AdaBoost,
            _ => return Err(ClassifierError::UnknownFamily(s.to_owned())),
        })
    }
}

/// What to train.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub family: Family,
    #[serde(default)]
    pub params: Hyperparameters,
    #[serde(default)]
    pub seed: u64,
}

impl ClassifierSpec {
    pub fn new(family: Family, params: Hyperparameters, seed: u64) -> Self {
        Self {
            family,
            params,
            seed,
        }
    }

    /// Parses the hyperparameters without training.
    pub fn validate(&self) -> Result<(), ClassifierError> {
        Parsed::from_spec(self).map(|_| ())
    }
}

impl fmt::Display for ClassifierSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.family, self.params)
    }
}

enum Parsed {
    Logistic(LogisticParams),
    Tree(TreeParams),
    Forest(ForestParams),
    Svc(SvcParams),
    Boost(BoostParams),
    Mlp(MlpParams),
    Ada(AdaBoostParams),
}

impl Parsed {
    fn from_spec(spec: &ClassifierSpec) -> Result<Self, ClassifierError> {
        let p = &spec.params;
        Ok(match spec.family {
            Family::LogisticRegression => Parsed::Logistic(LogisticParams::parse(p)?),
            Family::DecisionTree => Parsed::Tree(TreeParams::parse(p)?),
            Family::RandomForest => Parsed::Forest(ForestParams::parse(p)?),
            Family::Svc => Parsed::Svc(SvcParams::parse(p)?),
            Family::GradientBoosting => Parsed::Boost(BoostParams::parse(p, BoostMode::Gradient)?),
            Family::XGBoostStyle => Parsed::Boost(BoostParams::parse(p, BoostMode::SecondOrder)?),
            Family::LightGBMStyle => Parsed::Boost(BoostParams::parse(p, BoostMode::LeafWise)?),
            Family::Mlp => Parsed::Mlp(MlpParams::parse(p)?),
            Family::AdaBoost => Parsed::Ada(AdaBoostParams::parse(p)?),
        })
    }
}

/// Family-specific fitted state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FittedModel {
    Logistic(LogisticModel),
    Tree(DecisionTree),
    Forest(RandomForest),
    Svc(SvcModel),
    Boosted(BoostedModel),
    Mlp(MlpModel),
    AdaBoost(AdaBoostModel),
}

/// A trained classifier with the spec it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub spec: ClassifierSpec,
    pub n_features: usize,
    pub fitted: FittedModel,
}

/// Fits `spec` on `x` with binary labels `y`.
pub fn train(
    spec: &ClassifierSpec,
    x: ArrayView2<'_, f64>,
    y: &[usize],
) -> Result<ClassifierModel, ClassifierError> {
    let parsed = Parsed::from_spec(spec)?;
    check_training_data(x, y)?;
    let fitted = match parsed {
        Parsed::Logistic(p) => FittedModel::Logistic(LogisticModel::fit(x, y, &p)),
        Parsed::Tree(p) => {
            let w = p.class_weight.sample_weights(y);
            FittedModel::Tree(DecisionTree::fit(x, y, &w, &p, None))
        }
        Parsed::Forest(p) => FittedModel::Forest(RandomForest::fit(x, y, None, &p, spec.seed)),
        Parsed::Svc(p) => FittedModel::Svc(SvcModel::fit(x, y, &p)),
        Parsed::Boost(p) => FittedModel::Boosted(BoostedModel::fit(x, y, &p, spec.seed)),
        Parsed::Mlp(p) => FittedModel::Mlp(MlpModel::fit(x, y, &p, spec.seed)),
        Parsed::Ada(p) => FittedModel::AdaBoost(AdaBoostModel::fit(x, y, &p, spec.seed)),
    };
    Ok(ClassifierModel {
        spec: spec.clone(),
        n_features: x.ncols(),
        fitted,
    })
}

fn check_training_data(x: ArrayView2<'_, f64>, y: &[usize]) -> Result<(), ClassifierError> {
    if x.nrows() != y.len() {
        return Err(ClassifierError::LabelCount {
            rows: x.nrows(),
            labels: y.len(),
        });
    }
    if y.is_empty() {
        return Err(ClassifierError::Empty);
    }
    if let Some(&bad) = y.iter().find(|&&c| c > 1) {
        return Err(ClassifierError::NonBinaryLabel(bad));
    }
    if y.iter().all(|&c| c == y[0]) {
        return Err(ClassifierError::SingleClass(y[0]));
    }
    check_finite(x)
}

fn check_finite(x: ArrayView2<'_, f64>) -> Result<(), ClassifierError> {
    for ((row, column), v) in x.indexed_iter() {
        if !v.is_finite() {
            return Err(ClassifierError::NonFinite { row, column });
        }
    }
    Ok(())
}

impl ClassifierModel {
    /// `P(class 1)` for one row.
    fn positive_probability(&self, row: ArrayView1<'_, f64>) -> f64 {
        let p = match &self.fitted {
            FittedModel::Logistic(m) => m.probability(row),
            FittedModel::Tree(m) => m.probability(row),
            FittedModel::Forest(m) => m.probability(row),
            FittedModel::Svc(m) => m.probability(row),
            FittedModel::Boosted(m) => m.probability(row),
            FittedModel::Mlp(m) => m.probability(row),
            FittedModel::AdaBoost(m) => m.probability(row),
        };
        p.clamp(0.0, 1.0)
    }

    /// `n × 2` class probabilities; each row sums to one.
    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>, ClassifierError> {
        if x.ncols() != self.n_features {
            return Err(ClassifierError::FeatureCount {
                expected: self.n_features,
                found: x.ncols(),
            });
        }
        check_finite(x)?;
        let mut out = Array2::zeros((x.nrows(), 2));
        for (i, row) in x.rows().into_iter().enumerate() {
            let p = self.positive_probability(row);
            out[[i, 0]] = 1.0 - p;
            out[[i, 1]] = p;
        }
        Ok(out)
    }

    /// Argmax of [`predict_proba`](Self::predict_proba); an exact tie goes to
    /// class 0.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<usize>, ClassifierError> {
        let proba = self.predict_proba(x)?;
        Ok(proba
            .rows()
            .into_iter()
            .map(|r| argmax2(r[0], r[1]))
            .collect())
    }
}

pub(crate) fn argmax2(p0: f64, p1: f64) -> usize {
    usize::from(p1 > p0)
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean log-loss of margins `f` against labels `y`.
pub(crate) fn mean_log_loss(f: &[f64], y: &[usize]) -> f64 {
    f.iter()
        .zip(y)
        .map(|(&z, &c)| softplus(z) - c as f64 * z)
        .sum::<f64>()
        / f.len() as f64
}
