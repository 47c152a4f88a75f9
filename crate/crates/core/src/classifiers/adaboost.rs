//! Discrete AdaBoost (SAMME, two classes) over trees or forests.
//!
//! Round `m` fits the base learner to the current row weights, computes its
//! weighted error `ε` and weight `α = lr · ln((1 - ε) / ε)`, then multiplies
//! the weights of misclassified rows by `exp(α)`. A learner with zero error
//! ends training. Class probabilities are the `α`-weighted mean of the base
//! learners' probabilities.

use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::forest::{ForestParams, RandomForest};
use super::params::Hyperparameters;
use super::tree::{DecisionTree, TreeParams};
use super::{ClassifierError, Family};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaseEstimator {
    /// Depth-one tree.
    DecisionTree,
    /// Default forest of 100 trees.
    RandomForest,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaBoostParams {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub estimator: BaseEstimator,
}

impl Default for AdaBoostParams {
    fn default() -> Self {
        Self {
            n_estimators: 50,
            learning_rate: 1.0,
            estimator: BaseEstimator::DecisionTree,
        }
    }
}

impl AdaBoostParams {
    pub(crate) fn parse(p: &Hyperparameters) -> Result<Self, ClassifierError> {
        let f = Family::AdaBoost;
        p.check_known(f, &["n_estimators", "learning_rate", "estimator"])?;
        let n_estimators = p.usize(f, "n_estimators", 50)?;
        if n_estimators == 0 {
            return Err(ClassifierError::Hyperparameter {
                family: f,
                name: "n_estimators".into(),
                reason: "must be positive".into(),
            });
        }
        Ok(Self {
            n_estimators,
            learning_rate: p.positive_f64(f, "learning_rate", 1.0)?,
            estimator: match p.choice(
                f,
                "estimator",
                "DecisionTree",
                &["DecisionTree", "RandomForest"],
            )? {
                "RandomForest" => BaseEstimator::RandomForest,
                _ => BaseEstimator::DecisionTree,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BaseModel {
    Tree(DecisionTree),
    Forest(RandomForest),
}

impl BaseModel {
    fn probability(&self, row: ArrayView1<'_, f64>) -> f64 {
        match self {
            BaseModel::Tree(t) => t.probability(row),
            BaseModel::Forest(f) => f.probability(row),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostModel {
    pub estimators: Vec<(f64, BaseModel)>,
}

impl AdaBoostModel {
    pub fn fit(x: ArrayView2<'_, f64>, y: &[usize], params: &AdaBoostParams, seed: u64) -> Self {
        let n = y.len();
        let mut w = vec![1.0 / n as f64; n];
        let mut estimators = Vec::new();
        for m in 0..params.n_estimators {
            // learners see weights scaled to sum to n
            let scaled: Vec<f64> = w.iter().map(|v| v * n as f64).collect();
            let model = match params.estimator {
                BaseEstimator::DecisionTree => {
                    let p = TreeParams {
                        max_depth: Some(1),
                        ..TreeParams::default()
                    };
                    BaseModel::Tree(DecisionTree::fit(x, y, &scaled, &p, None))
                }
                BaseEstimator::RandomForest => BaseModel::Forest(RandomForest::fit(
                    x,
                    y,
                    Some(&scaled),
                    &ForestParams::default(),
                    derive_seed(seed, &[m as u64]),
                )),
            };
            let miss: Vec<bool> = x
                .rows()
                .into_iter()
                .zip(y)
                .map(|(r, &c)| usize::from(model.probability(r) > 0.5) != c)
                .collect();
            let err: f64 = w
                .iter()
                .zip(&miss)
                .filter(|(_, &b)| b)
                .map(|(v, _)| v)
                .sum();
            if err <= 0.0 {
                estimators.push((1.0, model));
                break;
            }
            if err >= 0.5 {
                if estimators.is_empty() {
                    estimators.push((1.0, model));
                }
                break;
            }
            let alpha = params.learning_rate * ((1.0 - err) / err).ln();
            for (v, &b) in w.iter_mut().zip(&miss) {
                if b {
                    *v *= alpha.exp();
                }
            }
            let total: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= total);
            estimators.push((alpha, model));
        }
        Self { estimators }
    }

    pub(crate) fn probability(&self, row: ArrayView1<'_, f64>) -> f64 {
        let total: f64 = self.estimators.iter().map(|(a, _)| a).sum();
        self.estimators
            .iter()
            .map(|(a, m)| a * m.probability(row))
            .sum::<f64>()
            / total
    }
}
