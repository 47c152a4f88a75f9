//! Random forest of CART trees.
//!
//! Each tree sees a Poisson(1) bootstrap: a row's multiplicity is drawn from
//! a hash of its values, the seed and the tree index, so the fitted forest
//! does not depend on row order. Trees examine `floor(sqrt(d))` random
//! features per node and are fitted in parallel; tree `t` draws from ChaCha8
//! stream `t`.

use ndarray::{ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::params::Hyperparameters;
use super::tree::{DecisionTree, MaxFeatures, TreeParams, TREE_PARAMS};
use super::{ClassifierError, Family};
use crate::rng::{derive_seed, hash_row, poisson_one, stream_rng, unit_interval};

#[derive(Debug, Clone, PartialEq)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub tree: TreeParams,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_estimators: 100,
            tree: TreeParams {
                max_features: MaxFeatures::Sqrt,
                ..TreeParams::default()
            },
        }
    }
}

impl ForestParams {
    pub(crate) fn parse(p: &Hyperparameters) -> Result<Self, ClassifierError> {
        let f = Family::RandomForest;
        let mut known = TREE_PARAMS.to_vec();
        known.push("n_estimators");
        p.check_known(f, &known)?;
        let n_estimators = p.usize(f, "n_estimators", 100)?;
        if n_estimators == 0 {
            return Err(ClassifierError::Hyperparameter {
                family: f,
                name: "n_estimators".into(),
                reason: "must be positive".into(),
            });
        }
        Ok(Self {
            n_estimators,
            tree: TreeParams::parse_shared(p, f, MaxFeatures::Sqrt)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
}

impl RandomForest {
    /// `base_weight` multiplies the class weights (AdaBoost passes its row
    /// weights here).
    pub fn fit(
        x: ArrayView2<'_, f64>,
        y: &[usize],
        base_weight: Option<&[f64]>,
        params: &ForestParams,
        seed: u64,
    ) -> Self {
        let class = params.tree.class_weight.class_factors(y);
        let trees = (0..params.n_estimators)
            .into_par_iter()
            .map(|t| {
                let key = derive_seed(seed, &[t as u64]);
                let weights: Vec<f64> = x
                    .rows()
                    .into_iter()
                    .enumerate()
                    .map(|(i, row)| {
                        let draws = poisson_one(unit_interval(hash_row(row, key))) as f64;
                        draws * class[y[i]] * base_weight.map_or(1.0, |b| b[i])
                    })
                    .collect();
                let mut rng = stream_rng(seed, t as u64);
                DecisionTree::fit(x, y, &weights, &params.tree, Some(&mut rng))
            })
            .collect();
        Self { trees }
    }

    pub(crate) fn probability(&self, row: ArrayView1<'_, f64>) -> f64 {
        self.trees.iter().map(|t| t.probability(row)).sum::<f64>() / self.trees.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn data() -> (Array2<f64>, Vec<usize>) {
        let x = Array2::from_shape_fn((80, 4), |(i, j)| {
            (((i * 37 + j * 11) % 23) as f64).sin() * 3.0 + j as f64
        });
        let y = (0..80)
            .map(|i| usize::from(x[[i, 0]] + x[[i, 2]] > 2.5))
            .collect();
        (x, y)
    }

    fn params() -> ForestParams {
        ForestParams {
            n_estimators: 25,
            ..Default::default()
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let (x, y) = data();
        let a = RandomForest::fit(x.view(), &y, None, &params(), 3);
        let b = RandomForest::fit(x.view(), &y, None, &params(), 3);
        let c = RandomForest::fit(x.view(), &y, None, &params(), 4);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn invariant_to_row_permutation() {
        let (x, y) = data();
        let perm: Vec<usize> = (0..80).map(|i| (i * 29) % 80).collect();
        let xp = x.select(ndarray::Axis(0), &perm);
        let yp: Vec<usize> = perm.iter().map(|&i| y[i]).collect();
        let a = RandomForest::fit(x.view(), &y, None, &params(), 11);
        let b = RandomForest::fit(xp.view(), &yp, None, &params(), 11);
        for row in x.rows() {
            assert_eq!(a.probability(row), b.probability(row));
        }
    }

    #[test]
    fn fits_training_data_well() {
        let (x, y) = data();
        let f = RandomForest::fit(x.view(), &y, None, &params(), 0);
        let correct = x
            .rows()
            .into_iter()
            .zip(&y)
            .filter(|(r, &c)| usize::from(f.probability(*r) > 0.5) == c)
            .count();
        assert!(correct >= 76, "{correct}");
    }
}
