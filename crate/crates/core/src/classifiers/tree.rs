//! CART classification tree with weighted impurity.
//!
//! Splits are axis-aligned `x[f] <= t` with `t` the midpoint between
//! adjacent distinct values. Among equally good splits the lowest feature
//! index wins, then the lowest threshold. A split with zero impurity
//! decrease is still taken, so an unrestricted tree separates any set of
//! distinct rows.

use ndarray::{ArrayView1, ArrayView2};
use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::params::{ClassWeight, Hyperparameters};
use super::{ClassifierError, Family};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Criterion {
    Gini,
    /// Shannon entropy; `log_loss` is the same criterion.
    Entropy,
}

impl Criterion {
    fn parse(p: &Hyperparameters, family: Family) -> Result<Self, ClassifierError> {
        Ok(
            match p.choice(
                family,
                "criterion",
                "gini",
                &["gini", "entropy", "log_loss"],
            )? {
                "gini" => Criterion::Gini,
                _ => Criterion::Entropy,
            },
        )
    }

    /// Impurity of a node with class weights `w0`, `w1`.
    fn impurity(self, w0: f64, w1: f64) -> f64 {
        let total = w0 + w1;
        if total <= 0.0 {
            return 0.0;
        }
        let (p0, p1) = (w0 / total, w1 / total);
        match self {
            Criterion::Gini => 1.0 - p0 * p0 - p1 * p1,
            Criterion::Entropy => {
                let h = |p: f64| if p > 0.0 { -p * p.log2() } else { 0.0 };
                h(p0) + h(p1)
            }
        }
    }
}

/// Features examined per node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaxFeatures {
    All,
    Sqrt,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub criterion: Criterion,
    pub class_weight: ClassWeight,
    pub max_features: MaxFeatures,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            criterion: Criterion::Gini,
            class_weight: ClassWeight::Uniform,
            max_features: MaxFeatures::All,
        }
    }
}

pub(crate) const TREE_PARAMS: [&str; 5] = [
    "max_depth",
    "min_samples_split",
    "min_samples_leaf",
    "criterion",
    "class_weight",
];

impl TreeParams {
    pub(crate) fn parse(p: &Hyperparameters) -> Result<Self, ClassifierError> {
        p.check_known(Family::DecisionTree, &TREE_PARAMS)?;
        Self::parse_shared(p, Family::DecisionTree, MaxFeatures::All)
    }

    pub(crate) fn parse_shared(
        p: &Hyperparameters,
        family: Family,
        max_features: MaxFeatures,
    ) -> Result<Self, ClassifierError> {
        let min_samples_split = p.usize(family, "min_samples_split", 2)?;
        if min_samples_split < 2 {
            return Err(ClassifierError::Hyperparameter {
                family,
                name: "min_samples_split".into(),
                reason: "must be at least 2".into(),
            });
        }
        let min_samples_leaf = p.usize(family, "min_samples_leaf", 1)?.max(1);
        Ok(Self {
            max_depth: p.opt_usize(family, "max_depth", None)?,
            min_samples_split,
            min_samples_leaf,
            criterion: Criterion::parse(p, family)?,
            class_weight: ClassWeight::parse(p, family)?,
            max_features,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Weighted fraction of class 1 in the leaf.
    Leaf { p1: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

struct Builder<'a> {
    x: ArrayView2<'a, f64>,
    y: &'a [usize],
    w: &'a [f64],
    params: &'a TreeParams,
    rng: Option<&'a mut ChaCha8Rng>,
    nodes: Vec<Node>,
}

struct Split {
    feature: usize,
    threshold: f64,
    /// rows going left, in input order
    left: Vec<usize>,
    right: Vec<usize>,
}

impl DecisionTree {
    /// Fits on the rows with positive `sample_weight`. `rng` is required when
    /// `params.max_features` samples features.
    pub fn fit(
        x: ArrayView2<'_, f64>,
        y: &[usize],
        sample_weight: &[f64],
        params: &TreeParams,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Self {
        let rows: Vec<usize> = (0..y.len()).filter(|&i| sample_weight[i] > 0.0).collect();
        let mut b = Builder {
            x,
            y,
            w: sample_weight,
            params,
            rng,
            nodes: Vec::new(),
        };
        b.grow(rows, 0);
        DecisionTree { nodes: b.nodes }
    }

    pub(crate) fn probability(&self, row: ArrayView1<'_, f64>) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { p1 } => return p1,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[feature] <= threshold {
                        left
                    } else {
                        right
                    }
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        if self.nodes.is_empty() {
            0
        } else {
            go(&self.nodes, 0)
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }
}

impl Builder<'_> {
    fn class_weights(&self, rows: &[usize]) -> (f64, f64) {
        rows.iter().fold((0.0, 0.0), |(a, b), &i| {
            if self.y[i] == 1 {
                (a, b + self.w[i])
            } else {
                (a + self.w[i], b)
            }
        })
    }

    /// Appends the subtree for `rows` and returns its index.
    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let (w0, w1) = self.class_weights(&rows);
        let at = self.nodes.len();
        let p1 = if w0 + w1 > 0.0 { w1 / (w0 + w1) } else { 0.5 };
        self.nodes.push(Node::Leaf { p1 });
        let stop = w0 == 0.0
            || w1 == 0.0
            || rows.len() < self.params.min_samples_split
            || self.params.max_depth.is_some_and(|d| depth >= d);
        if stop {
            return at;
        }
        let Some(split) = self.best_split(&rows, w0, w1) else {
            return at;
        };
        let left = self.grow(split.left, depth + 1);
        let right = self.grow(split.right, depth + 1);
        self.nodes[at] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        at
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let d = self.x.ncols();
        match (self.params.max_features, self.rng.as_deref_mut()) {
            (MaxFeatures::Sqrt, Some(rng)) => {
                let k = ((d as f64).sqrt().floor() as usize).clamp(1, d);
                let mut f = sample(rng, d, k).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        }
    }

    fn best_split(&mut self, rows: &[usize], w0: f64, w1: f64) -> Option<Split> {
        let crit = self.params.criterion;
        let total = w0 + w1;
        let parent = crit.impurity(w0, w1) * total;
        let min_leaf = self.params.min_samples_leaf;
        let tol = 1e-12 * total.max(1.0);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order = rows.to_vec();
        for f in self.candidate_features() {
            let x = self.x;
            order.sort_by(|&a, &b| x[[a, f]].total_cmp(&x[[b, f]]).then(a.cmp(&b)));
            let (mut l0, mut l1) = (0.0, 0.0);
            for k in 0..order.len() - 1 {
                let i = order[k];
                if self.y[i] == 1 {
                    l1 += self.w[i];
                } else {
                    l0 += self.w[i];
                }
                let (v, next) = (x[[i, f]], x[[order[k + 1], f]]);
                if v == next || k + 1 < min_leaf || order.len() - k - 1 < min_leaf {
                    continue;
                }
                let (r0, r1) = (w0 - l0, w1 - l1);
                let child = crit.impurity(l0, l1) * (l0 + l1) + crit.impurity(r0, r1) * (r0 + r1);
                let gain = parent - child;
                if best.is_none_or(|(g, _, _)| gain > g + tol) {
                    let mut t = v + (next - v) / 2.0;
                    if t >= next {
                        t = v;
                    }
                    best = Some((gain, f, t));
                }
            }
        }
        let (_, feature, threshold) = best?;
        let (left, right) = rows
            .iter()
            .partition(|&&i| self.x[[i, feature]] <= threshold);
        Some(Split {
            feature,
            threshold,
            left,
            right,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use proptest::prelude::*;

    fn fit_default(x: &Array2<f64>, y: &[usize]) -> DecisionTree {
        DecisionTree::fit(
            x.view(),
            y,
            &vec![1.0; y.len()],
            &TreeParams::default(),
            None,
        )
    }

    #[test]
    fn xor_is_memorized() {
        let x = ndarray::array![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
        let y = [0, 1, 1, 0];
        let t = fit_default(&x, &y);
        for (i, row) in x.rows().into_iter().enumerate() {
            assert_eq!(t.probability(row), y[i] as f64);
        }
        assert_eq!(t.depth(), 2);
    }

    #[test]
    fn tie_prefers_lowest_feature_then_threshold() {
        // both features separate perfectly; feature 0 must win
        let x = ndarray::array![[0.0, 0.0], [1.0, 1.0]];
        let t = fit_default(&x, &[0, 1]);
        assert!(
            matches!(t.nodes[0], Node::Split { feature: 0, threshold, .. } if threshold == 0.5)
        );
    }

    #[test]
    fn depth_limit_and_min_split() {
        let x = Array2::from_shape_fn((32, 1), |(i, _)| i as f64);
        let y: Vec<usize> = (0..32).map(|i| i % 2).collect();
        let p = TreeParams {
            max_depth: Some(2),
            ..Default::default()
        };
        let t = DecisionTree::fit(x.view(), &y, &vec![1.0; 32], &p, None);
        assert!(t.depth() <= 2);
        let p = TreeParams {
            min_samples_split: 40,
            ..Default::default()
        };
        let t = DecisionTree::fit(x.view(), &y, &vec![1.0; 32], &p, None);
        assert_eq!(t.nodes.len(), 1);
    }

    #[test]
    fn gini_and_entropy_values() {
        assert_eq!(Criterion::Gini.impurity(1.0, 1.0), 0.5);
        assert_eq!(Criterion::Entropy.impurity(1.0, 1.0), 1.0);
        assert_eq!(Criterion::Entropy.impurity(3.0, 0.0), 0.0);
    }

    #[test]
    fn zero_weight_rows_are_ignored() {
        let x = ndarray::array![[0.0], [1.0], [2.0]];
        let t = DecisionTree::fit(
            x.view(),
            &[0, 1, 1],
            &[1.0, 0.0, 1.0],
            &TreeParams::default(),
            None,
        );
        assert_eq!(t.probability(x.row(1)), 0.0);
    }

    proptest! {
        #[test]
        fn distinct_rows_are_memorized(vals in proptest::collection::btree_set(-1000i32..1000, 2..40), seed in 0u64..1000) {
            let v: Vec<i32> = vals.into_iter().collect();
            let n = v.len();
            let x = Array2::from_shape_fn((n, 2), |(i, j)| if j == 0 { v[i] as f64 } else { ((v[i] * 31) % 7) as f64 });
            let y: Vec<usize> = (0..n).map(|i| (crate::rng::splitmix64(seed ^ i as u64) % 2) as usize).collect();
            prop_assume!(y.contains(&0) && y.contains(&1));
            let t = fit_default(&x, &y);
            for (i, row) in x.rows().into_iter().enumerate() {
                prop_assert_eq!(t.probability(row), y[i] as f64);
            }
        }
    }
}
