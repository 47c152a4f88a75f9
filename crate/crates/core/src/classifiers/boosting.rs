//! Gradient-boosted regression trees on the logistic loss.
//!
//! One engine, three growth policies:
//!
//! * `Gradient`: depth-wise trees fitted to the negative gradient by squared
//!   error, Newton step in each leaf.
//! * `SecondOrder`: depth-wise trees scored by the gain
//!   `G_L²/(H_L+λ) + G_R²/(H_R+λ) - G²/(H+λ)`, leaf weight `-G/(H+λ)`,
//!   `min_child_weight` on the hessian and per-tree column subsampling.
//! * `LeafWise`: best-first growth up to `num_leaves` leaves with the same
//!   second-order gain and a minimum of 20 rows per leaf.
//!
//! If a round would raise the training loss its tree is shrunk by halving
//! until it does not, so the recorded loss never increases.

use ndarray::{ArrayView1, ArrayView2};
use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::params::Hyperparameters;
use super::{mean_log_loss, sigmoid, ClassifierError, Family};
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoostMode {
    Gradient,
    SecondOrder,
    LeafWise,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostParams {
    pub mode: BoostMode,
    pub n_estimators: usize,
    pub learning_rate: f64,
    /// `None` only in leaf-wise mode (limited by `num_leaves` instead).
    pub max_depth: Option<usize>,
    pub subsample: f64,
    pub colsample_bytree: f64,
    pub reg_lambda: f64,
    pub min_child_weight: f64,
    pub num_leaves: usize,
    pub min_data_in_leaf: usize,
}

impl BoostParams {
    pub fn defaults(mode: BoostMode) -> Self {
        let base = Self {
            mode,
            n_estimators: 100,
            learning_rate: 0.1,
            max_depth: Some(3),
            subsample: 1.0,
            colsample_bytree: 1.0,
            reg_lambda: 0.0,
            min_child_weight: 0.0,
            num_leaves: usize::MAX,
            min_data_in_leaf: 1,
        };
        match mode {
            BoostMode::Gradient => base,
            BoostMode::SecondOrder => Self {
                learning_rate: 0.3,
                max_depth: Some(6),
                reg_lambda: 1.0,
                min_child_weight: 1.0,
                ..base
            },
            BoostMode::LeafWise => Self {
                max_depth: None,
                num_leaves: 31,
                min_data_in_leaf: 20,
                min_child_weight: 1e-3,
                ..base
            },
        }
    }

    pub(crate) fn parse(p: &Hyperparameters, mode: BoostMode) -> Result<Self, ClassifierError> {
        let (family, known): (Family, &[&str]) = match mode {
            BoostMode::Gradient => (
                Family::GradientBoosting,
                &["n_estimators", "learning_rate", "max_depth", "subsample"],
            ),
            BoostMode::SecondOrder => (
                Family::XGBoostStyle,
                &[
                    "n_estimators",
                    "learning_rate",
                    "max_depth",
                    "subsample",
                    "colsample_bytree",
                    "reg_lambda",
                    "min_child_weight",
                ],
            ),
            BoostMode::LeafWise => (
                Family::LightGBMStyle,
                &[
                    "n_estimators",
                    "learning_rate",
                    "max_depth",
                    "num_leaves",
                    "subsample",
                    "colsample_bytree",
                    "reg_lambda",
                    "min_child_samples",
                ],
            ),
        };
        p.check_known(family, known)?;
        let d = Self::defaults(mode);
        let bad = |name: &str, reason: &str| ClassifierError::Hyperparameter {
            family,
            name: name.into(),
            reason: reason.into(),
        };
        let n_estimators = p.usize(family, "n_estimators", d.n_estimators)?;
        if n_estimators == 0 {
            return Err(bad("n_estimators", "must be positive"));
        }
        let max_depth = match mode {
            // non-positive depth means unlimited, as in the leaf-wise libraries
            BoostMode::LeafWise => match p.get("max_depth").and_then(|v| v.as_f64()) {
                Some(v) if v <= 0.0 => None,
                _ => p.opt_usize(family, "max_depth", d.max_depth)?,
            },
            _ => Some(p.usize(family, "max_depth", d.max_depth.unwrap_or(3))?),
        };
        if max_depth == Some(0) {
            return Err(bad("max_depth", "must be positive"));
        }
        let num_leaves = if mode == BoostMode::LeafWise {
            let v = p.usize(family, "num_leaves", d.num_leaves)?;
            if v < 2 {
                return Err(bad("num_leaves", "must be at least 2"));
            }
            v
        } else {
            d.num_leaves
        };
        let reg_lambda = p.f64(family, "reg_lambda", d.reg_lambda)?;
        let min_child_weight = p.f64(family, "min_child_weight", d.min_child_weight)?;
        if reg_lambda < 0.0 || min_child_weight < 0.0 {
            return Err(bad(
                "reg_lambda",
                "regularization terms must be non-negative",
            ));
        }
        Ok(Self {
            mode,
            n_estimators,
            learning_rate: p.positive_f64(family, "learning_rate", d.learning_rate)?,
            max_depth,
            subsample: p.fraction(family, "subsample", d.subsample)?,
            colsample_bytree: p.fraction(family, "colsample_bytree", d.colsample_bytree)?,
            reg_lambda,
            min_child_weight,
            num_leaves,
            min_data_in_leaf: p
                .usize(family, "min_child_samples", d.min_data_in_leaf)?
                .max(1),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RegNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegTree {
    pub nodes: Vec<RegNode>,
}

impl RegTree {
    fn value(&self, row: ArrayView1<'_, f64>) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                RegNode::Leaf(v) => return v,
                RegNode::Split {
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

    fn scale(&mut self, s: f64) {
        for n in &mut self.nodes {
            if let RegNode::Leaf(v) = n {
                *v *= s;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedModel {
    pub mode: BoostMode,
    /// Initial log-odds.
    pub base_margin: f64,
    /// Trees with the learning rate already applied.
    pub trees: Vec<RegTree>,
    /// Mean training log-loss after each round, starting with the base model.
    pub loss_history: Vec<f64>,
}

struct Grower<'a> {
    x: ArrayView2<'a, f64>,
    g: &'a [f64],
    h: &'a [f64],
    features: Vec<usize>,
    params: &'a BoostParams,
}

struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
    left: Vec<usize>,
    right: Vec<usize>,
}

impl Grower<'_> {
    fn sums(&self, rows: &[usize]) -> (f64, f64) {
        rows.iter()
            .fold((0.0, 0.0), |(g, h), &i| (g + self.g[i], h + self.h[i]))
    }

    fn leaf_value(&self, rows: &[usize]) -> f64 {
        let (g, h) = self.sums(rows);
        let lambda = match self.params.mode {
            BoostMode::Gradient => 0.0,
            _ => self.params.reg_lambda,
        };
        let denom = h + lambda;
        if denom <= 0.0 {
            0.0
        } else {
            -g / denom
        }
    }

    /// Node score used in split gains.
    fn score(&self, g: f64, h: f64, n: f64) -> f64 {
        match self.params.mode {
            BoostMode::Gradient => g * g / n,
            _ => {
                let denom = h + self.params.reg_lambda;
                if denom <= 0.0 {
                    0.0
                } else {
                    g * g / denom
                }
            }
        }
    }

    fn best_split(&self, rows: &[usize]) -> Option<Candidate> {
        if rows.len() < 2 * self.params.min_data_in_leaf.max(1) {
            return None;
        }
        let (g_all, h_all) = self.sums(rows);
        let n_all = rows.len() as f64;
        let parent = self.score(g_all, h_all, n_all);
        let min_leaf = self.params.min_data_in_leaf;
        let min_hess = match self.params.mode {
            BoostMode::Gradient => 0.0,
            _ => self.params.min_child_weight,
        };
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order = rows.to_vec();
        for &f in &self.features {
            let x = self.x;
            order.sort_by(|&a, &b| x[[a, f]].total_cmp(&x[[b, f]]).then(a.cmp(&b)));
            let (mut gl, mut hl) = (0.0, 0.0);
            for k in 0..order.len() - 1 {
                let i = order[k];
                gl += self.g[i];
                hl += self.h[i];
                let (v, next) = (x[[i, f]], x[[order[k + 1], f]]);
                let nl = k + 1;
                let nr = order.len() - nl;
                if v == next || nl < min_leaf || nr < min_leaf {
                    continue;
                }
                let (gr, hr) = (g_all - gl, h_all - hl);
                if hl < min_hess || hr < min_hess {
                    continue;
                }
                let gain = self.score(gl, hl, nl as f64) + self.score(gr, hr, nr as f64) - parent;
                if gain > 1e-12 && best.is_none_or(|(b, _, _)| gain > b + 1e-12 * b.abs().max(1.0))
                {
                    let mut t = v + (next - v) / 2.0;
                    if t >= next {
                        t = v;
                    }
                    best = Some((gain, f, t));
                }
            }
        }
        let (gain, feature, threshold) = best?;
        let (left, right) = rows
            .iter()
            .partition(|&&i| self.x[[i, feature]] <= threshold);
        Some(Candidate {
            gain,
            feature,
            threshold,
            left,
            right,
        })
    }

    fn grow_depthwise(&self, rows: Vec<usize>, depth: usize, nodes: &mut Vec<RegNode>) -> usize {
        let at = nodes.len();
        nodes.push(RegNode::Leaf(self.leaf_value(&rows)));
        if self.params.max_depth.is_some_and(|d| depth >= d) {
            return at;
        }
        if let Some(c) = self.best_split(&rows) {
            let left = self.grow_depthwise(c.left, depth + 1, nodes);
            let right = self.grow_depthwise(c.right, depth + 1, nodes);
            nodes[at] = RegNode::Split {
                feature: c.feature,
                threshold: c.threshold,
                left,
                right,
            };
        }
        at
    }

    fn grow_leafwise(&self, rows: Vec<usize>) -> Vec<RegNode> {
        struct Open {
            node: usize,
            depth: usize,
            split: Option<Candidate>,
        }
        let mut nodes = vec![RegNode::Leaf(self.leaf_value(&rows))];
        let splittable = |depth: usize| self.params.max_depth.is_none_or(|d| depth < d);
        let mut open = vec![Open {
            node: 0,
            depth: 0,
            split: if splittable(0) {
                self.best_split(&rows)
            } else {
                None
            },
        }];
        let mut leaves = 1;
        while leaves < self.params.num_leaves {
            // highest gain; earliest created leaf on ties
            let pick = open
                .iter()
                .enumerate()
                .filter_map(|(k, o)| o.split.as_ref().map(|c| (k, c.gain)))
                .fold(None::<(usize, f64)>, |acc, (k, g)| match acc {
                    Some((_, bg)) if bg >= g => acc,
                    _ => Some((k, g)),
                });
            let Some((k, _)) = pick else { break };
            let o = open.swap_remove(k);
            let c = o.split.expect("picked leaves have a split");
            let (li, ri) = (nodes.len(), nodes.len() + 1);
            nodes.push(RegNode::Leaf(self.leaf_value(&c.left)));
            nodes.push(RegNode::Leaf(self.leaf_value(&c.right)));
            nodes[o.node] = RegNode::Split {
                feature: c.feature,
                threshold: c.threshold,
                left: li,
                right: ri,
            };
            leaves += 1;
            let d = o.depth + 1;
            for (node, part) in [(li, c.left), (ri, c.right)] {
                let split = if splittable(d) {
                    self.best_split(&part)
                } else {
                    None
                };
                open.push(Open {
                    node,
                    depth: d,
                    split,
                });
            }
            open.sort_by_key(|o| o.node);
        }
        nodes
    }
}

fn draw_subset(rng: &mut ChaCha8Rng, n: usize, fraction: f64) -> Vec<usize> {
    if fraction >= 1.0 {
        return (0..n).collect();
    }
    let k = ((n as f64 * fraction).round() as usize).clamp(1, n);
    let mut v = sample(rng, n, k).into_vec();
    v.sort_unstable();
    v
}

impl BoostedModel {
    pub fn fit(x: ArrayView2<'_, f64>, y: &[usize], params: &BoostParams, seed: u64) -> Self {
        let n = y.len();
        let pos = y.iter().filter(|&&c| c == 1).count() as f64;
        let prior = (pos / n as f64).clamp(1e-12, 1.0 - 1e-12);
        let base_margin = (prior / (1.0 - prior)).ln();
        let mut margin = vec![base_margin; n];
        let mut loss = mean_log_loss(&margin, y);
        let mut loss_history = vec![loss];
        let mut trees = Vec::with_capacity(params.n_estimators);
        let mut rng = stream_rng(seed, 0);
        let mut g = vec![0.0; n];
        let mut h = vec![0.0; n];
        for _ in 0..params.n_estimators {
            for i in 0..n {
                let p = sigmoid(margin[i]);
                g[i] = p - y[i] as f64;
                h[i] = (p * (1.0 - p)).max(1e-16);
            }
            let rows = draw_subset(&mut rng, n, params.subsample);
            let features = draw_subset(&mut rng, x.ncols(), params.colsample_bytree);
            let grower = Grower {
                x,
                g: &g,
                h: &h,
                features,
                params,
            };
            let mut tree = RegTree {
                nodes: match params.mode {
                    BoostMode::LeafWise => grower.grow_leafwise(rows),
                    _ => {
                        let mut nodes = Vec::new();
                        grower.grow_depthwise(rows, 0, &mut nodes);
                        nodes
                    }
                },
            };
            tree.scale(params.learning_rate);
            let step: Vec<f64> = x.rows().into_iter().map(|r| tree.value(r)).collect();
            let mut s = 1.0;
            let mut trial: Vec<f64>;
            let mut trial_loss;
            loop {
                trial = margin.iter().zip(&step).map(|(m, d)| m + s * d).collect();
                trial_loss = mean_log_loss(&trial, y);
                if trial_loss <= loss || s < 1e-12 {
                    break;
                }
                s *= 0.5;
            }
            if trial_loss > loss {
                s = 0.0;
                trial_loss = loss;
                trial = margin.clone();
            }
            if s != 1.0 {
                tree.scale(s);
            }
            margin = trial;
            loss = trial_loss;
            loss_history.push(loss);
            trees.push(tree);
        }
        Self {
            mode: params.mode,
            base_margin,
            trees,
            loss_history,
        }
    }

    pub fn margin(&self, row: ArrayView1<'_, f64>) -> f64 {
        self.base_margin + self.trees.iter().map(|t| t.value(row)).sum::<f64>()
    }

    pub(crate) fn probability(&self, row: ArrayView1<'_, f64>) -> f64 {
        sigmoid(self.margin(row))
    }
}
