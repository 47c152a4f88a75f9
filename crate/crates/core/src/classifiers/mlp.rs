//! Feed-forward network with a single sigmoid output unit.
//!
//! Inputs are centred per column and divided by one shared RMS scale. Training
//! minimizes mean log-loss plus `alpha / (2 m) Σ‖W‖²` per minibatch of size
//! `m`, with SGD (Nesterov momentum) or Adam. A stratified tenth of the
//! training rows is held out; training stops once validation loss has not
//! improved for `n_iter_no_change` epochs and the best weights are kept.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::params::Hyperparameters;
use super::{sigmoid, softplus, ClassifierError, Family};
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the activation output `a`.
    fn derivative(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Solver {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub hidden_layer_sizes: Vec<usize>,
    pub activation: Activation,
    pub solver: Solver,
    pub learning_rate_init: f64,
    pub alpha: f64,
    pub batch_size: usize,
    pub max_iter: usize,
    pub momentum: f64,
    pub validation_fraction: f64,
    pub n_iter_no_change: usize,
    pub tol: f64,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden_layer_sizes: vec![100],
            activation: Activation::Relu,
            solver: Solver::Adam,
            learning_rate_init: 0.001,
            alpha: 0.0001,
            batch_size: 32,
            max_iter: 200,
            momentum: 0.9,
            validation_fraction: 0.1,
            n_iter_no_change: 20,
            tol: 1e-4,
        }
    }
}

impl MlpParams {
    pub(crate) fn parse(p: &Hyperparameters) -> Result<Self, ClassifierError> {
        let f = Family::Mlp;
        p.check_known(
            f,
            &[
                "hidden_layer_sizes",
                "activation",
                "solver",
                "learning_rate_init",
                "alpha",
                "batch_size",
                "max_iter",
            ],
        )?;
        let d = Self::default();
        let alpha = p.f64(f, "alpha", d.alpha)?;
        if alpha < 0.0 {
            return Err(ClassifierError::Hyperparameter {
                family: f,
                name: "alpha".into(),
                reason: "must be non-negative".into(),
            });
        }
        Ok(Self {
            hidden_layer_sizes: p.layers(f, "hidden_layer_sizes", &d.hidden_layer_sizes)?,
            activation: match p.choice(f, "activation", "relu", &["relu", "tanh"])? {
                "tanh" => Activation::Tanh,
                _ => Activation::Relu,
            },
            solver: match p.choice(f, "solver", "adam", &["sgd", "adam"])? {
                "sgd" => Solver::Sgd,
                _ => Solver::Adam,
            },
            learning_rate_init: p.positive_f64(f, "learning_rate_init", d.learning_rate_init)?,
            alpha,
            batch_size: p.usize(f, "batch_size", d.batch_size)?.max(1),
            max_iter: p.usize(f, "max_iter", d.max_iter)?.max(1),
            ..d
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `fan_in × fan_out`
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub layers: Vec<Layer>,
    pub activation: Activation,
    pub input_mean: Vec<f64>,
    pub input_scale: Vec<f64>,
    pub epochs: usize,
    pub best_validation_loss: f64,
}

/// Network weights and the loss they are trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layers: Vec<Layer>,
    pub activation: Activation,
    pub alpha: f64,
}

impl Network {
    /// Glorot-uniform initialization.
    pub fn init(sizes: &[usize], activation: Activation, alpha: f64, rng: &mut ChaCha8Rng) -> Self {
        let layers = sizes
            .windows(2)
            .map(|w| {
                let bound = (6.0 / (w[0] + w[1]) as f64).sqrt();
                Layer {
                    weights: Array2::from_shape_simple_fn((w[0], w[1]), || {
                        rng.gen_range(-bound..bound)
                    }),
                    bias: Array1::from_shape_simple_fn(w[1], || rng.gen_range(-bound..bound)),
                }
            })
            .collect();
        Self {
            layers,
            activation,
            alpha,
        }
    }

    /// Output margins (pre-sigmoid) and the activations of every layer.
    fn forward(&self, x: ArrayView2<'_, f64>) -> (Vec<f64>, Vec<Array2<f64>>) {
        let mut acts = vec![x.to_owned()];
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = acts[k].dot(&layer.weights);
            z += &layer.bias;
            if k + 1 < self.layers.len() {
                z.mapv_inplace(|v| self.activation.apply(v));
            }
            acts.push(z);
        }
        let out = acts.last().expect("at least one layer").column(0).to_vec();
        (out, acts)
    }

    pub fn n_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// All weights then biases, layer by layer.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            v.extend(l.weights.iter());
            v.extend(l.bias.iter());
        }
        v
    }

    pub fn unflatten(&mut self, v: &[f64]) {
        let mut at = 0;
        for l in &mut self.layers {
            for w in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *w = v[at];
                at += 1;
            }
        }
    }

    /// Regularized mean log-loss on `(x, y)` and its gradient in
    /// [`flatten`](Self::flatten) order.
    pub fn loss_and_gradient(&self, x: ArrayView2<'_, f64>, y: &[f64]) -> (f64, Vec<Layer>) {
        let m = y.len() as f64;
        let (out, acts) = self.forward(x);
        let mut loss = out
            .iter()
            .zip(y)
            .map(|(&z, &t)| softplus(z) - t * z)
            .sum::<f64>()
            / m;
        let sq: f64 = self
            .layers
            .iter()
            .map(|l| l.weights.iter().map(|w| w * w).sum::<f64>())
            .sum();
        loss += self.alpha / (2.0 * m) * sq;

        let mut delta = Array2::from_shape_fn((y.len(), 1), |(i, _)| (sigmoid(out[i]) - y[i]) / m);
        let mut grads: Vec<Layer> = Vec::with_capacity(self.layers.len());
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let mut gw = acts[k].t().dot(&delta);
            gw.scaled_add(self.alpha / m, &layer.weights);
            let gb = delta.sum_axis(Axis(0));
            if k > 0 {
                let mut back = delta.dot(&layer.weights.t());
                back.zip_mut_with(&acts[k], |d, &a| *d *= self.activation.derivative(a));
                delta = back;
            }
            grads.push(Layer {
                weights: gw,
                bias: gb,
            });
        }
        grads.reverse();
        (loss, grads)
    }

    pub fn flat_loss_and_gradient(&self, x: ArrayView2<'_, f64>, y: &[f64]) -> (f64, Vec<f64>) {
        let (loss, grads) = self.loss_and_gradient(x, y);
        let flat = grads
            .iter()
            .flat_map(|l| {
                l.weights
                    .iter()
                    .chain(l.bias.iter())
                    .copied()
                    .collect::<Vec<_>>()
            })
            .collect();
        (loss, flat)
    }

    fn mean_log_loss(&self, x: ArrayView2<'_, f64>, y: &[f64]) -> f64 {
        let (out, _) = self.forward(x);
        out.iter()
            .zip(y)
            .map(|(&z, &t)| softplus(z) - t * z)
            .sum::<f64>()
            / y.len() as f64
    }
}

enum Optimizer {
    Sgd { velocity: Vec<f64>, momentum: f64 },
    Adam { m: Vec<f64>, v: Vec<f64>, t: i32 },
}

impl Optimizer {
    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        match self {
            Optimizer::Sgd { velocity, momentum } => {
                for ((p, g), v) in params.iter_mut().zip(grad).zip(velocity.iter_mut()) {
                    *v = *momentum * *v - lr * g;
                    *p += *momentum * *v - lr * g;
                }
            }
            Optimizer::Adam { m, v, t } => {
                const B1: f64 = 0.9;
                const B2: f64 = 0.999;
                *t += 1;
                let lr_t = lr * (1.0 - B2.powi(*t)).sqrt() / (1.0 - B1.powi(*t));
                for (((p, g), mi), vi) in params
                    .iter_mut()
                    .zip(grad)
                    .zip(m.iter_mut())
                    .zip(v.iter_mut())
                {
                    *mi = B1 * *mi + (1.0 - B1) * g;
                    *vi = B2 * *vi + (1.0 - B2) * g * g;
                    *p -= lr_t * *mi / (vi.sqrt() + 1e-8);
                }
            }
        }
    }
}

/// Stratified validation split: `(train, validation)` row indices.
fn stratified_holdout(
    y: &[usize],
    fraction: f64,
    rng: &mut ChaCha8Rng,
) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut valid = Vec::new();
    for class in 0..2 {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        idx.shuffle(rng);
        let k = if idx.len() >= 2 {
            ((idx.len() as f64 * fraction).round() as usize).clamp(1, idx.len() - 1)
        } else {
            0
        };
        valid.extend_from_slice(&idx[..k]);
        train.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    valid.sort_unstable();
    (train, valid)
}

impl MlpModel {
    pub fn fit(x: ArrayView2<'_, f64>, y: &[usize], params: &MlpParams, seed: u64) -> Self {
        let d = x.ncols();
        let n = x.nrows() as f64;
        let input_mean: Vec<f64> = x.mean_axis(Axis(0)).expect("non-empty").to_vec();
        // One scale for all columns: centering and a global RMS keep the
        // relative column variances, which carry signal after PCA.
        let total_var = (0..d)
            .map(|j| {
                x.column(j)
                    .iter()
                    .map(|v| (v - input_mean[j]).powi(2))
                    .sum::<f64>()
                    / n
            })
            .sum::<f64>()
            / d.max(1) as f64;
        let scale = if total_var > 0.0 {
            total_var.sqrt()
        } else {
            1.0
        };
        let input_scale = vec![scale; d];
        let xs = Array2::from_shape_fn(x.raw_dim(), |(i, j)| {
            (x[[i, j]] - input_mean[j]) / input_scale[j]
        });

        let mut rng = stream_rng(seed, 0);
        let mut sizes = vec![d];
        sizes.extend(&params.hidden_layer_sizes);
        sizes.push(1);
        let mut net = Network::init(&sizes, params.activation, params.alpha, &mut rng);

        let (train_rows, valid_rows) = stratified_holdout(y, params.validation_fraction, &mut rng);
        let xv = xs.select(Axis(0), &valid_rows);
        let yv: Vec<f64> = valid_rows.iter().map(|&i| y[i] as f64).collect();
        let mut opt = match params.solver {
            Solver::Sgd => Optimizer::Sgd {
                velocity: vec![0.0; net.n_params()],
                momentum: params.momentum,
            },
            Solver::Adam => Optimizer::Adam {
                m: vec![0.0; net.n_params()],
                v: vec![0.0; net.n_params()],
                t: 0,
            },
        };
        let mut flat = net.flatten();
        let mut best = (f64::INFINITY, flat.clone());
        let mut stale = 0;
        let mut order = train_rows.clone();
        let mut epochs = 0;
        for _ in 0..params.max_iter {
            epochs += 1;
            order.shuffle(&mut rng);
            for batch in order.chunks(params.batch_size) {
                let xb = xs.select(Axis(0), batch);
                let yb: Vec<f64> = batch.iter().map(|&i| y[i] as f64).collect();
                let (_, grad) = net.flat_loss_and_gradient(xb.view(), &yb);
                opt.step(&mut flat, &grad, params.learning_rate_init);
                net.unflatten(&flat);
            }
            let score = if valid_rows.is_empty() {
                let yt: Vec<f64> = train_rows.iter().map(|&i| y[i] as f64).collect();
                net.mean_log_loss(xs.select(Axis(0), &train_rows).view(), &yt)
            } else {
                net.mean_log_loss(xv.view(), &yv)
            };
            if !score.is_finite() {
                break;
            }
            if score < best.0 - params.tol {
                best = (score, flat.clone());
                stale = 0;
            } else {
                if score < best.0 {
                    best = (score, flat.clone());
                }
                stale += 1;
                if stale >= params.n_iter_no_change {
                    break;
                }
            }
        }
        if best.0.is_finite() {
            net.unflatten(&best.1);
        } else {
            log::warn!("MLP training diverged; keeping initial weights");
        }
        Self {
            layers: net.layers,
            activation: params.activation,
            input_mean,
            input_scale,
            epochs,
            best_validation_loss: best.0,
        }
    }

    pub(crate) fn probability(&self, row: ArrayView1<'_, f64>) -> f64 {
        let mut a: Vec<f64> = row
            .iter()
            .zip(self.input_mean.iter().zip(&self.input_scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect();
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = layer.bias.to_vec();
            for (i, &ai) in a.iter().enumerate() {
                if ai != 0.0 {
                    for (zj, &w) in z.iter_mut().zip(layer.weights.row(i)) {
                        *zj += ai * w;
                    }
                }
            }
            if k + 1 < self.layers.len() {
                z.iter_mut().for_each(|v| *v = self.activation.apply(*v));
            }
            a = z;
        }
        sigmoid(a[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_gradient(activation: Activation, hidden: &[usize]) {
        let mut rng = stream_rng(3, 0);
        let mut sizes = vec![4];
        sizes.extend(hidden);
        sizes.push(1);
        let net = Network::init(&sizes, activation, 0.01, &mut rng);
        let x = Array2::from_shape_fn((7, 4), |(i, j)| {
            ((i * 5 + j * 3) % 7) as f64 / 3.0 - 1.0 + 0.013 * j as f64
        });
        let y: Vec<f64> = (0..7).map(|i| (i % 2) as f64).collect();
        let theta = net.flatten();
        let (_, g) = net.flat_loss_and_gradient(x.view(), &y);
        let mut probe = net.clone();
        for k in 0..theta.len() {
            let h = 1e-6;
            let mut t = theta.clone();
            t[k] += h;
            probe.unflatten(&t);
            let up = probe.flat_loss_and_gradient(x.view(), &y).0;
            t[k] -= 2.0 * h;
            probe.unflatten(&t);
            let down = probe.flat_loss_and_gradient(x.view(), &y).0;
            let fd = (up - down) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-6, "param {k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        check_gradient(Activation::Tanh, &[5]);
        check_gradient(Activation::Tanh, &[3, 4]);
        check_gradient(Activation::Relu, &[6, 3]);
    }

    #[test]
    fn learns_xor() {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..100 {
            let a = (i % 10) as f64 / 4.5 - 1.0;
            let b = (i / 10) as f64 / 4.5 - 1.0;
            rows.extend([a, b]);
            y.push(usize::from((a > 0.0) != (b > 0.0)));
        }
        let x = Array2::from_shape_vec((100, 2), rows).unwrap();
        let p = MlpParams {
            hidden_layer_sizes: vec![16, 32],
            learning_rate_init: 0.01,
            ..Default::default()
        };
        let m = MlpModel::fit(x.view(), &y, &p, 0);
        let correct = (0..100)
            .filter(|&i| usize::from(m.probability(x.row(i)) > 0.5) == y[i])
            .count();
        assert!(correct >= 90, "{correct}");
    }

    #[test]
    fn holdout_is_stratified() {
        let y: Vec<usize> = (0..100).map(|i| usize::from(i < 30)).collect();
        let mut rng = stream_rng(0, 0);
        let (train, valid) = stratified_holdout(&y, 0.1, &mut rng);
        assert_eq!(valid.len(), 10);
        assert_eq!(valid.iter().filter(|&&i| y[i] == 1).count(), 3);
        assert_eq!(train.len() + valid.len(), 100);
    }

    #[test]
    fn sgd_and_adam_are_deterministic() {
        let x = Array2::from_shape_fn((40, 3), |(i, j)| ((i * 7 + j) % 9) as f64);
        let y: Vec<usize> = (0..40).map(|i| usize::from(x[[i, 0]] > 4.0)).collect();
        for solver in [Solver::Sgd, Solver::Adam] {
            let p = MlpParams {
                hidden_layer_sizes: vec![8],
                solver,
                max_iter: 30,
                ..Default::default()
            };
            assert_eq!(
                MlpModel::fit(x.view(), &y, &p, 1),
                MlpModel::fit(x.view(), &y, &p, 1)
            );
        }
    }
}
