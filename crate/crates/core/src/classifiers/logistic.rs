//! L1/L2-regularized logistic regression.
//!
//! Minimizes `(1/n) Σ s_i ℓ_i + R(w) / (C n)` where `ℓ_i` is the log-loss of
//! row `i`, `s_i` its class weight and `R` is `½‖w‖²` or `‖w‖₁`. The
//! intercept is not penalized. L2 uses L-BFGS, L1 uses FISTA with
//! backtracking and adaptive restart.

use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::params::{ClassWeight, Hyperparameters};
use super::{sigmoid, softplus, ClassifierError, Family};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Penalty {
    L1,
    L2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticParams {
    pub c: f64,
    pub penalty: Penalty,
    pub class_weight: ClassWeight,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            penalty: Penalty::L2,
            class_weight: ClassWeight::Uniform,
            max_iter: 5000,
            tol: 1e-6,
        }
    }
}

impl LogisticParams {
    pub(crate) fn parse(p: &Hyperparameters) -> Result<Self, ClassifierError> {
        let f = Family::LogisticRegression;
        p.check_known(f, &["C", "penalty", "class_weight", "max_iter", "tol"])?;
        Ok(Self {
            c: p.positive_f64(f, "C", 1.0)?,
            penalty: match p.choice(f, "penalty", "l2", &["l1", "l2"])? {
                "l1" => Penalty::L1,
                _ => Penalty::L2,
            },
            class_weight: ClassWeight::parse(p, f)?,
            max_iter: p.usize(f, "max_iter", 5000)?,
            tol: p.positive_f64(f, "tol", 1e-6)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    /// Optimizer iterations used.
    pub iterations: usize,
    pub converged: bool,
}

/// Training objective over the parameter vector `[w_0, …, w_{d-1}, b]`.
pub struct Objective<'a> {
    x: ArrayView2<'a, f64>,
    y: &'a [usize],
    sample_weight: Vec<f64>,
    /// `1 / (C n)`
    reg: f64,
    penalty: Penalty,
}

impl<'a> Objective<'a> {
    pub fn new(x: ArrayView2<'a, f64>, y: &'a [usize], params: &LogisticParams) -> Self {
        Self {
            x,
            y,
            sample_weight: params.class_weight.sample_weights(y),
            reg: 1.0 / (params.c * y.len() as f64),
            penalty: params.penalty,
        }
    }

    fn dim(&self) -> usize {
        self.x.ncols() + 1
    }

    /// Weighted mean log-loss and its gradient (no penalty term).
    fn data_loss(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        let d = self.x.ncols();
        let n = self.y.len() as f64;
        let mut grad = vec![0.0; d + 1];
        let mut loss = 0.0;
        for (i, row) in self.x.rows().into_iter().enumerate() {
            let z = margin(row, &theta[..d], theta[d]);
            let t = self.y[i] as f64;
            let s = self.sample_weight[i];
            loss += s * (softplus(z) - t * z);
            let r = s * (sigmoid(z) - t);
            for (g, &v) in grad[..d].iter_mut().zip(row.iter()) {
                *g += r * v;
            }
            grad[d] += r;
        }
        grad.iter_mut().for_each(|g| *g /= n);
        (loss / n, grad)
    }

    fn penalty_value(&self, theta: &[f64]) -> f64 {
        let w = &theta[..theta.len() - 1];
        self.reg
            * match self.penalty {
                Penalty::L2 => 0.5 * w.iter().map(|v| v * v).sum::<f64>(),
                Penalty::L1 => w.iter().map(|v| v.abs()).sum::<f64>(),
            }
    }

    /// Full objective and its (sub)gradient. For L1 the gradient uses
    /// `sign(w)` with `sign(0) = 0`.
    pub fn loss_and_gradient(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        let (loss, mut grad) = self.data_loss(theta);
        let d = theta.len() - 1;
        for (g, &w) in grad[..d].iter_mut().zip(&theta[..d]) {
            *g += self.reg
                * match self.penalty {
                    Penalty::L2 => w,
                    Penalty::L1 => {
                        if w == 0.0 {
                            0.0
                        } else {
                            w.signum()
                        }
                    }
                };
        }
        (loss + self.penalty_value(theta), grad)
    }
}

fn margin(row: ArrayView1<'_, f64>, w: &[f64], b: f64) -> f64 {
    row.iter().zip(w).map(|(x, w)| x * w).sum::<f64>() + b
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

impl LogisticModel {
    pub fn fit(x: ArrayView2<'_, f64>, y: &[usize], params: &LogisticParams) -> Self {
        let obj = Objective::new(x, y, params);
        let (theta, iterations, converged) = match params.penalty {
            Penalty::L2 => lbfgs(&obj, params.max_iter, params.tol),
            Penalty::L1 => fista(&obj, params.max_iter, params.tol),
        };
        if !converged {
            log::warn!(
                "logistic regression stopped after {iterations} iterations without converging"
            );
        }
        let d = x.ncols();
        Self {
            weights: theta[..d].to_vec(),
            intercept: theta[d],
            iterations,
            converged,
        }
    }

    pub fn decision(&self, row: ArrayView1<'_, f64>) -> f64 {
        margin(row, &self.weights, self.intercept)
    }

    pub(crate) fn probability(&self, row: ArrayView1<'_, f64>) -> f64 {
        sigmoid(self.decision(row))
    }
}

/// L-BFGS with Armijo backtracking; stops when `‖∇‖∞ ≤ tol`.
fn lbfgs(obj: &Objective<'_>, max_iter: usize, tol: f64) -> (Vec<f64>, usize, bool) {
    const MEMORY: usize = 10;
    let n = obj.dim();
    let mut theta = vec![0.0; n];
    let (mut f, mut g) = obj.loss_and_gradient(&theta);
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut rho_hist: Vec<f64> = Vec::new();
    for iter in 0..max_iter {
        if inf_norm(&g) <= tol {
            return (theta, iter, true);
        }
        // two-loop recursion
        let mut q = g.clone();
        let mut alpha = vec![0.0; s_hist.len()];
        for k in (0..s_hist.len()).rev() {
            alpha[k] = rho_hist[k] * dot(&s_hist[k], &q);
            q.iter_mut()
                .zip(&y_hist[k])
                .for_each(|(qi, yi)| *qi -= alpha[k] * yi);
        }
        let gamma = match (s_hist.last(), y_hist.last()) {
            (Some(s), Some(yv)) => dot(s, yv) / dot(yv, yv),
            _ => 1.0 / inf_norm(&g).max(1.0),
        };
        q.iter_mut().for_each(|v| *v *= gamma);
        for k in 0..s_hist.len() {
            let beta = rho_hist[k] * dot(&y_hist[k], &q);
            q.iter_mut()
                .zip(&s_hist[k])
                .for_each(|(qi, si)| *qi += (alpha[k] - beta) * si);
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&g, &dir);
        if slope >= 0.0 {
            // not a descent direction; restart from steepest descent
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            dir = g.iter().map(|v| -v / inf_norm(&g).max(1.0)).collect();
            slope = dot(&g, &dir);
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = theta.iter().zip(&dir).map(|(t, d)| t + step * d).collect();
            let (ft, gt) = obj.loss_and_gradient(&trial);
            if ft.is_finite() && ft <= f + 1e-4 * step * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            step *= 0.5;
        }
        let Some((next, f_next, g_next)) = accepted else {
            return (theta, iter, inf_norm(&g) <= tol);
        };
        let s: Vec<f64> = next.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = g_next.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        if sy > 1e-12 * dot(&yv, &yv).sqrt() * dot(&s, &s).sqrt() {
            if s_hist.len() == MEMORY {
                s_hist.remove(0);
                y_hist.remove(0);
                rho_hist.remove(0);
            }
            s_hist.push(s);
            y_hist.push(yv);
            rho_hist.push(1.0 / sy);
        }
        theta = next;
        f = f_next;
        g = g_next;
    }
    let converged = inf_norm(&g) <= tol;
    (theta, max_iter, converged)
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// FISTA for the L1 problem. Convergence is measured on the proximal
/// gradient mapping.
fn fista(obj: &Objective<'_>, max_iter: usize, tol: f64) -> (Vec<f64>, usize, bool) {
    let n = obj.dim();
    let d = n - 1;
    let prox = |v: &[f64], step: f64| -> Vec<f64> {
        let mut out: Vec<f64> = v[..d]
            .iter()
            .map(|&w| soft_threshold(w, step * obj.reg))
            .collect();
        out.push(v[d]);
        out
    };
    let full = |theta: &[f64]| obj.data_loss(theta).0 + obj.penalty_value(theta);

    let mut theta = vec![0.0; n];
    let mut momentum_point = theta.clone();
    let mut t = 1.0f64;
    let mut lipschitz = 1.0f64;
    let mut f_prev = full(&theta);
    for iter in 0..max_iter {
        let (f_y, g_y) = obj.data_loss(&momentum_point);
        let (next, smooth_next) = loop {
            let step = 1.0 / lipschitz;
            let cand_in: Vec<f64> = momentum_point
                .iter()
                .zip(&g_y)
                .map(|(p, g)| p - step * g)
                .collect();
            let cand = prox(&cand_in, step);
            let diff: Vec<f64> = cand
                .iter()
                .zip(&momentum_point)
                .map(|(a, b)| a - b)
                .collect();
            let f_cand = obj.data_loss(&cand).0;
            let bound = f_y + dot(&g_y, &diff) + 0.5 * lipschitz * dot(&diff, &diff);
            if f_cand <= bound + 1e-12 * f_y.abs().max(1.0) || lipschitz > 1e300 {
                break (cand, f_cand);
            }
            lipschitz *= 2.0;
        };
        let mapping: Vec<f64> = next
            .iter()
            .zip(&momentum_point)
            .map(|(a, b)| (b - a) * lipschitz)
            .collect();
        let f_next = smooth_next + obj.penalty_value(&next);
        if f_next > f_prev {
            // adaptive restart
            t = 1.0;
            momentum_point = theta.clone();
            continue;
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        momentum_point = next
            .iter()
            .zip(&theta)
            .map(|(a, b)| a + (t - 1.0) / t_next * (a - b))
            .collect();
        theta = next;
        t = t_next;
        f_prev = f_next;
        if inf_norm(&mapping) <= tol {
            return (theta, iter + 1, true);
        }
        lipschitz = (lipschitz * 0.9).max(1e-12);
    }
    (theta, max_iter, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn data() -> (Array2<f64>, Vec<usize>) {
        let x = Array2::from_shape_fn((60, 3), |(i, j)| ((i * 13 + j * 7) % 17) as f64 / 4.0 - 2.0);
        let y = (0..60)
            .map(|i| usize::from(x[[i, 0]] - 0.5 * x[[i, 1]] + 0.1 * ((i % 5) as f64 - 2.0) > 0.0))
            .collect();
        (x, y)
    }

    fn finite_difference(obj: &Objective<'_>, theta: &[f64]) -> Vec<f64> {
        (0..theta.len())
            .map(|k| {
                let h = 1e-6;
                let mut a = theta.to_vec();
                let mut b = theta.to_vec();
                a[k] += h;
                b[k] -= h;
                (obj.loss_and_gradient(&a).0 - obj.loss_and_gradient(&b).0) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (x, y) = data();
        for (penalty, cw) in [
            (Penalty::L2, ClassWeight::Uniform),
            (Penalty::L2, ClassWeight::Balanced),
            (Penalty::L1, ClassWeight::Balanced),
        ] {
            let params = LogisticParams {
                c: 0.7,
                penalty,
                class_weight: cw,
                ..Default::default()
            };
            let obj = Objective::new(x.view(), &y, &params);
            let theta = [0.3, -0.2, 0.15, 0.05];
            let (_, g) = obj.loss_and_gradient(&theta);
            let fd = finite_difference(&obj, &theta);
            for (a, b) in g.iter().zip(&fd) {
                assert!((a - b).abs() < 1e-6, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn l2_reaches_stationarity() {
        let (x, y) = data();
        let params = LogisticParams {
            c: 10.0,
            ..Default::default()
        };
        let m = LogisticModel::fit(x.view(), &y, &params);
        assert!(m.converged);
        let mut theta = m.weights.clone();
        theta.push(m.intercept);
        let (_, g) = Objective::new(x.view(), &y, &params).loss_and_gradient(&theta);
        assert!(inf_norm(&g) <= 1e-6);
    }

    #[test]
    fn l1_zeroes_irrelevant_weight_under_strong_penalty() {
        let (x, y) = data();
        let params = LogisticParams {
            c: 0.05,
            penalty: Penalty::L1,
            ..Default::default()
        };
        let m = LogisticModel::fit(x.view(), &y, &params);
        assert!(m.converged);
        assert_eq!(m.weights[2], 0.0);
        assert!(m.weights[0] > 0.0);
    }

    #[test]
    fn l1_solution_satisfies_subgradient_conditions() {
        let (x, y) = data();
        let params = LogisticParams {
            c: 1.0,
            penalty: Penalty::L1,
            ..Default::default()
        };
        let m = LogisticModel::fit(x.view(), &y, &params);
        let mut theta = m.weights.clone();
        theta.push(m.intercept);
        let obj = Objective::new(x.view(), &y, &params);
        let (_, g) = obj.data_loss(&theta);
        for (k, &w) in m.weights.iter().enumerate() {
            if w == 0.0 {
                assert!(g[k].abs() <= obj.reg + 1e-5);
            } else {
                assert!((g[k] + obj.reg * w.signum()).abs() <= 1e-5);
            }
        }
        assert!(g[3].abs() <= 1e-5);
    }

    #[test]
    fn separable_data_is_classified() {
        let x = ndarray::array![[-2.0], [-1.0], [-0.5], [0.5], [1.0], [2.0]];
        let y = [0, 0, 0, 1, 1, 1];
        let m = LogisticModel::fit(x.view(), &y, &LogisticParams::default());
        for (i, row) in x.rows().into_iter().enumerate() {
            assert_eq!(usize::from(m.probability(row) > 0.5), y[i]);
        }
    }
}
