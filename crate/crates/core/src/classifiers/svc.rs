//! Soft-margin support vector classifier.
//!
//! The dual is solved by SMO with second-order working-set selection.
//! Probabilities come from a sigmoid fitted to the training decision values
//! (Platt scaling with regularized targets).

use ndarray::{Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::params::{ClassWeight, Hyperparameters};
use super::{ClassifierError, Family};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Kernel {
    Linear,
    /// `(γ x·z)^3`
    Poly,
    /// `exp(-γ ‖x - z‖²)`
    Rbf,
    /// `tanh(γ x·z)`
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Gamma {
    /// `1 / (d · Var(X))` over all entries of the training matrix.
    Scale,
    /// `1 / d`
    Auto,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvcParams {
    pub c: f64,
    pub kernel: Kernel,
    pub gamma: Gamma,
    pub class_weight: ClassWeight,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SvcParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            kernel: Kernel::Rbf,
            gamma: Gamma::Scale,
            class_weight: ClassWeight::Uniform,
            tol: 1e-3,
            max_iter: 1_000_000,
        }
    }
}

impl SvcParams {
    pub(crate) fn parse(p: &Hyperparameters) -> Result<Self, ClassifierError> {
        let f = Family::Svc;
        p.check_known(
            f,
            &["C", "kernel", "gamma", "class_weight", "tol", "max_iter"],
        )?;
        let kernel = match p.choice(f, "kernel", "rbf", &["linear", "poly", "rbf", "sigmoid"])? {
            "linear" => Kernel::Linear,
            "poly" => Kernel::Poly,
            "sigmoid" => Kernel::Sigmoid,
            _ => Kernel::Rbf,
        };
        let gamma = match p.get("gamma") {
            Some(v) if v.as_f64().is_some() => Gamma::Value(p.positive_f64(f, "gamma", 1.0)?),
            _ => match p.choice(f, "gamma", "scale", &["scale", "auto"])? {
                "auto" => Gamma::Auto,
                _ => Gamma::Scale,
            },
        };
        Ok(Self {
            c: p.positive_f64(f, "C", 1.0)?,
            kernel,
            gamma,
            class_weight: ClassWeight::parse(p, f)?,
            tol: p.positive_f64(f, "tol", 1e-3)?,
            max_iter: p.usize(f, "max_iter", 1_000_000)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvcModel {
    pub kernel: Kernel,
    pub gamma: f64,
    pub support_vectors: Vec<Vec<f64>>,
    /// `α_i y_i` per support vector.
    pub dual_coef: Vec<f64>,
    pub rho: f64,
    /// `P(class 1 | f) = 1 / (1 + exp(a f + b))`
    pub platt_a: f64,
    pub platt_b: f64,
    pub iterations: usize,
}

fn kernel_value(kernel: Kernel, gamma: f64, a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    match kernel {
        Kernel::Linear => a.dot(&b),
        Kernel::Poly => (gamma * a.dot(&b)).powi(3),
        Kernel::Sigmoid => (gamma * a.dot(&b)).tanh(),
        Kernel::Rbf => {
            let d2: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
            (-gamma * d2).exp()
        }
    }
}

fn resolve_gamma(gamma: Gamma, x: ArrayView2<'_, f64>) -> f64 {
    let d = x.ncols() as f64;
    match gamma {
        Gamma::Value(g) => g,
        Gamma::Auto => 1.0 / d,
        Gamma::Scale => {
            let n = x.len() as f64;
            let mean = x.sum() / n;
            let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            if var > 0.0 {
                1.0 / (d * var)
            } else {
                1.0
            }
        }
    }
}

/// Dual solution: `alpha`, `rho` and the iteration count.
struct Solution {
    alpha: Vec<f64>,
    rho: f64,
    iterations: usize,
}

const TAU: f64 = 1e-12;

/// SMO on `min ½ αᵀQα - Σα` s.t. `yᵀα = 0`, `0 ≤ α_i ≤ c_i`, with
/// `Q_ij = y_i y_j K_ij` and `y ∈ {-1, +1}`.
fn smo(k: &Array2<f64>, y: &[f64], c: &[f64], tol: f64, max_iter: usize) -> Solution {
    let n = y.len();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let q = |i: usize, j: usize| y[i] * y[j] * k[[i, j]];
    let in_up = |a: &[f64], t: usize| (y[t] > 0.0 && a[t] < c[t]) || (y[t] < 0.0 && a[t] > 0.0);
    let in_low = |a: &[f64], t: usize| (y[t] > 0.0 && a[t] > 0.0) || (y[t] < 0.0 && a[t] < c[t]);
    let mut iterations = 0;
    while iterations < max_iter {
        // first index: maximal violation
        let mut i = usize::MAX;
        let mut gmax = f64::NEG_INFINITY;
        for t in 0..n {
            if in_up(&alpha, t) && -y[t] * grad[t] >= gmax {
                if -y[t] * grad[t] > gmax || i == usize::MAX {
                    i = t;
                }
                gmax = -y[t] * grad[t];
            }
        }
        // second index: largest objective decrease
        let mut j = usize::MAX;
        let mut gmin = f64::INFINITY;
        let mut best = f64::INFINITY;
        for t in 0..n {
            if !in_low(&alpha, t) {
                continue;
            }
            let v = -y[t] * grad[t];
            gmin = gmin.min(v);
            if i != usize::MAX && v < gmax {
                let b = gmax - v;
                let mut a = k[[i, i]] + k[[t, t]] - 2.0 * k[[i, t]];
                if a <= 0.0 {
                    a = TAU;
                }
                let obj = -(b * b) / a;
                if obj < best {
                    best = obj;
                    j = t;
                }
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax - gmin < tol {
            break;
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (ci, cj) = (c[i], c[j]);
        if y[i] != y[j] {
            let mut quad = k[[i, i]] + k[[j, j]] + 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > ci - cj {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = ci - diff;
                }
            } else if alpha[j] > cj {
                alpha[j] = cj;
                alpha[i] = cj + diff;
            }
        } else {
            let mut quad = k[[i, i]] + k[[j, j]] - 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > ci {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = sum - ci;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > cj {
                if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = sum - cj;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for (t, g) in grad.iter_mut().enumerate() {
            *g += q(t, i) * di + q(t, j) * dj;
        }
    }
    if iterations == max_iter {
        log::warn!("SVC solver hit the iteration limit ({max_iter})");
    }

    // rho: average over free vectors, else midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        let at_upper = alpha[t] >= c[t];
        let at_lower = alpha[t] <= 0.0;
        if at_upper {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    };
    Solution {
        alpha,
        rho,
        iterations,
    }
}

/// Sigmoid parameters `(a, b)` for `P(y=1|f) = 1/(1+exp(a f + b))`, by
/// Newton's method with backtracking on the regularized log-likelihood.
pub(crate) fn platt(decision: &[f64], y: &[usize]) -> (f64, f64) {
    let prior1 = y.iter().filter(|&&c| c == 1).count() as f64;
    let prior0 = y.len() as f64 - prior1;
    let hi = (prior1 + 1.0) / (prior1 + 2.0);
    let lo = 1.0 / (prior0 + 2.0);
    let t: Vec<f64> = y.iter().map(|&c| if c == 1 { hi } else { lo }).collect();
    let objective = |a: f64, b: f64| -> f64 {
        decision
            .iter()
            .zip(&t)
            .map(|(&f, &ti)| {
                let z = f * a + b;
                if z >= 0.0 {
                    ti * z + (-z).exp().ln_1p()
                } else {
                    (ti - 1.0) * z + z.exp().ln_1p()
                }
            })
            .sum()
    };
    let (mut a, mut b) = (0.0, ((prior0 + 1.0) / (prior1 + 1.0)).ln());
    let mut fval = objective(a, b);
    for _ in 0..100 {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (1e-12, 1e-12, 0.0, 0.0, 0.0);
        for (&f, &ti) in decision.iter().zip(&t) {
            let z = f * a + b;
            let (p, q) = if z >= 0.0 {
                let e = (-z).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = z.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += f * f * d2;
            h22 += d2;
            h21 += f * d2;
            let d1 = ti - p;
            g1 += f * d1;
            g2 += d1;
        }
        if g1.abs() < 1e-5 && g2.abs() < 1e-5 {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        let mut moved = false;
        while step >= 1e-10 {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = objective(na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                moved = true;
                break;
            }
            step /= 2.0;
        }
        if !moved {
            break;
        }
    }
    (a, b)
}

impl SvcModel {
    pub fn fit(x: ArrayView2<'_, f64>, y: &[usize], params: &SvcParams) -> Self {
        let n = x.nrows();
        let gamma = resolve_gamma(params.gamma, x);
        let kernel = params.kernel;
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .map(|j| kernel_value(kernel, gamma, x.row(i), x.row(j)))
                    .collect()
            })
            .collect();
        let k = Array2::from_shape_fn((n, n), |(i, j)| rows[i][j]);
        let ys: Vec<f64> = y.iter().map(|&c| if c == 1 { 1.0 } else { -1.0 }).collect();
        let factors = params.class_weight.class_factors(y);
        let c: Vec<f64> = y.iter().map(|&l| params.c * factors[l]).collect();
        let sol = smo(&k, &ys, &c, params.tol, params.max_iter);

        let decision: Vec<f64> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| sol.alpha[j] * ys[j] * k[[i, j]])
                    .sum::<f64>()
                    - sol.rho
            })
            .collect();
        let (platt_a, platt_b) = platt(&decision, y);
        let support: Vec<usize> = (0..n).filter(|&i| sol.alpha[i] > 0.0).collect();
        Self {
            kernel,
            gamma,
            support_vectors: support.iter().map(|&i| x.row(i).to_vec()).collect(),
            dual_coef: support.iter().map(|&i| sol.alpha[i] * ys[i]).collect(),
            rho: sol.rho,
            platt_a,
            platt_b,
            iterations: sol.iterations,
        }
    }

    /// Signed distance proxy; positive favours class 1.
    pub fn decision(&self, row: ArrayView1<'_, f64>) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.dual_coef)
            .map(|(sv, &coef)| {
                coef * kernel_value(
                    self.kernel,
                    self.gamma,
                    ArrayView1::from(sv.as_slice()),
                    row,
                )
            })
            .sum::<f64>()
            - self.rho
    }

    pub(crate) fn probability(&self, row: ArrayView1<'_, f64>) -> f64 {
        let z = self.decision(row) * self.platt_a + self.platt_b;
        super::sigmoid(-z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs() -> (Array2<f64>, Vec<usize>) {
        let x = Array2::from_shape_fn((40, 2), |(i, j)| {
            let c = if i < 20 { -1.5 } else { 1.5 };
            c + (((i * 7 + j * 3) % 11) as f64 / 11.0 - 0.5)
        });
        let y = (0..40).map(|i| usize::from(i >= 20)).collect();
        (x, y)
    }

    #[test]
    fn linear_separates_blobs() {
        let (x, y) = blobs();
        let p = SvcParams {
            kernel: Kernel::Linear,
            ..Default::default()
        };
        let m = SvcModel::fit(x.view(), &y, &p);
        for (i, row) in x.rows().into_iter().enumerate() {
            assert_eq!(usize::from(m.decision(row) > 0.0), y[i]);
        }
        assert!(m.support_vectors.len() < 40);
    }

    #[test]
    fn dual_constraints_hold() {
        let (x, y) = blobs();
        for kernel in [Kernel::Linear, Kernel::Poly, Kernel::Rbf, Kernel::Sigmoid] {
            let p = SvcParams {
                kernel,
                c: 0.5,
                class_weight: ClassWeight::Balanced,
                ..Default::default()
            };
            let m = SvcModel::fit(x.view(), &y, &p);
            assert!(m.dual_coef.iter().sum::<f64>().abs() < 1e-9, "{kernel:?}");
            assert!(m.dual_coef.iter().all(|a| a.abs() <= 0.5 + 1e-12));
        }
    }

    #[test]
    fn rbf_learns_xor_like_pattern() {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..8 {
            for j in 0..8 {
                let (a, b) = (i as f64 - 3.5, j as f64 - 3.5);
                rows.extend([a, b]);
                y.push(usize::from((a > 0.0) != (b > 0.0)));
            }
        }
        let x = Array2::from_shape_vec((64, 2), rows).unwrap();
        let p = SvcParams {
            c: 10.0,
            gamma: Gamma::Value(0.5),
            ..Default::default()
        };
        let m = SvcModel::fit(x.view(), &y, &p);
        let correct = (0..64)
            .filter(|&i| usize::from(m.decision(x.row(i)) > 0.0) == y[i])
            .count();
        assert!(correct >= 60, "{correct}");
    }

    #[test]
    fn platt_is_monotone_in_decision() {
        let (x, y) = blobs();
        let m = SvcModel::fit(x.view(), &y, &SvcParams::default());
        assert!(m.platt_a < 0.0);
        let lo = m.probability(ndarray::array![-2.0, -2.0].view());
        let hi = m.probability(ndarray::array![2.0, 2.0].view());
        assert!(lo < 0.5 && hi > 0.5);
    }

    #[test]
    fn gamma_scale_uses_population_variance() {
        let x = ndarray::array![[0.0, 2.0], [2.0, 0.0]];
        // entries 0,2,2,0: var = 1, d = 2
        assert_eq!(resolve_gamma(Gamma::Scale, x.view()), 0.5);
        assert_eq!(resolve_gamma(Gamma::Auto, x.view()), 0.5);
    }
}
