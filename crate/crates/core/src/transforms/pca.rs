//! Principal component analysis with a cumulative explained-variance target.
//!
//! The covariance uses the unbiased `n - 1` denominator. When there are more
//! columns than rows the spectrum is taken from the `n x n` Gram matrix
//! instead of the `d x d` covariance; both routes share the same nonzero
//! eigenvalues.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::TransformError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcaConfig {
    /// Fraction of total variance the retained components must explain.
    pub variance_target: f64,
    /// Scale columns to unit variance after centering.
    #[serde(default)]
    pub standardize: bool,
}

impl Default for PcaConfig {
    fn default() -> Self {
        Self {
            variance_target: 0.99,
            standardize: false,
        }
    }
}

/// Fitted PCA transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Array1<f64>,
    /// Per-column divisor applied after centering, when standardizing.
    pub scale: Option<Array1<f64>>,
    /// `k x d`, one orthonormal direction per row.
    pub components: Array2<f64>,
    /// Eigenvalues of the retained components, descending.
    pub explained_variance: Vec<f64>,
    /// Sum of all covariance eigenvalues (the covariance trace).
    pub total_variance: f64,
    pub retained_ratio: f64,
    pub variance_target: f64,
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.components.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.mean.len()
    }

    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        self.explained_variance
            .iter()
            .map(|v| v / self.total_variance)
            .collect()
    }

    fn prepare(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>, TransformError> {
        if x.ncols() != self.n_features() {
            return Err(TransformError::Shape {
                expected: self.n_features(),
                found: x.ncols(),
            });
        }
        let mut centered = &x - &self.mean.view().insert_axis(Axis(0));
        if let Some(scale) = &self.scale {
            centered /= &scale.view().insert_axis(Axis(0));
        }
        Ok(centered)
    }

    /// Coordinates of `x` in component space (`n x k`).
    pub fn project(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>, TransformError> {
        let centered = self.prepare(x)?;
        Ok(centered.dot(&self.components.t()))
    }

    /// Maps component coordinates back to the original feature space.
    pub fn reconstruct(&self, scores: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut back = scores.dot(&self.components);
        if let Some(scale) = &self.scale {
            back *= &scale.view().insert_axis(Axis(0));
        }
        back + self.mean.view().insert_axis(Axis(0))
    }
}

/// Fits PCA to the rows of `x`, keeping the fewest components whose
/// cumulative explained variance reaches `config.variance_target`.
pub fn fit_pca(x: ArrayView2<'_, f64>, config: &PcaConfig) -> Result<PcaModel, TransformError> {
    let (n, d) = x.dim();
    if n < 2 {
        return Err(TransformError::TooFewRows { rows: n });
    }
    if d == 0 {
        return Err(TransformError::Shape {
            expected: 1,
            found: 0,
        });
    }
    if !(config.variance_target > 0.0 && config.variance_target <= 1.0) {
        return Err(TransformError::Config(format!(
            "variance target {} outside (0, 1]",
            config.variance_target
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(TransformError::NonFinite);
    }

    let mean = x.mean_axis(Axis(0)).expect("n >= 2");
    let mut centered = &x - &mean.view().insert_axis(Axis(0));
    let scale = if config.standardize {
        let sd = centered
            .map_axis(Axis(0), |c| (c.dot(&c) / (n - 1) as f64).sqrt())
            .mapv(|s| if s > 0.0 { s } else { 1.0 });
        centered /= &sd.view().insert_axis(Axis(0));
        Some(sd)
    } else {
        None
    };

    let denom = (n - 1) as f64;
    let total_variance = centered.iter().map(|v| v * v).sum::<f64>() / denom;
    let magnitude = x.iter().map(|v| v * v).sum::<f64>() / (n * d) as f64;
    if total_variance <= 1e-24 * (1.0 + magnitude) * d as f64 {
        return Err(TransformError::Degenerate);
    }

    let (values, vectors) = if d <= n {
        covariance_spectrum(&centered, denom)
    } else {
        gram_spectrum(&centered, denom)
    };

    let max_k = (n - 1).min(d).min(values.len());
    let mut cumulative = 0.0;
    let mut k = 0;
    while k < max_k {
        cumulative += values[k];
        k += 1;
        if cumulative / total_variance >= config.variance_target {
            break;
        }
    }
    let mut components = Array2::<f64>::zeros((k, d));
    for (i, v) in vectors.iter().take(k).enumerate() {
        components.row_mut(i).assign(v);
    }
    orthonormalize(&mut components);
    for mut row in components.rows_mut() {
        fix_sign(row.as_slice_mut().expect("standard layout"));
    }

    Ok(PcaModel {
        mean,
        scale,
        components,
        explained_variance: values[..k].to_vec(),
        total_variance,
        retained_ratio: cumulative / total_variance,
        variance_target: config.variance_target,
    })
}

/// Eigenpairs of the `d x d` covariance, descending, eigenvalues clamped at 0.
fn covariance_spectrum(centered: &Array2<f64>, denom: f64) -> (Vec<f64>, Vec<Array1<f64>>) {
    let d = centered.ncols();
    let cov = centered.t().dot(centered) / denom;
    let eig = SymmetricEigen::new(DMatrix::from_fn(d, d, |i, j| cov[[i, j]]));
    let order = descending(eig.eigenvalues.as_slice());
    let values = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let vectors = order
        .iter()
        .map(|&i| Array1::from_iter(eig.eigenvectors.column(i).iter().copied()))
        .collect();
    (values, vectors)
}

/// Eigenpairs via `G = Xc Xc^T / (n - 1)`. For each eigenpair `(λ, u)` of `G`
/// the covariance eigenvector is `Xc^T u / sqrt((n - 1) λ)`.
fn gram_spectrum(centered: &Array2<f64>, denom: f64) -> (Vec<f64>, Vec<Array1<f64>>) {
    let n = centered.nrows();
    let rows: Vec<_> = centered.rows().into_iter().collect();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (i..n).map(|j| rows[i].dot(&rows[j]) / denom).collect())
        .collect();
    let gram = DMatrix::from_fn(n, n, |i, j| {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        upper[a][b - a]
    });
    let eig = SymmetricEigen::new(gram);
    let order = descending(eig.eigenvalues.as_slice());
    let top = eig.eigenvalues[order[0]].max(0.0);
    let mut values = Vec::new();
    let mut vectors = Vec::new();
    for &i in &order {
        let lambda = eig.eigenvalues[i];
        if lambda <= top * 1e-13 {
            break;
        }
        let u = Array1::from_iter(eig.eigenvectors.column(i).iter().copied());
        let v = centered.t().dot(&u) / (denom * lambda).sqrt();
        values.push(lambda);
        vectors.push(v);
    }
    (values, vectors)
}

fn descending(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order
}

/// Two passes of modified Gram-Schmidt over the rows.
fn orthonormalize(m: &mut Array2<f64>) {
    for _ in 0..2 {
        for i in 0..m.nrows() {
            for j in 0..i {
                let proj = m.row(i).dot(&m.row(j));
                let rj = m.row(j).to_owned();
                m.row_mut(i).scaled_add(-proj, &rj);
            }
            let norm = m.row(i).dot(&m.row(i)).sqrt();
            if norm > 0.0 {
                m.row_mut(i).mapv_inplace(|v| v / norm);
            }
        }
    }
}

/// Flips `v` so its largest-magnitude coordinate (first on ties) is positive.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}
