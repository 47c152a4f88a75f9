//! SMOTE oversampling for binary labels.
//!
//! Each synthetic row is `a + λ (b - a)` where `a` is a minority row drawn
//! uniformly, `b` one of its `k` nearest minority neighbours (Euclidean,
//! ties broken by lower row index) and `λ ~ U[0, 1)`.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TransformError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmoteConfig {
    #[serde(default = "default_k")]
    pub k_neighbors: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_k() -> usize {
    5
}

impl Default for SmoteConfig {
    fn default() -> Self {
        Self {
            k_neighbors: default_k(),
            seed: 0,
        }
    }
}

/// Where a resampled row came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RowOrigin {
    /// Index into the input rows.
    Original(usize),
    /// Interpolated between input rows `base` and `neighbor`.
    Synthetic {
        base: usize,
        neighbor: usize,
        lambda: f64,
    },
}

impl RowOrigin {
    pub fn is_synthetic(&self) -> bool {
        matches!(self, RowOrigin::Synthetic { .. })
    }

    /// Input row this row is (or was interpolated from).
    pub fn base(&self) -> usize {
        match *self {
            RowOrigin::Original(i) => i,
            RowOrigin::Synthetic { base, .. } => base,
        }
    }
}

/// Resampled data: the original rows in input order followed by the
/// synthetic rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Resampled {
    pub x: Array2<f64>,
    pub y: Vec<usize>,
    pub origins: Vec<RowOrigin>,
}

impl Resampled {
    pub fn n_synthetic(&self) -> usize {
        self.origins.iter().filter(|o| o.is_synthetic()).count()
    }
}

/// Oversamples the minority class of binary `y` until both classes have the
/// majority count.
pub fn smote_resample(
    x: ArrayView2<'_, f64>,
    y: &[usize],
    config: &SmoteConfig,
) -> Result<Resampled, TransformError> {
    if x.nrows() != y.len() {
        return Err(TransformError::Shape {
            expected: x.nrows(),
            found: y.len(),
        });
    }
    if y.iter().any(|&l| l > 1) {
        return Err(TransformError::Config(
            "SMOTE expects binary labels 0/1".into(),
        ));
    }
    if config.k_neighbors == 0 {
        return Err(TransformError::Config(
            "k_neighbors must be positive".into(),
        ));
    }
    let counts = [
        y.iter().filter(|&&l| l == 0).count(),
        y.iter().filter(|&&l| l == 1).count(),
    ];
    let mut out = Resampled {
        x: x.to_owned(),
        y: y.to_vec(),
        origins: (0..y.len()).map(RowOrigin::Original).collect(),
    };
    if counts[0] == counts[1] {
        return Ok(out);
    }
    let minority_class = if counts[0] < counts[1] { 0 } else { 1 };
    let minority: Vec<usize> = (0..y.len()).filter(|&i| y[i] == minority_class).collect();
    if minority.len() <= config.k_neighbors {
        return Err(TransformError::MinorityTooSmall {
            minority: minority.len(),
            k: config.k_neighbors,
        });
    }
    let needed = counts[1 - minority_class] - counts[minority_class];
    let neighbors = nearest_neighbors(x, &minority, config.k_neighbors);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut rows = Array2::<f64>::zeros((needed, x.ncols()));
    for s in 0..needed {
        let pick = rng.gen_range(0..minority.len() * config.k_neighbors);
        let (a, b) = (
            minority[pick / config.k_neighbors],
            neighbors[pick / config.k_neighbors][pick % config.k_neighbors],
        );
        let lambda: f64 = rng.gen();
        let (ra, rb) = (x.row(a), x.row(b));
        rows.row_mut(s)
            .iter_mut()
            .zip(ra.iter().zip(rb.iter()))
            .for_each(|(o, (&va, &vb))| *o = va + lambda * (vb - va));
        out.y.push(minority_class);
        out.origins.push(RowOrigin::Synthetic {
            base: a,
            neighbor: b,
            lambda,
        });
    }
    out.x
        .append(Axis(0), rows.view())
        .expect("column counts match");
    Ok(out)
}

fn squared_distance(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// For each minority row, the input indices of its `k` nearest other
/// minority rows.
fn nearest_neighbors(x: ArrayView2<'_, f64>, minority: &[usize], k: usize) -> Vec<Vec<usize>> {
    minority
        .iter()
        .map(|&i| {
            let mut cand: Vec<(f64, usize)> = minority
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| (squared_distance(x.row(i), x.row(j)), j))
                .collect();
            cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            cand.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n0: usize, n1: usize) -> (Array2<f64>, Vec<usize>) {
        let n = n0 + n1;
        let x = Array2::from_shape_fn((n, 3), |(i, j)| {
            ((i * 7 + j * 3) % 11) as f64 + i as f64 * 0.01
        });
        let y = (0..n).map(|i| usize::from(i >= n0)).collect();
        (x, y)
    }

    #[test]
    fn balances_counts_and_keeps_originals() {
        let (x, y) = toy(108, 78);
        let r = smote_resample(
            x.view(),
            &y,
            &SmoteConfig {
                k_neighbors: 5,
                seed: 1,
            },
        )
        .unwrap();
        assert_eq!(r.y.iter().filter(|&&l| l == 0).count(), 108);
        assert_eq!(r.y.iter().filter(|&&l| l == 1).count(), 108);
        assert_eq!(r.x.slice(ndarray::s![..186, ..]), x);
        assert_eq!(r.n_synthetic(), 30);
    }

    #[test]
    fn synthetic_rows_lie_on_segments() {
        let (x, y) = toy(20, 9);
        let r = smote_resample(
            x.view(),
            &y,
            &SmoteConfig {
                k_neighbors: 3,
                seed: 4,
            },
        )
        .unwrap();
        for (i, o) in r.origins.iter().enumerate() {
            if let RowOrigin::Synthetic {
                base,
                neighbor,
                lambda,
            } = *o
            {
                assert!((0.0..=1.0).contains(&lambda));
                assert_eq!(y[base], 1);
                assert_eq!(y[neighbor], 1);
                for j in 0..x.ncols() {
                    let expect = x[[base, j]] + lambda * (x[[neighbor, j]] - x[[base, j]]);
                    assert_eq!(r.x[[i, j]], expect);
                }
            }
        }
    }

    #[test]
    fn balanced_input_is_unchanged_and_idempotent() {
        let (x, y) = toy(10, 10);
        let r = smote_resample(x.view(), &y, &SmoteConfig::default()).unwrap();
        assert_eq!(r.x, x);
        assert_eq!(r.n_synthetic(), 0);
        let (x, y) = toy(15, 8);
        let once = smote_resample(x.view(), &y, &SmoteConfig::default()).unwrap();
        let twice = smote_resample(once.x.view(), &once.y, &SmoteConfig::default()).unwrap();
        assert_eq!(twice.y.len(), once.y.len());
    }

    #[test]
    fn minority_must_exceed_k() {
        let (x, y) = toy(10, 5);
        assert!(matches!(
            smote_resample(
                x.view(),
                &y,
                &SmoteConfig {
                    k_neighbors: 5,
                    seed: 0
                }
            ),
            Err(TransformError::MinorityTooSmall { minority: 5, k: 5 })
        ));
    }

    #[test]
    fn neighbor_ties_prefer_lower_index() {
        let x = ndarray::array![[0.0], [1.0], [-1.0], [2.0]];
        let nn = nearest_neighbors(x.view(), &[0, 1, 2, 3], 2);
        assert_eq!(nn[0], vec![1, 2]);
    }

    #[test]
    fn seed_determinism() {
        let (x, y) = toy(30, 12);
        let a = smote_resample(
            x.view(),
            &y,
            &SmoteConfig {
                k_neighbors: 5,
                seed: 9,
            },
        )
        .unwrap();
        let b = smote_resample(
            x.view(),
            &y,
            &SmoteConfig {
                k_neighbors: 5,
                seed: 9,
            },
        )
        .unwrap();
        let c = smote_resample(
            x.view(),
            &y,
            &SmoteConfig {
                k_neighbors: 5,
                seed: 10,
            },
        )
        .unwrap();
        assert_eq!(a, b);
        assert_ne!(a.x, c.x);
        assert_eq!(a.y, c.y);
    }
}
