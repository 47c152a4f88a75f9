use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cv::{cross_validate, EvaluationReport, PreparedFolds};
use super::EvaluationError;
use crate::classifiers::{complexity_key, ClassifierSpec, HyperparameterGrid, Hyperparameters};

/// Mean accuracies closer than this count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub params: Hyperparameters,
    pub mean_accuracy: f64,
    pub accuracy_original_rows: f64,
    pub auc: f64,
    pub fold_accuracies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchResult {
    /// Every cell in grid order.
    pub leaderboard: Vec<LeaderboardEntry>,
    pub best_index: usize,
    pub best: EvaluationReport,
}

impl GridSearchResult {
    pub fn best_params(&self) -> &Hyperparameters {
        &self.leaderboard[self.best_index].params
    }
}

/// Ordering used to pick the winner: higher mean accuracy, then the simpler
/// model, then the parameter string.
pub fn compare_entries(a: &LeaderboardEntry, b: &LeaderboardEntry) -> Ordering {
    if (a.mean_accuracy - b.mean_accuracy).abs() > TIE_TOLERANCE {
        return b.mean_accuracy.total_cmp(&a.mean_accuracy);
    }
    let (ka, kb) = (complexity_key(&a.params), complexity_key(&b.params));
    for (x, y) in ka.iter().zip(&kb) {
        match x.total_cmp(y) {
            Ordering::Equal => {}
            other => return other,
        }
    }
    a.params.to_string().cmp(&b.params.to_string())
}

/// Cross-validates every cell of `grid` on the same folds.
pub fn grid_search(
    grid: &HyperparameterGrid,
    seed: u64,
    prepared: &PreparedFolds,
) -> Result<GridSearchResult, EvaluationError> {
    let cells = grid.cells();
    if cells.is_empty() {
        return Err(EvaluationError::Config("empty hyperparameter grid".into()));
    }
    let mut reports: Vec<EvaluationReport> = cells
        .into_par_iter()
        .map(|params| cross_validate(&ClassifierSpec::new(grid.family, params, seed), prepared))
        .collect::<Result<_, _>>()?;
    let leaderboard: Vec<LeaderboardEntry> = reports
        .iter()
        .map(|r| LeaderboardEntry {
            params: r.spec.as_ref().expect("single-model report").params.clone(),
            mean_accuracy: r.mean_accuracy,
            accuracy_original_rows: r.accuracy_original_rows,
            auc: r.roc.auc,
            fold_accuracies: r.fold_accuracies.clone(),
        })
        .collect();
    let best_index = (0..leaderboard.len())
        .min_by(|&a, &b| compare_entries(&leaderboard[a], &leaderboard[b]))
        .expect("non-empty");
    let best = reports.swap_remove(best_index);
    Ok(GridSearchResult {
        leaderboard,
        best_index,
        best,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::ParamValue;

    fn entry(acc: f64, params: &[(&str, ParamValue)]) -> LeaderboardEntry {
        LeaderboardEntry {
            params: params
                .iter()
                .map(|(k, v)| (k.to_string(), v.clone()))
                .collect(),
            mean_accuracy: acc,
            accuracy_original_rows: acc,
            auc: 0.5,
            fold_accuracies: vec![acc],
        }
    }

    #[test]
    fn ties_prefer_simpler_models() {
        let big = entry(0.8, &[("n_estimators", 200.into())]);
        let small = entry(0.8, &[("n_estimators", 50.into())]);
        let better = entry(0.81, &[("n_estimators", 200.into())]);
        assert_eq!(compare_entries(&small, &big), Ordering::Less);
        assert_eq!(compare_entries(&better, &small), Ordering::Less);
        let shallow = entry(0.7, &[("max_depth", 3.into())]);
        let unbounded = entry(0.7, &[("max_depth", ParamValue::none())]);
        assert_eq!(compare_entries(&shallow, &unbounded), Ordering::Less);
    }
}
