use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::EvaluationError;
use crate::rng::{derive_seed, splitmix64, stream_rng};

/// Assignment of every row to one test fold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub stratified: bool,
    /// Fold index per row.
    pub assignments: Vec<usize>,
}

fn check_k(n: usize, k: usize) -> Result<(), EvaluationError> {
    if k < 2 {
        return Err(EvaluationError::Config(format!(
            "fold count must be at least 2, got {k}"
        )));
    }
    if k > n {
        return Err(EvaluationError::Config(format!(
            "fold count {k} exceeds row count {n}"
        )));
    }
    Ok(())
}

/// Deals `order` round-robin into folds, continuing from `offset`.
fn deal(order: &[usize], k: usize, offset: &mut usize, assignments: &mut [usize]) {
    for &row in order {
        assignments[row] = *offset % k;
        *offset += 1;
    }
}

impl FoldPlan {
    /// Stratified folds. Each class is shuffled and dealt round-robin, with
    /// the deal continuing across classes so fold sizes differ by at most
    /// one. Every class needs at least `k` rows unless `k` equals the row
    /// count (leave-one-out).
    pub fn stratified(labels: &[usize], k: usize, seed: u64) -> Result<Self, EvaluationError> {
        Self::stratified_impl(labels, k, seed, |rows, class| {
            let mut rng = stream_rng(seed, class as u64);
            rows.shuffle(&mut rng);
        })
    }

    /// Stratified folds where the within-class order comes from hashing
    /// each row's key, so the plan follows the rows under any reordering.
    pub fn stratified_by_key(
        labels: &[usize],
        keys: &[String],
        k: usize,
        seed: u64,
    ) -> Result<Self, EvaluationError> {
        if keys.len() != labels.len() {
            return Err(EvaluationError::Length {
                what: "fold keys",
                expected: labels.len(),
                found: keys.len(),
            });
        }
        Self::stratified_impl(labels, k, seed, |rows, _| {
            rows.sort_by_cached_key(|&r| (key_hash(&keys[r], seed), keys[r].clone()));
        })
    }

    fn stratified_impl(
        labels: &[usize],
        k: usize,
        seed: u64,
        mut order: impl FnMut(&mut Vec<usize>, usize),
    ) -> Result<Self, EvaluationError> {
        let n = labels.len();
        check_k(n, k)?;
        let n_classes = labels.iter().max().map_or(0, |&m| m + 1);
        let mut assignments = vec![0; n];
        let mut offset = 0;
        for class in 0..n_classes {
            let mut rows: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
            if rows.is_empty() {
                continue;
            }
            if rows.len() < k && k != n {
                return Err(EvaluationError::Config(format!(
                    "class {class} has {} rows, fewer than the {k} folds",
                    rows.len()
                )));
            }
            order(&mut rows, class);
            deal(&rows, k, &mut offset, &mut assignments);
        }
        Ok(Self {
            k,
            seed,
            stratified: true,
            assignments,
        })
    }

    /// Unstratified folds over a shuffled row order.
    pub fn plain(n: usize, k: usize, seed: u64) -> Result<Self, EvaluationError> {
        check_k(n, k)?;
        let mut rows: Vec<usize> = (0..n).collect();
        rows.shuffle(&mut stream_rng(seed, 0));
        let mut assignments = vec![0; n];
        deal(&rows, k, &mut 0, &mut assignments);
        Ok(Self {
            k,
            seed,
            stratified: false,
            assignments,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.assignments.len()
    }

    pub fn test_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.n_rows())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    pub fn train_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.n_rows())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        self.assignments.iter().for_each(|&f| sizes[f] += 1);
        sizes
    }
}

fn key_hash(key: &str, seed: u64) -> u64 {
    key.bytes()
        .fold(derive_seed(seed, &[0x6b65_7973]), |acc, b| {
            splitmix64(acc ^ b as u64)
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(n0: usize, n1: usize) -> Vec<usize> {
        let mut v = vec![0; n0];
        v.extend(vec![1; n1]);
        v
    }

    #[test]
    fn balanced_216_into_10() {
        let y = labels(108, 108);
        let plan = FoldPlan::stratified(&y, 10, 0).unwrap();
        for f in 0..10 {
            let rows = plan.test_rows(f);
            assert!(rows.len() == 21 || rows.len() == 22);
            let pos = rows.iter().filter(|&&r| y[r] == 1).count();
            assert!((10..=11).contains(&pos));
            assert!((10..=11).contains(&(rows.len() - pos)));
        }
    }

    #[test]
    fn leave_one_out_and_errors() {
        let y = labels(3, 2);
        let plan = FoldPlan::stratified(&y, 5, 1).unwrap();
        assert_eq!(plan.fold_sizes(), vec![1; 5]);
        assert!(FoldPlan::stratified(&y, 3, 1).is_err());
        assert!(FoldPlan::stratified(&y, 1, 1).is_err());
        assert!(FoldPlan::plain(5, 6, 1).is_err());
    }

    #[test]
    fn keyed_plan_follows_rows() {
        let y = labels(30, 20);
        let keys: Vec<String> = (0..50).map(|i| format!("egg{i}")).collect();
        let a = FoldPlan::stratified_by_key(&y, &keys, 5, 9).unwrap();
        let perm: Vec<usize> = (0..50).rev().collect();
        let yp: Vec<usize> = perm.iter().map(|&i| y[i]).collect();
        let kp: Vec<String> = perm.iter().map(|&i| keys[i].clone()).collect();
        let b = FoldPlan::stratified_by_key(&yp, &kp, 5, 9).unwrap();
        for (j, &i) in perm.iter().enumerate() {
            assert_eq!(b.assignments[j], a.assignments[i]);
        }
    }

    proptest! {
        #[test]
        fn coverage_and_stratification(n0 in 10usize..120, n1 in 10usize..120, k in 2usize..11, seed in any::<u64>(), keyed in any::<bool>()) {
            let y = labels(n0, n1);
            let plan = if keyed {
                let keys: Vec<String> = (0..y.len()).map(|i| i.to_string()).collect();
                FoldPlan::stratified_by_key(&y, &keys, k, seed).unwrap()
            } else {
                FoldPlan::stratified(&y, k, seed).unwrap()
            };
            let mut seen = vec![0; y.len()];
            for f in 0..k {
                let rows = plan.test_rows(f);
                for &r in &rows {
                    seen[r] += 1;
                }
                for (class, count) in [(0, n0), (1, n1)] {
                    let c = rows.iter().filter(|&&r| y[r] == class).count() as f64;
                    prop_assert!((c - count as f64 / k as f64).abs() < 1.0 + 1e-9);
                }
            }
            prop_assert!(seen.iter().all(|&s| s == 1));
            let sizes = plan.fold_sizes();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            prop_assert_eq!(plan, if keyed {
                let keys: Vec<String> = (0..y.len()).map(|i| i.to_string()).collect();
                FoldPlan::stratified_by_key(&y, &keys, k, seed).unwrap()
            } else {
                FoldPlan::stratified(&y, k, seed).unwrap()
            });
        }
    }
}
