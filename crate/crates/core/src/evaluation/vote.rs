use ndarray::Array2;

use super::EvaluationError;

/// Per-row modal label over the members. A tied vote goes to the class with
/// the higher mean member probability, then to class 0.
///
/// `predictions[m][i]` is member `m`'s label for row `i`; `probabilities[m]`
/// is its `n × 2` probability matrix.
pub fn majority_vote(
    predictions: &[Vec<usize>],
    probabilities: &[Array2<f64>],
) -> Result<Vec<usize>, EvaluationError> {
    if predictions.len() < 2 {
        return Err(EvaluationError::Config(format!(
            "majority vote needs at least 2 members, got {}",
            predictions.len()
        )));
    }
    if probabilities.len() != predictions.len() {
        return Err(EvaluationError::Length {
            what: "member probability matrices",
            expected: predictions.len(),
            found: probabilities.len(),
        });
    }
    let n = predictions[0].len();
    for (p, q) in predictions.iter().zip(probabilities) {
        if p.len() != n {
            return Err(EvaluationError::Length {
                what: "member predictions",
                expected: n,
                found: p.len(),
            });
        }
        if q.dim() != (n, 2) {
            return Err(EvaluationError::Length {
                what: "member probability rows",
                expected: n,
                found: q.nrows(),
            });
        }
    }
    let m = predictions.len() as f64;
    Ok((0..n)
        .map(|i| {
            let ones = predictions.iter().filter(|p| p[i] == 1).count();
            let zeros = predictions.len() - ones;
            if ones != zeros {
                return usize::from(ones > zeros);
            }
            let mean1 = probabilities.iter().map(|q| q[[i, 1]]).sum::<f64>() / m;
            let mean0 = probabilities.iter().map(|q| q[[i, 0]]).sum::<f64>() / m;
            usize::from(mean1 > mean0)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn p(v: f64) -> Array2<f64> {
        array![[1.0 - v, v]]
    }

    #[test]
    fn strict_majority() {
        let preds = vec![vec![1], vec![1], vec![0]];
        let probs = vec![p(0.6), p(0.7), p(0.1)];
        assert_eq!(majority_vote(&preds, &probs).unwrap(), vec![1]);
    }

    #[test]
    fn tie_uses_mean_probability() {
        let preds = vec![vec![1], vec![0]];
        assert_eq!(majority_vote(&preds, &[p(0.9), p(0.3)]).unwrap(), vec![1]);
        assert_eq!(majority_vote(&preds, &[p(0.6), p(0.0)]).unwrap(), vec![0]);
        assert_eq!(majority_vote(&preds, &[p(0.5), p(0.5)]).unwrap(), vec![0]);
    }

    #[test]
    fn rejects_single_member_and_mismatch() {
        assert!(majority_vote(&[vec![1]], &[p(0.5)]).is_err());
        assert!(majority_vote(&[vec![1], vec![0, 1]], &[p(0.5), p(0.5)]).is_err());
    }
}
