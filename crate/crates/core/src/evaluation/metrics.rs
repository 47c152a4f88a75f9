use serde::{Deserialize, Serialize};

use super::EvaluationError;

/// 2×2 confusion counts, `counts[true][predicted]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[usize; 2]; 2],
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> usize {
        self.counts[0][0] + self.counts[1][1]
    }

    pub fn accuracy(&self) -> f64 {
        self.trace() as f64 / self.total() as f64
    }

    /// Each row as percentages of its true-class count.
    pub fn row_percentages(&self) -> [[f64; 2]; 2] {
        let mut out = [[0.0; 2]; 2];
        for (t, row) in self.counts.iter().enumerate() {
            let n: usize = row.iter().sum();
            if n > 0 {
                for p in 0..2 {
                    out[t][p] = 100.0 * row[p] as f64 / n as f64;
                }
            }
        }
        out
    }
}

fn check_lengths(a: usize, b: usize) -> Result<(), EvaluationError> {
    if a != b {
        return Err(EvaluationError::Length {
            what: "predictions",
            expected: a,
            found: b,
        });
    }
    Ok(())
}

/// Confusion counts and accuracy `(TP + TN) / n`.
pub fn confusion_and_accuracy(
    labels: &[usize],
    predictions: &[usize],
) -> Result<(ConfusionMatrix, f64), EvaluationError> {
    check_lengths(labels.len(), predictions.len())?;
    let mut m = ConfusionMatrix::default();
    for (&t, &p) in labels.iter().zip(predictions) {
        if t > 1 || p > 1 {
            return Err(EvaluationError::Config(format!(
                "non-binary label {}",
                t.max(p)
            )));
        }
        m.counts[t][p] += 1;
    }
    if m.total() == 0 {
        return Err(EvaluationError::Config("no rows to score".into()));
    }
    let acc = m.accuracy();
    Ok((m, acc))
}

/// One operating point: rows scoring at least `threshold` are called
/// positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// `+∞` for the origin point; stored as `null` in JSON.
    #[serde(with = "inf_as_null")]
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// From `(0, 0)` at threshold `+∞` to `(1, 1)`.
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// ROC over every distinct score, AUC by the trapezoid rule. Tied scores
/// move the curve diagonally, so all-equal scores give AUC 0.5.
pub fn roc_auc(scores: &[f64], labels: &[usize]) -> Result<RocCurve, EvaluationError> {
    check_lengths(labels.len(), scores.len())?;
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(EvaluationError::UndefinedAuc);
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(EvaluationError::Config(format!("non-finite score {s}")));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let last = points.last().expect("starts non-empty");
        let (fpr, tpr) = (fp as f64 / neg as f64, tp as f64 / pos as f64);
        auc += (fpr - last.fpr) * (tpr + last.tpr) / 2.0;
        points.push(RocPoint {
            threshold: s,
            fpr,
            tpr,
        });
    }
    Ok(RocCurve { points, auc })
}

mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_and_flipped() {
        let y = [0, 1, 1, 0, 1];
        let (m, acc) = confusion_and_accuracy(&y, &y).unwrap();
        assert_eq!(m.counts, [[2, 0], [0, 3]]);
        assert_eq!(acc, 1.0);
        let flipped: Vec<usize> = y.iter().map(|l| 1 - l).collect();
        let (m, acc) = confusion_and_accuracy(&y, &flipped).unwrap();
        assert_eq!(m.counts, [[0, 2], [3, 0]]);
        assert_eq!(acc, 0.0);
        assert_eq!(m.row_percentages(), [[0.0, 100.0], [100.0, 0.0]]);
    }

    #[test]
    fn auc_extremes() {
        let y = [0, 0, 1, 1];
        assert_eq!(roc_auc(&[0.1, 0.2, 0.8, 0.9], &y).unwrap().auc, 1.0);
        assert_eq!(roc_auc(&[0.9, 0.8, 0.2, 0.1], &y).unwrap().auc, 0.0);
        let flat = roc_auc(&[0.5; 4], &y).unwrap();
        assert_eq!(flat.auc, 0.5);
        assert_eq!(flat.points.len(), 2);
        assert!(matches!(
            roc_auc(&[0.1, 0.2], &[1, 1]),
            Err(EvaluationError::UndefinedAuc)
        ));
    }

    #[test]
    fn curve_json_roundtrip() {
        let c = roc_auc(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]).unwrap();
        let back: RocCurve = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn auc_matches_pair_counting() {
        let scores = [0.3, 0.3, 0.7, 0.1, 0.9, 0.3, 0.5];
        let y = [0, 1, 1, 0, 1, 0, 0];
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for i in 0..7 {
            for j in 0..7 {
                if y[i] == 1 && y[j] == 0 {
                    pairs += 1.0;
                    wins += if scores[i] > scores[j] {
                        1.0
                    } else if scores[i] == scores[j] {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        let auc = roc_auc(&scores, &y).unwrap().auc;
        assert!((auc - wins / pairs).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn confusion_rows_sum_to_class_counts(y in proptest::collection::vec(0usize..2, 1..200), flip in any::<u64>()) {
            let p: Vec<usize> = y.iter().enumerate().map(|(i, &l)| if (flip >> (i % 64)) & 1 == 1 { 1 - l } else { l }).collect();
            let (m, acc) = confusion_and_accuracy(&y, &p).unwrap();
            prop_assert_eq!(m.total(), y.len());
            prop_assert_eq!(m.counts[1][0] + m.counts[1][1], y.iter().filter(|&&l| l == 1).count());
            prop_assert_eq!(acc, m.trace() as f64 / y.len() as f64);
        }
    }
}
