use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{DatasetError, FeatureKind, FeatureMatrix, MeasurementTable};
use crate::domain::{DerivedMetrics, DomainError, Freshness2, Grade2};

/// Binary prediction target. Class 1 is the positive class (High / Fresh).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Grade,
    Freshness,
}

impl Task {
    /// Names of class 0 and class 1.
    pub fn class_names(self) -> [&'static str; 2] {
        match self {
            Task::Grade => ["Low", "High"],
            Task::Freshness => ["Old", "Fresh"],
        }
    }

    /// Binary label (0 or 1) for one egg's derived indices.
    pub fn label(self, metrics: &DerivedMetrics) -> Result<usize, DomainError> {
        Ok(match self {
            Task::Grade => match metrics.grade()?.collapse() {
                Grade2::High => 1,
                Grade2::Low => 0,
            },
            Task::Freshness => match metrics.freshness()?.collapse() {
                Freshness2::Fresh => 1,
                Freshness2::Old => 0,
            },
        })
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Grade => "grade",
            Task::Freshness => "freshness",
        })
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "grade" => Ok(Task::Grade),
            "freshness" => Ok(Task::Freshness),
            other => Err(format!(
                "unknown task `{other}` (expected grade or freshness)"
            )),
        }
    }
}

/// Feature matrix with one binary label per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub features: FeatureMatrix,
    pub labels: Vec<usize>,
    pub task: Task,
}

impl LabeledDataset {
    pub fn new(
        features: FeatureMatrix,
        labels: Vec<usize>,
        task: Task,
    ) -> Result<Self, DatasetError> {
        if labels.len() != features.nrows() {
            return Err(DatasetError::Shape {
                expected: (features.nrows(), 1),
                found: (labels.len(), 1),
            });
        }
        let counts = class_counts(&labels);
        if labels.is_empty() {
            return Err(DatasetError::Empty { task });
        }
        if counts[0] == 0 || counts[1] == 0 {
            let present = task.class_names()[if counts[0] == 0 { 1 } else { 0 }];
            return Err(DatasetError::SingleClass {
                task,
                present: present.to_owned(),
            });
        }
        Ok(Self {
            features,
            labels,
            task,
        })
    }

    /// `[count of class 0, count of class 1]`
    pub fn class_counts(&self) -> [usize; 2] {
        class_counts(&self.labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// One-line summary, e.g. `186 rows, 78 High / 108 Low`.
    pub fn summary(&self) -> String {
        let [neg, pos] = self.class_counts();
        let [neg_name, pos_name] = self.task.class_names();
        format!("{} rows, {pos} {pos_name} / {neg} {neg_name}", self.len())
    }

    /// CSV with columns `egg_id,label,<features...>`.
    pub fn write_csv(&self, path: &Path) -> Result<(), DatasetError> {
        let file = File::create(path).map_err(|e| DatasetError::io(path, e))?;
        let mut out = BufWriter::new(file);
        let io = |e| DatasetError::io(path, e);
        write!(out, "egg_id,label").map_err(io)?;
        for c in self.features.columns() {
            write!(out, ",{c}").map_err(io)?;
        }
        writeln!(out).map_err(io)?;
        for (i, id) in self.features.egg_ids().iter().enumerate() {
            write!(out, "{id},{}", self.labels[i]).map_err(io)?;
            for v in self.features.row(i) {
                write!(out, ",{v}").map_err(io)?;
            }
            writeln!(out).map_err(io)?;
        }
        out.flush().map_err(io)
    }

    pub fn read_csv(path: &Path, task: Task, kind: FeatureKind) -> Result<Self, DatasetError> {
        let matrix = super::features::load_matrix(path, kind)?;
        let label_col = matrix
            .columns()
            .iter()
            .position(|c| c == "label")
            .ok_or_else(|| DatasetError::MissingColumn {
                path: path.to_path_buf(),
                column: "label".into(),
            })?;
        let mut labels = Vec::with_capacity(matrix.nrows());
        for (i, &v) in matrix.values().column(label_col).iter().enumerate() {
            if v != 0.0 && v != 1.0 {
                return Err(DatasetError::Parse {
                    path: path.to_path_buf(),
                    row: i + 1,
                    column: "label".into(),
                    value: v.to_string(),
                });
            }
            labels.push(v as usize);
        }
        let keep: Vec<usize> = (0..matrix.ncols()).filter(|&j| j != label_col).collect();
        let values: Array2<f64> = matrix.values().select(ndarray::Axis(1), &keep);
        let columns = keep.iter().map(|&j| matrix.columns()[j].clone()).collect();
        let features = FeatureMatrix::new(matrix.egg_ids().to_vec(), columns, values, kind)?;
        Self::new(features, labels, task)
    }
}

pub(crate) fn class_counts(labels: &[usize]) -> [usize; 2] {
    let mut counts = [0usize; 2];
    for &l in labels {
        counts[l.min(1)] += 1;
    }
    counts
}

/// Attaches task labels to `features`, taking HU (grade) or YI (freshness)
/// from the matching measurement row.
///
/// Feature rows whose egg was excluded at measurement ingestion are dropped
/// with a warning. Ids unknown to the table are an alignment error.
pub fn build_labeled_dataset(
    features: &FeatureMatrix,
    table: &MeasurementTable,
    task: Task,
) -> Result<LabeledDataset, DatasetError> {
    let mut keep = Vec::with_capacity(features.nrows());
    let mut labels = Vec::with_capacity(features.nrows());
    let mut missing = Vec::new();
    for (i, id) in features.egg_ids().iter().enumerate() {
        match table.position(id) {
            Some(pos) => match task.label(&table.derived()[pos]) {
                Ok(label) => {
                    keep.push(i);
                    labels.push(label);
                }
                Err(e) => log::warn!("dropping `{id}`: {e}"),
            },
            None if table.was_excluded(id) => {
                log::warn!("dropping `{id}`: excluded at measurement ingestion")
            }
            None => missing.push(id.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(DatasetError::Alignment { missing });
    }
    let features = if keep.len() == features.nrows() {
        features.clone()
    } else {
        features.select_rows(&keep)
    };
    LabeledDataset::new(features, labels, task)
}
