use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use super::DatasetError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Image,
    Tabular,
    Fused,
}

/// Dense, row-aligned feature matrix keyed by egg id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    egg_ids: Vec<String>,
    columns: Vec<String>,
    values: Array2<f64>,
    kind: FeatureKind,
}

impl FeatureMatrix {
    pub fn new(
        egg_ids: Vec<String>,
        columns: Vec<String>,
        values: Array2<f64>,
        kind: FeatureKind,
    ) -> Result<Self, DatasetError> {
        if values.nrows() != egg_ids.len() || values.ncols() != columns.len() {
            return Err(DatasetError::Shape {
                expected: (egg_ids.len(), columns.len()),
                found: values.dim(),
            });
        }
        let mut seen = HashSet::with_capacity(columns.len());
        for c in &columns {
            if !seen.insert(c.as_str()) {
                return Err(DatasetError::DuplicateColumn(c.clone()));
            }
        }
        let mut seen = HashSet::with_capacity(egg_ids.len());
        for (row, id) in egg_ids.iter().enumerate() {
            if !seen.insert(id.as_str()) {
                return Err(DatasetError::DuplicateId {
                    path: PathBuf::new(),
                    egg_id: id.clone(),
                    row: row + 1,
                });
            }
        }
        if let Some(((r, c), v)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(DatasetError::NonFinite {
                path: PathBuf::new(),
                row: r + 1,
                column: columns[c].clone(),
                value: v.to_string(),
            });
        }
        Ok(Self {
            egg_ids,
            columns,
            values,
            kind,
        })
    }

    pub fn egg_ids(&self) -> &[String] {
        &self.egg_ids
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.values.row(i)
    }

    pub fn position(&self, egg_id: &str) -> Option<usize> {
        self.egg_ids.iter().position(|id| id == egg_id)
    }

    /// Rows at `indices`, in that order.
    pub fn select_rows(&self, indices: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            egg_ids: indices.iter().map(|&i| self.egg_ids[i].clone()).collect(),
            columns: self.columns.clone(),
            values: self.values.select(Axis(0), indices),
            kind: self.kind,
        }
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    /// Writes `egg_id,<columns...>` CSV with shortest round-trip float formatting.
    pub fn write_csv(&self, path: &Path) -> Result<(), DatasetError> {
        let file = File::create(path).map_err(|e| DatasetError::io(path, e))?;
        let mut out = BufWriter::new(file);
        let io = |e| DatasetError::io(path, e);
        write!(out, "egg_id").map_err(io)?;
        for c in &self.columns {
            write!(out, ",{c}").map_err(io)?;
        }
        writeln!(out).map_err(io)?;
        for (id, row) in self.egg_ids.iter().zip(self.values.rows()) {
            write!(out, "{id}").map_err(io)?;
            for v in row {
                write!(out, ",{v}").map_err(io)?;
            }
            writeln!(out).map_err(io)?;
        }
        out.flush().map_err(io)
    }
}

/// Sidecar written next to a feature CSV as `<csv>.manifest.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureManifest {
    pub extractor: String,
    pub dimension: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<String>,
}

impl FeatureManifest {
    pub fn sidecar_path(csv: &Path) -> PathBuf {
        let mut name = csv.as_os_str().to_owned();
        name.push(".manifest.json");
        PathBuf::from(name)
    }

    pub fn load_for(csv: &Path) -> Result<Option<FeatureManifest>, DatasetError> {
        let path = Self::sidecar_path(csv);
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(&path).map_err(|e| DatasetError::io(&path, e))?;
        serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| DatasetError::Manifest {
                path,
                message: e.to_string(),
            })
    }

    pub fn save_for(&self, csv: &Path) -> Result<(), DatasetError> {
        let path = Self::sidecar_path(csv);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&path, text + "\n").map_err(|e| DatasetError::io(&path, e))
    }
}

/// Loads an image feature CSV (`egg_id,f0,...`).
///
/// If a sidecar manifest exists its declared dimension must match the column
/// count.
pub fn load_feature_matrix(path: &Path) -> Result<FeatureMatrix, DatasetError> {
    load_matrix(path, FeatureKind::Image)
}

pub(crate) fn load_matrix(path: &Path, kind: FeatureKind) -> Result<FeatureMatrix, DatasetError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| DatasetError::csv(path, e))?;
    let headers = reader
        .headers()
        .map_err(|e| DatasetError::csv(path, e))?
        .clone();
    if headers.get(0) != Some("egg_id") {
        return Err(DatasetError::MissingColumn {
            path: path.to_path_buf(),
            column: "egg_id".into(),
        });
    }
    let columns: Vec<String> = headers.iter().skip(1).map(str::to_owned).collect();
    let width = columns.len();
    let mut egg_ids = Vec::new();
    let mut flat = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths {
                expected_len, len, ..
            } => DatasetError::Ragged {
                path: path.to_path_buf(),
                row,
                expected: *expected_len as usize,
                found: *len as usize,
            },
            _ => DatasetError::csv(path, e),
        })?;
        egg_ids.push(record[0].to_owned());
        for (j, field) in record.iter().skip(1).enumerate() {
            let v: f64 = field.parse().map_err(|_| DatasetError::Parse {
                path: path.to_path_buf(),
                row,
                column: columns[j].clone(),
                value: field.to_owned(),
            })?;
            if !v.is_finite() {
                return Err(DatasetError::NonFinite {
                    path: path.to_path_buf(),
                    row,
                    column: columns[j].clone(),
                    value: field.to_owned(),
                });
            }
            flat.push(v);
        }
    }
    let values = Array2::from_shape_vec((egg_ids.len(), width), flat)
        .expect("record lengths are checked by the csv reader");
    let matrix =
        FeatureMatrix::new(egg_ids, columns, values, kind).map_err(|e| e.with_path(path))?;
    if let Some(manifest) = FeatureManifest::load_for(path)? {
        if manifest.dimension != matrix.ncols() {
            return Err(DatasetError::Dimension {
                path: path.to_path_buf(),
                expected: manifest.dimension,
                found: matrix.ncols(),
            });
        }
    }
    Ok(matrix)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn loads_single_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "f.csv", "egg_id,f0,f1,f2\ne1,0.5,1,2.25\n");
        let m = load_feature_matrix(&p).unwrap();
        assert_eq!(m.values().dim(), (1, 3));
        assert_eq!(m.kind(), FeatureKind::Image);
        assert_eq!(m.row(0)[2], 2.25);
    }

    #[test]
    fn rejects_ragged_and_non_finite() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "r.csv", "egg_id,f0,f1\ne1,1,2\ne2,3\n");
        assert!(matches!(
            load_feature_matrix(&p),
            Err(DatasetError::Ragged { row: 2, .. })
        ));
        let p = write(dir.path(), "n.csv", "egg_id,f0\ne1,NaN\n");
        assert!(matches!(
            load_feature_matrix(&p),
            Err(DatasetError::NonFinite { row: 1, .. })
        ));
        let p = write(dir.path(), "x.csv", "egg_id,f0\ne1,abc\n");
        assert!(matches!(
            load_feature_matrix(&p),
            Err(DatasetError::Parse { .. })
        ));
    }

    #[test]
    fn manifest_dimension_is_enforced() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "m.csv", "egg_id,f0,f1\ne1,1,2\n");
        FeatureManifest {
            extractor: "Toy".into(),
            dimension: 3,
            weights: None,
        }
        .save_for(&p)
        .unwrap();
        assert!(matches!(
            load_feature_matrix(&p),
            Err(DatasetError::Dimension {
                expected: 3,
                found: 2,
                ..
            })
        ));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let values = Array2::from_shape_vec((2, 2), vec![0.1, 1.0 / 3.0, -2.5e-7, 1e10]).unwrap();
        let m = FeatureMatrix::new(
            vec!["a".into(), "b".into()],
            vec!["f0".into(), "f1".into()],
            values,
            FeatureKind::Image,
        )
        .unwrap();
        let p = dir.path().join("rt.csv");
        m.write_csv(&p).unwrap();
        assert_eq!(load_feature_matrix(&p).unwrap(), m);
    }
}
