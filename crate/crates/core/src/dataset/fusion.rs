use std::fmt;
use std::str::FromStr;

use ndarray::{concatenate, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::{DatasetError, FeatureKind, FeatureMatrix, MeasurementTable};

/// Physical attribute appended to image features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TabularFeature {
    Weight,
    ShapeIndex,
}

impl TabularFeature {
    pub fn column_name(self) -> &'static str {
        match self {
            TabularFeature::Weight => "weight_g",
            TabularFeature::ShapeIndex => "shape_index",
        }
    }
}

impl fmt::Display for TabularFeature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TabularFeature::Weight => "weight",
            TabularFeature::ShapeIndex => "shape_index",
        })
    }
}

impl FromStr for TabularFeature {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "weight" | "weight_g" => Ok(TabularFeature::Weight),
            "shape_index" | "si" => Ok(TabularFeature::ShapeIndex),
            other => Err(DatasetError::TabularSpec(format!(
                "unknown tabular feature `{other}` (expected weight or shape_index)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FusionOptions {
    /// z-score the tabular columns before concatenation.
    #[serde(default)]
    pub standardize_tabular: bool,
}

fn check_spec(spec: &[TabularFeature]) -> Result<(), DatasetError> {
    for (i, f) in spec.iter().enumerate() {
        if spec[..i].contains(f) {
            return Err(DatasetError::TabularSpec(format!("`{f}` listed twice")));
        }
    }
    Ok(())
}

/// Tabular features for `egg_ids` (all retained rows when `None`).
pub fn tabular_matrix(
    table: &MeasurementTable,
    spec: &[TabularFeature],
    egg_ids: Option<&[String]>,
    options: FusionOptions,
) -> Result<FeatureMatrix, DatasetError> {
    check_spec(spec)?;
    let ids: Vec<String> = match egg_ids {
        Some(ids) => ids.to_vec(),
        None => table.rows().iter().map(|r| r.egg_id.clone()).collect(),
    };
    let mut missing = Vec::new();
    let mut values = Array2::<f64>::zeros((ids.len(), spec.len()));
    for (i, id) in ids.iter().enumerate() {
        let Some(pos) = table.position(id) else {
            missing.push(id.clone());
            continue;
        };
        for (j, f) in spec.iter().enumerate() {
            values[[i, j]] = match f {
                TabularFeature::Weight => table.rows()[pos].weight,
                TabularFeature::ShapeIndex => table.derived()[pos].shape_index,
            };
        }
    }
    if !missing.is_empty() {
        return Err(DatasetError::Alignment { missing });
    }
    if options.standardize_tabular {
        standardize_columns(&mut values);
    }
    let columns = spec.iter().map(|f| f.column_name().to_owned()).collect();
    FeatureMatrix::new(ids, columns, values, FeatureKind::Tabular)
}

fn standardize_columns(values: &mut Array2<f64>) {
    let n = values.nrows();
    if n < 2 {
        return;
    }
    for mut col in values.columns_mut() {
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let sd = var.sqrt();
        col.mapv_inplace(|v| if sd > 0.0 { (v - mean) / sd } else { 0.0 });
    }
}

/// Row-wise concatenation `[image ‖ tabular]` in the image matrix's row order.
///
/// An empty `spec` returns the image matrix unchanged.
pub fn fuse(
    image: &FeatureMatrix,
    table: &MeasurementTable,
    spec: &[TabularFeature],
    options: FusionOptions,
) -> Result<FeatureMatrix, DatasetError> {
    if spec.is_empty() {
        check_spec(spec)?;
        return Ok(image.clone());
    }
    let tab = tabular_matrix(table, spec, Some(image.egg_ids()), options)?;
    let values = concatenate(Axis(1), &[image.values().view(), tab.values().view()])
        .expect("row counts agree");
    let mut columns = image.columns().to_vec();
    columns.extend(tab.columns().iter().cloned());
    FeatureMatrix::new(
        image.egg_ids().to_vec(),
        columns,
        values,
        FeatureKind::Fused,
    )
}
