use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::DatasetError;
use crate::domain::{DerivedMetrics, DomainError, EggMeasurement, Market};

pub const MEASUREMENT_SCHEMA_VERSION: u32 = 1;

/// Required header of a measurement CSV, in canonical order.
pub const MEASUREMENT_COLUMNS: [&str; 8] = [
    "egg_id",
    "market",
    "weight_g",
    "width_mm",
    "length_mm",
    "yolk_height_mm",
    "yolk_diameter_mm",
    "albumen_height_mm",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: PathBuf,
    pub schema_version: u32,
    /// Hex SHA-256 of the raw file bytes.
    pub sha256: String,
}

/// A row dropped at ingestion because it violates a measurement precondition.
#[derive(Debug, Clone, PartialEq)]
pub struct Exclusion {
    /// 1-based data row (header not counted).
    pub row: usize,
    pub egg_id: String,
    pub reason: DomainError,
}

/// Validated measurement rows together with their derived indices.
#[derive(Debug, Clone)]
pub struct MeasurementTable {
    rows: Vec<EggMeasurement>,
    derived: Vec<DerivedMetrics>,
    provenance: Provenance,
    exclusions: Vec<Exclusion>,
}

impl MeasurementTable {
    /// Builds a table from in-memory records, applying the same exclusion
    /// rules as [`load_measurements`].
    pub fn from_rows(
        records: Vec<EggMeasurement>,
        provenance: Provenance,
    ) -> Result<Self, DatasetError> {
        let mut seen = HashSet::new();
        let mut rows = Vec::new();
        let mut derived = Vec::new();
        let mut exclusions = Vec::new();
        for (i, egg) in records.into_iter().enumerate() {
            if !seen.insert(egg.egg_id.clone()) {
                return Err(DatasetError::DuplicateId {
                    path: provenance.source.clone(),
                    egg_id: egg.egg_id,
                    row: i + 1,
                });
            }
            match egg.derived() {
                Ok(d) => {
                    rows.push(egg);
                    derived.push(d);
                }
                Err(reason) => {
                    log::warn!("excluding egg `{}` (row {}): {reason}", egg.egg_id, i + 1);
                    exclusions.push(Exclusion {
                        row: i + 1,
                        egg_id: egg.egg_id,
                        reason,
                    });
                }
            }
        }
        Ok(Self {
            rows,
            derived,
            provenance,
            exclusions,
        })
    }

    pub fn rows(&self) -> &[EggMeasurement] {
        &self.rows
    }

    pub fn derived(&self) -> &[DerivedMetrics] {
        &self.derived
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn exclusions(&self) -> &[Exclusion] {
        &self.exclusions
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Index of `egg_id` among retained rows.
    pub fn position(&self, egg_id: &str) -> Option<usize> {
        self.rows.iter().position(|r| r.egg_id == egg_id)
    }

    pub fn was_excluded(&self, egg_id: &str) -> bool {
        self.exclusions.iter().any(|e| e.egg_id == egg_id)
    }
}

/// Reads a measurement CSV. Columns are matched by name; extra columns are
/// ignored. Rows that fail a measurement precondition (including a
/// non-positive Haugh unit log argument) are excluded and listed in
/// [`MeasurementTable::exclusions`].
pub fn load_measurements(path: &Path) -> Result<MeasurementTable, DatasetError> {
    let bytes = std::fs::read(path).map_err(|e| DatasetError::io(path, e))?;
    let sha256 = hex(&Sha256::digest(&bytes));
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    let headers = reader
        .headers()
        .map_err(|e| DatasetError::csv(path, e))?
        .clone();
    let mut index = [0usize; 8];
    for (slot, name) in index.iter_mut().zip(MEASUREMENT_COLUMNS) {
        *slot =
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| DatasetError::MissingColumn {
                    path: path.to_path_buf(),
                    column: name.to_owned(),
                })?;
    }

    let mut records = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| DatasetError::csv(path, e))?;
        let field = |k: usize| record.get(index[k]).unwrap_or("");
        let number = |k: usize| -> Result<f64, DatasetError> {
            field(k).parse::<f64>().map_err(|_| DatasetError::Parse {
                path: path.to_path_buf(),
                row,
                column: MEASUREMENT_COLUMNS[k].to_owned(),
                value: field(k).to_owned(),
            })
        };
        let market: Market = field(1).parse().map_err(|_| DatasetError::Parse {
            path: path.to_path_buf(),
            row,
            column: "market".into(),
            value: field(1).to_owned(),
        })?;
        records.push(EggMeasurement {
            egg_id: field(0).to_owned(),
            market,
            weight: number(2)?,
            width: number(3)?,
            length: number(4)?,
            yolk_height: number(5)?,
            yolk_diameter: number(6)?,
            albumen_height: number(7)?,
        });
    }
    if records.is_empty() {
        log::warn!("{}: no measurement rows", path.display());
    }
    let provenance = Provenance {
        source: path.to_path_buf(),
        schema_version: MEASUREMENT_SCHEMA_VERSION,
        sha256,
    };
    MeasurementTable::from_rows(records, provenance)
}

/// Writes records in the canonical measurement schema.
pub fn write_measurements(path: &Path, rows: &[EggMeasurement]) -> Result<(), DatasetError> {
    let file = File::create(path).map_err(|e| DatasetError::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| DatasetError::io(path, e);
    writeln!(out, "{}", MEASUREMENT_COLUMNS.join(",")).map_err(io)?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.egg_id,
            r.market,
            r.weight,
            r.width,
            r.length,
            r.yolk_height,
            r.yolk_diameter,
            r.albumen_height
        )
        .map_err(io)?;
    }
    out.flush().map_err(io)
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
