//! Single-file container for a fitted pipeline.
//!
//! Layout (integers little-endian):
//!
//! ```text
//! b"EGGQBNDL" | u32 schema version | u32 header length | header JSON
//! | for each section: u64 length, bytes | SHA-256 of everything before it
//! ```
//!
//! The PCA section stores raw `f64` values; each model section is JSON with
//! round-trip float formatting.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::Task;
use crate::classifiers::{ClassifierError, ClassifierModel};
use crate::transforms::{PcaModel, TransformError};

pub const BUNDLE_SCHEMA_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"EGGQBNDL";

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("not a model bundle (bad magic bytes)")]
    Magic,
    #[error("bundle schema version {found} needs migration to version {expected}")]
    Version { found: u32, expected: u32 },
    #[error("malformed bundle: {0}")]
    Parse(String),
    #[error("bundle checksum mismatch (file is truncated or corrupted)")]
    Checksum,
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
}

/// A fitted pipeline: optional PCA followed by one or more classifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    /// Configuration that produced the bundle (mode, seeds, grids).
    pub pipeline_config: serde_json::Value,
    pub task: Task,
    /// Names of class 0 and class 1.
    pub label_mapping: [String; 2],
    /// Input columns expected before PCA.
    pub feature_columns: Vec<String>,
    pub pca: Option<PcaModel>,
    pub models: Vec<ClassifierModel>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config_digest: String,
    pipeline_config: serde_json::Value,
    task: Task,
    label_mapping: [String; 2],
    feature_columns: Vec<String>,
    sections: Vec<String>,
}

impl ModelBundle {
    /// SHA-256 of the compact JSON form of the pipeline config.
    pub fn config_digest(&self) -> String {
        digest_json(&self.pipeline_config)
    }

    /// Class probabilities of every model for raw (pre-PCA) rows.
    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Vec<Array2<f64>>, BundleError> {
        let projected;
        let input = match &self.pca {
            Some(p) => {
                projected = p.project(x)?;
                projected.view()
            }
            None => x,
        };
        self.models
            .iter()
            .map(|m| m.predict_proba(input).map_err(BundleError::from))
            .collect()
    }
}

pub fn digest_json(v: &serde_json::Value) -> String {
    let bytes = serde_json::to_vec(v).expect("JSON values serialize");
    super::measurements::hex(&Sha256::digest(&bytes))
}

fn pca_bytes(p: &PcaModel) -> Vec<u8> {
    let mut out = Vec::new();
    let mut put = |v: f64| out.extend_from_slice(&v.to_le_bytes());
    let (k, d) = p.components.dim();
    put(d as f64);
    put(k as f64);
    put(if p.scale.is_some() { 1.0 } else { 0.0 });
    put(p.total_variance);
    put(p.retained_ratio);
    put(p.variance_target);
    p.mean.iter().for_each(|&v| put(v));
    if let Some(s) = &p.scale {
        s.iter().for_each(|&v| put(v));
    }
    p.explained_variance.iter().for_each(|&v| put(v));
    p.components.iter().for_each(|&v| put(v));
    out
}

fn pca_from_bytes(b: &[u8]) -> Result<PcaModel, BundleError> {
    if !b.len().is_multiple_of(8) {
        return Err(BundleError::Parse(
            "PCA section length is not a multiple of 8".into(),
        ));
    }
    let vals: Vec<f64> = b
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    if vals.len() < 6 {
        return Err(BundleError::Parse("PCA section too short".into()));
    }
    let (d, k, scaled) = (vals[0] as usize, vals[1] as usize, vals[2] != 0.0);
    let expected = 6 + d + if scaled { d } else { 0 } + k + k * d;
    if vals.len() != expected {
        return Err(BundleError::Parse(format!(
            "PCA section holds {} values, expected {expected}",
            vals.len()
        )));
    }
    let mut at = 6;
    let mut take = |n: usize| {
        let s = vals[at..at + n].to_vec();
        at += n;
        s
    };
    let mean = Array1::from(take(d));
    let scale = scaled.then(|| Array1::from(take(d)));
    let explained_variance = take(k);
    let components = Array2::from_shape_vec((k, d), take(k * d)).expect("length checked");
    Ok(PcaModel {
        mean,
        scale,
        components,
        explained_variance,
        total_variance: vals[3],
        retained_ratio: vals[4],
        variance_target: vals[5],
    })
}

/// Serializes `bundle` to bytes.
pub fn bundle_bytes(bundle: &ModelBundle) -> Result<Vec<u8>, BundleError> {
    let mut sections: Vec<(String, Vec<u8>)> = Vec::new();
    if let Some(p) = &bundle.pca {
        sections.push(("pca".into(), pca_bytes(p)));
    }
    for (i, m) in bundle.models.iter().enumerate() {
        let json = serde_json::to_vec(m).map_err(|e| BundleError::Parse(e.to_string()))?;
        sections.push((format!("model.{i}"), json));
    }
    let header = Header {
        config_digest: bundle.config_digest(),
        pipeline_config: bundle.pipeline_config.clone(),
        task: bundle.task,
        label_mapping: bundle.label_mapping.clone(),
        feature_columns: bundle.feature_columns.clone(),
        sections: sections.iter().map(|(n, _)| n.clone()).collect(),
    };
    let header = serde_json::to_vec(&header).map_err(|e| BundleError::Parse(e.to_string()))?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&BUNDLE_SCHEMA_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for (_, bytes) in &sections {
        out.extend_from_slice(&(bytes.len() as u64).to_le_bytes());
        out.extend_from_slice(bytes);
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    Ok(out)
}

/// Parses bytes written by [`bundle_bytes`].
pub fn bundle_from_bytes(bytes: &[u8]) -> Result<ModelBundle, BundleError> {
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(BundleError::Magic);
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != BUNDLE_SCHEMA_VERSION {
        return Err(BundleError::Version {
            found: version,
            expected: BUNDLE_SCHEMA_VERSION,
        });
    }
    if bytes.len() < 16 + 32 {
        return Err(BundleError::Checksum);
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(BundleError::Checksum);
    }
    let header_len = u32::from_le_bytes(body[12..16].try_into().expect("4 bytes")) as usize;
    let header_end = 16usize
        .checked_add(header_len)
        .filter(|&e| e <= body.len())
        .ok_or_else(|| BundleError::Parse("header length exceeds file".into()))?;
    let header: Header = serde_json::from_slice(&body[16..header_end])
        .map_err(|e| BundleError::Parse(e.to_string()))?;
    if header.config_digest != digest_json(&header.pipeline_config) {
        return Err(BundleError::Parse(
            "config digest does not match the stored config".into(),
        ));
    }
    let mut at = header_end;
    let mut pca = None;
    let mut models = Vec::new();
    for name in &header.sections {
        let len_end = at + 8;
        if len_end > body.len() {
            return Err(BundleError::Parse(format!("section `{name}` is missing")));
        }
        let len = u64::from_le_bytes(body[at..len_end].try_into().expect("8 bytes")) as usize;
        let end = len_end
            .checked_add(len)
            .filter(|&e| e <= body.len())
            .ok_or_else(|| BundleError::Parse(format!("section `{name}` overruns the file")))?;
        let data = &body[len_end..end];
        if name == "pca" {
            pca = Some(pca_from_bytes(data)?);
        } else if name.starts_with("model.") {
            models.push(
                serde_json::from_slice(data)
                    .map_err(|e| BundleError::Parse(format!("{name}: {e}")))?,
            );
        } else {
            return Err(BundleError::Parse(format!("unknown section `{name}`")));
        }
        at = end;
    }
    if at != body.len() {
        return Err(BundleError::Parse(
            "trailing bytes after last section".into(),
        ));
    }
    Ok(ModelBundle {
        pipeline_config: header.pipeline_config,
        task: header.task,
        label_mapping: header.label_mapping,
        feature_columns: header.feature_columns,
        pca,
        models,
    })
}

/// Writes the bundle via a temporary file and rename, so readers never see
/// a partial file.
pub fn save_bundle(bundle: &ModelBundle, path: &Path) -> Result<(), BundleError> {
    let bytes = bundle_bytes(bundle)?;
    let io = |source| BundleError::Io {
        path: path.display().to_string(),
        source,
    };
    let tmp = path.with_extension("partial");
    fs::write(&tmp, &bytes).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

pub fn load_bundle(path: &Path) -> Result<ModelBundle, BundleError> {
    let bytes = fs::read(path).map_err(|source| BundleError::Io {
        path: path.display().to_string(),
        source,
    })?;
    bundle_from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::{best_preset, train, ClassifierSpec, Family};
    use crate::transforms::{fit_pca, PcaConfig};

    fn sample() -> (ModelBundle, Array2<f64>) {
        let x = Array2::from_shape_fn((60, 6), |(i, j)| {
            ((i * 31 + j * 17) % 13) as f64 / 3.0 + (i % 4) as f64 * j as f64
        });
        let y: Vec<usize> = (0..60)
            .map(|i| usize::from(x[[i, 0]] + x[[i, 3]] > 6.0))
            .collect();
        let pca = fit_pca(x.view(), &PcaConfig::default()).unwrap();
        let z = pca.project(x.view()).unwrap();
        let models = [Family::Svc, Family::XGBoostStyle, Family::Mlp]
            .iter()
            .map(|&f| train(&ClassifierSpec::new(f, best_preset(f), 1), z.view(), &y).unwrap())
            .collect();
        let bundle = ModelBundle {
            pipeline_config: serde_json::json!({"mode": "paper", "seed": 1}),
            task: Task::Grade,
            label_mapping: ["Low".into(), "High".into()],
            feature_columns: (0..6).map(|j| format!("f{j}")).collect(),
            pca: Some(pca),
            models,
        };
        let probe =
            Array2::from_shape_fn((25, 6), |(i, j)| (i as f64 * 0.37 + j as f64).sin() * 4.0);
        (bundle, probe)
    }

    #[test]
    fn round_trip_preserves_predictions_and_bytes() {
        let (b, probe) = sample();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.eggq");
        save_bundle(&b, &p).unwrap();
        let back = load_bundle(&p).unwrap();
        assert_eq!(back, b);
        assert_eq!(
            back.predict_proba(probe.view()).unwrap(),
            b.predict_proba(probe.view()).unwrap()
        );
        assert_eq!(bundle_bytes(&back).unwrap(), fs::read(&p).unwrap());
    }

    #[test]
    fn truncation_is_detected() {
        let (b, _) = sample();
        let bytes = bundle_bytes(&b).unwrap();
        for cut in [bytes.len() - 1, bytes.len() / 2, 20] {
            assert!(matches!(
                bundle_from_bytes(&bytes[..cut]),
                Err(BundleError::Checksum)
            ));
        }
        assert!(matches!(
            bundle_from_bytes(&bytes[..5]),
            Err(BundleError::Magic)
        ));
    }

    #[test]
    fn old_version_needs_migration() {
        let (b, _) = sample();
        let mut bytes = bundle_bytes(&b).unwrap();
        bytes[8..12].copy_from_slice(&0u32.to_le_bytes());
        assert!(matches!(
            bundle_from_bytes(&bytes),
            Err(BundleError::Version {
                found: 0,
                expected: 1
            })
        ));
    }

    #[test]
    fn flipped_byte_is_detected() {
        let (b, _) = sample();
        let mut bytes = bundle_bytes(&b).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        assert!(matches!(
            bundle_from_bytes(&bytes),
            Err(BundleError::Checksum)
        ));
    }
}
