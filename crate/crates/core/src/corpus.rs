//! Corpus directories (measurements plus per-extractor feature files) and a
//! seeded synthetic corpus with the published dataset's class structure.
//!
//! Layout of a corpus directory:
//!
//! ```text
//! measurements.csv
//! features/<Extractor>.csv
//! features/<Extractor>.csv.manifest.json
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{
    load_feature_matrix, load_measurements, write_measurements, DatasetError, FeatureKind,
    FeatureManifest, FeatureMatrix, MeasurementTable,
};
use crate::domain::{EggMeasurement, Market};
use crate::rng::{derive_seed, stream_rng};

/// Overrides the synthetic corpus with a real one when set.
pub const PUBLISHED_DIR_ENV: &str = "EGGQ_PUBLISHED_DIR";

pub const MEASUREMENTS_FILE: &str = "measurements.csv";
pub const FEATURES_DIR: &str = "features";

/// Image extractor used by the synthetic corpus: name, width, and how noisy
/// its view of the grade and freshness signals is.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticExtractor {
    pub name: String,
    pub dimension: usize,
    pub grade_noise: f64,
    pub freshness_noise: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub extractors: Vec<SyntheticExtractor>,
    /// Shared nuisance factors (lighting, shell colour, pose).
    pub nuisance_factors: usize,
    /// Factor `k` has scale `1 / (1 + k / nuisance_decay)`.
    pub nuisance_decay: f64,
    /// Per-column isotropic noise.
    pub pixel_noise: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let ex = |name: &str, dimension, grade_noise, freshness_noise| SyntheticExtractor {
            name: name.into(),
            dimension,
            grade_noise,
            freshness_noise,
        };
        Self {
            seed: 20_240_601,
            extractors: vec![
                ex("ResNet152", 2048, 1.1, 1.9),
                ex("DenseNet169", 1664, 1.25, 2.1),
                ex("ResNet152V2", 2048, 1.4, 2.3),
            ],
            nuisance_factors: 112,
            nuisance_decay: 20.0,
            pixel_noise: 0.04,
        }
    }
}

/// Per-market `(high, low)` grade counts.
pub const MARKET_GRADE_COUNTS: [(Market, usize, usize); 4] = [
    (Market::GS, 17, 28),
    (Market::OS, 27, 26),
    (Market::SS, 11, 33),
    (Market::WM, 23, 21),
];

/// Low-grade eggs that are still fresh. Every high-grade egg is fresh.
pub const LOW_AND_FRESH: usize = 12;

#[derive(Debug, Clone)]
pub struct Corpus {
    pub table: MeasurementTable,
    /// `(extractor, image features)` in a fixed order.
    pub features: Vec<(String, FeatureMatrix)>,
}

impl Corpus {
    pub fn extractor(&self, name: &str) -> Option<&FeatureMatrix> {
        self.features
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, m)| m)
    }
}

fn normal(mean: f64, sd: f64) -> Normal<f64> {
    Normal::new(mean, sd).expect("positive sd")
}

fn round_to(v: f64, digits: i32) -> f64 {
    let s = 10f64.powi(digits);
    (v * s).round() / s
}

fn zscore(v: &[f64]) -> Vec<f64> {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    v.iter().map(|x| (x - mean) / sd).collect()
}

/// Measurement rows: 186 eggs, 78 high grade, 90 fresh.
pub fn synthesize_measurements(seed: u64) -> Vec<EggMeasurement> {
    let mut rng = stream_rng(seed, 0);
    // (market, high, fresh)
    let mut eggs: Vec<(Market, bool, bool)> = Vec::new();
    for (market, high, low) in MARKET_GRADE_COUNTS {
        eggs.extend(std::iter::repeat_n((market, true, true), high));
        eggs.extend(std::iter::repeat_n((market, false, false), low));
    }
    let mut low: Vec<usize> = (0..eggs.len()).filter(|&i| !eggs[i].1).collect();
    low.shuffle(&mut rng);
    for &i in &low[..LOW_AND_FRESH] {
        eggs[i].2 = true;
    }
    eggs.shuffle(&mut rng);

    let weight = [normal(60.13, 4.69), normal(58.92, 4.57)];
    let shape = [normal(78.84, 3.82), normal(77.47, 3.15)];
    let length = normal(57.5, 2.0);
    let diameter = normal(40.5, 1.8);
    eggs.iter()
        .enumerate()
        .map(|(i, &(market, high, fresh))| {
            let g = usize::from(!high);
            let w = round_to(weight[g].sample(&mut rng).clamp(45.0, 75.0), 2);
            let si = shape[g].sample(&mut rng).clamp(68.0, 90.0);
            let l = round_to(length.sample(&mut rng), 2);
            let hu = if high {
                rng.gen_range(61.5..92.0)
            } else {
                rng.gen_range(28.0..58.5)
            };
            let yi = if fresh {
                rng.gen_range(35.5..47.0)
            } else {
                rng.gen_range(26.0..33.5)
            };
            let d = round_to(diameter.sample(&mut rng), 2);
            let h = 10f64.powf(hu / 100.0) - 7.6 + 1.7 * w.powf(0.37);
            EggMeasurement {
                egg_id: format!("EGG-{:03}", i + 1),
                market,
                weight: w,
                width: round_to(si * l / 100.0, 2),
                length: l,
                yolk_height: round_to(yi * d / 100.0, 2),
                yolk_diameter: d,
                albumen_height: round_to(h, 2),
            }
        })
        .collect()
}

/// Image features driven by latent grade, freshness and nuisance factors.
pub fn synthesize_features(
    rows: &[EggMeasurement],
    extractor: &SyntheticExtractor,
    config: &SynthConfig,
    index: u64,
) -> FeatureMatrix {
    let derived: Vec<_> = rows
        .iter()
        .map(|r| r.derived().expect("synthetic rows are valid"))
        .collect();
    let grade = zscore(&derived.iter().map(|m| m.haugh_unit).collect::<Vec<_>>());
    let fresh = zscore(&derived.iter().map(|m| m.yolk_index).collect::<Vec<_>>());
    let weight = zscore(&rows.iter().map(|r| r.weight).collect::<Vec<_>>());

    // Nuisance factors are shared across extractors: the same photo.
    let std = normal(0.0, 1.0);
    let mut shared = stream_rng(config.seed, 1);
    let r = config.nuisance_factors;
    let nuisance = Array2::from_shape_simple_fn((rows.len(), r), || std.sample(&mut shared));

    let mut rng = stream_rng(derive_seed(config.seed, &[index]), 2);
    let n_latent = 3 + r;
    let latent = Array2::from_shape_fn((rows.len(), n_latent), |(i, j)| match j {
        0 => grade[i] + extractor.grade_noise * std.sample(&mut rng),
        1 => fresh[i] + extractor.freshness_noise * std.sample(&mut rng),
        2 => 0.5 * weight[i],
        _ => {
            let k = (j - 3) as f64;
            nuisance[[i, j - 3]] / (1.0 + k / config.nuisance_decay)
        }
    });
    let d = extractor.dimension;
    let loadings = Array2::from_shape_simple_fn((n_latent, d), || 0.1 * std.sample(&mut rng));
    let mut values = latent.dot(&loadings);
    let noise = normal(0.0, config.pixel_noise);
    values.mapv_inplace(|v| round_to((0.5 + v + noise.sample(&mut rng)).max(0.0), 4));

    let ids = rows.iter().map(|r| r.egg_id.clone()).collect();
    let columns = (0..d).map(|j| format!("f{j:04}")).collect();
    FeatureMatrix::new(ids, columns, values, FeatureKind::Image).expect("consistent shape")
}

/// Synthetic measurements and one feature matrix per configured extractor.
pub fn synthesize(config: &SynthConfig) -> Result<Corpus, DatasetError> {
    let rows = synthesize_measurements(config.seed);
    let features = config
        .extractors
        .iter()
        .enumerate()
        .map(|(i, e)| {
            (
                e.name.clone(),
                synthesize_features(&rows, e, config, i as u64),
            )
        })
        .collect();
    let table = MeasurementTable::from_rows(rows, in_memory_provenance(config.seed))?;
    Ok(Corpus { table, features })
}

fn in_memory_provenance(seed: u64) -> crate::dataset::Provenance {
    crate::dataset::Provenance {
        source: PathBuf::from(format!("synthetic:{seed}")),
        schema_version: crate::dataset::MEASUREMENT_SCHEMA_VERSION,
        sha256: String::new(),
    }
}

/// Writes a synthetic corpus into `dir` and returns the written paths.
pub fn write_synthetic(dir: &Path, config: &SynthConfig) -> Result<Vec<PathBuf>, DatasetError> {
    let rows = synthesize_measurements(config.seed);
    let feat_dir = dir.join(FEATURES_DIR);
    fs::create_dir_all(&feat_dir).map_err(|e| DatasetError::io(&feat_dir, e))?;
    let m = dir.join(MEASUREMENTS_FILE);
    write_measurements(&m, &rows)?;
    let mut written = vec![m];
    for (i, e) in config.extractors.iter().enumerate() {
        let path = feat_dir.join(format!("{}.csv", e.name));
        synthesize_features(&rows, e, config, i as u64).write_csv(&path)?;
        FeatureManifest {
            extractor: e.name.clone(),
            dimension: e.dimension,
            weights: Some("synthetic".into()),
        }
        .save_for(&path)?;
        written.push(FeatureManifest::sidecar_path(&path));
        written.push(path);
    }
    Ok(written)
}

/// Loads `measurements.csv` and every `features/*.csv` in name order.
pub fn load_corpus(dir: &Path) -> Result<Corpus, DatasetError> {
    let table = load_measurements(&dir.join(MEASUREMENTS_FILE))?;
    let feat_dir = dir.join(FEATURES_DIR);
    let mut paths: Vec<PathBuf> = fs::read_dir(&feat_dir)
        .map_err(|e| DatasetError::io(&feat_dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    let features = paths
        .iter()
        .map(|p| {
            let name = match FeatureManifest::load_for(p)? {
                Some(m) => m.extractor,
                None => p
                    .file_stem()
                    .expect("csv file")
                    .to_string_lossy()
                    .into_owned(),
            };
            Ok((name, load_feature_matrix(p)?))
        })
        .collect::<Result<_, DatasetError>>()?;
    Ok(Corpus { table, features })
}

/// The corpus named by [`PUBLISHED_DIR_ENV`] if set, else the default
/// synthetic corpus.
pub fn resolve_corpus() -> Result<Corpus, DatasetError> {
    match std::env::var_os(PUBLISHED_DIR_ENV) {
        Some(dir) => load_corpus(Path::new(&dir)),
        None => synthesize(&SynthConfig::default()),
    }
}
