//! TOML run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use eggq_core::classifiers::Family;
use eggq_core::dataset::{FusionOptions, TabularFeature, Task};
use eggq_core::evaluation::{EvalMode, PipelineOptions};
use eggq_core::transforms::{PcaConfig, SmoteConfig};

use crate::error::CliError;
use crate::study::{GridChoice, Modality, StudySettings};

fn default_seed() -> u64 {
    42
}

fn default_folds() -> usize {
    10
}

fn yes() -> bool {
    true
}

fn default_mode() -> EvalMode {
    EvalMode::PaperReplication
}

fn default_tabular() -> Vec<TabularFeature> {
    vec![TabularFeature::Weight, TabularFeature::ShapeIndex]
}

fn default_k() -> usize {
    5
}

fn default_variance() -> f64 {
    0.99
}

fn default_modalities() -> Vec<Modality> {
    vec![Modality::Tabular, Modality::Image, Modality::Multimodal]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Corpus directory (`measurements.csv` plus `features/`). Unset means
    /// the built-in synthetic corpus.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus: Option<PathBuf>,
    #[serde(default = "default_tabular")]
    pub tabular: Vec<TabularFeature>,
    #[serde(default)]
    pub standardize_tabular: bool,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            corpus: None,
            tabular: default_tabular(),
            standardize_tabular: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoteSection {
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default = "default_k")]
    pub k_neighbors: usize,
}

impl Default for SmoteSection {
    fn default() -> Self {
        Self {
            enabled: true,
            k_neighbors: default_k(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PcaSection {
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default = "default_variance")]
    pub variance_target: f64,
    #[serde(default)]
    pub standardize: bool,
}

impl Default for PcaSection {
    fn default() -> Self {
        Self {
            enabled: true,
            variance_target: default_variance(),
            standardize: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSection {
    #[serde(default)]
    pub grid: GridChoice,
    /// Family names or aliases; empty means all nine.
    #[serde(default)]
    pub families: Vec<String>,
    /// Empty means every extractor in the corpus.
    #[serde(default)]
    pub extractors: Vec<String>,
    #[serde(default = "default_modalities")]
    pub modalities: Vec<Modality>,
}

impl Default for SearchSection {
    fn default() -> Self {
        Self {
            grid: GridChoice::Preset,
            families: Vec::new(),
            extractors: Vec::new(),
            modalities: default_modalities(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub task: Task,
    #[serde(default = "default_mode")]
    pub mode: EvalMode,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "yes")]
    pub stratified: bool,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub smote: SmoteSection,
    #[serde(default)]
    pub pca: PcaSection,
    #[serde(default)]
    pub search: SearchSection,
}

impl RunConfig {
    pub fn new(task: Task) -> Self {
        Self {
            seed: default_seed(),
            task,
            mode: default_mode(),
            folds: default_folds(),
            stratified: true,
            data: DataConfig::default(),
            smote: SmoteSection::default(),
            pca: PcaSection::default(),
            search: SearchSection::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.folds < 2 {
            return Err(format!("folds must be at least 2, got {}", self.folds));
        }
        if self.smote.k_neighbors == 0 {
            return Err("smote.k_neighbors must be positive".into());
        }
        if !(self.pca.variance_target > 0.0 && self.pca.variance_target <= 1.0) {
            return Err(format!(
                "pca.variance_target must be in (0, 1], got {}",
                self.pca.variance_target
            ));
        }
        self.families()?;
        if self.search.modalities.is_empty() {
            return Err("search.modalities is empty".into());
        }
        Ok(())
    }

    pub fn families(&self) -> Result<Vec<Family>, String> {
        if self.search.families.is_empty() {
            return Ok(Family::ALL.to_vec());
        }
        self.search
            .families
            .iter()
            .map(|s| s.parse::<Family>().map_err(|e| e.to_string()))
            .collect()
    }

    pub fn pipeline_options(&self) -> PipelineOptions {
        PipelineOptions {
            mode: self.mode,
            folds: self.folds,
            stratified: self.stratified,
            seed: self.seed,
            smote: self.smote.enabled.then_some(SmoteConfig {
                k_neighbors: self.smote.k_neighbors,
                seed: self.seed,
            }),
            pca: self.pca.enabled.then_some(PcaConfig {
                variance_target: self.pca.variance_target,
                standardize: self.pca.standardize,
            }),
        }
    }

    pub fn settings(&self) -> StudySettings {
        StudySettings {
            task: self.task,
            options: self.pipeline_options(),
            tabular: self.data.tabular.clone(),
            fusion: FusionOptions {
                standardize_tabular: self.data.standardize_tabular,
            },
        }
    }

    /// The fully resolved config as TOML, every default spelled out.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = RunConfig::parse("task = \"grade\"\n").unwrap();
        assert_eq!(cfg, RunConfig::new(Task::Grade));
        assert_eq!(cfg.families().unwrap().len(), 9);
    }

    #[test]
    fn resolved_toml_roundtrips() {
        let mut cfg = RunConfig::new(Task::Freshness);
        cfg.mode = EvalMode::LeakageSafe;
        cfg.search.families = vec!["rf".into(), "svc".into()];
        cfg.data.corpus = Some("data/eggs".into());
        let back = RunConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig::parse("task = \"grade\"\nfolds = 1\n").is_err());
        assert!(RunConfig::parse("task = \"size\"\n").is_err());
        assert!(RunConfig::parse("task = \"grade\"\nbogus = 1\n").is_err());
        assert!(RunConfig::parse("task = \"grade\"\n[search]\nfamilies = [\"knn\"]\n").is_err());
        assert!(RunConfig::parse("task = \"grade\"\n[pca]\nvariance_target = 1.5\n").is_err());
    }
}
