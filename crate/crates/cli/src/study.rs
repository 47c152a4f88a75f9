//! Modality × extractor × classifier leaderboards and preset ensembles over a
//! corpus.

use std::fmt;

use anyhow::{anyhow, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use eggq_core::classifiers::{
    best_preset, default_grid, train, ClassifierSpec, Family, HyperparameterGrid,
};
use eggq_core::corpus::Corpus;
use eggq_core::dataset::{
    build_labeled_dataset, fuse, tabular_matrix, FusionOptions, LabeledDataset, ModelBundle,
    TabularFeature, Task,
};
use eggq_core::evaluation::{
    grid_search, prepare_folds, run_ensemble, EnsemblePreset, EnsembleReport, EnsembleSpec,
    EvaluationReport, LeaderboardEntry, PipelineOptions, PreparedFolds,
};
use eggq_core::transforms::{fit_pca, smote_resample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Tabular,
    Image,
    Multimodal,
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modality::Tabular => "tabular",
            Modality::Image => "image",
            Modality::Multimodal => "multimodal",
        })
    }
}

/// Which hyperparameter cells to search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridChoice {
    /// One cell per family: the preset values.
    #[default]
    Preset,
    /// The full search grid.
    Full,
}

impl GridChoice {
    pub fn grid(self, family: Family) -> HyperparameterGrid {
        match self {
            GridChoice::Preset => HyperparameterGrid::single(family, &best_preset(family)),
            GridChoice::Full => default_grid(family),
        }
    }
}

impl std::str::FromStr for GridChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "preset" => Ok(GridChoice::Preset),
            "full" => Ok(GridChoice::Full),
            _ => Err(format!("unknown grid `{s}` (expected preset or full)")),
        }
    }
}

/// A leaderboard column: one input representation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub modality: Modality,
    pub extractor: Option<String>,
}

impl Column {
    pub fn label(&self) -> String {
        match &self.extractor {
            Some(e) => format!("{}:{}", self.modality, e),
            None => self.modality.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudySettings {
    pub task: Task,
    pub options: PipelineOptions,
    pub tabular: Vec<TabularFeature>,
    pub fusion: FusionOptions,
}

/// Builds the labeled matrix for `column` and splits it into folds. The
/// tabular column is never projected.
pub fn prepare_column(
    corpus: &Corpus,
    column: &Column,
    settings: &StudySettings,
) -> Result<PreparedFolds> {
    let ds = column_dataset(corpus, column, settings)?;
    let options = match column.modality {
        Modality::Tabular => PipelineOptions {
            pca: None,
            ..settings.options.clone()
        },
        _ => settings.options.clone(),
    };
    prepare_folds(
        ds.features.values().view(),
        &ds.labels,
        ds.features.egg_ids(),
        &options,
    )
    .with_context(|| format!("preparing folds for {}", column.label()))
}

/// Tabular first, then every extractor under each image modality.
pub fn standard_columns(extractors: &[String], modalities: &[Modality]) -> Vec<Column> {
    let mut out = Vec::new();
    for &m in modalities {
        match m {
            Modality::Tabular => out.push(Column {
                modality: m,
                extractor: None,
            }),
            _ => out.extend(extractors.iter().map(|e| Column {
                modality: m,
                extractor: Some(e.clone()),
            })),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyCell {
    pub column: Column,
    pub family: Family,
    pub leaderboard: Vec<LeaderboardEntry>,
    pub best: EvaluationReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Study {
    pub task: Task,
    pub columns: Vec<Column>,
    pub families: Vec<Family>,
    /// Column-major: every family for column 0, then column 1, ...
    pub cells: Vec<StudyCell>,
    pub pca_components: Vec<(String, Vec<usize>)>,
}

impl Study {
    pub fn cell(&self, column: &Column, family: Family) -> Option<&StudyCell> {
        self.cells
            .iter()
            .find(|c| &c.column == column && c.family == family)
    }
}

/// Grid-searches every family on every column.
pub fn run_study(
    corpus: &Corpus,
    columns: &[Column],
    families: &[Family],
    grid: GridChoice,
    settings: &StudySettings,
) -> Result<Study> {
    let mut cells = Vec::new();
    let mut pca_components = Vec::new();
    for column in columns {
        let prepared = prepare_column(corpus, column, settings)?;
        log::info!(
            "{} {}: {} rows, PCA components {:?}",
            settings.task,
            column.label(),
            prepared.n_rows(),
            prepared.pca_components
        );
        pca_components.push((column.label(), prepared.pca_components.clone()));
        let results: Vec<StudyCell> = families
            .par_iter()
            .map(|&family| {
                let result = grid_search(&grid.grid(family), settings.options.seed, &prepared)
                    .with_context(|| format!("{} on {}", family, column.label()))?;
                let mut best = result.best;
                best.name = format!("{}+{}", family.display_name(), column.label());
                Ok(StudyCell {
                    column: column.clone(),
                    family,
                    leaderboard: result.leaderboard,
                    best,
                })
            })
            .collect::<Result<_>>()?;
        cells.extend(results);
    }
    Ok(Study {
        task: settings.task,
        columns: columns.to_vec(),
        families: families.to_vec(),
        cells,
        pca_components,
    })
}

/// Mean accuracy table: one row per family, one column per input.
pub fn accuracy_table_csv(study: &Study) -> String {
    let mut out = String::from("classifier");
    for c in &study.columns {
        out.push(',');
        out.push_str(&c.label());
    }
    out.push('\n');
    for &f in &study.families {
        out.push_str(f.display_name());
        for c in &study.columns {
            out.push(',');
            if let Some(cell) = study.cell(c, f) {
                out.push_str(&format!("{:.4}", 100.0 * cell.best.mean_accuracy));
            }
        }
        out.push('\n');
    }
    out
}

/// Runs a preset ensemble: each member gets folds over its own extractor's
/// features, multimodal presets fuse the tabular columns.
pub fn run_preset_ensemble(
    corpus: &Corpus,
    preset: EnsemblePreset,
    spec: &EnsembleSpec,
    settings: &StudySettings,
) -> Result<EnsembleReport> {
    if settings.task != preset.task() {
        return Err(anyhow!(
            "preset {preset} is for the {} task, not {}",
            preset.task(),
            settings.task
        ));
    }
    let modality = if preset.multimodal() {
        Modality::Multimodal
    } else {
        Modality::Image
    };
    let prepared: Vec<PreparedFolds> = spec
        .members
        .iter()
        .map(|m| {
            prepare_column(
                corpus,
                &Column {
                    modality,
                    extractor: Some(m.extractor.clone()),
                },
                settings,
            )
        })
        .collect::<Result<_>>()?;
    let refs: Vec<&PreparedFolds> = prepared.iter().collect();
    Ok(run_ensemble(spec, &refs)?)
}

/// Labeled features for `column` before any resampling or projection.
pub fn column_dataset(
    corpus: &Corpus,
    column: &Column,
    settings: &StudySettings,
) -> Result<LabeledDataset> {
    let matrix = match (column.modality, &column.extractor) {
        (Modality::Tabular, _) => {
            tabular_matrix(&corpus.table, &settings.tabular, None, settings.fusion)?
        }
        (m, None) => return Err(anyhow!("{m} column needs an extractor")),
        (m, Some(e)) => {
            let image = corpus
                .extractor(e)
                .ok_or_else(|| anyhow!("corpus has no features for extractor `{e}`"))?;
            if m == Modality::Multimodal {
                fuse(image, &corpus.table, &settings.tabular, settings.fusion)?
            } else {
                image.clone()
            }
        }
    };
    Ok(build_labeled_dataset(
        &matrix,
        &corpus.table,
        settings.task,
    )?)
}

/// Fits the full pipeline (SMOTE, PCA, classifier) on every row of
/// `column` and packages it for prediction.
pub fn fit_bundle(
    corpus: &Corpus,
    column: &Column,
    spec: &ClassifierSpec,
    settings: &StudySettings,
    pipeline_config: serde_json::Value,
) -> Result<ModelBundle> {
    let ds = column_dataset(corpus, column, settings)?;
    let x = ds.features.values().view();
    let (xr, yr) = match settings.options.smote {
        Some(cfg) => {
            let r = smote_resample(x, &ds.labels, &cfg)?;
            (r.x, r.y)
        }
        None => (x.to_owned(), ds.labels.clone()),
    };
    let pca = match (column.modality, settings.options.pca) {
        (Modality::Tabular, _) | (_, None) => None,
        (_, Some(cfg)) => Some(fit_pca(xr.view(), &cfg)?),
    };
    let z = match &pca {
        Some(p) => p.project(xr.view())?,
        None => xr,
    };
    let model = train(spec, z.view(), &yr)?;
    let names = settings.task.class_names();
    Ok(ModelBundle {
        pipeline_config,
        task: settings.task,
        label_mapping: [names[0].to_string(), names[1].to_string()],
        feature_columns: ds.features.columns().to_vec(),
        pca,
        models: vec![model],
    })
}
