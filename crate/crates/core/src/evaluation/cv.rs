use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::folds::FoldPlan;
use super::metrics::{confusion_and_accuracy, roc_auc, ConfusionMatrix, RocCurve};
use super::EvaluationError;
use crate::classifiers::{argmax2, train, ClassifierSpec};
use crate::rng::derive_seed;
use crate::transforms::{fit_pca, smote_resample, PcaConfig, Resampled, RowOrigin, SmoteConfig};

/// Where SMOTE and PCA are fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EvalMode {
    /// Once on the full dataset, before splitting; test folds may contain
    /// synthetic rows.
    #[serde(rename = "paper")]
    PaperReplication,
    /// Inside each training fold; test folds hold original rows only.
    #[serde(rename = "foldsafe")]
    LeakageSafe,
}

impl fmt::Display for EvalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvalMode::PaperReplication => "paper",
            EvalMode::LeakageSafe => "foldsafe",
        })
    }
}

impl FromStr for EvalMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper" | "paper-replication" => Ok(EvalMode::PaperReplication),
            "foldsafe" | "leakage-safe" => Ok(EvalMode::LeakageSafe),
            other => Err(format!(
                "unknown mode `{other}` (expected paper or foldsafe)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub mode: EvalMode,
    pub folds: usize,
    pub stratified: bool,
    pub seed: u64,
    /// `None` skips oversampling.
    pub smote: Option<SmoteConfig>,
    /// `None` skips the projection.
    pub pca: Option<PcaConfig>,
}

impl PipelineOptions {
    pub fn new(mode: EvalMode, seed: u64) -> Self {
        Self {
            mode,
            folds: 10,
            stratified: true,
            seed,
            smote: Some(SmoteConfig {
                k_neighbors: 5,
                seed,
            }),
            pca: Some(PcaConfig::default()),
        }
    }
}

/// Transformed train/test matrices for one fold.
#[derive(Debug, Clone)]
pub struct FoldData {
    pub train_x: Array2<f64>,
    pub train_y: Vec<usize>,
    pub test_x: Array2<f64>,
    /// Indices into the evaluated rows.
    pub test_rows: Vec<usize>,
}

/// Fold matrices ready for any number of classifiers.
///
/// The evaluated rows are the SMOTE-augmented rows in paper mode and the
/// original rows in leakage-safe mode.
#[derive(Debug, Clone)]
pub struct PreparedFolds {
    pub options: PipelineOptions,
    pub labels: Vec<usize>,
    pub origins: Vec<RowOrigin>,
    pub keys: Vec<String>,
    pub plan: FoldPlan,
    pub folds: Vec<FoldData>,
    pub n_original: usize,
    /// Retained components: one entry in paper mode, one per fold otherwise.
    pub pca_components: Vec<usize>,
}

impl PreparedFolds {
    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    /// Synthetic rows placed in any test fold.
    pub fn synthetic_in_test(&self) -> usize {
        self.folds
            .iter()
            .flat_map(|f| &f.test_rows)
            .filter(|&&r| self.origins[r].is_synthetic())
            .count()
    }
}

fn resample(
    x: ArrayView2<'_, f64>,
    y: &[usize],
    smote: Option<SmoteConfig>,
) -> Result<Resampled, EvaluationError> {
    Ok(match smote {
        Some(cfg) => smote_resample(x, y, &cfg)?,
        None => Resampled {
            x: x.to_owned(),
            y: y.to_vec(),
            origins: (0..y.len()).map(RowOrigin::Original).collect(),
        },
    })
}

/// Fits PCA on `fit_on` and projects each matrix in `apply`.
fn project(
    fit_on: ArrayView2<'_, f64>,
    apply: &[ArrayView2<'_, f64>],
    pca: Option<PcaConfig>,
) -> Result<(Vec<Array2<f64>>, usize), EvaluationError> {
    match pca {
        Some(cfg) => {
            let model = fit_pca(fit_on, &cfg)?;
            let out = apply
                .iter()
                .map(|m| model.project(*m))
                .collect::<Result<Vec<_>, _>>()?;
            Ok((out, model.n_components()))
        }
        None => Ok((apply.iter().map(|m| m.to_owned()).collect(), fit_on.ncols())),
    }
}

fn make_plan(
    labels: &[usize],
    keys: &[String],
    options: &PipelineOptions,
) -> Result<FoldPlan, EvaluationError> {
    if options.stratified {
        FoldPlan::stratified_by_key(labels, keys, options.folds, options.seed)
    } else {
        FoldPlan::plain(labels.len(), options.folds, options.seed)
    }
}

/// Splits `(x, y)` into transformed folds. `keys` identify rows (egg ids)
/// and drive the fold assignment.
pub fn prepare_folds(
    x: ArrayView2<'_, f64>,
    y: &[usize],
    keys: &[String],
    options: &PipelineOptions,
) -> Result<PreparedFolds, EvaluationError> {
    if x.nrows() != y.len() || keys.len() != y.len() {
        return Err(EvaluationError::Length {
            what: "rows",
            expected: x.nrows(),
            found: y.len().min(keys.len()),
        });
    }
    match options.mode {
        EvalMode::PaperReplication => {
            let res = resample(x, y, options.smote)?;
            let keys: Vec<String> = res
                .origins
                .iter()
                .enumerate()
                .map(|(i, o)| match o {
                    RowOrigin::Original(r) => keys[*r].clone(),
                    RowOrigin::Synthetic { base, .. } => {
                        format!("{}#syn{}", keys[*base], i - y.len())
                    }
                })
                .collect();
            let (z, k) = project(res.x.view(), &[res.x.view()], options.pca)?;
            let z = &z[0];
            let plan = make_plan(&res.y, &keys, options)?;
            let folds = (0..plan.k)
                .map(|f| {
                    let train = plan.train_rows(f);
                    let test = plan.test_rows(f);
                    FoldData {
                        train_x: z.select(Axis(0), &train),
                        train_y: train.iter().map(|&r| res.y[r]).collect(),
                        test_x: z.select(Axis(0), &test),
                        test_rows: test,
                    }
                })
                .collect();
            Ok(PreparedFolds {
                options: options.clone(),
                labels: res.y,
                origins: res.origins,
                keys,
                plan,
                folds,
                n_original: y.len(),
                pca_components: vec![k],
            })
        }
        EvalMode::LeakageSafe => {
            let plan = make_plan(y, keys, options)?;
            let built: Vec<(FoldData, usize)> = (0..plan.k)
                .into_par_iter()
                .map(|f| {
                    let train = plan.train_rows(f);
                    let test = plan.test_rows(f);
                    let tx = x.select(Axis(0), &train);
                    let ty: Vec<usize> = train.iter().map(|&r| y[r]).collect();
                    let smote = options.smote.map(|s| SmoteConfig {
                        seed: derive_seed(s.seed, &[f as u64]),
                        ..s
                    });
                    let res = resample(tx.view(), &ty, smote)?;
                    let test_raw = x.select(Axis(0), &test);
                    let (mut m, k) =
                        project(res.x.view(), &[res.x.view(), test_raw.view()], options.pca)?;
                    let test_x = m.pop().expect("two outputs");
                    let train_x = m.pop().expect("two outputs");
                    Ok((
                        FoldData {
                            train_x,
                            train_y: res.y,
                            test_x,
                            test_rows: test,
                        },
                        k,
                    ))
                })
                .collect::<Result<_, EvaluationError>>()?;
            let (folds, pca_components) = built.into_iter().unzip();
            Ok(PreparedFolds {
                options: options.clone(),
                labels: y.to_vec(),
                origins: (0..y.len()).map(RowOrigin::Original).collect(),
                keys: keys.to_vec(),
                plan,
                folds,
                n_original: y.len(),
                pca_components,
            })
        }
    }
}

/// Out-of-fold predictions for every evaluated row.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OutOfFold {
    pub labels: Vec<usize>,
    pub predictions: Vec<usize>,
    /// `P(class 1)`
    pub scores: Vec<f64>,
    /// `[P(class 0), P(class 1)]` per row.
    pub probabilities: Vec<[f64; 2]>,
    pub synthetic: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub name: String,
    pub spec: Option<ClassifierSpec>,
    pub mode: EvalMode,
    pub folds: usize,
    pub seed: u64,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    /// Accuracy over every evaluated row, synthetic rows included.
    pub accuracy_augmented: f64,
    /// Accuracy over original rows only.
    pub accuracy_original_rows: f64,
    pub confusion: ConfusionMatrix,
    pub confusion_percent: [[f64; 2]; 2],
    pub roc: RocCurve,
    pub n_rows: usize,
    pub n_original_rows: usize,
    pub synthetic_in_test: usize,
    pub pca_components: Vec<usize>,
    #[serde(skip)]
    pub oof: OutOfFold,
}

impl EvaluationReport {
    pub fn auc(&self) -> f64 {
        self.roc.auc
    }
}

/// Builds a report from out-of-fold outputs over `prepared`'s rows.
pub(crate) fn summarize(
    name: String,
    spec: Option<ClassifierSpec>,
    prepared: &PreparedFolds,
    probabilities: Vec<[f64; 2]>,
    predictions: Vec<usize>,
) -> Result<EvaluationReport, EvaluationError> {
    let labels = &prepared.labels;
    let fold_accuracies = (0..prepared.plan.k)
        .map(|f| {
            let rows = &prepared.folds[f].test_rows;
            rows.iter()
                .filter(|&&r| predictions[r] == labels[r])
                .count() as f64
                / rows.len() as f64
        })
        .collect::<Vec<_>>();
    let mean_accuracy = fold_accuracies.iter().sum::<f64>() / fold_accuracies.len() as f64;
    let (confusion, accuracy_augmented) = confusion_and_accuracy(labels, &predictions)?;
    let original: Vec<usize> = (0..labels.len())
        .filter(|&r| !prepared.origins[r].is_synthetic())
        .collect();
    let accuracy_original_rows = original
        .iter()
        .filter(|&&r| predictions[r] == labels[r])
        .count() as f64
        / original.len() as f64;
    let scores: Vec<f64> = probabilities.iter().map(|p| p[1]).collect();
    let roc = roc_auc(&scores, labels)?;
    Ok(EvaluationReport {
        name,
        spec,
        mode: prepared.options.mode,
        folds: prepared.plan.k,
        seed: prepared.options.seed,
        fold_accuracies,
        mean_accuracy,
        accuracy_augmented,
        accuracy_original_rows,
        confusion,
        confusion_percent: confusion.row_percentages(),
        roc,
        n_rows: labels.len(),
        n_original_rows: prepared.n_original,
        synthetic_in_test: prepared.synthetic_in_test(),
        pca_components: prepared.pca_components.clone(),
        oof: OutOfFold {
            labels: labels.clone(),
            predictions,
            scores,
            probabilities,
            synthetic: prepared.origins.iter().map(|o| o.is_synthetic()).collect(),
        },
    })
}

/// Trains `spec` on every fold and scores the held-out rows.
pub fn cross_validate(
    spec: &ClassifierSpec,
    prepared: &PreparedFolds,
) -> Result<EvaluationReport, EvaluationError> {
    let per_fold: Vec<Array2<f64>> = prepared
        .folds
        .par_iter()
        .enumerate()
        .map(|(f, fold)| {
            let model = train(spec, fold.train_x.view(), &fold.train_y)
                .map_err(|source| EvaluationError::Fold { fold: f, source })?;
            model
                .predict_proba(fold.test_x.view())
                .map_err(|source| EvaluationError::Fold { fold: f, source })
        })
        .collect::<Result<_, _>>()?;
    let n = prepared.n_rows();
    let mut probabilities = vec![[0.0; 2]; n];
    for (fold, proba) in prepared.folds.iter().zip(&per_fold) {
        for (k, &r) in fold.test_rows.iter().enumerate() {
            probabilities[r] = [proba[[k, 0]], proba[[k, 1]]];
        }
    }
    let predictions = probabilities.iter().map(|p| argmax2(p[0], p[1])).collect();
    summarize(
        spec.family.to_string(),
        Some(spec.clone()),
        prepared,
        probabilities,
        predictions,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::{Family, Hyperparameters};

    fn data() -> (Array2<f64>, Vec<usize>, Vec<String>) {
        let n = 60;
        let x = Array2::from_shape_fn((n, 5), |(i, j)| {
            ((i * 17 + j * 29) % 31) as f64 / 7.0 + (i % 3) as f64
        });
        let y: Vec<usize> = (0..n).map(|i| usize::from(i % 5 < 2)).collect();
        let keys = (0..n).map(|i| format!("e{i:03}")).collect();
        (x, y, keys)
    }

    #[test]
    fn paper_mode_tests_augmented_rows() {
        let (x, y, keys) = data();
        let opts = PipelineOptions {
            folds: 5,
            ..PipelineOptions::new(EvalMode::PaperReplication, 3)
        };
        let p = prepare_folds(x.view(), &y, &keys, &opts).unwrap();
        assert_eq!(p.n_rows(), 72);
        assert!(p.synthetic_in_test() > 0);
        assert_eq!(p.pca_components.len(), 1);
        let spec = ClassifierSpec::new(Family::DecisionTree, Hyperparameters::new(), 0);
        let r = cross_validate(&spec, &p).unwrap();
        let mean = r.fold_accuracies.iter().sum::<f64>() / 5.0;
        assert_eq!(r.mean_accuracy, mean);
        assert_eq!(r.confusion.total(), 72);
    }

    #[test]
    fn foldsafe_keeps_synthetic_rows_out_of_tests() {
        let (x, y, keys) = data();
        let opts = PipelineOptions {
            folds: 5,
            ..PipelineOptions::new(EvalMode::LeakageSafe, 3)
        };
        let p = prepare_folds(x.view(), &y, &keys, &opts).unwrap();
        assert_eq!(p.n_rows(), 60);
        assert_eq!(p.synthetic_in_test(), 0);
        assert_eq!(p.pca_components.len(), 5);
        for f in &p.folds {
            let pos = f.train_y.iter().filter(|&&l| l == 1).count();
            assert_eq!(pos * 2, f.train_y.len());
        }
    }

    #[test]
    fn mode_names() {
        assert_eq!(
            "paper".parse::<EvalMode>().unwrap(),
            EvalMode::PaperReplication
        );
        assert_eq!(
            "foldsafe".parse::<EvalMode>().unwrap(),
            EvalMode::LeakageSafe
        );
        assert_eq!(
            serde_json::to_string(&EvalMode::LeakageSafe).unwrap(),
            "\"foldsafe\""
        );
    }
}
