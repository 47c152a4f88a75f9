use serde::{Deserialize, Serialize};

use super::params::{Hyperparameters, ParamValue};
use super::Family;

/// Candidate values per hyperparameter; cells are the Cartesian product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperparameterGrid {
    pub family: Family,
    pub axes: Vec<(String, Vec<ParamValue>)>,
}

impl HyperparameterGrid {
    pub fn new(family: Family, axes: Vec<(String, Vec<ParamValue>)>) -> Self {
        Self { family, axes }
    }

    /// Single-cell grid.
    pub fn single(family: Family, params: &Hyperparameters) -> Self {
        Self {
            family,
            axes: params
                .iter()
                .map(|(k, v)| (k.clone(), vec![v.clone()]))
                .collect(),
        }
    }

    pub fn n_cells(&self) -> usize {
        self.axes.iter().map(|(_, v)| v.len()).product()
    }

    /// All cells, last axis varying fastest.
    pub fn cells(&self) -> Vec<Hyperparameters> {
        let mut out = vec![Hyperparameters::new()];
        for (name, values) in &self.axes {
            out = out
                .into_iter()
                .flat_map(|cell| {
                    values.iter().map(move |v| {
                        let mut c = cell.clone();
                        c.insert(name, v.clone());
                        c
                    })
                })
                .collect();
        }
        out
    }
}

fn ints(v: &[i64]) -> Vec<ParamValue> {
    v.iter().map(|&i| ParamValue::Int(i)).collect()
}

fn floats(v: &[f64]) -> Vec<ParamValue> {
    v.iter().map(|&f| ParamValue::Float(f)).collect()
}

fn strs(v: &[&str]) -> Vec<ParamValue> {
    v.iter().map(|&s| ParamValue::str(s)).collect()
}

fn axis(name: &str, values: Vec<ParamValue>) -> (String, Vec<ParamValue>) {
    (name.to_owned(), values)
}

fn depths() -> Vec<ParamValue> {
    let mut v = vec![ParamValue::none()];
    v.extend(ints(&[2, 5, 10, 20]));
    v
}

/// The search space used for each family.
pub fn default_grid(family: Family) -> HyperparameterGrid {
    let class_weight = || axis("class_weight", strs(&["None", "balanced"]));
    let axes = match family {
        Family::LogisticRegression => vec![
            axis("C", floats(&[0.1, 1.0, 10.0, 100.0])),
            axis("penalty", strs(&["l1", "l2"])),
            class_weight(),
        ],
        Family::DecisionTree => vec![
            axis("max_depth", depths()),
            axis("min_samples_split", ints(&[2, 5, 10])),
            axis("criterion", strs(&["gini", "entropy", "log_loss"])),
            class_weight(),
        ],
        Family::RandomForest => vec![
            axis("n_estimators", ints(&[50, 100, 150])),
            axis("max_depth", depths()),
            axis("min_samples_split", ints(&[2, 5, 10])),
            axis("criterion", strs(&["gini", "entropy", "log_loss"])),
            class_weight(),
        ],
        Family::Svc => vec![
            axis("C", floats(&[0.1, 1.0, 10.0])),
            axis("kernel", strs(&["linear", "poly", "rbf", "sigmoid"])),
            axis("gamma", strs(&["scale", "auto"])),
            class_weight(),
        ],
        Family::GradientBoosting => vec![
            axis("n_estimators", ints(&[50, 100, 150])),
            axis("learning_rate", floats(&[0.001, 0.01, 0.1])),
            axis("max_depth", ints(&[3, 5])),
        ],
        Family::Mlp => vec![
            axis(
                "hidden_layer_sizes",
                vec![
                    ParamValue::Layers(vec![8]),
                    ParamValue::Layers(vec![16]),
                    ParamValue::Layers(vec![8, 16]),
                    ParamValue::Layers(vec![16, 32]),
                ],
            ),
            axis("activation", strs(&["relu", "tanh"])),
            axis("learning_rate_init", floats(&[0.001, 0.01, 0.1])),
            axis("alpha", floats(&[0.0001, 0.001])),
            axis("solver", strs(&["sgd", "adam"])),
        ],
        Family::XGBoostStyle => vec![
            axis("n_estimators", ints(&[50, 100, 150])),
            axis("learning_rate", floats(&[0.001, 0.01, 0.1, 0.5])),
            axis("max_depth", ints(&[2, 3, 5, 7])),
            axis("subsample", floats(&[0.8, 1.0])),
            axis("colsample_bytree", floats(&[0.8, 1.0])),
            axis("reg_lambda", floats(&[0.0, 1.0])),
            axis("min_child_weight", ints(&[1, 3, 5])),
        ],
        Family::LightGBMStyle => vec![
            axis("n_estimators", ints(&[50, 100, 150])),
            axis("learning_rate", floats(&[0.01, 0.1])),
            axis("max_depth", ints(&[2, 3, 5])),
            axis("num_leaves", ints(&[5, 10, 15, 20])),
            axis("subsample", floats(&[0.8, 1.0])),
        ],
        Family::AdaBoost => vec![
            axis("n_estimators", ints(&[50, 100, 200])),
            axis("learning_rate", floats(&[0.001, 0.01, 0.1, 0.5, 1.0])),
            axis("estimator", strs(&["DecisionTree", "RandomForest"])),
        ],
    };
    HyperparameterGrid { family, axes }
}

/// Best-performing published configuration for each family.
pub fn best_preset(family: Family) -> Hyperparameters {
    let h = Hyperparameters::new();
    match family {
        Family::LogisticRegression => h
            .with("C", 100.0)
            .with("penalty", "l2")
            .with("class_weight", "None"),
        Family::DecisionTree => h
            .with("max_depth", 2i64)
            .with("min_samples_split", 10i64)
            .with("criterion", "entropy")
            .with("class_weight", "balanced"),
        Family::RandomForest => h
            .with("n_estimators", 100i64)
            .with("max_depth", 10i64)
            .with("min_samples_split", 2i64)
            .with("criterion", "entropy")
            .with("class_weight", "balanced"),
        Family::Svc => h
            .with("C", 10.0)
            .with("kernel", "rbf")
            .with("gamma", "scale")
            .with("class_weight", "None"),
        Family::GradientBoosting => h
            .with("n_estimators", 100i64)
            .with("learning_rate", 0.1)
            .with("max_depth", 3i64),
        Family::Mlp => h
            .with("hidden_layer_sizes", vec![16, 32])
            .with("activation", "relu")
            .with("learning_rate_init", 0.1)
            .with("alpha", 0.0001)
            .with("solver", "adam"),
        Family::XGBoostStyle => h
            .with("n_estimators", 50i64)
            .with("learning_rate", 0.5)
            .with("max_depth", 2i64)
            .with("subsample", 0.8)
            .with("colsample_bytree", 1.0)
            .with("reg_lambda", 0.0)
            .with("min_child_weight", 3i64),
        Family::LightGBMStyle => h
            .with("n_estimators", 150i64)
            .with("learning_rate", 0.1)
            .with("max_depth", 3i64)
            .with("num_leaves", 10i64)
            .with("subsample", 0.8),
        Family::AdaBoost => h
            .with("n_estimators", 100i64)
            .with("learning_rate", 0.01)
            .with("estimator", "RandomForest"),
    }
}

/// Simplicity ordering for tie-breaks, smaller is simpler: boosting rounds
/// or trees, depth (unlimited last), C, leaf budget, hidden units.
pub fn complexity_key(params: &Hyperparameters) -> [f64; 5] {
    let num = |name: &str| params.get(name).and_then(|v| v.as_f64()).unwrap_or(0.0);
    let depth = match params.get("max_depth") {
        Some(v) if v.is_none() => f64::INFINITY,
        Some(v) => v.as_f64().unwrap_or(0.0),
        None => 0.0,
    };
    let hidden = match params.get("hidden_layer_sizes") {
        Some(ParamValue::Layers(l)) => l.iter().sum::<usize>() as f64,
        _ => 0.0,
    };
    [
        num("n_estimators"),
        depth,
        num("C"),
        num("num_leaves"),
        hidden,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::ClassifierSpec;

    #[test]
    fn grid_sizes() {
        let sizes: Vec<usize> = Family::ALL
            .iter()
            .map(|&f| default_grid(f).n_cells())
            .collect();
        assert_eq!(sizes, vec![16, 90, 270, 48, 18, 96, 1152, 144, 30]);
    }

    #[test]
    fn cells_are_valid_specs() {
        for f in Family::ALL {
            let grid = default_grid(f);
            let cells = grid.cells();
            assert_eq!(cells.len(), grid.n_cells());
            for c in cells.iter().take(50) {
                ClassifierSpec::new(f, c.clone(), 0).validate().unwrap();
            }
            ClassifierSpec::new(f, best_preset(f), 0)
                .validate()
                .unwrap();
        }
    }

    #[test]
    fn presets_lie_inside_grids() {
        for f in Family::ALL {
            let grid = default_grid(f);
            for (k, v) in best_preset(f).iter() {
                let (_, values) = grid.axes.iter().find(|(n, _)| n == k).expect("axis exists");
                assert!(
                    values
                        .iter()
                        .any(|c| c == v || c.as_f64().is_some() && c.as_f64() == v.as_f64()),
                    "{f} {k}={v}"
                );
            }
        }
    }

    #[test]
    fn unlimited_depth_is_most_complex() {
        let a = Hyperparameters::new().with("max_depth", ParamValue::none());
        let b = Hyperparameters::new().with("max_depth", 20i64);
        assert!(complexity_key(&b) < complexity_key(&a));
    }
}
