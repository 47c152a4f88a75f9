use eggq_core::classifiers::{
    best_preset, train, ClassifierSpec, Family, FittedModel, Hyperparameters, LogisticModel,
};
use eggq_core::rng::{derive_seed, unit_interval};
use ndarray::{array, Array2};
use proptest::prelude::*;

fn noisy(n: usize, d: usize, salt: u64) -> (Array2<f64>, Vec<usize>) {
    let x = Array2::from_shape_fn((n, d), |(i, j)| {
        unit_interval(derive_seed(salt, &[i as u64, j as u64])) * 2.0 - 1.0
    });
    let y = (0..n)
        .map(|i| {
            let noise = unit_interval(derive_seed(salt ^ 0xA5, &[i as u64])) - 0.5;
            usize::from(x[[i, 0]] + 0.5 * x[[i, 1 % d]] + 0.6 * noise > 0.0)
        })
        .collect();
    (x, y)
}

fn light_spec(family: Family, seed: u64) -> ClassifierSpec {
    let mut p = best_preset(family);
    match family {
        Family::RandomForest => p.insert("n_estimators", 20i64.into()),
        Family::AdaBoost => {
            p.insert("n_estimators", 5i64.into());
            p.insert("estimator", "DecisionTree".into());
        }
        _ => {}
    }
    ClassifierSpec::new(family, p, seed)
}

/// Best training accuracy any affine classifier reaches on `x`, by scanning
/// directions and offsets.
fn best_linear_accuracy(x: &Array2<f64>, y: &[usize]) -> f64 {
    let mut best = 0usize;
    for a in 0..720 {
        let theta = a as f64 * std::f64::consts::PI / 360.0;
        let (w0, w1) = (theta.cos(), theta.sin());
        let mut proj: Vec<f64> = x
            .rows()
            .into_iter()
            .map(|r| w0 * r[0] + w1 * r[1])
            .collect();
        proj.sort_by(f64::total_cmp);
        let mut cuts = vec![proj[0] - 1.0, proj[proj.len() - 1] + 1.0];
        cuts.extend(proj.windows(2).map(|w| (w[0] + w[1]) / 2.0));
        for b in cuts {
            let hits = x
                .rows()
                .into_iter()
                .zip(y)
                .filter(|(r, &c)| usize::from(w0 * r[0] + w1 * r[1] > b) == c)
                .count();
            best = best.max(hits);
        }
    }
    best as f64 / y.len() as f64
}

#[test]
fn logistic_on_xor_is_bounded_by_linear_separability() {
    let x = array![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
    let y = [0, 1, 1, 0];
    let ceiling = best_linear_accuracy(&x, &y);
    assert_eq!(ceiling, 0.75);
    for params in [
        best_preset(Family::LogisticRegression),
        Hyperparameters::new().with("penalty", "l1").with("C", 1.0),
    ] {
        let m = train(
            &ClassifierSpec::new(Family::LogisticRegression, params, 0),
            x.view(),
            &y,
        )
        .unwrap();
        let pred = m.predict(x.view()).unwrap();
        let acc = pred.iter().zip(&y).filter(|(a, b)| a == b).count() as f64 / 4.0;
        assert!(acc <= ceiling);
    }
}

#[test]
fn unrestricted_tree_memorizes_training_rows() {
    let (x, y) = noisy(150, 5, 7);
    let m = train(
        &ClassifierSpec::new(Family::DecisionTree, Hyperparameters::new(), 0),
        x.view(),
        &y,
    )
    .unwrap();
    assert_eq!(m.predict(x.view()).unwrap(), y);
}

#[test]
fn zero_weight_logistic_gives_half() {
    let m = eggq_core::classifiers::ClassifierModel {
        spec: ClassifierSpec::new(Family::LogisticRegression, Hyperparameters::new(), 0),
        n_features: 2,
        fitted: FittedModel::Logistic(LogisticModel {
            weights: vec![0.0, 0.0],
            intercept: 0.0,
            iterations: 0,
            converged: true,
        }),
    };
    let p = m.predict_proba(array![[3.0, -1.0]].view()).unwrap();
    assert_eq!(p.row(0).to_vec(), vec![0.5, 0.5]);
    assert_eq!(m.predict(array![[3.0, -1.0]].view()).unwrap(), vec![0]);
}

#[test]
fn every_family_is_deterministic_and_consistent() {
    let (x, y) = noisy(90, 4, 1);
    let (probe, _) = noisy(1000, 4, 99);
    for family in Family::ALL {
        let spec = light_spec(family, 17);
        let a = train(&spec, x.view(), &y).unwrap();
        let b = train(&spec, x.view(), &y).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap(),
            "{family}"
        );
        let proba = a.predict_proba(probe.view()).unwrap();
        let pred = a.predict(probe.view()).unwrap();
        for (row, &label) in proba.rows().into_iter().zip(&pred) {
            assert!(row.iter().all(|p| (0.0..=1.0).contains(p)), "{family}");
            assert!((row.sum() - 1.0).abs() <= 1e-9, "{family}");
            let argmax = usize::from(row[1] > row[0]);
            assert_eq!(argmax, label, "{family}");
        }
        let constant = Array2::from_elem((5, 4), 0.25);
        let c = a.predict(constant.view()).unwrap();
        assert!(c.iter().all(|&l| l == c[0]), "{family}");
    }
}

#[test]
fn balanced_weights_equal_unweighted_on_balanced_data() {
    let (x, mut y) = noisy(80, 3, 4);
    for (i, l) in y.iter_mut().enumerate() {
        *l = i % 2;
    }
    for family in [
        Family::LogisticRegression,
        Family::DecisionTree,
        Family::RandomForest,
        Family::Svc,
    ] {
        let mut with = light_spec(family, 3);
        with.params.insert("class_weight", "balanced".into());
        let mut without = light_spec(family, 3);
        without.params.insert("class_weight", "None".into());
        let a = train(&with, x.view(), &y).unwrap();
        let b = train(&without, x.view(), &y).unwrap();
        assert_eq!(a.fitted, b.fitted, "{family}");
    }
}

#[test]
fn order_sensitive_models_move_little_under_permutation() {
    let (x, y) = noisy(200, 4, 12);
    let perm: Vec<usize> = (0..200).map(|i| (i * 77) % 200).collect();
    let xp = x.select(ndarray::Axis(0), &perm);
    let yp: Vec<usize> = perm.iter().map(|&i| y[i]).collect();
    for family in [Family::LogisticRegression, Family::Mlp] {
        let mut spec = light_spec(family, 5);
        if family == Family::Mlp {
            spec.params.insert("learning_rate_init", 0.01.into());
        }
        let acc = |m: &eggq_core::classifiers::ClassifierModel| {
            let p = m.predict(x.view()).unwrap();
            p.iter().zip(&y).filter(|(a, b)| a == b).count() as f64 / 200.0
        };
        let a = acc(&train(&spec, x.view(), &y).unwrap());
        let b = acc(&train(&spec, xp.view(), &yp).unwrap());
        assert!((a - b).abs() < 0.05, "{family}: {a} vs {b}");
    }
}

#[test]
fn tree_models_ignore_row_order() {
    let (x, y) = noisy(120, 5, 21);
    let perm: Vec<usize> = (0..120).rev().collect();
    let xp = x.select(ndarray::Axis(0), &perm);
    let yp: Vec<usize> = perm.iter().map(|&i| y[i]).collect();
    for family in [Family::DecisionTree, Family::RandomForest] {
        let mut spec = light_spec(family, 8);
        spec.params.insert("class_weight", "None".into());
        let a = train(&spec, x.view(), &y).unwrap();
        let b = train(&spec, xp.view(), &yp).unwrap();
        assert_eq!(
            a.predict_proba(x.view()).unwrap(),
            b.predict_proba(x.view()).unwrap(),
            "{family}"
        );
    }
}

#[test]
fn mlp_preset_architecture_trains() {
    let (x, y) = noisy(186, 20, 2);
    let m = train(
        &ClassifierSpec::new(Family::Mlp, best_preset(Family::Mlp), 0),
        x.view(),
        &y,
    )
    .unwrap();
    let FittedModel::Mlp(net) = &m.fitted else {
        panic!()
    };
    let widths: Vec<usize> = net.layers.iter().map(|l| l.weights.ncols()).collect();
    assert_eq!(widths, vec![16, 32, 1]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn probabilities_stay_on_simplex(salt in 0u64..100_000, fam in 0usize..9) {
        let (x, y) = noisy(40, 3, salt);
        prop_assume!(y.contains(&0) && y.contains(&1));
        let family = Family::ALL[fam];
        let m = train(&light_spec(family, salt), x.view(), &y).unwrap();
        let big = x.mapv(|v| v * 1e3);
        for probe in [x.clone(), big] {
            let p = m.predict_proba(probe.view()).unwrap();
            for r in p.rows() {
                prop_assert!(r[0] >= 0.0 && r[1] >= 0.0 && (r.sum() - 1.0).abs() <= 1e-9);
            }
        }
    }
}
