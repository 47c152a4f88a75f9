use eggq_core::classifiers::{ClassifierSpec, Family, Hyperparameters};
use eggq_core::evaluation::{
    cross_validate, prepare_folds, run_ensemble, EnsembleMember, EnsembleSpec, EvalMode, FoldPlan,
    PipelineOptions,
};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn bare(mode: EvalMode, folds: usize, seed: u64) -> PipelineOptions {
    PipelineOptions {
        folds,
        smote: None,
        pca: None,
        ..PipelineOptions::new(mode, seed)
    }
}

fn keys(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("EGG-{i:03}")).collect()
}

fn tree() -> ClassifierSpec {
    ClassifierSpec::new(Family::DecisionTree, Hyperparameters::new(), 0)
}

#[test]
fn memorizing_tree_leave_one_out_is_perfect_on_separated_data() {
    // Two well separated 2-D clusters; every point's nearest neighbour shares its label.
    let n = 24;
    let x = Array2::from_shape_fn((n, 2), |(i, j)| {
        let base = if i < n / 2 { 0.0 } else { 10.0 };
        base + ((i * 7 + j * 3) % 11) as f64 * 0.3
    });
    let y: Vec<usize> = (0..n).map(|i| usize::from(i >= n / 2)).collect();
    for i in 0..n {
        let nearest = (0..n)
            .filter(|&j| j != i)
            .min_by(|&a, &b| {
                let da: f64 = (0..2).map(|c| (x[[i, c]] - x[[a, c]]).powi(2)).sum();
                let db: f64 = (0..2).map(|c| (x[[i, c]] - x[[b, c]]).powi(2)).sum();
                da.total_cmp(&db)
            })
            .unwrap();
        assert_eq!(y[nearest], y[i]);
    }
    let p = prepare_folds(x.view(), &y, &keys(n), &bare(EvalMode::LeakageSafe, n, 1)).unwrap();
    assert!(p.plan.fold_sizes().iter().all(|&s| s == 1));
    let r = cross_validate(&tree(), &p).unwrap();
    assert_eq!(r.mean_accuracy, 1.0);
    assert_eq!(r.fold_accuracies.len(), n);
}

#[test]
fn mean_accuracy_is_the_mean_of_fold_accuracies() {
    let n = 50;
    let x = Array2::from_shape_fn((n, 3), |(i, j)| ((i * 13 + j * 5) % 17) as f64);
    let y: Vec<usize> = (0..n).map(|i| usize::from((i * 13) % 17 > 8)).collect();
    let p = prepare_folds(x.view(), &y, &keys(n), &bare(EvalMode::LeakageSafe, 5, 2)).unwrap();
    let r = cross_validate(&tree(), &p).unwrap();
    assert_eq!(r.mean_accuracy, r.fold_accuracies.iter().sum::<f64>() / 5.0);
}

#[test]
fn fold_accuracies_survive_row_shuffling() {
    let n = 80;
    let x = Array2::from_shape_fn((n, 4), |(i, j)| {
        ((i * 31 + j * 7) % 23) as f64 + 0.1 * j as f64
    });
    let y: Vec<usize> = (0..n).map(|i| usize::from((i * 31) % 23 > 10)).collect();
    let k = keys(n);
    let opts = bare(EvalMode::LeakageSafe, 10, 5);
    let base = cross_validate(&tree(), &prepare_folds(x.view(), &y, &k, &opts).unwrap()).unwrap();

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(9));
    let xs = Array2::from_shape_fn((n, 4), |(i, j)| x[[order[i], j]]);
    let ys: Vec<usize> = order.iter().map(|&i| y[i]).collect();
    let ks: Vec<String> = order.iter().map(|&i| k[i].clone()).collect();
    let shuffled =
        cross_validate(&tree(), &prepare_folds(xs.view(), &ys, &ks, &opts).unwrap()).unwrap();

    let mut a = base.fold_accuracies.clone();
    let mut b = shuffled.fold_accuracies.clone();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    assert_eq!(a, b);
}

#[test]
fn three_identical_members_match_one() {
    let n = 60;
    let x = Array2::from_shape_fn((n, 3), |(i, j)| ((i * 11 + j * 19) % 29) as f64 / 3.0);
    let y: Vec<usize> = (0..n).map(|i| usize::from((i * 11) % 29 > 13)).collect();
    let opts = PipelineOptions {
        folds: 5,
        ..PipelineOptions::new(EvalMode::PaperReplication, 4)
    };
    let p = prepare_folds(x.view(), &y, &keys(n), &opts).unwrap();
    let spec = ClassifierSpec::new(
        Family::RandomForest,
        Hyperparameters::new().with("n_estimators", 20),
        3,
    );
    let single = cross_validate(&spec, &p).unwrap();
    let member = EnsembleMember {
        extractor: "X".into(),
        spec,
    };
    let ens = EnsembleSpec {
        name: "triple".into(),
        members: vec![member.clone(), member.clone(), member],
    };
    let r = run_ensemble(&ens, &[&p, &p, &p]).unwrap();
    assert_eq!(r.ensemble.fold_accuracies, single.fold_accuracies);
    assert_eq!(r.ensemble.confusion, single.confusion);
    assert_eq!(r.ensemble.oof.predictions, single.oof.predictions);
    assert!((r.ensemble.roc.auc - single.roc.auc).abs() < 1e-12);
}

#[test]
fn same_seed_same_plan() {
    let labels: Vec<usize> = (0..216).map(|i| i % 2).collect();
    let a = FoldPlan::stratified(&labels, 10, 8).unwrap();
    let b = FoldPlan::stratified(&labels, 10, 8).unwrap();
    assert_eq!(a, b);
    for f in 0..10 {
        let rows = a.test_rows(f);
        assert!(rows.len() == 21 || rows.len() == 22);
        let pos = rows.iter().filter(|&&r| labels[r] == 1).count();
        assert!((10..=11).contains(&pos) && (10..=11).contains(&(rows.len() - pos)));
    }
}
