use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn eggq(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eggq"))
        .args(args)
        .current_dir(cwd)
        .env_remove("EGGQ_PUBLISHED_DIR")
        .output()
        .expect("spawn eggq")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

const SMALL: &str = r#"
task = "grade"
folds = 5

[search]
families = ["lr", "dt"]
extractors = ["ResNet152"]
modalities = ["tabular", "multimodal"]
"#;

#[test]
fn list_backbones() {
    let dir = tempfile::tempdir().unwrap();
    let out = eggq(&["extract-check", "--list"], dir.path());
    ok(&out);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 13);
    assert!(text.contains("ResNet152") && text.contains("2048"));
}

#[test]
fn extract_check_flags_wrong_width() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let mut csv = String::from("egg_id");
    for j in 0..10 {
        csv.push_str(&format!(",f{j:04}"));
    }
    csv.push('\n');
    csv.push_str("EGG-001");
    csv.push_str(&",0.5".repeat(10));
    csv.push('\n');
    fs::write(p.join("ResNet152.csv"), csv).unwrap();
    let out = eggq(&["extract-check", "ResNet152.csv"], p);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let out = eggq(
        &["evaluate", "--task", "grade", "--folds", "1", "-o", "x"],
        p,
    );
    assert_eq!(out.status.code(), Some(3));
    let out = eggq(&["evaluate", "--task", "colour", "-o", "x"], p);
    assert_eq!(out.status.code(), Some(3));
    fs::write(p.join("bad.toml"), "task = \"grade\"\nfoldz = 3\n").unwrap();
    let out = eggq(&["evaluate", "--config", "bad.toml", "-o", "x"], p);
    assert_eq!(out.status.code(), Some(3));
    let out = eggq(
        &[
            "ingest",
            "--measurements",
            "missing.csv",
            "--task",
            "grade",
            "-o",
            "x",
        ],
        p,
    );
    assert_eq!(out.status.code(), Some(2));
    fs::write(p.join("m.csv"), "egg_id,weight_g\nEGG-1,abc\n").unwrap();
    let out = eggq(
        &[
            "ingest",
            "--measurements",
            "m.csv",
            "--task",
            "grade",
            "-o",
            "x",
        ],
        p,
    );
    assert_eq!(out.status.code(), Some(2));
    let out = eggq(&["--help"], p);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn synth_ingest_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(&eggq(&["synth", "-o", "corpus"], p));
    ok(&eggq(&["extract-check", "corpus/features"], p));
    let out = eggq(
        &[
            "ingest",
            "--measurements",
            "corpus/measurements.csv",
            "--task",
            "freshness",
            "-o",
            "ing",
        ],
        p,
    );
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("186 rows"));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(p.join("ing/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["class_counts"], serde_json::json!([96, 90]));
    assert_eq!(summary["columns"], 2);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(p.join("ing/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "ingest");
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 1);
}

#[test]
fn evaluate_is_reproducible_and_reports_render() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(&eggq(&["synth", "-o", "corpus"], p));
    fs::write(p.join("small.toml"), SMALL).unwrap();
    for run in ["a", "b"] {
        ok(&eggq(
            &[
                "evaluate",
                "--config",
                "small.toml",
                "--corpus",
                "corpus",
                "--seed",
                "7",
                "-o",
                run,
                "--bundle",
            ],
            p,
        ));
    }
    for f in [
        "metrics/tabular/LogisticRegression.json",
        "metrics/multimodal_ResNet152/DecisionTree.json",
        "summary.json",
        "leaderboard.csv",
        "accuracy_table.csv",
        "roc.csv",
        "resolved_config.toml",
    ] {
        let a = fs::read(p.join("a").join(f)).unwrap_or_else(|e| panic!("{f}: {e}"));
        let b = fs::read(p.join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs between runs");
    }
    let resolved = fs::read_to_string(p.join("a/resolved_config.toml")).unwrap();
    assert!(resolved.contains("seed = 7") && resolved.contains("folds = 5"));
    let table = fs::read_to_string(p.join("a/accuracy_table.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);

    let m: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(p.join("a/metrics/tabular/LogisticRegression.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(m["mode"], "paper");
    assert_eq!(m["fold_accuracies"].as_array().unwrap().len(), 5);

    let out = eggq(&["report", "--run", "a", "--title", "Grade"], p);
    ok(&out);
    let svg = fs::read_to_string(p.join("a/roc.svg")).unwrap();
    assert_eq!(svg.matches("class=\"roc\"").count(), 2);
    assert!(svg.contains("class=\"chance\""));
    let conf = fs::read_to_string(p.join("a/confusion.svg")).unwrap();
    assert_eq!(conf.matches("class=\"cell\"").count(), 4);

    let out = eggq(
        &[
            "predict",
            "--bundle",
            "a/model.eggq",
            "--features",
            "corpus/features/ResNet152.csv",
            "--measurements",
            "corpus/measurements.csv",
            "-o",
            "pred.csv",
        ],
        p,
    );
    ok(&out);
    let pred = fs::read_to_string(p.join("pred.csv")).unwrap();
    assert_eq!(pred.lines().count(), 187);
}

#[test]
fn foldsafe_ensemble_keeps_test_rows_original() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let out = eggq(
        &[
            "ensemble",
            "--preset",
            "freshness-image",
            "--mode",
            "foldsafe",
            "--folds",
            "5",
            "-o",
            "ens",
        ],
        p,
    );
    ok(&out);
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(p.join("ens/metrics.json")).unwrap()).unwrap();
    assert_eq!(m["task"], "freshness");
    assert_eq!(m["ensemble"]["synthetic_in_test"], 0);
    assert_eq!(m["members"].as_array().unwrap().len(), 3);
    let preds = fs::read_to_string(p.join("ens/predictions.csv")).unwrap();
    assert_eq!(preds.lines().count(), 187);
    assert!(!preds.contains(",true\n"));
}
