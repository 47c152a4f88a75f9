use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use serde::Serialize;

use eggq_core::backbones::{check_dimensions, BACKBONES};
use eggq_core::corpus::{
    self, load_corpus, synthesize, write_synthetic, Corpus, SynthConfig, PUBLISHED_DIR_ENV,
};
use eggq_core::dataset::{
    build_labeled_dataset, fuse, load_bundle, load_feature_matrix, load_measurements, save_bundle,
    tabular_matrix, FeatureManifest, FusionOptions, TabularFeature,
};
use eggq_core::evaluation::report::{
    confusion_csv, leaderboard_csv, metrics_json, predictions_csv, roc_csv,
};
use eggq_core::evaluation::{EvaluationReport, RocCurve};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::manifest::{sha256_hex, RunDir};
use crate::study::{
    accuracy_table_csv, fit_bundle, prepare_column, run_preset_ensemble, run_study,
    standard_columns, Column, Modality,
};
use crate::svg::{confusion_svg, roc_svg, Curve};
use crate::{
    EnsembleArgs, EvaluateArgs, ExtractCheckArgs, IngestArgs, PredictArgs, ReportArgs, RunArgs,
    SynthArgs,
};

type CmdResult = Result<(), CliError>;

fn data_err(e: impl Into<anyhow::Error>) -> CliError {
    CliError::from(e.into())
}

/// Config file (or defaults) with command-line overrides applied.
fn resolve_config(
    run: &RunArgs,
    task_hint: Option<eggq_core::dataset::Task>,
) -> Result<RunConfig, CliError> {
    let mut cfg = match &run.config {
        Some(path) => RunConfig::load(path)?,
        None => {
            let task = run
                .task
                .or(task_hint)
                .ok_or_else(|| CliError::config("no task: pass --task or --config"))?;
            RunConfig::new(task)
        }
    };
    if let Some(t) = run.task {
        cfg.task = t;
    }
    if let Some(m) = run.mode {
        cfg.mode = m;
    }
    if let Some(s) = run.seed {
        cfg.seed = s;
    }
    if let Some(k) = run.folds {
        cfg.folds = k;
    }
    if let Some(c) = &run.corpus {
        cfg.data.corpus = Some(c.clone());
    }
    cfg.validate().map_err(CliError::config)?;
    Ok(cfg)
}

/// Loads the configured corpus and records its files as run inputs.
fn open_corpus(cfg: &RunConfig, out: &mut RunDir) -> Result<Corpus, CliError> {
    let dir = cfg
        .data
        .corpus
        .clone()
        .or_else(|| std::env::var_os(PUBLISHED_DIR_ENV).map(PathBuf::from));
    match dir {
        Some(dir) => {
            let c = load_corpus(&dir).map_err(data_err)?;
            out.add_input(&dir.join(corpus::MEASUREMENTS_FILE))?;
            for (name, _) in &c.features {
                let p = dir.join(corpus::FEATURES_DIR).join(format!("{name}.csv"));
                if p.exists() {
                    out.add_input(&p)?;
                }
            }
            Ok(c)
        }
        None => {
            let synth = SynthConfig::default();
            log::info!(
                "no corpus configured; using the synthetic corpus (seed {})",
                synth.seed
            );
            out.add_virtual_input(
                format!("synthetic:{}", synth.seed),
                sha256_hex(format!("{synth:?}").as_bytes()),
            );
            synthesize(&synth).map_err(data_err)
        }
    }
}

fn slug(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn ingest(a: &IngestArgs) -> CmdResult {
    let mut out = RunDir::create(&a.out, "ingest")?;
    let (table, image) = match &a.corpus {
        Some(dir) => {
            let c = load_corpus(dir).map_err(data_err)?;
            let image =
                match &a.extractor {
                    Some(name) => Some(c.extractor(name).cloned().ok_or_else(|| {
                        CliError::data(format!("corpus has no extractor `{name}`"))
                    })?),
                    None => None,
                };
            out.add_input(&dir.join(corpus::MEASUREMENTS_FILE))?;
            (c.table, image)
        }
        None => {
            let m = a.measurements.as_ref().expect("required by clap");
            let table = load_measurements(m).map_err(data_err)?;
            out.add_input(m)?;
            let image = match &a.features {
                Some(f) => {
                    let matrix = load_feature_matrix(f).map_err(data_err)?;
                    out.add_input(f)?;
                    Some(matrix)
                }
                None => None,
            };
            (table, image)
        }
    };
    let tabular: &[TabularFeature] = if a.image_only { &[] } else { &a.tabular };
    let matrix = match &image {
        Some(img) => fuse(img, &table, tabular, FusionOptions::default()).map_err(data_err)?,
        None if tabular.is_empty() => return Err(CliError::config("no features selected")),
        None => {
            tabular_matrix(&table, tabular, None, FusionOptions::default()).map_err(data_err)?
        }
    };
    let ds = build_labeled_dataset(&matrix, &table, a.task).map_err(data_err)?;
    let path = a.out.join("dataset.csv");
    ds.write_csv(&path).map_err(data_err)?;
    out.record("dataset.csv");

    #[derive(Serialize)]
    struct Excluded<'a> {
        row: usize,
        egg_id: &'a str,
        reason: String,
    }
    #[derive(Serialize)]
    struct Summary<'a> {
        task: String,
        rows: usize,
        columns: usize,
        class_names: [&'static str; 2],
        class_counts: [usize; 2],
        excluded: Vec<Excluded<'a>>,
    }
    let summary = Summary {
        task: a.task.to_string(),
        rows: ds.len(),
        columns: ds.features.ncols(),
        class_names: a.task.class_names(),
        class_counts: ds.class_counts(),
        excluded: table
            .exclusions()
            .iter()
            .map(|e| Excluded {
                row: e.row,
                egg_id: &e.egg_id,
                reason: e.reason.to_string(),
            })
            .collect(),
    };
    out.write(
        "summary.json",
        serde_json::to_string_pretty(&summary).map_err(anyhow::Error::from)? + "\n",
    )?;
    out.finish()?;
    println!("{}", ds.summary());
    Ok(())
}

#[derive(Serialize)]
struct CellSummary {
    column: String,
    family: String,
    params: String,
    mean_accuracy: f64,
    accuracy_augmented: f64,
    accuracy_original_rows: f64,
    auc: f64,
    synthetic_in_test: usize,
}

fn cell_summary(column: &Column, r: &EvaluationReport) -> CellSummary {
    let spec = r.spec.as_ref();
    CellSummary {
        column: column.label(),
        family: spec.map_or_else(String::new, |s| s.family.display_name().to_string()),
        params: spec.map_or_else(String::new, |s| s.params.to_string()),
        mean_accuracy: r.mean_accuracy,
        accuracy_augmented: r.accuracy_augmented,
        accuracy_original_rows: r.accuracy_original_rows,
        auc: r.roc.auc,
        synthetic_in_test: r.synthetic_in_test,
    }
}

pub fn evaluate(a: &EvaluateArgs) -> CmdResult {
    let mut cfg = resolve_config(&a.run, None)?;
    if let Some(g) = a.grid {
        cfg.search.grid = g;
    }
    let mut out = RunDir::create(&a.run.out, "evaluate")?;
    out.write_config(&cfg.to_toml(), cfg.seed)?;
    let corpus = open_corpus(&cfg, &mut out)?;
    let extractors: Vec<String> = if cfg.search.extractors.is_empty() {
        corpus.features.iter().map(|(n, _)| n.clone()).collect()
    } else {
        cfg.search.extractors.clone()
    };
    let families = cfg.families().map_err(CliError::config)?;
    let columns = standard_columns(&extractors, &cfg.search.modalities);
    let settings = cfg.settings();
    let study = run_study(&corpus, &columns, &families, cfg.search.grid, &settings)?;

    out.write("accuracy_table.csv", accuracy_table_csv(&study))?;
    let mut board = String::new();
    let mut cells = Vec::new();
    let task = cfg.task.to_string();
    for cell in &study.cells {
        let label = cell.column.label();
        let csv = leaderboard_csv(
            &[
                ("task", &task),
                ("column", &label),
                ("family", cell.family.display_name()),
            ],
            &cell.leaderboard,
        );
        if board.is_empty() {
            board.push_str(&csv);
        } else {
            board.extend(csv.lines().skip(1).map(|l| format!("{l}\n")));
        }
        out.write(
            &format!("metrics/{}/{}.json", slug(&label), slug(cell.family.name())),
            metrics_json(&cell.best) + "\n",
        )?;
        cells.push(cell_summary(&cell.column, &cell.best));
    }
    out.write("leaderboard.csv", board)?;

    // Best family per column for the ROC overlay.
    let mut curves: Vec<(String, &RocCurve)> = Vec::new();
    for c in &study.columns {
        let best = study
            .cells
            .iter()
            .filter(|x| &x.column == c)
            .max_by(|x, y| {
                x.best
                    .mean_accuracy
                    .total_cmp(&y.best.mean_accuracy)
                    .then(std::cmp::Ordering::Greater)
            });
        if let Some(b) = best {
            curves.push((b.best.name.clone(), &b.best.roc));
        }
    }
    let named: Vec<(&str, &RocCurve)> = curves.iter().map(|(n, c)| (n.as_str(), *c)).collect();
    out.write("roc.csv", roc_csv(&named))?;

    let overall = study
        .cells
        .iter()
        .filter(|c| c.column.modality != Modality::Tabular)
        .chain(
            study
                .cells
                .iter()
                .filter(|c| c.column.modality == Modality::Tabular),
        )
        .max_by(|x, y| {
            x.best
                .mean_accuracy
                .total_cmp(&y.best.mean_accuracy)
                .then(std::cmp::Ordering::Greater)
        })
        .expect("at least one cell");
    out.write(
        "confusion.csv",
        confusion_csv(&overall.best, cfg.task.class_names()),
    )?;

    #[derive(Serialize)]
    struct Summary {
        task: String,
        mode: String,
        seed: u64,
        folds: usize,
        grid: crate::study::GridChoice,
        pca_components: Vec<(String, Vec<usize>)>,
        best: CellSummary,
        cells: Vec<CellSummary>,
    }
    let summary = Summary {
        task: task.clone(),
        mode: cfg.mode.to_string(),
        seed: cfg.seed,
        folds: cfg.folds,
        grid: cfg.search.grid,
        pca_components: study.pca_components.clone(),
        best: cell_summary(&overall.column, &overall.best),
        cells,
    };
    out.write(
        "summary.json",
        serde_json::to_string_pretty(&summary).map_err(anyhow::Error::from)? + "\n",
    )?;

    if a.bundle {
        let spec = overall.best.spec.clone().expect("single-model report");
        let config_json = serde_json::to_value(&cfg).map_err(anyhow::Error::from)?;
        let bundle = fit_bundle(&corpus, &overall.column, &spec, &settings, config_json)?;
        save_bundle(&bundle, &a.run.out.join("model.eggq")).map_err(data_err)?;
        out.record("model.eggq");
    }
    out.finish()?;
    print!("{}", accuracy_table_csv(&study));
    Ok(())
}

pub fn ensemble(a: &EnsembleArgs) -> CmdResult {
    let mut cfg = resolve_config(&a.run, Some(a.preset.task()))?;
    if cfg.task != a.preset.task() {
        if a.run.task.is_some() {
            return Err(CliError::config(format!(
                "preset {} is for the {} task",
                a.preset,
                a.preset.task()
            )));
        }
        log::warn!("preset {} sets the task to {}", a.preset, a.preset.task());
        cfg.task = a.preset.task();
    }
    let mut out = RunDir::create(&a.run.out, "ensemble")?;
    out.write_config(&cfg.to_toml(), cfg.seed)?;
    let corpus = open_corpus(&cfg, &mut out)?;
    let spec = a.preset.spec(cfg.seed);
    let settings = cfg.settings();
    let report = run_preset_ensemble(&corpus, a.preset, &spec, &settings)?;

    #[derive(Serialize)]
    struct Metrics<'a> {
        preset: String,
        task: String,
        members: Vec<&'a EvaluationReport>,
        ensemble: &'a EvaluationReport,
    }
    let metrics = Metrics {
        preset: a.preset.to_string(),
        task: cfg.task.to_string(),
        members: report.members.iter().collect(),
        ensemble: &report.ensemble,
    };
    out.write(
        "metrics.json",
        serde_json::to_string_pretty(&metrics).map_err(anyhow::Error::from)? + "\n",
    )?;
    let mut curves: Vec<(&str, &RocCurve)> =
        vec![(report.ensemble.name.as_str(), &report.ensemble.roc)];
    curves.extend(report.members.iter().map(|m| (m.name.as_str(), &m.roc)));
    out.write("roc.csv", roc_csv(&curves))?;
    out.write(
        "confusion.csv",
        confusion_csv(&report.ensemble, cfg.task.class_names()),
    )?;
    // Row keys of the first member's folds; all members are aligned.
    let modality = if a.preset.multimodal() {
        Modality::Multimodal
    } else {
        Modality::Image
    };
    let keys = prepare_column(
        &corpus,
        &Column {
            modality,
            extractor: Some(spec.members[0].extractor.clone()),
        },
        &settings,
    )?
    .keys;
    out.write("predictions.csv", predictions_csv(&report.ensemble, &keys))?;
    out.finish()?;
    println!(
        "{}: mean accuracy {:.2}%, AUC {:.3}",
        report.ensemble.name,
        100.0 * report.ensemble.mean_accuracy,
        report.ensemble.roc.auc
    );
    for m in &report.members {
        println!("  {}: {:.2}%", m.name, 100.0 * m.mean_accuracy);
    }
    Ok(())
}

fn parse_roc_csv(text: &str) -> Result<Vec<Curve>, CliError> {
    let mut curves: Vec<Curve> = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.rsplitn(4, ',').collect();
        if f.len() != 4 {
            return Err(CliError::data(format!(
                "roc.csv line {}: expected 4 fields",
                i + 1
            )));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| CliError::data(format!("roc.csv line {}: bad number `{s}`", i + 1)))
        };
        let (tpr, fpr, name) = (num(f[0])?, num(f[1])?, f[3]);
        match curves.last_mut() {
            Some(c) if c.name == name => c.points.push((fpr, tpr)),
            _ => curves.push(Curve {
                name: name.to_string(),
                points: vec![(fpr, tpr)],
                auc: None,
            }),
        }
    }
    Ok(curves)
}

fn parse_confusion_csv(text: &str) -> Result<([String; 2], [[usize; 2]; 2]), CliError> {
    let rows: Vec<Vec<&str>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    if rows.len() != 4 || rows.iter().any(|r| r.len() != 4) {
        return Err(CliError::data("confusion.csv must have 4 rows of 4 fields"));
    }
    let names = [rows[0][0].to_string(), rows[3][0].to_string()];
    let mut counts = [[0; 2]; 2];
    for (k, r) in rows.iter().enumerate() {
        counts[k / 2][k % 2] = r[2]
            .parse()
            .map_err(|_| CliError::data(format!("confusion.csv: bad count `{}`", r[2])))?;
    }
    Ok((names, counts))
}

pub fn report(a: &ReportArgs) -> CmdResult {
    let out_dir = a.out.clone().unwrap_or_else(|| a.run.clone());
    fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let title = a.title.clone().unwrap_or_else(|| "ROC".into());
    let mut wrote = 0;
    let roc = a.run.join("roc.csv");
    if roc.exists() {
        let text =
            fs::read_to_string(&roc).with_context(|| format!("reading {}", roc.display()))?;
        let curves = parse_roc_csv(&text)?;
        fs::write(out_dir.join("roc.svg"), roc_svg(&title, &curves)).context("writing roc.svg")?;
        wrote += 1;
    }
    let conf = a.run.join("confusion.csv");
    if conf.exists() {
        let text =
            fs::read_to_string(&conf).with_context(|| format!("reading {}", conf.display()))?;
        let (names, counts) = parse_confusion_csv(&text)?;
        let t = a.title.clone().unwrap_or_else(|| "Confusion matrix".into());
        fs::write(
            out_dir.join("confusion.svg"),
            confusion_svg(&t, [&names[0], &names[1]], counts),
        )
        .context("writing confusion.svg")?;
        wrote += 1;
    }
    if wrote == 0 {
        return Err(CliError::data(format!(
            "{} has no roc.csv or confusion.csv",
            a.run.display()
        )));
    }
    println!("wrote {wrote} chart(s) to {}", out_dir.display());
    Ok(())
}

fn feature_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .with_context(|| format!("reading {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "csv"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    Ok(files)
}

pub fn extract_check(a: &ExtractCheckArgs) -> CmdResult {
    if a.list || a.paths.is_empty() {
        let mut stdout = std::io::stdout().lock();
        let _ = writeln!(stdout, "{:<20}{:>10}{:>6}", "backbone", "extracted", "pca");
        for b in BACKBONES {
            let _ = writeln!(
                stdout,
                "{:<20}{:>10}{:>6}",
                b.name, b.extracted, b.reference_pca
            );
        }
        if a.paths.is_empty() {
            return Ok(());
        }
    }
    let mut failed = 0;
    for path in feature_files(&a.paths)? {
        let matrix = load_feature_matrix(&path).map_err(data_err)?;
        let manifest = FeatureManifest::load_for(&path).map_err(data_err)?;
        let name = manifest.as_ref().map_or_else(
            || {
                path.file_stem()
                    .map_or_else(String::new, |s| s.to_string_lossy().into_owned())
            },
            |m| m.extractor.clone(),
        );
        let check = check_dimensions(&name, &matrix, manifest.as_ref());
        println!(
            "{} {:<20} {}",
            if check.ok { "ok  " } else { "FAIL" },
            check.extractor,
            check.message
        );
        failed += usize::from(!check.ok);
    }
    if failed > 0 {
        return Err(CliError::data(format!(
            "{failed} feature file(s) failed the dimension check"
        )));
    }
    Ok(())
}

pub fn synth(a: &SynthArgs) -> CmdResult {
    let mut cfg = SynthConfig::default();
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let mut out = RunDir::create(&a.out, "synth")?;
    for p in write_synthetic(&a.out, &cfg).map_err(data_err)? {
        let rel = p
            .strip_prefix(&a.out)
            .unwrap_or(&p)
            .to_string_lossy()
            .into_owned();
        out.record(&rel);
    }
    out.finish()?;
    println!(
        "wrote synthetic corpus (seed {}) to {}",
        cfg.seed,
        a.out.display()
    );
    Ok(())
}

fn tabular_suffix(expected: &[String], have: &[String]) -> Option<Vec<TabularFeature>> {
    if expected.len() < have.len() || expected[..have.len()] != *have {
        return None;
    }
    expected[have.len()..]
        .iter()
        .map(|c| c.parse().ok())
        .collect()
}

pub fn predict(a: &PredictArgs) -> CmdResult {
    let bundle = load_bundle(&a.bundle).map_err(data_err)?;
    let image = load_feature_matrix(&a.features).map_err(data_err)?;
    let matrix = if image.columns() == bundle.feature_columns.as_slice() {
        image
    } else {
        let spec = tabular_suffix(&bundle.feature_columns, image.columns()).ok_or_else(|| {
            CliError::data(format!(
                "feature columns do not match the bundle ({} expected, {} found)",
                bundle.feature_columns.len(),
                image.ncols()
            ))
        })?;
        let m = a.measurements.as_ref().ok_or_else(|| {
            CliError::config("bundle expects tabular columns: pass --measurements")
        })?;
        let table = load_measurements(m).map_err(data_err)?;
        let opts: FusionOptions = bundle
            .pipeline_config
            .get("data")
            .and_then(|d| d.get("standardize_tabular"))
            .and_then(|v| v.as_bool())
            .map(|s| FusionOptions {
                standardize_tabular: s,
            })
            .unwrap_or_default();
        fuse(&image, &table, &spec, opts).map_err(data_err)?
    };
    let proba = bundle
        .predict_proba(matrix.values().view())
        .map_err(data_err)?;
    let p = proba
        .first()
        .ok_or_else(|| anyhow!("bundle has no models"))?;
    let mut text = String::from("egg_id,p1,prediction\n");
    for (i, id) in matrix.egg_ids().iter().enumerate() {
        let label = &bundle.label_mapping[usize::from(p[[i, 1]] > p[[i, 0]])];
        text.push_str(&format!("{id},{},{label}\n", p[[i, 1]]));
    }
    write_file(&a.out, &text)?;
    println!("scored {} rows", matrix.nrows());
    Ok(())
}

fn write_file(path: &Path, text: &str) -> CmdResult {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
