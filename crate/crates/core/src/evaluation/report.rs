//! Text renderings of evaluation results: metrics JSON and CSV tables.

use std::fmt::Write;

use super::cv::EvaluationReport;
use super::metrics::RocCurve;
use super::search::LeaderboardEntry;

/// Pretty JSON of a report without the per-row predictions.
pub fn metrics_json(report: &EvaluationReport) -> String {
    serde_json::to_string_pretty(report).expect("report serializes")
}

/// `true,predicted,count,percent` for the four cells.
pub fn confusion_csv(report: &EvaluationReport, class_names: [&str; 2]) -> String {
    let mut out = String::from("true,predicted,count,percent\n");
    for t in 0..2 {
        for p in 0..2 {
            writeln!(
                out,
                "{},{},{},{}",
                class_names[t],
                class_names[p],
                report.confusion.counts[t][p],
                report.confusion_percent[t][p]
            )
            .unwrap();
        }
    }
    out
}

/// Long-format ROC points for several named curves.
pub fn roc_csv(curves: &[(&str, &RocCurve)]) -> String {
    let mut out = String::from("curve,threshold,fpr,tpr\n");
    for (name, c) in curves {
        for p in &c.points {
            writeln!(out, "{},{},{},{}", name, p.threshold, p.fpr, p.tpr).unwrap();
        }
    }
    out
}

/// Row id, label, prediction, class-1 probability and synthetic flag.
pub fn predictions_csv(report: &EvaluationReport, keys: &[String]) -> String {
    let mut out = String::from("row,label,prediction,p1,synthetic\n");
    let oof = &report.oof;
    for i in 0..oof.labels.len() {
        let key = keys.get(i).map_or_else(|| i.to_string(), |k| k.clone());
        writeln!(
            out,
            "{},{},{},{},{}",
            key, oof.labels[i], oof.predictions[i], oof.scores[i], oof.synthetic[i]
        )
        .unwrap();
    }
    out
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One row per grid cell; `prefix` columns come first on every row.
pub fn leaderboard_csv(prefix: &[(&str, &str)], entries: &[LeaderboardEntry]) -> String {
    let mut out = String::new();
    for (k, _) in prefix {
        write!(out, "{k},").unwrap();
    }
    out.push_str("rank,params,mean_accuracy,accuracy_original_rows,auc\n");
    let mut order: Vec<usize> = (0..entries.len()).collect();
    order.sort_by(|&a, &b| super::search::compare_entries(&entries[a], &entries[b]));
    for (rank, &i) in order.iter().enumerate() {
        let e = &entries[i];
        for (_, v) in prefix {
            write!(out, "{},", quote(v)).unwrap();
        }
        writeln!(
            out,
            "{},{},{},{},{}",
            rank + 1,
            quote(&e.params.to_string()),
            e.mean_accuracy,
            e.accuracy_original_rows,
            e.auc
        )
        .unwrap();
    }
    out
}
