//! Minimal SVG charts: ROC curves and a 2×2 confusion heatmap.

use std::fmt::Write;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// A named curve as `(fpr, tpr)` points.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub auc: Option<f64>,
}

/// Trapezoid area under `(fpr, tpr)` points sorted by the caller.
pub fn trapezoid(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum()
}

pub fn roc_svg(title: &str, curves: &[Curve]) -> String {
    let (w, h) = (560.0, 520.0);
    let (x0, y0, side) = (70.0, 40.0, 400.0);
    let px = |fpr: f64| x0 + fpr * side;
    let py = |tpr: f64| y0 + (1.0 - tpr) * side;
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        x0 + side / 2.0,
        escape(title)
    )
    .unwrap();
    writeln!(
        s,
        r#"<rect x="{x0}" y="{y0}" width="{side}" height="{side}" fill="none" stroke="black"/>"#
    )
    .unwrap();
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{v:.1}</text>"#,
            px(v),
            y0 + side + 18.0
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{v:.1}</text>"#,
            x0 - 6.0,
            py(v) + 4.0
        )
        .unwrap();
        if i > 0 && i < 5 {
            writeln!(
                s,
                r##"<line x1="{0}" y1="{y0}" x2="{0}" y2="{1}" stroke="#e0e0e0"/>"##,
                px(v),
                y0 + side
            )
            .unwrap();
            writeln!(
                s,
                r##"<line x1="{x0}" y1="{0}" x2="{1}" y2="{0}" stroke="#e0e0e0"/>"##,
                py(v),
                x0 + side
            )
            .unwrap();
        }
    }
    writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">False positive rate</text>"#,
        x0 + side / 2.0,
        y0 + side + 38.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">True positive rate</text>"#,
        y0 + side / 2.0
    )
    .unwrap();
    writeln!(
        s,
        r##"<line class="chance" x1="{}" y1="{}" x2="{}" y2="{}" stroke="#888" stroke-dasharray="6 4"/>"##,
        px(0.0),
        py(0.0),
        px(1.0),
        py(1.0)
    )
    .unwrap();
    for (k, c) in curves.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = c
            .points
            .iter()
            .map(|&(f, t)| format!("{:.2},{:.2}", px(f), py(t)))
            .collect();
        writeln!(
            s,
            r#"<polyline class="roc" fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            pts.join(" ")
        )
        .unwrap();
        let auc = c.auc.unwrap_or_else(|| trapezoid(&c.points));
        let ly = y0 + side - 12.0 - 18.0 * (curves.len() - 1 - k) as f64;
        writeln!(
            s,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="3"/>"#,
            x0 + side * 0.45,
            x0 + side * 0.45 + 20.0
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{}" y="{}">{} (AUC {auc:.3})</text>"#,
            x0 + side * 0.45 + 26.0,
            ly + 4.0,
            escape(&c.name)
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

/// `counts[true][predicted]`; cells are shaded by row percentage.
pub fn confusion_svg(title: &str, class_names: [&str; 2], counts: [[usize; 2]; 2]) -> String {
    let (cell, x0, y0) = (140.0, 130.0, 60.0);
    let (w, h) = (x0 + 2.0 * cell + 40.0, y0 + 2.0 * cell + 70.0);
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="13">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<text x="{}" y="26" text-anchor="middle" font-size="15">{}</text>"#,
        x0 + cell,
        escape(title)
    )
    .unwrap();
    for t in 0..2 {
        let row: usize = counts[t].iter().sum();
        for (p, &n) in counts[t].iter().enumerate() {
            let pct = if row > 0 {
                100.0 * n as f64 / row as f64
            } else {
                0.0
            };
            // white to dark blue
            let a = pct / 100.0;
            let (r, g, b) = (
                (255.0 - a * (255.0 - 8.0)) as u8,
                (255.0 - a * (255.0 - 48.0)) as u8,
                (255.0 - a * (255.0 - 107.0)) as u8,
            );
            let (x, y) = (x0 + p as f64 * cell, y0 + t as f64 * cell);
            let ink = if a > 0.5 { "white" } else { "black" };
            writeln!(
                s,
                r##"<rect class="cell" x="{x}" y="{y}" width="{cell}" height="{cell}" fill="#{r:02x}{g:02x}{b:02x}" stroke="white"/>"##
            )
            .unwrap();
            writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="middle" fill="{ink}" font-size="18">{}</text>"#,
                x + cell / 2.0,
                y + cell / 2.0,
                n
            )
            .unwrap();
            writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="middle" fill="{ink}">{pct:.2}%</text>"#,
                x + cell / 2.0,
                y + cell / 2.0 + 22.0
            )
            .unwrap();
        }
        writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            x0 - 8.0,
            y0 + t as f64 * cell + cell / 2.0,
            escape(class_names[t])
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            x0 + t as f64 * cell + cell / 2.0,
            y0 + 2.0 * cell + 20.0,
            escape(class_names[t])
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">Predicted</text>"#,
        x0 + cell,
        y0 + 2.0 * cell + 44.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="30" y="{0}" text-anchor="middle" transform="rotate(-90 30 {0})">True</text>"#,
        y0 + cell
    )
    .unwrap();
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roc_has_diagonal_and_one_polyline_per_curve() {
        let curves = vec![
            Curve {
                name: "a".into(),
                points: vec![(0.0, 0.0), (0.2, 0.8), (1.0, 1.0)],
                auc: None,
            },
            Curve {
                name: "b & c".into(),
                points: vec![(0.0, 0.0), (1.0, 1.0)],
                auc: Some(0.5),
            },
        ];
        let svg = roc_svg("ROC", &curves);
        assert_eq!(svg.matches("class=\"chance\"").count(), 1);
        assert_eq!(svg.matches("class=\"roc\"").count(), 2);
        assert!(svg.contains("b &amp; c (AUC 0.500)"));
        assert!(svg.contains("(AUC 0.800)"));
    }

    #[test]
    fn heatmap_cells() {
        let svg = confusion_svg("Grade", ["Low", "High"], [[35, 1], [5, 31]]);
        assert_eq!(svg.matches("class=\"cell\"").count(), 4);
        assert!(svg.contains("97.22%"));
        assert!(svg.contains("2.78%"));
    }
}
