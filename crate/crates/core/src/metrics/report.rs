use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use super::{
    argmax, auprc, auroc, confusion, det_curve, macro_average, per_class, point_metrics, pr_curve, roc_curve,
    PointMetrics,
};
use crate::error::{Error, Result};

pub type Curve = Vec<(f64, f64)>;

/// One-vs-rest scores of a single class.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassReport {
    pub name: String,
    pub auroc: f64,
    pub auprc: f64,
    pub metrics: PointMetrics,
}

/// Scalar metrics, confusion matrix and curves of one experiment. Curves are
/// keyed by series name: a single `"anomaly"` series for binary reports,
/// one series per class otherwise.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub auroc: f64,
    pub auprc: f64,
    pub metrics: PointMetrics,
    /// Decision threshold of binary reports.
    pub threshold: Option<f64>,
    pub confusion: Vec<Vec<usize>>,
    pub classes: Vec<ClassReport>,
    pub roc: Vec<(String, Curve)>,
    pub pr: Vec<(String, Curve)>,
    pub det: Vec<(String, Curve)>,
}

impl EvalReport {
    /// Binary report; `score ≥ threshold` predicts the positive class.
    pub fn binary(scores: &[f64], labels: &[bool], threshold: f64) -> Result<Self> {
        let metrics = point_metrics(scores, labels, threshold)?;
        let truth: Vec<usize> = labels.iter().map(|&l| l as usize).collect();
        let pred: Vec<usize> = scores.iter().map(|&s| (s >= threshold) as usize).collect();
        let name = "anomaly".to_string();
        Ok(EvalReport {
            auroc: auroc(scores, labels)?,
            auprc: auprc(scores, labels)?,
            metrics,
            threshold: Some(threshold),
            confusion: confusion(&truth, &pred, 2)?,
            classes: Vec::new(),
            roc: vec![(name.clone(), roc_curve(scores, labels)?)],
            pr: vec![(name.clone(), pr_curve(scores, labels)?)],
            det: vec![(name, det_curve(scores, labels)?)],
        })
    }

    /// Multi-class report from per-class probabilities. Areas are one-vs-rest
    /// per class and macro-averaged; point metrics are macro averages of
    /// the argmax prediction.
    pub fn multiclass(probs: &[Vec<f64>], truth: &[usize], names: &[&str]) -> Result<Self> {
        let m = names.len();
        if probs.len() != truth.len() {
            return Err(Error::Dimension {
                op: "multiclass report",
                axis: "samples",
                expected: probs.len(),
                found: truth.len(),
            });
        }
        if let Some(p) = probs.iter().find(|p| p.len() != m) {
            return Err(Error::Dimension { op: "multiclass report", axis: "classes", expected: m, found: p.len() });
        }
        let pred: Vec<usize> = probs.iter().map(|p| argmax(p)).collect();
        let mat = confusion(truth, &pred, m)?;
        let per = per_class(&mat);
        let mut rep = EvalReport {
            auroc: 0.0,
            auprc: 0.0,
            metrics: macro_average(&mat),
            threshold: None,
            confusion: mat,
            classes: Vec::new(),
            roc: Vec::new(),
            pr: Vec::new(),
            det: Vec::new(),
        };
        for (c, name) in names.iter().enumerate() {
            let scores: Vec<f64> = probs.iter().map(|p| p[c]).collect();
            let labels: Vec<bool> = truth.iter().map(|&t| t == c).collect();
            let cr = ClassReport {
                name: name.to_string(),
                auroc: auroc(&scores, &labels)?,
                auprc: auprc(&scores, &labels)?,
                metrics: per[c],
            };
            rep.roc.push((name.to_string(), roc_curve(&scores, &labels)?));
            rep.pr.push((name.to_string(), pr_curve(&scores, &labels)?));
            rep.det.push((name.to_string(), det_curve(&scores, &labels)?));
            rep.classes.push(cr);
        }
        rep.auroc = rep.classes.iter().map(|c| c.auroc).sum::<f64>() / m as f64;
        rep.auprc = rep.classes.iter().map(|c| c.auprc).sum::<f64>() / m as f64;
        Ok(rep)
    }

    pub fn to_json(&self) -> Value {
        let classes: Vec<Value> = self
            .classes
            .iter()
            .map(|c| {
                json!({
                    "name": c.name,
                    "auroc": c.auroc,
                    "auprc": c.auprc,
                    "recall": c.metrics.recall,
                    "precision": c.metrics.precision,
                    "f_score": c.metrics.f_score,
                })
            })
            .collect();
        json!({
            "auroc": self.auroc,
            "auprc": self.auprc,
            "recall": self.metrics.recall,
            "precision": self.metrics.precision,
            "f_score": self.metrics.f_score,
            "accuracy": self.metrics.accuracy,
            "zero_division": self.metrics.zero_division,
            "threshold": self.threshold,
            "confusion": self.confusion,
            "classes": classes,
            "curves": ["roc", "pr", "det"],
        })
    }

    /// Writes `{stem}.json` plus a CSV and an SVG chart per curve kind.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        fs::create_dir_all(dir)?;
        let json = serde_json::to_string_pretty(&self.to_json()).map_err(|e| Error::invalid(e.to_string()))?;
        fs::write(dir.join(format!("{stem}.json")), json + "\n")?;
        let kinds = [
            ("roc", &self.roc, ("fpr", "tpr"), false),
            ("pr", &self.pr, ("recall", "precision"), false),
            ("det", &self.det, ("fpr", "fnr"), true),
        ];
        for (kind, series, (x, y), log) in kinds {
            fs::write(dir.join(format!("{stem}_{kind}.csv")), curves_csv(series, x, y))?;
            let title = format!("{} ({stem})", kind.to_uppercase());
            fs::write(dir.join(format!("{stem}_{kind}.svg")), svg_line_chart(&title, series, (x, y), log))?;
        }
        Ok(())
    }
}

/// Long-format CSV: `series,x,y`.
pub fn curves_csv(series: &[(String, Curve)], x: &str, y: &str) -> String {
    let mut out = format!("series,{x},{y}\n");
    for (name, pts) in series {
        for (a, b) in pts {
            let _ = writeln!(out, "{name},{a},{b}");
        }
    }
    out
}

const W: f64 = 480.0;
const H: f64 = 360.0;
const MARGIN: f64 = 48.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];
const LOG_FLOOR: f64 = 1e-4;

/// Minimal SVG line chart on the unit square. With `log`, both axes are
/// log10 over `[1e-4, 1]` and smaller values are clamped to the floor.
pub fn svg_line_chart(title: &str, series: &[(String, Curve)], labels: (&str, &str), log: bool) -> String {
    let map = |v: f64| {
        if log {
            (v.max(LOG_FLOOR).log10() - LOG_FLOOR.log10()) / -LOG_FLOOR.log10()
        } else {
            v
        }
    };
    let px = |v: f64| MARGIN + map(v) * (W - 2.0 * MARGIN);
    let py = |v: f64| H - MARGIN - map(v) * (H - 2.0 * MARGIN);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#, W / 2.0, escape(title));
    let (x0, x1, y0, y1) =
        (px(if log { LOG_FLOOR } else { 0.0 }), px(1.0), py(if log { LOG_FLOOR } else { 0.0 }), py(1.0));
    let _ =
        writeln!(s, r#"<rect x="{x0}" y="{y1}" width="{}" height="{}" fill="none" stroke="black"/>"#, x1 - x0, y0 - y1);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 12.0, escape(labels.0));
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(labels.1)
    );
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ =
            writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            x1 - 90.0,
            y1 + 16.0 * (i + 1) as f64,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
