//! Ranking curves, point metrics, confusion matrices and fold splits.
//!
//! Binary inputs are parallel slices of scores and labels, where `true`
//! marks the positive (anomalous) class and higher scores mean "more
//! positive".

mod folds;
mod report;

pub use folds::{kfold, mean_std, Fold};
pub use report::{curves_csv, svg_line_chart, ClassReport, EvalReport};

use crate::error::{Error, Result};

fn check_pair(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension { op: "metrics", axis: "samples", expected: scores.len(), found: labels.len() });
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::invalid(format!("score {i} is not finite")));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    Ok((pos, labels.len() - pos))
}

fn both_classes(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    let (p, n) = check_pair(scores, labels)?;
    if p == 0 || n == 0 {
        return Err(Error::invalid("curve metrics need at least one positive and one negative"));
    }
    Ok((p, n))
}

/// Area under the ROC curve from the Mann-Whitney rank statistic; tied
/// scores receive their average rank.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (p, n) = both_classes(scores, labels)?;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        // Ranks i+1..=j+1 share their mean.
        let avg = (i + j + 2) as f64 / 2.0;
        rank_sum += avg * idx[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let u = rank_sum - (p * (p + 1)) as f64 / 2.0;
    Ok(u / (p as f64 * n as f64))
}

/// Confusion counts at one threshold step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub threshold: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl CurvePoint {
    pub fn tpr(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn fpr(&self) -> f64 {
        ratio(self.fp, self.fp + self.tn)
    }

    pub fn fnr(&self) -> f64 {
        ratio(self.fn_, self.tp + self.fn_)
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Sweeps every distinct score from high to low, predicting positive when
/// `score ≥ threshold`. The first point is the empty prediction at `+∞`.
pub fn sweep(scores: &[f64], labels: &[bool]) -> Result<Vec<CurvePoint>> {
    let (p, n) = check_pair(scores, labels)?;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut pts = vec![CurvePoint { threshold: f64::INFINITY, tp: 0, fp: 0, fn_: p, tn: n }];
    let (mut tp, mut fp) = (0, 0);
    let mut i = 0;
    while i < idx.len() {
        let t = scores[idx[i]];
        while i < idx.len() && scores[idx[i]] == t {
            if labels[idx[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        pts.push(CurvePoint { threshold: t, tp, fp, fn_: p - tp, tn: n - fp });
    }
    Ok(pts)
}

/// ROC points `(FPR, TPR)` from `(0, 0)` to `(1, 1)`.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<(f64, f64)>> {
    both_classes(scores, labels)?;
    Ok(sweep(scores, labels)?.iter().map(|c| (c.fpr(), c.tpr())).collect())
}

/// Precision-recall points `(recall, precision)` at each distinct threshold.
pub fn pr_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<(f64, f64)>> {
    let (p, _) = check_pair(scores, labels)?;
    if p == 0 {
        return Err(Error::invalid("precision-recall needs at least one positive"));
    }
    Ok(sweep(scores, labels)?.iter().skip(1).map(|c| (c.tpr(), c.precision())).collect())
}

/// Area under the precision-recall curve with step interpolation:
/// `Σ (R_k − R_{k−1}) · P_k` over distinct thresholds.
pub fn auprc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let curve = pr_curve(scores, labels)?;
    let mut prev_r = 0.0;
    let mut area = 0.0;
    for (r, p) in curve {
        area += (r - prev_r) * p;
        prev_r = r;
    }
    Ok(area)
}

/// Detection-error tradeoff points `(FPR, FNR)`, FPR non-decreasing.
pub fn det_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<(f64, f64)>> {
    both_classes(scores, labels)?;
    Ok(sweep(scores, labels)?.iter().map(|c| (c.fpr(), c.fnr())).collect())
}

/// Threshold metrics. `zero_division` is set when precision or recall had
/// an empty denominator and was reported as 0.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PointMetrics {
    pub recall: f64,
    pub precision: f64,
    pub f_score: f64,
    pub accuracy: f64,
    pub zero_division: bool,
}

pub fn f_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Metrics of the rule `score ≥ threshold ⇒ positive`.
pub fn point_metrics(scores: &[f64], labels: &[bool], threshold: f64) -> Result<PointMetrics> {
    check_pair(scores, labels)?;
    let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let zero_division = tp + fp == 0 || tp + fn_ == 0;
    let recall = ratio(tp, tp + fn_);
    let precision = ratio(tp, tp + fp);
    Ok(PointMetrics {
        recall,
        precision,
        f_score: f_score(precision, recall),
        accuracy: ratio(tp + tn, scores.len()),
        zero_division,
    })
}

/// The score threshold that maximizes the f-score; ties go to the higher
/// threshold.
pub fn best_f_threshold(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let pts = sweep(scores, labels)?;
    let mut best = (f64::NEG_INFINITY, f64::INFINITY);
    for c in pts.iter().skip(1) {
        let f = f_score(c.precision(), c.tpr());
        if f > best.0 {
            best = (f, c.threshold);
        }
    }
    if best.0 == f64::NEG_INFINITY {
        return Err(Error::invalid("threshold selection needs at least one score"));
    }
    Ok(best.1)
}

/// `m × m` matrix, rows indexed by true label, columns by prediction.
pub fn confusion(truth: &[usize], pred: &[usize], m: usize) -> Result<Vec<Vec<usize>>> {
    if truth.len() != pred.len() {
        return Err(Error::Dimension { op: "confusion", axis: "samples", expected: truth.len(), found: pred.len() });
    }
    let mut mat = vec![vec![0; m]; m];
    for (&t, &p) in truth.iter().zip(pred) {
        if t >= m || p >= m {
            return Err(Error::invalid(format!("label {} out of range for {m} classes", t.max(p))));
        }
        mat[t][p] += 1;
    }
    Ok(mat)
}

/// Per-class recall, precision and f-score from a confusion matrix.
pub fn per_class(mat: &[Vec<usize>]) -> Vec<PointMetrics> {
    let m = mat.len();
    let total: usize = mat.iter().flatten().sum();
    (0..m)
        .map(|c| {
            let tp = mat[c][c];
            let support: usize = mat[c].iter().sum();
            let predicted: usize = mat.iter().map(|r| r[c]).sum();
            let recall = ratio(tp, support);
            let precision = ratio(tp, predicted);
            let tn = total + tp - support - predicted;
            PointMetrics {
                recall,
                precision,
                f_score: f_score(precision, recall),
                accuracy: ratio(tp + tn, total),
                zero_division: support == 0 || predicted == 0,
            }
        })
        .collect()
}

/// Unweighted mean over classes of recall, precision and f-score; accuracy
/// is `trace / total`.
pub fn macro_average(mat: &[Vec<usize>]) -> PointMetrics {
    let per = per_class(mat);
    let m = per.len().max(1) as f64;
    let total: usize = mat.iter().flatten().sum();
    let trace: usize = (0..mat.len()).map(|i| mat[i][i]).sum();
    PointMetrics {
        recall: per.iter().map(|p| p.recall).sum::<f64>() / m,
        precision: per.iter().map(|p| p.precision).sum::<f64>() / m,
        f_score: per.iter().map(|p| p.f_score).sum::<f64>() / m,
        accuracy: ratio(trace, total),
        zero_division: per.iter().any(|p| p.zero_division),
    }
}

/// Index of the largest entry; ties resolve to the smallest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_separation() {
        let s = [0.9, 0.8, 0.1, 0.2];
        let l = [true, true, false, false];
        assert_eq!(auroc(&s, &l).unwrap(), 1.0);
        assert_eq!(auprc(&s, &l).unwrap(), 1.0);
        assert!(det_curve(&s, &l).unwrap().contains(&(0.0, 0.0)));
    }

    #[test]
    fn all_equal_scores() {
        let s = [0.3; 5];
        let l = [true, false, false, true, false];
        assert_eq!(auroc(&s, &l).unwrap(), 0.5);
        assert!((auprc(&s, &l).unwrap() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn single_class_rejected() {
        assert!(auroc(&[0.1, 0.2], &[true, true]).is_err());
        assert!(det_curve(&[0.1, 0.2], &[false, false]).is_err());
        assert!(auprc(&[0.1, 0.2], &[false, false]).is_err());
    }

    #[test]
    fn point_metric_edges() {
        let s = [0.2, 0.4, 0.6];
        let l = [false, true, true];
        assert_eq!(point_metrics(&s, &l, 0.0).unwrap().recall, 1.0);
        let none = point_metrics(&s, &l, 1.0).unwrap();
        assert_eq!(none.precision, 0.0);
        assert!(none.zero_division);
        assert!((f_score(0.856, 0.954) - 0.902).abs() < 5e-4);
    }

    #[test]
    fn confusion_layout() {
        let t = [0, 0, 1, 2, 2];
        let p = [0, 1, 1, 2, 0];
        let m = confusion(&t, &p, 3).unwrap();
        assert_eq!(m, vec![vec![1, 1, 0], vec![0, 1, 0], vec![1, 0, 1]]);
        assert!(confusion(&[3], &[0], 3).is_err());
        let d = confusion(&t, &t, 3).unwrap();
        assert_eq!(d[0][0] + d[1][1] + d[2][2], 5);
    }

    #[test]
    fn argmax_prefers_smaller_index() {
        assert_eq!(argmax(&[0.4, 0.4, 0.2]), 0);
        assert_eq!(argmax(&[0.1, 0.5, 0.5]), 1);
    }
}
