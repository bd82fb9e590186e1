use serde::{Deserialize, Serialize};

use super::PredictError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub auc: f64,
    /// Support-weighted over both classes.
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub negative: ClassMetrics,
    pub positive: ClassMetrics,
    pub confusion: Confusion,
    pub threshold: f64,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn class_metrics(hit: usize, false_pos: usize, false_neg: usize) -> ClassMetrics {
    let precision = ratio(hit, hit + false_pos);
    let recall = ratio(hit, hit + false_neg);
    let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    ClassMetrics { precision, recall, f1, support: hit + false_neg }
}

/// Area under the ROC curve from average ranks (ties count one half).
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64, PredictError> {
    if scores.len() != labels.len() {
        return Err(PredictError::Shape("scores and labels differ in length".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(PredictError::Domain("AUC needs both classes".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(PredictError::Domain("NaN score".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += avg_rank * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// ROC points `(threshold, fpr, tpr)` from the highest score down; the
/// first point is `(inf, 0, 0)` and tied scores move together.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<(f64, f64, f64)>, PredictError> {
    auc(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(f64::INFINITY, 0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    for (pos, &i) in order.iter().enumerate() {
        if labels[i] {
            tp += 1;
        } else {
            fp += 1;
        }
        if order.get(pos + 1).is_none_or(|&j| scores[j] != scores[i]) {
            points.push((scores[i], fp as f64 / n_neg, tp as f64 / n_pos));
        }
    }
    Ok(points)
}

/// AUC plus per-class and support-weighted precision, recall and F1 with
/// `score >= threshold` predicting the positive class.
pub fn classification_metrics(
    scores: &[f64],
    labels: &[bool],
    threshold: f64,
) -> Result<ClassificationMetrics, PredictError> {
    let auc = auc(scores, labels)?;
    let mut c = Confusion { tp: 0, fp: 0, tn: 0, fn_: 0 };
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    let positive = class_metrics(c.tp, c.fp, c.fn_);
    let negative = class_metrics(c.tn, c.fn_, c.fp);
    let n = labels.len() as f64;
    let weighted = |f: fn(&ClassMetrics) -> f64| {
        (f(&positive) * positive.support as f64 + f(&negative) * negative.support as f64) / n
    };
    Ok(ClassificationMetrics {
        auc,
        precision: weighted(|m| m.precision),
        recall: weighted(|m| m.recall),
        f1: weighted(|m| m.f1),
        negative,
        positive,
        confusion: c,
        threshold,
    })
}

/// `(rmse, mae)`.
pub fn regression_metrics(predicted: &[f64], observed: &[f64]) -> (f64, f64) {
    let n = observed.len() as f64;
    let (sq, abs) =
        predicted.iter().zip(observed).fold((0.0, 0.0), |(s, a), (p, o)| (s + (p - o).powi(2), a + (p - o).abs()));
    ((sq / n).sqrt(), abs / n)
}
