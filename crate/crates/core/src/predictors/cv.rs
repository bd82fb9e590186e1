//! k-fold cross-validation with pooled out-of-fold predictions.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    binary_labels, classification_metrics, logistic_fit, naive_bayes_fit, ols_fit, regression_metrics,
    ClassificationMetrics, Features, LogisticOptions, PredictError,
};
use crate::exec::Exec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Ols,
    Logistic,
    NaiveBayes,
}

impl ModelKind {
    pub fn is_classifier(self) -> bool {
        !matches!(self, ModelKind::Ols)
    }

    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Ols => "ols",
            ModelKind::Logistic => "logistic",
            ModelKind::NaiveBayes => "naive_bayes",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvOptions {
    pub k: usize,
    pub seed: u64,
    /// Positive-class probability threshold for classifiers.
    pub threshold: f64,
    pub ridge: f64,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self { k: 10, seed: 0, threshold: 0.5, ridge: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub rmse: Option<f64>,
    pub mae: Option<f64>,
    /// Classifier metrics, when the test fold holds both classes.
    pub auc: Option<f64>,
    pub f1: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: ModelKind,
    pub features: Vec<String>,
    pub k: usize,
    pub seed: u64,
    pub n: usize,
    /// Fold index of every row.
    pub folds: Vec<usize>,
    /// Pooled out-of-fold predictions (probabilities for classifiers).
    pub predictions: Vec<f64>,
    pub rmse: Option<f64>,
    pub mae: Option<f64>,
    pub auc: Option<f64>,
    pub f1: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub classification: Option<ClassificationMetrics>,
    pub per_fold: Vec<FoldMetrics>,
}

/// Seeded shuffle into `k` folds whose sizes differ by at most one.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![0; n];
    for (pos, &row) in perm.iter().enumerate() {
        folds[row] = pos * k / n;
    }
    folds
}

fn fit_predict(
    kind: ModelKind,
    y: &[f64],
    train: &Features,
    test: &Features,
    ridge: f64,
) -> Result<Vec<f64>, PredictError> {
    match kind {
        ModelKind::Ols => ols_fit(y, train)?.predict(test),
        ModelKind::Logistic => {
            let opts = LogisticOptions { ridge, ..Default::default() };
            logistic_fit(&binary_labels(y)?, train, &opts)?.predict_proba(test)
        }
        ModelKind::NaiveBayes => naive_bayes_fit(&binary_labels(y)?, train)?.predict_proba(test),
    }
}

pub fn cross_validate(
    kind: ModelKind,
    y: &[f64],
    x: &Features,
    opts: &CvOptions,
    exec: Exec,
) -> Result<EvalReport, PredictError> {
    let n = y.len();
    x.check_rows(n)?;
    let k = opts.k;
    if k < 2 || k > n {
        return Err(PredictError::Config(format!("k = {k} must lie in [2, {n}]")));
    }
    let labels = if kind.is_classifier() { Some(binary_labels(y)?) } else { None };
    let folds = fold_assignment(n, k, opts.seed);

    let results = exec.map_range(k, |f| -> Result<(Vec<usize>, Vec<f64>, usize), PredictError> {
        let train: Vec<usize> = (0..n).filter(|&i| folds[i] != f).collect();
        let test: Vec<usize> = (0..n).filter(|&i| folds[i] == f).collect();
        let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        if kind.is_classifier() {
            for class in [0u8, 1] {
                if !y_train.iter().any(|&v| v == f64::from(class)) {
                    return Err(PredictError::Fold { fold: f, class });
                }
            }
        }
        let pred = fit_predict(kind, &y_train, &x.subset(&train), &x.subset(&test), opts.ridge)?;
        Ok((test, pred, train.len()))
    });

    let mut predictions = vec![0.0; n];
    let mut per_fold = Vec::with_capacity(k);
    for (f, res) in results.into_iter().enumerate() {
        let (test, pred, n_train) = res?;
        for (&i, &p) in test.iter().zip(&pred) {
            predictions[i] = p;
        }
        let obs: Vec<f64> = test.iter().map(|&i| y[i]).collect();
        let mut fm = FoldMetrics {
            fold: f,
            n_train,
            n_test: test.len(),
            rmse: None,
            mae: None,
            auc: None,
            f1: None,
            precision: None,
            recall: None,
        };
        match &labels {
            None => {
                let (r, m) = regression_metrics(&pred, &obs);
                fm.rmse = Some(r);
                fm.mae = Some(m);
            }
            Some(l) => {
                let fold_labels: Vec<bool> = test.iter().map(|&i| l[i]).collect();
                if let Ok(cm) = classification_metrics(&pred, &fold_labels, opts.threshold) {
                    fm.auc = Some(cm.auc);
                    fm.f1 = Some(cm.f1);
                    fm.precision = Some(cm.precision);
                    fm.recall = Some(cm.recall);
                }
            }
        }
        per_fold.push(fm);
    }

    let mut report = EvalReport {
        model: kind,
        features: x.names.clone(),
        k,
        seed: opts.seed,
        n,
        folds,
        predictions,
        rmse: None,
        mae: None,
        auc: None,
        f1: None,
        precision: None,
        recall: None,
        classification: None,
        per_fold,
    };
    match &labels {
        None => {
            let (r, m) = regression_metrics(&report.predictions, y);
            report.rmse = Some(r);
            report.mae = Some(m);
        }
        Some(l) => {
            let cm = classification_metrics(&report.predictions, l, opts.threshold)?;
            report.auc = Some(cm.auc);
            report.f1 = Some(cm.f1);
            report.precision = Some(cm.precision);
            report.recall = Some(cm.recall);
            report.classification = Some(cm);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_are_near_equal_and_seeded() {
        let a = fold_assignment(77, 10, 3);
        assert_eq!(a, fold_assignment(77, 10, 3));
        let mut sizes = [0; 10];
        for f in &a {
            sizes[*f] += 1;
        }
        assert!(sizes.iter().all(|&s| s == 7 || s == 8));
        assert_ne!(a, fold_assignment(77, 10, 4));
    }

    #[test]
    fn noiseless_line_has_zero_error() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.37).collect();
        let y: Vec<f64> = xs.iter().map(|v| 3.0 - 2.0 * v).collect();
        let x = Features::new(vec!["x".into()], vec![xs]).unwrap();
        for k in [2, 5, 20] {
            let r = cross_validate(ModelKind::Ols, &y, &x, &CvOptions { k, ..Default::default() }, Exec::Sequential)
                .unwrap();
            assert!(r.rmse.unwrap() < 1e-10 && r.mae.unwrap() < 1e-10);
        }
    }

    #[test]
    fn missing_training_class_is_a_fold_error() {
        let y = [1.0, 0.0, 1.0, 1.0];
        let x = Features::new(vec!["x".into()], vec![vec![0.1, 0.2, 0.3, 0.4]]).unwrap();
        let err =
            cross_validate(ModelKind::NaiveBayes, &y, &x, &CvOptions { k: 4, ..Default::default() }, Exec::Sequential)
                .unwrap_err();
        assert!(matches!(err, PredictError::Fold { class: 0, .. }));
    }
}
