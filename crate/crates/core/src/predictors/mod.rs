//! Regression and classification models for sleep efficiency and quality,
//! with cross-validation and evaluation metrics.

mod cv;
mod logistic;
mod metrics;
mod naive_bayes;
mod ols;
mod partial;

pub use cv::{cross_validate, fold_assignment, CvOptions, EvalReport, FoldMetrics, ModelKind};
pub use logistic::{logistic_fit, logistic_gradient, logistic_log_likelihood, LogisticFit, LogisticOptions};
pub use metrics::{
    auc, classification_metrics, regression_metrics, roc_curve, ClassMetrics, ClassificationMetrics, Confusion,
};
pub use naive_bayes::{naive_bayes_fit, ClassModel, NaiveBayesFit, VARIANCE_FLOOR};
pub use ols::{ols_fit, RegressionFit};
pub use partial::{partial_correlation, PartialCorrelation};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PredictError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("design matrix is rank deficient")]
    Singular,
    #[error("perfect separation along {}", fmt_direction(.direction))]
    Separation { direction: Vec<(String, f64)> },
    #[error("{0}")]
    Domain(String),
    #[error("training data for fold {fold} lacks class {class}")]
    Fold { fold: usize, class: u8 },
    #[error("invalid configuration: {0}")]
    Config(String),
}

fn fmt_direction(d: &[(String, f64)]) -> String {
    d.iter().map(|(n, v)| format!("{n}={v:+.3}")).collect::<Vec<_>>().join(", ")
}

/// Named predictor columns of equal length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Features {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Features {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self, PredictError> {
        if names.len() != columns.len() {
            return Err(PredictError::Shape("one name per column required".into()));
        }
        if let Some(first) = columns.first() {
            if columns.iter().any(|c| c.len() != first.len()) {
                return Err(PredictError::Shape("columns differ in length".into()));
            }
        }
        if columns.iter().flatten().any(|v| !v.is_finite()) {
            return Err(PredictError::Shape("non-finite predictor value".into()));
        }
        Ok(Self { names, columns })
    }

    pub fn p(&self) -> usize {
        self.columns.len()
    }

    /// Row count, if any column exists.
    pub fn rows(&self) -> Option<usize> {
        self.columns.first().map(Vec::len)
    }

    pub fn subset(&self, rows: &[usize]) -> Self {
        Self {
            names: self.names.clone(),
            columns: self.columns.iter().map(|c| rows.iter().map(|&i| c[i]).collect()).collect(),
        }
    }

    /// `n x (p + 1)` design with a leading intercept column.
    pub(crate) fn design(&self, n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, self.p() + 1, |i, j| if j == 0 { 1.0 } else { self.columns[j - 1][i] })
    }

    pub(crate) fn check_rows(&self, n: usize) -> Result<(), PredictError> {
        match self.rows() {
            Some(r) if r != n => Err(PredictError::Shape(format!("{r} predictor rows for {n} targets"))),
            _ => Ok(()),
        }
    }
}

/// Least-squares coefficients via SVD; `Singular` below relative rank tolerance.
pub(crate) fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>, PredictError> {
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * 1e-10 * x.nrows().max(x.ncols()) as f64;
    if svd.singular_values.iter().any(|&s| s <= tol) || x.nrows() < x.ncols() {
        return Err(PredictError::Singular);
    }
    svd.solve(y, 0.0).map_err(|_| PredictError::Singular)
}

pub(crate) fn binary_labels(y: &[f64]) -> Result<Vec<bool>, PredictError> {
    y.iter()
        .map(|&v| {
            if v == 0.0 {
                Ok(false)
            } else if v == 1.0 {
                Ok(true)
            } else {
                Err(PredictError::Domain(format!("binary target expected, found {v}")))
            }
        })
        .collect()
}
