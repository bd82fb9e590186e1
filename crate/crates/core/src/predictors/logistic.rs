//! Binary logistic regression by iteratively reweighted least squares.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{Features, PredictError};
use crate::stats::chi2_sf;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticOptions {
    pub max_iter: usize,
    /// Stop when the log-likelihood gains less than this.
    pub tol: f64,
    /// L2 penalty on slopes (not the intercept).
    pub ridge: f64,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        Self { max_iter: 100, tol: 1e-12, ridge: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub names: Vec<String>,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub odds_ratios: Vec<f64>,
    /// Intercept first.
    pub std_errors: Vec<f64>,
    pub wald_chi_square: Vec<f64>,
    pub wald_p_values: Vec<f64>,
    pub log_likelihood: f64,
    pub null_log_likelihood: f64,
    pub model_chi_square: f64,
    pub model_df: usize,
    pub model_p_value: f64,
    pub cox_snell_r2: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Log-likelihood after each accepted step, starting from the initial point.
    pub log_likelihood_trace: Vec<f64>,
}

impl LogisticFit {
    /// Positive-class probabilities.
    pub fn predict_proba(&self, x: &Features) -> Result<Vec<f64>, PredictError> {
        if x.p() != self.coefficients.len() {
            return Err(PredictError::Shape("predictor count differs from the fit".into()));
        }
        let n = x.rows().unwrap_or(0);
        Ok((0..n)
            .map(|i| {
                sigmoid(self.intercept + x.columns.iter().zip(&self.coefficients).map(|(c, b)| b * c[i]).sum::<f64>())
            })
            .collect())
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^t)` without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn ll_at(design: &DMatrix<f64>, y: &[bool], beta: &DVector<f64>) -> f64 {
    let eta = design * beta;
    eta.iter().zip(y).map(|(&t, &yi)| if yi { -softplus(-t) } else { -softplus(t) }).sum()
}

/// Log-likelihood at `beta` (intercept first).
pub fn logistic_log_likelihood(beta: &[f64], y: &[bool], x: &Features) -> f64 {
    ll_at(&x.design(y.len()), y, &DVector::from_column_slice(beta))
}

/// Gradient of [`logistic_log_likelihood`]: `X'(y - p)`.
pub fn logistic_gradient(beta: &[f64], y: &[bool], x: &Features) -> Vec<f64> {
    let design = x.design(y.len());
    let eta = &design * DVector::from_column_slice(beta);
    let r = DVector::from_iterator(y.len(), eta.iter().zip(y).map(|(&t, &yi)| f64::from(u8::from(yi)) - sigmoid(t)));
    (design.transpose() * r).iter().copied().collect()
}

pub fn logistic_fit(y: &[bool], x: &Features, opts: &LogisticOptions) -> Result<LogisticFit, PredictError> {
    let n = y.len();
    x.check_rows(n)?;
    let positives = y.iter().filter(|&&v| v).count();
    if positives == 0 || positives == n {
        return Err(PredictError::Domain("both classes must be present".into()));
    }
    if !(opts.ridge >= 0.0) {
        return Err(PredictError::Config("ridge must be non-negative".into()));
    }
    let p = x.p();
    let design = x.design(n);
    let penalty = DMatrix::from_fn(p + 1, p + 1, |i, j| if i == j && i > 0 { opts.ridge } else { 0.0 });
    let objective = |b: &DVector<f64>| ll_at(&design, y, b) - 0.5 * opts.ridge * b.rows(1, p).norm_squared();

    let ybar = positives as f64 / n as f64;
    let mut beta = DVector::zeros(p + 1);
    beta[0] = (ybar / (1.0 - ybar)).ln();
    let mut ll = objective(&beta);
    let mut trace = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..opts.max_iter {
        iterations += 1;
        let eta = &design * &beta;
        let mu: Vec<f64> = eta.iter().map(|&t| sigmoid(t)).collect();
        let w: Vec<f64> = mu.iter().map(|m| (m * (1.0 - m)).max(1e-300)).collect();
        let resid = DVector::from_iterator(n, y.iter().zip(&mu).map(|(&yi, m)| f64::from(u8::from(yi)) - m));
        let mut grad = design.transpose() * resid;
        grad -= &penalty * &beta;
        let weighted = DMatrix::from_fn(n, p + 1, |i, j| design[(i, j)] * w[i]);
        let info = design.transpose() * weighted + &penalty;
        let Some(step) = info.clone().cholesky().map(|c| c.solve(&grad)) else {
            return Err(separation(x, &beta));
        };
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand = &beta + &step * t;
            let ll_new = objective(&cand);
            if ll_new >= ll {
                accepted = Some((cand, ll_new));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, ll_new)) = accepted else {
            converged = true;
            break;
        };
        let gain = ll_new - ll;
        beta = cand;
        ll = ll_new;
        trace.push(ll);
        if gain <= opts.tol * (1.0 + ll.abs()) {
            converged = true;
            break;
        }
    }

    if opts.ridge == 0.0 && is_separated(&design, y, &beta) {
        return Err(separation(x, &beta));
    }

    let eta = &design * &beta;
    let weighted = DMatrix::from_fn(n, p + 1, |i, j| {
        let m = sigmoid(eta[i]);
        design[(i, j)] * m * (1.0 - m)
    });
    let info = design.transpose() * weighted + &penalty;
    let cov = info.try_inverse().ok_or(PredictError::Singular)?;
    let std_errors: Vec<f64> = (0..=p).map(|j| cov[(j, j)].max(0.0).sqrt()).collect();
    let wald_chi_square: Vec<f64> = (0..=p).map(|j| (beta[j] / std_errors[j]).powi(2)).collect();
    let wald_p_values = wald_chi_square.iter().map(|&w| chi2_sf(w, 1.0)).collect();
    let log_likelihood = ll_at(&design, y, &beta);
    let null_log_likelihood = n as f64 * (ybar * ybar.ln() + (1.0 - ybar) * (1.0 - ybar).ln());
    let model_chi_square = (2.0 * (log_likelihood - null_log_likelihood)).max(0.0);
    let coefficients: Vec<f64> = beta.iter().skip(1).copied().collect();
    Ok(LogisticFit {
        names: x.names.clone(),
        intercept: beta[0],
        odds_ratios: coefficients.iter().map(|b| b.exp()).collect(),
        coefficients,
        std_errors,
        wald_chi_square,
        wald_p_values,
        log_likelihood,
        null_log_likelihood,
        model_chi_square,
        model_df: p,
        model_p_value: if p == 0 { 1.0 } else { chi2_sf(model_chi_square, p as f64) },
        cox_snell_r2: 1.0 - (-model_chi_square / n as f64).exp(),
        converged,
        iterations,
        log_likelihood_trace: trace,
    })
}

/// Complete or quasi-complete separation: the linear predictor orders the
/// classes without overlap and the fit is driving probabilities to 0/1.
fn is_separated(design: &DMatrix<f64>, y: &[bool], beta: &DVector<f64>) -> bool {
    let eta = design * beta;
    let max_neg = eta.iter().zip(y).filter(|(_, &yi)| !yi).map(|(&e, _)| e).fold(f64::NEG_INFINITY, f64::max);
    let min_pos = eta.iter().zip(y).filter(|(_, &yi)| yi).map(|(&e, _)| e).fold(f64::INFINITY, f64::min);
    let fitted_extreme = eta.iter().map(|e| e.abs()).fold(0.0, f64::max) > 15.0;
    min_pos >= max_neg && fitted_extreme
}

fn separation(x: &Features, beta: &DVector<f64>) -> PredictError {
    let slopes = beta.rows(1, x.p());
    let norm = slopes.norm();
    let direction =
        x.names.iter().zip(slopes.iter()).map(|(n, b)| (n.clone(), if norm > 0.0 { b / norm } else { 0.0 })).collect();
    PredictError::Separation { direction }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feats(cols: Vec<Vec<f64>>) -> Features {
        let names = (0..cols.len()).map(|i| format!("x{i}")).collect();
        Features::new(names, cols).unwrap()
    }

    #[test]
    fn two_by_two_log_odds_ratio() {
        // x=1: 7 positives, 3 negatives; x=0: 4 positives, 8 negatives
        let (a, b, c, d) = (7, 3, 4, 8);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (xv, yv, k) in [(1.0, true, a), (1.0, false, b), (0.0, true, c), (0.0, false, d)] {
            for _ in 0..k {
                x.push(xv);
                y.push(yv);
            }
        }
        let fit = logistic_fit(&y, &feats(vec![x]), &LogisticOptions::default()).unwrap();
        let expected = ((a * d) as f64 / (b * c) as f64).ln();
        assert!((fit.coefficients[0] - expected).abs() < 1e-9);
        assert!((fit.odds_ratios[0] - fit.coefficients[0].exp()).abs() < 1e-12);
        assert!((fit.intercept - (c as f64 / d as f64).ln()).abs() < 1e-9);
        assert!(fit.cox_snell_r2 >= 0.0 && fit.cox_snell_r2 < 1.0);
        assert!(fit.log_likelihood_trace.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn symmetric_data_has_zero_intercept() {
        let x = vec![-2.0, -1.0, -0.5, 0.5, 1.0, 2.0, -1.5, 1.5];
        let y = vec![false, false, true, false, true, true, true, false];
        // mirror image: (x, y) and (-x, !y) both present
        let mut xs = x.clone();
        let mut ys = y.clone();
        xs.extend(x.iter().map(|v| -v));
        ys.extend(y.iter().map(|v| !v));
        let fit = logistic_fit(&ys, &feats(vec![xs]), &LogisticOptions::default()).unwrap();
        assert!(fit.intercept.abs() < 1e-6);
    }

    #[test]
    fn separated_data_is_reported() {
        let x = vec![-3.0, -2.0, -1.0, 1.0, 2.0, 3.0];
        let y = vec![false, false, false, true, true, true];
        match logistic_fit(&y, &feats(vec![x.clone()]), &LogisticOptions::default()) {
            Err(PredictError::Separation { direction }) => assert!(direction[0].1 > 0.99),
            other => panic!("{other:?}"),
        }
        let ridge = LogisticOptions { ridge: 0.1, ..Default::default() };
        assert!(logistic_fit(&y, &feats(vec![x]), &ridge).unwrap().coefficients[0] > 0.0);
    }

    #[test]
    fn one_class_is_a_domain_error() {
        let err = logistic_fit(&[true, true], &feats(vec![vec![1.0, 2.0]]), &LogisticOptions::default()).unwrap_err();
        assert!(matches!(err, PredictError::Domain(_)));
    }
}
