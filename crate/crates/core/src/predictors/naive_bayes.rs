use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{Features, PredictError};

pub const VARIANCE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassModel {
    pub prior: f64,
    pub means: Vec<f64>,
    /// ML variances, floored at [`VARIANCE_FLOOR`].
    pub variances: Vec<f64>,
    /// Per-feature flag: variance was raised to the floor.
    pub floored: Vec<bool>,
}

impl ClassModel {
    fn log_joint(&self, row: &[f64]) -> f64 {
        self.prior.ln()
            + row
                .iter()
                .zip(self.means.iter().zip(&self.variances))
                .map(|(x, (m, v))| -0.5 * ((2.0 * PI * v).ln() + (x - m).powi(2) / v))
                .sum::<f64>()
    }
}

/// Gaussian naive Bayes for a binary target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesFit {
    pub names: Vec<String>,
    pub negative: ClassModel,
    pub positive: ClassModel,
}

impl NaiveBayesFit {
    /// Posterior `[P(negative), P(positive)]` for one row.
    pub fn posterior(&self, row: &[f64]) -> [f64; 2] {
        let a = self.negative.log_joint(row);
        let b = self.positive.log_joint(row);
        let m = a.max(b);
        let (ea, eb) = ((a - m).exp(), (b - m).exp());
        [ea / (ea + eb), eb / (ea + eb)]
    }

    pub fn predict_proba(&self, x: &Features) -> Result<Vec<f64>, PredictError> {
        if x.p() != self.names.len() {
            return Err(PredictError::Shape("predictor count differs from the fit".into()));
        }
        let n = x.rows().unwrap_or(0);
        Ok((0..n)
            .map(|i| {
                let row: Vec<f64> = x.columns.iter().map(|c| c[i]).collect();
                self.posterior(&row)[1]
            })
            .collect())
    }

    pub fn any_floored(&self) -> bool {
        self.negative.floored.iter().chain(&self.positive.floored).any(|&f| f)
    }
}

pub fn naive_bayes_fit(y: &[bool], x: &Features) -> Result<NaiveBayesFit, PredictError> {
    let n = y.len();
    x.check_rows(n)?;
    let class = |label: bool| -> Result<ClassModel, PredictError> {
        let rows: Vec<usize> = (0..n).filter(|&i| y[i] == label).collect();
        if rows.is_empty() {
            return Err(PredictError::Domain("both classes must be present".into()));
        }
        let k = rows.len() as f64;
        let means: Vec<f64> = x.columns.iter().map(|c| rows.iter().map(|&i| c[i]).sum::<f64>() / k).collect();
        let raw: Vec<f64> = x
            .columns
            .iter()
            .zip(&means)
            .map(|(c, m)| rows.iter().map(|&i| (c[i] - m).powi(2)).sum::<f64>() / k)
            .collect();
        Ok(ClassModel {
            prior: k / n as f64,
            means,
            floored: raw.iter().map(|&v| v < VARIANCE_FLOOR).collect(),
            variances: raw.iter().map(|&v| v.max(VARIANCE_FLOOR)).collect(),
        })
    };
    Ok(NaiveBayesFit { names: x.names.clone(), negative: class(false)?, positive: class(true)? })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equidistant_point_is_even() {
        let fit = NaiveBayesFit {
            names: vec!["x".into()],
            negative: ClassModel { prior: 0.5, means: vec![0.0], variances: vec![1.0], floored: vec![false] },
            positive: ClassModel { prior: 0.5, means: vec![2.0], variances: vec![1.0], floored: vec![false] },
        };
        let p = fit.posterior(&[1.0]);
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn priors_follow_class_frequencies() {
        let y: Vec<bool> = (0..100).map(|i| i >= 30).collect();
        let x = Features::new(vec!["x".into()], vec![(0..100).map(|i| (i % 7) as f64).collect()]).unwrap();
        let fit = naive_bayes_fit(&y, &x).unwrap();
        assert!((fit.negative.prior - 0.3).abs() < 1e-15 && (fit.positive.prior - 0.7).abs() < 1e-15);
    }

    #[test]
    fn six_point_hand_computation() {
        // class 0: x = 1, 2, 3 (mean 2, var 2/3); class 1: x = 4, 6, 8 (mean 6, var 8/3)
        let x = Features::new(vec!["x".into()], vec![vec![1.0, 2.0, 3.0, 4.0, 6.0, 8.0]]).unwrap();
        let y = [false, false, false, true, true, true];
        let fit = naive_bayes_fit(&y, &x).unwrap();
        let probe = 3.5f64;
        let dens = |m: f64, v: f64| (-(probe - m).powi(2) / (2.0 * v)).exp() / (2.0 * PI * v).sqrt();
        let (l0, l1) = (dens(2.0, 2.0 / 3.0), dens(6.0, 8.0 / 3.0));
        let expected = 0.5 * l1 / (0.5 * l0 + 0.5 * l1);
        assert!((fit.posterior(&[probe])[1] - expected).abs() < 1e-9);
    }

    #[test]
    fn constant_feature_is_floored() {
        let x = Features::new(vec!["x".into()], vec![vec![1.0, 1.0, 2.0, 3.0]]).unwrap();
        let fit = naive_bayes_fit(&[false, false, true, true], &x).unwrap();
        assert_eq!(fit.negative.variances[0], VARIANCE_FLOOR);
        assert!(fit.any_floored());
    }
}
