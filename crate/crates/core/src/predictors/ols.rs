use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{least_squares, Features, PredictError};
use crate::stats::{f_sf, t_two_sided};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub names: Vec<String>,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    /// Standard errors, intercept first; absent when df_residual = 0.
    pub std_errors: Option<Vec<f64>>,
    pub t_p_values: Option<Vec<f64>>,
    /// `RSS / df_residual`, 0 when df_residual = 0.
    pub residual_variance: f64,
    pub r_squared: f64,
    pub r_squared_adjusted: Option<f64>,
    pub f_statistic: Option<f64>,
    pub df_model: usize,
    pub df_residual: usize,
    pub p_value: Option<f64>,
    pub n: usize,
}

impl RegressionFit {
    pub fn predict(&self, x: &Features) -> Result<Vec<f64>, PredictError> {
        if x.p() != self.coefficients.len() {
            return Err(PredictError::Shape("predictor count differs from the fit".into()));
        }
        let n = x.rows().unwrap_or(0);
        Ok((0..n)
            .map(|i| self.intercept + x.columns.iter().zip(&self.coefficients).map(|(c, b)| b * c[i]).sum::<f64>())
            .collect())
    }
}

/// Ordinary least squares with an intercept.
pub fn ols_fit(y: &[f64], x: &Features) -> Result<RegressionFit, PredictError> {
    let n = y.len();
    x.check_rows(n)?;
    let p = x.p();
    if n < p + 1 {
        return Err(PredictError::Shape(format!("{n} rows cannot identify {} coefficients", p + 1)));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(PredictError::Shape("non-finite target".into()));
    }
    let design = x.design(n);
    let yv = DVector::from_column_slice(y);
    let beta = least_squares(&design, &yv)?;
    let resid = &yv - &design * &beta;
    let rss = resid.norm_squared();
    let ybar = yv.mean();
    let tss = yv.iter().map(|v| (v - ybar).powi(2)).sum::<f64>();
    if !(tss > 0.0) {
        return Err(PredictError::Domain("target has zero variance".into()));
    }
    let df_residual = n - p - 1;
    let r_squared = 1.0 - rss / tss;
    let exact = rss <= 1e-24 * tss;
    let residual_variance = if df_residual == 0 || exact { 0.0 } else { rss / df_residual as f64 };
    let (r_squared_adjusted, f_statistic, p_value) = if df_residual == 0 {
        (None, None, None)
    } else {
        let adj = 1.0 - (1.0 - r_squared) * (n - 1) as f64 / df_residual as f64;
        if p == 0 || exact {
            (Some(adj), None, None)
        } else {
            let f = ((tss - rss) / p as f64) / (rss / df_residual as f64);
            (Some(adj), Some(f), Some(f_sf(f, p as f64, df_residual as f64)))
        }
    };
    let (std_errors, t_p_values) = if df_residual == 0 {
        (None, None)
    } else {
        match (design.transpose() * &design).try_inverse() {
            Some(inv) => {
                let se: Vec<f64> = (0..=p).map(|j| (residual_variance * inv[(j, j)]).sqrt()).collect();
                let pv = se
                    .iter()
                    .zip(beta.iter())
                    .map(|(s, b)| if *s > 0.0 { t_two_sided(b / s, df_residual as f64) } else { 0.0 })
                    .collect();
                (Some(se), Some(pv))
            }
            None => (None, None),
        }
    };
    Ok(RegressionFit {
        names: x.names.clone(),
        intercept: beta[0],
        coefficients: beta.iter().skip(1).copied().collect(),
        std_errors,
        t_p_values,
        residual_variance,
        r_squared,
        r_squared_adjusted,
        f_statistic,
        df_model: p,
        df_residual,
        p_value,
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(name: &str, v: Vec<f64>) -> Features {
        Features::new(vec![name.into()], vec![v]).unwrap()
    }

    #[test]
    fn exact_line() {
        let x = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let fit = ols_fit(&y, &one("x", x)).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-12 && (fit.intercept - 1.0).abs() < 1e-12);
        assert_eq!(fit.residual_variance, 0.0);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_points() {
        let fit = ols_fit(&[1.0, 4.0], &one("x", vec![0.0, 1.0])).unwrap();
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert_eq!(fit.df_residual, 0);
        assert_eq!(fit.f_statistic, None);
        assert!((fit.coefficients[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn five_point_normal_equations() {
        // x = [1,2,3,4,5], y = [2,3,5,4,6]: Sxx = 10, Sxy = 9
        let fit = ols_fit(&[2.0, 3.0, 5.0, 4.0, 6.0], &one("x", vec![1.0, 2.0, 3.0, 4.0, 5.0])).unwrap();
        assert!((fit.coefficients[0] - 0.9).abs() < 1e-9);
        assert!((fit.intercept - 1.3).abs() < 1e-9);
        // RSS = 10 - 0.9 * 9 = 1.9; F = 8.1 / (1.9 / 3)
        assert!((fit.residual_variance - 1.9 / 3.0).abs() < 1e-9);
        assert!((fit.f_statistic.unwrap() - 8.1 / (1.9 / 3.0)).abs() < 1e-9);
        assert_eq!((fit.df_model, fit.df_residual), (1, 3));
    }

    #[test]
    fn collinear_columns_are_singular() {
        let x = Features::new(vec!["a".into(), "b".into()], vec![vec![1.0, 2.0, 3.0, 4.0], vec![2.0, 4.0, 6.0, 8.0]])
            .unwrap();
        assert_eq!(ols_fit(&[1.0, 2.0, 2.0, 5.0], &x).unwrap_err(), PredictError::Singular);
    }
}
