use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{least_squares, PredictError};
use crate::stats::{pearson, t_two_sided};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartialCorrelation {
    pub r: f64,
    pub p_value: f64,
    pub df: usize,
}

fn residuals(v: &[f64], controls: &[Vec<f64>]) -> Result<Vec<f64>, PredictError> {
    let n = v.len();
    let design = DMatrix::from_fn(n, controls.len() + 1, |i, j| if j == 0 { 1.0 } else { controls[j - 1][i] });
    let y = DVector::from_column_slice(v);
    let beta = least_squares(&design, &y)?;
    let r = &y - design * beta;
    let mean = y.mean();
    let tss: f64 = y.iter().map(|a| (a - mean).powi(2)).sum();
    if !(tss > 0.0) || r.norm_squared() < 1e-12 * tss {
        return Err(PredictError::Domain("zero residual variance after removing controls".into()));
    }
    Ok(r.iter().copied().collect())
}

/// Correlation of `x` and `y` after regressing both on `controls`.
pub fn partial_correlation(x: &[f64], y: &[f64], controls: &[Vec<f64>]) -> Result<PartialCorrelation, PredictError> {
    let n = x.len();
    if y.len() != n || controls.iter().any(|c| c.len() != n) {
        return Err(PredictError::Shape("columns differ in length".into()));
    }
    if n <= controls.len() + 2 {
        return Err(PredictError::Shape(format!("n = {n} too small for {} controls", controls.len())));
    }
    let rx = residuals(x, controls)?;
    let ry = residuals(y, controls)?;
    let r = pearson(&rx, &ry).clamp(-1.0, 1.0);
    let df = n - controls.len() - 2;
    let p_value = if r.abs() >= 1.0 { 0.0 } else { t_two_sided(r * (df as f64 / (1.0 - r * r)).sqrt(), df as f64) };
    Ok(PartialCorrelation { r, p_value, df })
}
