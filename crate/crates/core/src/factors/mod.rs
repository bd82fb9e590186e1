//! Exploratory factor analysis: maximum-likelihood extraction with Kaiser
//! retention, promax rotation and regression factor scores.

mod rotation;

pub use rotation::{orient, promax_rotate, varimax, Rotated};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{matrix_rows, sym_eigen_desc};
use crate::optim::{bfgs_box, BfgsOptions};

pub const UNIQUENESS_FLOOR: f64 = 0.005;

#[derive(Debug, Error, PartialEq)]
pub enum FactorError {
    #[error("no eigenvalue exceeds 1; no factors retained")]
    NoFactorsRetained { eigenvalues: Vec<f64> },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("column {0} has zero variance")]
    ZeroVariance(String),
}

/// Column-standardized data (mean 0, sample sd 1).
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedMatrix {
    names: Vec<String>,
    data: DMatrix<f64>,
}

impl StandardizedMatrix {
    /// Standardize raw columns.
    pub fn from_columns(names: Vec<String>, columns: &[Vec<f64>]) -> Result<Self, FactorError> {
        if names.len() != columns.len() || columns.is_empty() {
            return Err(FactorError::Shape("one name per column required".into()));
        }
        let n = columns[0].len();
        if n < 2 || columns.iter().any(|c| c.len() != n) {
            return Err(FactorError::Shape("columns must share a length of at least 2".into()));
        }
        if columns.iter().flatten().any(|v| !v.is_finite()) {
            return Err(FactorError::Shape("missing or non-finite values".into()));
        }
        let mut data = DMatrix::zeros(n, columns.len());
        for (j, col) in columns.iter().enumerate() {
            let mean = col.iter().sum::<f64>() / n as f64;
            let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
            if !(sd > 1e-12 * (1.0 + mean.abs())) {
                return Err(FactorError::ZeroVariance(names[j].clone()));
            }
            for i in 0..n {
                data[(i, j)] = (col[i] - mean) / sd;
            }
        }
        Ok(Self { names, data })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn p(&self) -> usize {
        self.data.ncols()
    }

    /// Pearson correlation matrix.
    pub fn correlation(&self) -> DMatrix<f64> {
        let mut r = self.data.transpose() * &self.data / (self.n() as f64 - 1.0);
        // exact symmetry and unit diagonal
        for i in 0..self.p() {
            r[(i, i)] = 1.0;
            for j in 0..i {
                let v = 0.5 * (r[(i, j)] + r[(j, i)]);
                r[(i, j)] = v;
                r[(j, i)] = v;
            }
        }
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EfaOptions {
    pub promax_power: u32,
    pub max_iter: usize,
    /// Convergence threshold on the largest uniqueness change.
    pub tol: f64,
}

impl Default for EfaOptions {
    fn default() -> Self {
        Self { promax_power: 4, max_iter: 500, tol: 1e-7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorSolution {
    pub k: usize,
    pub variables: Vec<String>,
    /// Promax pattern, `p x k`.
    #[serde(with = "matrix_rows")]
    pub loadings: DMatrix<f64>,
    /// ML loadings before rotation, `p x k`.
    #[serde(with = "matrix_rows")]
    pub unrotated_loadings: DMatrix<f64>,
    pub uniquenesses: Vec<f64>,
    /// True where the uniqueness sits at the Heywood floor.
    pub heywood: Vec<bool>,
    /// Correlation-matrix eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    #[serde(with = "matrix_rows")]
    pub factor_correlations: DMatrix<f64>,
    /// Share of total variance carried by each retained eigenvalue.
    pub variance_explained: Vec<f64>,
    /// ML discrepancy at the optimum.
    pub discrepancy: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl FactorSolution {
    /// Structure matrix `pattern * phi`.
    pub fn structure(&self) -> DMatrix<f64> {
        &self.loadings * &self.factor_correlations
    }

    /// Model-implied correlation `L Phi L' + Psi` from the rotated solution.
    pub fn implied_correlation(&self) -> DMatrix<f64> {
        let mut m = &self.loadings * &self.factor_correlations * self.loadings.transpose();
        for i in 0..m.nrows() {
            m[(i, i)] += self.uniquenesses[i];
        }
        m
    }

    /// Model-implied correlation from the unrotated solution.
    pub fn implied_correlation_unrotated(&self) -> DMatrix<f64> {
        let mut m = &self.unrotated_loadings * self.unrotated_loadings.transpose();
        for i in 0..m.nrows() {
            m[(i, i)] += self.uniquenesses[i];
        }
        m
    }

    /// Index of the factor each variable loads on most strongly.
    pub fn primary_factor(&self) -> Vec<usize> {
        self.loadings
            .row_iter()
            .map(|r| (0..r.len()).max_by(|&a, &b| r[a].abs().total_cmp(&r[b].abs())).unwrap_or(0))
            .collect()
    }
}

/// Number of eigenvalues strictly greater than 1.
pub fn kaiser_count(eigenvalues: &[f64]) -> usize {
    eigenvalues.iter().filter(|&&e| e > 1.0).count()
}

fn scaled(r: &DMatrix<f64>, psi: &DVector<f64>) -> DMatrix<f64> {
    let p = r.nrows();
    DMatrix::from_fn(p, p, |i, j| r[(i, j)] / (psi[i] * psi[j]).sqrt())
}

/// ML loadings for fixed uniquenesses: `Psi^1/2 V_k diag(sqrt(max(e - 1, 0)))`
/// from the top eigenpairs of `Psi^-1/2 R Psi^-1/2`.
fn loadings_given(r: &DMatrix<f64>, psi: &DVector<f64>, k: usize) -> DMatrix<f64> {
    let (e, v) = sym_eigen_desc(&scaled(r, psi));
    DMatrix::from_fn(r.nrows(), k, |i, j| psi[i].sqrt() * v[(i, j)] * (e[j] - 1.0).max(0.0).sqrt())
}

/// ML discrepancy profiled over the loadings:
/// `sum_{j>k} (e_j - ln e_j - 1)`.
fn profiled_discrepancy(r: &DMatrix<f64>, psi: &DVector<f64>, k: usize) -> f64 {
    if psi.iter().any(|&v| !(v > 0.0)) {
        return f64::INFINITY;
    }
    let (e, _) = sym_eigen_desc(&scaled(r, psi));
    e[k..].iter().map(|&v| if v > 0.0 { v - v.ln() - 1.0 } else { f64::INFINITY }).sum()
}

fn discrepancy_gradient(r: &DMatrix<f64>, psi: &DVector<f64>, k: usize) -> DVector<f64> {
    let l = loadings_given(r, psi, k);
    let sigma = &l * l.transpose();
    DVector::from_fn(r.nrows(), |i, _| (sigma[(i, i)] + psi[i] - r[(i, i)]) / (psi[i] * psi[i]))
}

/// Fit `k` factors by maximum likelihood. Returns unrotated loadings,
/// uniquenesses, discrepancy, convergence flag and iteration count.
#[allow(clippy::type_complexity)]
pub fn ml_extract(
    r: &DMatrix<f64>,
    k: usize,
    opts: &EfaOptions,
) -> Result<(DMatrix<f64>, DVector<f64>, f64, bool, usize), FactorError> {
    let p = r.nrows();
    let r_inv =
        r.clone().try_inverse().ok_or_else(|| FactorError::Numerical("correlation matrix is singular".into()))?;
    let start =
        DVector::from_fn(p, |i, _| ((1.0 - 0.5 * k as f64 / p as f64) / r_inv[(i, i)]).clamp(UNIQUENESS_FLOOR, 1.0));
    let lo = DVector::from_element(p, UNIQUENESS_FLOOR);
    let hi = DVector::from_element(p, 1.0);
    let m = bfgs_box(
        |psi| profiled_discrepancy(r, psi, k),
        |psi| discrepancy_gradient(r, psi, k),
        start,
        &lo,
        &hi,
        BfgsOptions { max_iter: opts.max_iter, grad_tol: 1e-10, step_tol: opts.tol },
    );
    if !m.value.is_finite() {
        return Err(FactorError::Numerical("ML discrepancy is not finite".into()));
    }
    let l = loadings_given(r, &m.x, k);
    Ok((l, m.x, m.value, m.converged, m.iterations))
}

/// ML exploratory factor analysis with Kaiser retention and promax rotation.
pub fn efa_fit(data: &StandardizedMatrix, opts: &EfaOptions) -> Result<FactorSolution, FactorError> {
    if data.n() <= data.p() {
        return Err(FactorError::Shape(format!("need more rows ({}) than columns ({})", data.n(), data.p())));
    }
    let r = data.correlation();
    efa_fit_correlation(&r, data.names().to_vec(), opts)
}

/// As [`efa_fit`], starting from a correlation matrix.
pub fn efa_fit_correlation(
    r: &DMatrix<f64>,
    variables: Vec<String>,
    opts: &EfaOptions,
) -> Result<FactorSolution, FactorError> {
    let p = r.nrows();
    let (eigenvalues, _) = sym_eigen_desc(r);
    if eigenvalues[p - 1] <= 1e-10 * p as f64 {
        return Err(FactorError::Numerical("correlation matrix is singular".into()));
    }
    let k = kaiser_count(&eigenvalues);
    if k == 0 {
        return Err(FactorError::NoFactorsRetained { eigenvalues });
    }
    let (unrotated, psi, discrepancy, converged, iterations) = ml_extract(r, k, opts)?;
    let rot = promax_rotate(&unrotated, opts.promax_power)?;
    // orient the unrotated columns too, for stable reporting
    let unrotated = orient(&unrotated, &DMatrix::identity(k, k), &DMatrix::identity(k, k)).pattern;
    Ok(FactorSolution {
        k,
        variables,
        loadings: rot.pattern,
        unrotated_loadings: unrotated,
        heywood: psi.iter().map(|&v| v <= UNIQUENESS_FLOOR * (1.0 + 1e-9)).collect(),
        uniquenesses: psi.iter().cloned().collect(),
        variance_explained: eigenvalues[..k].iter().map(|e| e / p as f64).collect(),
        eigenvalues,
        factor_correlations: rot.factor_correlations,
        discrepancy,
        converged,
        iterations,
    })
}

/// Regression (Thomson) factor scores `Z R^-1 (pattern * phi)`, centered.
pub fn factor_scores(data: &StandardizedMatrix, solution: &FactorSolution) -> Result<DMatrix<f64>, FactorError> {
    if data.names() != solution.variables.as_slice() {
        return Err(FactorError::Shape("solution was fitted on different columns".into()));
    }
    let r = data.correlation();
    let weights = r
        .lu()
        .solve(&solution.structure())
        .ok_or_else(|| FactorError::Numerical("correlation matrix is singular".into()))?;
    let mut scores = data.data() * weights;
    let n = scores.nrows() as f64;
    for mut col in scores.column_iter_mut() {
        let m = col.sum() / n;
        col.add_scalar_mut(-m);
    }
    Ok(scores)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn equicorrelated(p: usize, rho: f64) -> DMatrix<f64> {
        DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { rho })
    }

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|i| format!("x{i}")).collect()
    }

    #[test]
    fn identity_retains_nothing() {
        let err = efa_fit_correlation(&DMatrix::identity(6, 6), names(6), &EfaOptions::default()).unwrap_err();
        match err {
            FactorError::NoFactorsRetained { eigenvalues } => {
                assert!(eigenvalues.iter().all(|e| (e - 1.0).abs() < 1e-12))
            }
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn equicorrelation_single_factor() {
        // top eigenvalue 1 + 5 * 0.81 = 5.05
        let s = efa_fit_correlation(&equicorrelated(6, 0.81), names(6), &EfaOptions::default()).unwrap();
        assert_eq!(s.k, 1);
        assert!((s.eigenvalues[0] - 5.05).abs() < 1e-10);
        for i in 0..6 {
            assert!((s.loadings[(i, 0)] - 0.9).abs() < 1e-5, "{}", s.loadings);
            assert!((s.uniquenesses[i] - 0.19).abs() < 1e-5);
        }
        assert!((s.eigenvalues.iter().sum::<f64>() - 6.0).abs() < 1e-9);
    }

    #[test]
    fn exact_two_factor_structure_is_reconstructed() {
        let l = DMatrix::from_row_slice(6, 2, &[0.8, 0.1, 0.7, 0.0, 0.75, 0.05, 0.0, 0.8, 0.1, 0.7, 0.0, 0.6]);
        let mut r = &l * l.transpose();
        for i in 0..6 {
            r[(i, i)] = 1.0;
        }
        let s = efa_fit_correlation(&r, names(6), &EfaOptions::default()).unwrap();
        assert_eq!(s.k, 2);
        assert!((s.implied_correlation_unrotated() - &r).amax() <= 1e-6);
        // rotation leaves the implied matrix unchanged
        assert!((s.implied_correlation() - s.implied_correlation_unrotated()).amax() <= 1e-9);
        let phi = &s.factor_correlations;
        assert!((phi[(0, 1)] - phi[(1, 0)]).abs() < 1e-12);
        assert!((phi[(0, 0)] - 1.0).abs() < 1e-12 && (phi[(1, 1)] - 1.0).abs() < 1e-12);
        assert!(phi.clone().cholesky().is_some());
    }

    #[test]
    fn heywood_case_is_clamped_and_flagged() {
        // one factor exactly fitting this needs lambda_1^2 = 0.8 * 0.8 / 0.5 > 1
        let r = DMatrix::from_row_slice(3, 3, &[1.0, 0.8, 0.8, 0.8, 1.0, 0.5, 0.8, 0.5, 1.0]);
        let s = efa_fit_correlation(&r, names(3), &EfaOptions::default()).unwrap();
        assert_eq!(s.k, 1);
        assert!(s.heywood[0]);
        assert!(s.uniquenesses.iter().all(|&u| u >= UNIQUENESS_FLOOR));
        assert!(s.heywood.iter().any(|&h| h));
    }

    #[test]
    fn one_indicator_scores_are_the_column() {
        let col = vec![1.0, 3.0, 2.0, 5.0, 4.0];
        let data = StandardizedMatrix::from_columns(vec!["a".into()], &[col]).unwrap();
        let sol = FactorSolution {
            k: 1,
            variables: vec!["a".into()],
            loadings: DMatrix::from_element(1, 1, 1.0),
            unrotated_loadings: DMatrix::from_element(1, 1, 1.0),
            uniquenesses: vec![UNIQUENESS_FLOOR],
            heywood: vec![true],
            eigenvalues: vec![1.0],
            factor_correlations: DMatrix::identity(1, 1),
            variance_explained: vec![1.0],
            discrepancy: 0.0,
            converged: true,
            iterations: 0,
        };
        let s = factor_scores(&data, &sol).unwrap();
        for i in 0..5 {
            assert!((s[(i, 0)] - data.data()[(i, 0)]).abs() < 1e-12);
        }
    }

    #[test]
    fn standardization_contract() {
        let data = StandardizedMatrix::from_columns(names(2), &[vec![1.0, 2.0, 3.0, 10.0], vec![-4.0, 0.5, 0.25, 8.0]])
            .unwrap();
        for col in data.data().column_iter() {
            let m = col.sum() / 4.0;
            let sd = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 3.0).sqrt();
            assert!(m.abs() <= 1e-9 && (sd - 1.0).abs() <= 1e-9);
        }
        assert!(matches!(
            StandardizedMatrix::from_columns(names(1), &[vec![2.0; 4]]),
            Err(FactorError::ZeroVariance(_))
        ));
    }
}
