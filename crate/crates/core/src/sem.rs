//! Path models with latent variables, fitted by maximum likelihood.
//!
//! Models use the RAM form: with all variables (observed first, then
//! latents) stacked, `v = A v + e`, `cov(e) = S`, and the observed block of
//! `(I - A)^-1 S (I - A)^-T` is the implied covariance.

use std::collections::BTreeSet;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::causal::MixedDataset;
use crate::linalg::logdet_spd;
use crate::optim::{bfgs, BfgsOptions};
use crate::stats::{chi2_sf, normal_two_sided};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SemError {
    #[error("invalid model: {0}")]
    Spec(String),
    #[error("data: {0}")]
    Data(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("contract violation: {0}")]
    Contract(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatentSpec {
    pub name: String,
    /// The first indicator's loading is fixed to 1.
    pub indicators: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PathModelSpec {
    pub latents: Vec<LatentSpec>,
    /// Directed `(from, to)` effects among latents and observed variables.
    pub edges: Vec<(String, String)>,
    /// Extra free (residual) covariances.
    #[serde(default)]
    pub covariances: Vec<(String, String)>,
}

impl PathModelSpec {
    /// Observed variables: indicators in latent order, then other names in
    /// order of first appearance.
    pub fn observed(&self) -> Vec<String> {
        let latents: BTreeSet<&str> = self.latents.iter().map(|l| l.name.as_str()).collect();
        let mut out: Vec<String> = Vec::new();
        let names = self
            .latents
            .iter()
            .flat_map(|l| l.indicators.iter())
            .chain(self.edges.iter().chain(&self.covariances).flat_map(|(a, b)| [a, b]));
        for name in names {
            if !latents.contains(name.as_str()) && !out.contains(name) {
                out.push(name.clone());
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Loading,
    Path,
    Variance,
    Covariance,
}

impl ParamKind {
    fn op(self) -> &'static str {
        match self {
            ParamKind::Loading => "=~",
            ParamKind::Path => "->",
            ParamKind::Variance | ParamKind::Covariance => "~~",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterEstimate {
    pub kind: ParamKind,
    /// Latent for loadings, source for paths.
    pub lhs: String,
    pub rhs: String,
    pub estimate: f64,
    pub standardized: f64,
    pub free: bool,
    pub std_error: Option<f64>,
    pub z: Option<f64>,
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitIndices {
    pub rmsea: f64,
    pub cfi: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemFit {
    pub observed: Vec<String>,
    pub n: usize,
    pub parameters: Vec<ParameterEstimate>,
    pub discrepancy: f64,
    pub chi_square: f64,
    pub df: usize,
    pub p_value: f64,
    pub rmsea: f64,
    pub cfi: f64,
    pub baseline_chi_square: f64,
    pub baseline_df: usize,
    pub converged: bool,
    pub iterations: usize,
}

impl SemFit {
    pub fn get(&self, kind: ParamKind, lhs: &str, rhs: &str) -> Option<&ParameterEstimate> {
        self.parameters.iter().find(|p| p.kind == kind && p.lhs == lhs && p.rhs == rhs)
    }

    pub fn path(&self, from: &str, to: &str) -> Option<&ParameterEstimate> {
        self.get(ParamKind::Path, from, to)
    }
}

fn opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.prec$}"))
}

impl fmt::Display for SemFit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "chi2({}) = {:.2}, p = {:.3}, RMSEA = {:.3}, CFI = {:.3}, n = {}{}",
            self.df,
            self.chi_square,
            self.p_value,
            self.rmsea,
            self.cfi,
            self.n,
            if self.converged { "" } else { " (not converged)" }
        )?;
        writeln!(f, "{:<36} {:>9} {:>8} {:>8} {:>7} {:>8}", "parameter", "estimate", "se", "z", "p", "std")?;
        for p in &self.parameters {
            let label = format!("{} {} {}", p.lhs, p.kind.op(), p.rhs);
            writeln!(
                f,
                "{:<36} {:>9.3} {:>8} {:>8} {:>7} {:>8.3}",
                label,
                p.estimate,
                opt(p.std_error, 3),
                opt(p.z, 2),
                opt(p.p_value, 3),
                p.standardized
            )?;
        }
        Ok(())
    }
}

/// RMSEA, CFI and the chi-square p-value.
pub fn fit_indices(
    chi_square: f64,
    df: usize,
    n: usize,
    chi_square_baseline: f64,
    df_baseline: usize,
) -> Result<FitIndices, SemError> {
    if n < 2 {
        return Err(SemError::Contract("n must be at least 2".into()));
    }
    if !(chi_square >= 0.0) || !(chi_square_baseline >= 0.0) {
        return Err(SemError::Contract("chi-square values must be non-negative".into()));
    }
    if df == 0 && chi_square > 0.0 {
        return Err(SemError::Contract("df = 0 requires chi-square = 0".into()));
    }
    let excess = (chi_square - df as f64).max(0.0);
    let rmsea = if df == 0 { 0.0 } else { (excess / (df as f64 * (n - 1) as f64)).sqrt() };
    let denom = (chi_square_baseline - df_baseline as f64).max(excess).max(f64::MIN_POSITIVE);
    let cfi = (1.0 - excess / denom).clamp(0.0, 1.0);
    let p_value = if df == 0 { 1.0 } else { chi2_sf(chi_square, df as f64) };
    Ok(FitIndices { rmsea, cfi, p_value })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SemOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
}

impl Default for SemOptions {
    fn default() -> Self {
        Self { max_iter: 1000, grad_tol: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy)]
enum Slot {
    /// `A[to][from]`
    A(usize, usize),
    /// `S[i][j]`, `i >= j`
    S(usize, usize),
}

struct Param {
    slot: Slot,
    kind: ParamKind,
    lhs: String,
    rhs: String,
    free: bool,
    fixed: f64,
}

struct Model {
    p: usize,
    m: usize,
    params: Vec<Param>,
}

impl Model {
    fn build(spec: &PathModelSpec) -> Result<(Self, Vec<String>), SemError> {
        let observed = spec.observed();
        let latent_names: Vec<String> = spec.latents.iter().map(|l| l.name.clone()).collect();
        if latent_names.iter().collect::<BTreeSet<_>>().len() != latent_names.len() {
            return Err(SemError::Spec("duplicate latent names".into()));
        }
        let mut seen = BTreeSet::new();
        for l in &spec.latents {
            if l.indicators.is_empty() {
                return Err(SemError::Spec(format!("latent {} has no indicators", l.name)));
            }
            for ind in &l.indicators {
                if latent_names.contains(ind) {
                    return Err(SemError::Spec(format!("{ind} is a latent and cannot be an indicator")));
                }
                if !seen.insert(ind.clone()) {
                    return Err(SemError::Spec(format!("indicator {ind} appears under more than one latent")));
                }
            }
        }
        let all: Vec<String> = observed.iter().chain(&latent_names).cloned().collect();
        let idx = |name: &str| all.iter().position(|n| n == name).expect("collected above");
        let (p, m) = (observed.len(), all.len());
        let mut params = Vec::new();
        let mut fixed_residual = BTreeSet::new();
        for l in &spec.latents {
            for (k, ind) in l.indicators.iter().enumerate() {
                params.push(Param {
                    slot: Slot::A(idx(ind), idx(&l.name)),
                    kind: ParamKind::Loading,
                    lhs: l.name.clone(),
                    rhs: ind.clone(),
                    free: k > 0,
                    fixed: 1.0,
                });
            }
            if l.indicators.len() == 1 {
                fixed_residual.insert(l.indicators[0].clone());
            }
        }
        let mut a_mask = vec![vec![false; m]; m];
        for prm in &params {
            if let Slot::A(i, j) = prm.slot {
                a_mask[i][j] = true;
            }
        }
        for (from, to) in &spec.edges {
            let (i, j) = (idx(to), idx(from));
            if i == j || a_mask[i][j] {
                return Err(SemError::Spec(format!("duplicate or self edge {from} -> {to}")));
            }
            a_mask[i][j] = true;
            params.push(Param {
                slot: Slot::A(i, j),
                kind: ParamKind::Path,
                lhs: from.clone(),
                rhs: to.clone(),
                free: true,
                fixed: 0.0,
            });
        }
        // acyclicity of the full directed structure
        let mut placed = vec![false; m];
        for _ in 0..m {
            let next = (0..m).find(|&v| !placed[v] && (0..m).all(|u| !a_mask[v][u] || placed[u]));
            match next {
                Some(v) => placed[v] = true,
                None => return Err(SemError::Spec("structural graph has a cycle".into())),
            }
        }
        for (v, name) in all.iter().enumerate() {
            let fixed = fixed_residual.contains(name);
            params.push(Param {
                slot: Slot::S(v, v),
                kind: ParamKind::Variance,
                lhs: name.clone(),
                rhs: name.clone(),
                free: !fixed,
                fixed: 0.0,
            });
        }
        let mut cov_seen = BTreeSet::new();
        for (a, b) in &spec.covariances {
            let (i, j) = (idx(a), idx(b));
            if i == j || !cov_seen.insert((i.max(j), i.min(j))) {
                return Err(SemError::Spec(format!("invalid covariance {a} ~~ {b}")));
            }
            params.push(Param {
                slot: Slot::S(i.max(j), i.min(j)),
                kind: ParamKind::Covariance,
                lhs: a.clone(),
                rhs: b.clone(),
                free: true,
                fixed: 0.0,
            });
        }
        Ok((Self { p, m, params }, observed))
    }

    fn free(&self) -> impl Iterator<Item = &Param> {
        self.params.iter().filter(|p| p.free)
    }

    fn n_free(&self) -> usize {
        self.free().count()
    }

    fn matrices(&self, theta: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut a = DMatrix::zeros(self.m, self.m);
        let mut s = DMatrix::zeros(self.m, self.m);
        let mut k = 0;
        for prm in &self.params {
            let v = if prm.free {
                k += 1;
                theta[k - 1]
            } else {
                prm.fixed
            };
            match prm.slot {
                Slot::A(i, j) => a[(i, j)] = v,
                Slot::S(i, j) => {
                    s[(i, j)] = v;
                    s[(j, i)] = v;
                }
            }
        }
        (a, s)
    }

    /// `(B, Omega, Sigma)`: `B = (I - A)^-1`, `Omega = B S B'`, `Sigma` its observed block.
    fn implied(&self, theta: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let (a, s) = self.matrices(theta);
        let b = (DMatrix::identity(self.m, self.m) - a).try_inverse().expect("acyclic A gives invertible I - A");
        let omega = &b * s * b.transpose();
        let sigma = omega.view((0, 0), (self.p, self.p)).into_owned();
        (b, omega, sigma)
    }

    fn discrepancy(&self, theta: &DVector<f64>, cov: &DMatrix<f64>, logdet_cov: f64) -> f64 {
        let (_, _, sigma) = self.implied(theta);
        let Some(chol) = sigma.clone().cholesky() else { return f64::INFINITY };
        let logdet = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let trace = chol.solve(cov).trace();
        logdet + trace - logdet_cov - self.p as f64
    }

    fn gradient(&self, theta: &DVector<f64>, cov: &DMatrix<f64>) -> DVector<f64> {
        let (b, omega, sigma) = self.implied(theta);
        let Some(sigma_inv) = sigma.try_inverse() else { return DVector::zeros(theta.len()) };
        let mp = &sigma_inv - &sigma_inv * cov * &sigma_inv;
        let mut full = DMatrix::zeros(self.m, self.m);
        full.view_mut((0, 0), (self.p, self.p)).copy_from(&mp);
        let oab = &omega * &full * &b;
        let btmb = b.transpose() * &full * &b;
        let grads: Vec<f64> = self
            .free()
            .map(|prm| match prm.slot {
                Slot::A(i, j) => 2.0 * oab[(j, i)],
                Slot::S(i, j) if i == j => btmb[(i, i)],
                Slot::S(i, j) => 2.0 * btmb[(i, j)],
            })
            .collect();
        DVector::from_vec(grads)
    }

    /// Derivatives of the observed implied covariance, one per free parameter.
    fn sigma_derivatives(&self, theta: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let (b, omega, _) = self.implied(theta);
        let p = self.p;
        self.free()
            .map(|prm| {
                let full = match prm.slot {
                    Slot::A(i, j) => {
                        let t = b.column(i) * omega.row(j);
                        &t + t.transpose()
                    }
                    Slot::S(i, j) => {
                        let t = b.column(i) * b.column(j).transpose();
                        if i == j {
                            t
                        } else {
                            &t + t.transpose()
                        }
                    }
                };
                full.view((0, 0), (p, p)).into_owned()
            })
            .collect()
    }
}

fn covariance(columns: &[Vec<f64>]) -> DMatrix<f64> {
    let p = columns.len();
    let n = columns[0].len() as f64;
    let means: Vec<f64> = columns.iter().map(|c| c.iter().sum::<f64>() / n).collect();
    DMatrix::from_fn(p, p, |a, b| {
        columns[a].iter().zip(&columns[b]).map(|(x, y)| (x - means[a]) * (y - means[b])).sum::<f64>() / (n - 1.0)
    })
}

fn start_values(model: &Model, spec: &PathModelSpec, observed: &[String], cov: &DMatrix<f64>) -> DVector<f64> {
    let obs_idx = |name: &str| observed.iter().position(|n| n == name);
    let mut latent_var = vec![0.0; spec.latents.len()];
    for (k, l) in spec.latents.iter().enumerate() {
        let first = obs_idx(&l.indicators[0]).expect("indicators are observed");
        latent_var[k] = if l.indicators.len() == 1 { cov[(first, first)] } else { 0.5 * cov[(first, first)] };
    }
    let theta: Vec<f64> = model
        .free()
        .map(|prm| match prm.kind {
            ParamKind::Loading => {
                let k = spec.latents.iter().position(|l| l.name == prm.lhs).expect("known latent");
                let first = obs_idx(&spec.latents[k].indicators[0]).expect("observed");
                let this = obs_idx(&prm.rhs).expect("observed");
                cov[(this, first)] / latent_var[k]
            }
            ParamKind::Path | ParamKind::Covariance => 0.0,
            ParamKind::Variance => match obs_idx(&prm.lhs) {
                Some(i) => 0.5 * cov[(i, i)],
                None => latent_var[spec.latents.iter().position(|l| l.name == prm.lhs).expect("known latent")],
            },
        })
        .collect();
    DVector::from_vec(theta)
}

pub fn fit_path_model(spec: &PathModelSpec, data: &MixedDataset) -> Result<SemFit, SemError> {
    fit_path_model_with(spec, data, &SemOptions::default())
}

pub fn fit_path_model_with(spec: &PathModelSpec, data: &MixedDataset, opts: &SemOptions) -> Result<SemFit, SemError> {
    let (model, observed) = Model::build(spec)?;
    let columns: Vec<Vec<f64>> = observed
        .iter()
        .map(|name| data.column(name).map(|c| c.as_f64()).map_err(|_| SemError::Data(format!("missing column {name}"))))
        .collect::<Result<_, _>>()?;
    let n = data.n();
    let t = model.n_free();
    if n <= t {
        return Err(SemError::Data(format!("n = {n} must exceed the {t} free parameters")));
    }
    let p = model.p;
    let moments = p * (p + 1) / 2;
    if t > moments {
        return Err(SemError::Spec(format!("{t} free parameters exceed {moments} moments")));
    }
    let df = moments - t;
    let cov = covariance(&columns);
    let logdet_cov =
        logdet_spd(&cov).ok_or_else(|| SemError::Numerical("sample covariance is not positive definite".into()))?;

    let x0 = start_values(&model, spec, &observed, &cov);
    let min = bfgs(
        |th| model.discrepancy(th, &cov, logdet_cov),
        |th| model.gradient(th, &cov),
        x0,
        BfgsOptions { max_iter: opts.max_iter, grad_tol: opts.grad_tol, step_tol: 0.0 },
    );
    if !min.value.is_finite() {
        return Err(SemError::Numerical("implied covariance left the positive-definite cone".into()));
    }
    let theta = min.x;
    let discrepancy = min.value.max(0.0);
    let mut chi_square = (n - 1) as f64 * discrepancy;
    if df == 0 && chi_square < 1e-6 {
        chi_square = 0.0;
    }

    let baseline_df = p * (p - 1) / 2;
    let baseline_chi_square = (n - 1) as f64 * ((0..p).map(|i| cov[(i, i)].ln()).sum::<f64>() - logdet_cov).max(0.0);
    let idx = fit_indices(chi_square, df, n, baseline_chi_square, baseline_df)?;

    let (_, omega, sigma) = model.implied(&theta);
    let covariance_of_estimates = sigma.try_inverse().and_then(|si| {
        let derivs = model.sigma_derivatives(&theta);
        let halves: Vec<DMatrix<f64>> = derivs.iter().map(|d| &si * d).collect();
        let info = DMatrix::from_fn(t, t, |a, b| 0.5 * (n - 1) as f64 * (&halves[a] * &halves[b]).trace());
        info.try_inverse()
    });

    let sd = |v: usize| omega[(v, v)].max(0.0).sqrt();
    let mut k = 0;
    let mut parameters = Vec::with_capacity(model.params.len());
    let (a, s) = model.matrices(&theta);
    for prm in &model.params {
        let (estimate, standardized) = match prm.slot {
            Slot::A(i, j) => (a[(i, j)], a[(i, j)] * sd(j) / sd(i)),
            Slot::S(i, j) if i == j => (s[(i, i)], if omega[(i, i)] > 0.0 { s[(i, i)] / omega[(i, i)] } else { 0.0 }),
            Slot::S(i, j) => (s[(i, j)], s[(i, j)] / (sd(i) * sd(j))),
        };
        let (std_error, z, p_value) = if prm.free {
            k += 1;
            match &covariance_of_estimates {
                Some(c) if c[(k - 1, k - 1)] > 0.0 => {
                    let se = c[(k - 1, k - 1)].sqrt();
                    (Some(se), Some(estimate / se), Some(normal_two_sided(estimate / se)))
                }
                _ => (None, None, None),
            }
        } else {
            (None, None, None)
        };
        parameters.push(ParameterEstimate {
            kind: prm.kind,
            lhs: prm.lhs.clone(),
            rhs: prm.rhs.clone(),
            estimate,
            standardized,
            free: prm.free,
            std_error,
            z,
            p_value,
        });
    }

    Ok(SemFit {
        observed,
        n,
        parameters,
        discrepancy,
        chi_square,
        df,
        p_value: idx.p_value,
        rmsea: idx.rmsea,
        cfi: idx.cfi,
        baseline_chi_square,
        baseline_df,
        converged: min.converged,
        iterations: min.iterations,
    })
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    use super::*;
    use crate::causal::Column;

    fn dataset(cols: Vec<(&str, Vec<f64>)>) -> MixedDataset {
        let (names, columns): (Vec<_>, Vec<_>) =
            cols.into_iter().map(|(n, c)| (n.to_string(), Column::Continuous(c))).unzip();
        MixedDataset::new(names, columns).unwrap()
    }

    fn pair(a: &str, b: &str) -> (String, String) {
        (a.to_string(), b.to_string())
    }

    #[test]
    fn rmsea_reference_value() {
        let idx = fit_indices(28.69, 22, 77, 500.0, 28).unwrap();
        assert!((idx.rmsea - 0.0633).abs() < 5e-4, "{}", idx.rmsea);
        assert!(idx.p_value > 0.1 && idx.p_value < 0.2);
    }

    #[test]
    fn index_edge_cases() {
        assert_eq!(fit_indices(10.0, 22, 77, 300.0, 28).unwrap().rmsea, 0.0);
        assert_eq!(fit_indices(22.0, 22, 77, 1000.0, 28).unwrap().cfi, 1.0);
        assert!(fit_indices(22.0, 22, 77, 1000.0, 28).unwrap().p_value > 0.4);
        assert!(matches!(fit_indices(1.0, 0, 77, 10.0, 3), Err(SemError::Contract(_))));
        assert_eq!(fit_indices(0.0, 0, 77, 10.0, 3).unwrap().rmsea, 0.0);
    }

    fn chain_data(n: usize, seed: u64, b1: f64, b2: f64) -> MixedDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut z = || -> f64 { rng.sample(StandardNormal) };
        let mut x = Vec::new();
        let mut y = Vec::new();
        let mut w = Vec::new();
        for _ in 0..n {
            let xi = z();
            let yi = b1 * xi + (1.0 - b1 * b1).sqrt() * z();
            let wi = b2 * yi + (1.0 - b2 * b2).sqrt() * z();
            x.push(xi);
            y.push(yi);
            w.push(wi);
        }
        dataset(vec![("x", x), ("y", y), ("w", w)])
    }

    #[test]
    fn saturated_model_fits_exactly() {
        let data = chain_data(200, 1, 0.5, 0.4);
        let spec = PathModelSpec {
            latents: vec![],
            edges: vec![pair("x", "y"), pair("y", "w")],
            covariances: vec![pair("x", "w")],
        };
        let fit = fit_path_model(&spec, &data).unwrap();
        assert_eq!(fit.df, 0);
        assert_eq!(fit.chi_square, 0.0);
        assert!(fit.converged);
    }

    #[test]
    fn chain_paths_are_recovered() {
        let data = chain_data(5000, 2, 0.5, 0.4);
        let spec = PathModelSpec {
            latents: vec![],
            edges: vec![pair("x", "y"), pair("y", "w"), pair("x", "w")],
            covariances: vec![],
        };
        let fit = fit_path_model(&spec, &data).unwrap();
        assert!((fit.path("x", "y").unwrap().standardized - 0.5).abs() < 0.05);
        assert!((fit.path("y", "w").unwrap().standardized - 0.4).abs() < 0.05);
        assert!(fit.path("x", "w").unwrap().standardized.abs() < 0.05);
        // OLS slope of y on x equals the ML path estimate
        let x = data.column("x").unwrap().as_f64();
        let y = data.column("y").unwrap().as_f64();
        let slope = crate::stats::pearson(&x, &y) * (crate::stats::variance(&y) / crate::stats::variance(&x)).sqrt();
        assert!((fit.path("x", "y").unwrap().estimate - slope).abs() < 1e-5);
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let data = chain_data(300, 3, 0.5, 0.4);
        let spec = PathModelSpec {
            latents: vec![LatentSpec { name: "f".into(), indicators: vec!["x".into(), "y".into(), "w".into()] }],
            edges: vec![],
            covariances: vec![],
        };
        let (model, observed) = Model::build(&spec).unwrap();
        let cols: Vec<Vec<f64>> = observed.iter().map(|n| data.column(n).unwrap().as_f64()).collect();
        let cov = covariance(&cols);
        let ld = logdet_spd(&cov).unwrap();
        let theta = DVector::from_vec(vec![0.8, 0.6, 0.7, 0.5, 0.6, 0.4]);
        let g = model.gradient(&theta, &cov);
        for i in 0..theta.len() {
            let h = 1e-6;
            let mut up = theta.clone();
            up[i] += h;
            let mut dn = theta.clone();
            dn[i] -= h;
            let fd = (model.discrepancy(&up, &cov, ld) - model.discrepancy(&dn, &cov, ld)) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-6 * (1.0 + fd.abs()), "{i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn standardized_loadings_are_scale_invariant() {
        let data = chain_data(500, 4, 0.7, 0.6);
        let spec = PathModelSpec {
            latents: vec![LatentSpec { name: "f".into(), indicators: vec!["x".into(), "y".into(), "w".into()] }],
            edges: vec![],
            covariances: vec![],
        };
        let tight = SemOptions { grad_tol: 1e-10, ..Default::default() };
        let base = fit_path_model_with(&spec, &data, &tight).unwrap();
        let scaled_y: Vec<f64> = data.column("y").unwrap().as_f64().iter().map(|v| v * 7.5).collect();
        let scaled = dataset(vec![
            ("x", data.column("x").unwrap().as_f64()),
            ("y", scaled_y),
            ("w", data.column("w").unwrap().as_f64()),
        ]);
        let refit = fit_path_model_with(&spec, &scaled, &tight).unwrap();
        for ind in ["x", "y", "w"] {
            let a = base.get(ParamKind::Loading, "f", ind).unwrap().standardized;
            let b = refit.get(ParamKind::Loading, "f", ind).unwrap().standardized;
            assert!((a - b).abs() < 1e-6, "{ind}: {a} vs {b}");
        }
        assert!((base.chi_square - refit.chi_square).abs() < 1e-6);
    }

    #[test]
    fn table_lists_every_parameter() {
        let data = chain_data(100, 5, 0.5, 0.4);
        let spec = PathModelSpec { latents: vec![], edges: vec![pair("x", "y"), pair("y", "w")], covariances: vec![] };
        let fit = fit_path_model(&spec, &data).unwrap();
        let table = fit.to_string();
        assert!(table.starts_with("chi2(1) = "));
        assert!(table.contains("x -> y"));
        assert_eq!(table.lines().count(), 2 + fit.parameters.len());
        assert_eq!(fit.df, 1);
    }

    #[test]
    fn invalid_specs() {
        let data = chain_data(50, 6, 0.5, 0.4);
        let cyc = PathModelSpec { latents: vec![], edges: vec![pair("x", "y"), pair("y", "x")], covariances: vec![] };
        assert!(matches!(fit_path_model(&cyc, &data), Err(SemError::Spec(_))));
        let missing = PathModelSpec { latents: vec![], edges: vec![pair("x", "nope")], covariances: vec![] };
        assert!(matches!(fit_path_model(&missing, &data), Err(SemError::Data(_))));
    }
}
