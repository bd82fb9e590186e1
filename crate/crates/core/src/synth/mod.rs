//! Synthetic data with known ground truth: tabular nights drawn from a
//! two-factor latent model feeding sleep efficiency and quality, scripted
//! EDA traces with planted responses, and raw night directories.

mod raw;
mod trace;

pub use raw::{generate_raw_nights, write_raw_nights, RawNight, RawNightOptions};
pub use trace::{generate_eda_trace, scr_shape, PlantedTruth, StormBlock, TraceScript};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::causal::{Column, MixedDataset};
use crate::eda_features::EdaFeatureVector;
use crate::pipeline::FeatureRow;
use crate::stats::normal_pdf;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid model: {0}")]
    Config(String),
    #[error("script line {line}: {message}")]
    Script { line: usize, message: String },
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SqLink {
    Probit,
    Logit,
}

/// Column names of generated tables.
pub const SE: &str = "se";
pub const SQ: &str = "sq";

/// Largest attainable point-biserial correlation between a standard normal
/// and a median split driven by it: `2 phi(0)`.
pub const MAX_POINT_BISERIAL: f64 = 0.797_884_560_802_865_4;

/// Two correlated standard-normal factors (magnitude, storms) load on the
/// six EDA features; magnitude drives SE; SE drives binary SQ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GroundTruthModel {
    /// `(magnitude, storms)` loadings per feature, in feature-name order.
    pub loadings: [[f64; 2]; 6],
    pub factor_correlation: f64,
    pub path_mag_se: f64,
    /// Standardized SE -> SQ effect on the observed 0/1 scale.
    pub path_se_sq: f64,
    pub sq_link: SqLink,
}

impl Default for GroundTruthModel {
    fn default() -> Self {
        Self {
            loadings: [[0.79, 0.59], [-0.09, 0.83], [0.87, -0.46], [0.96, 0.0], [0.98, 0.0], [0.985, 0.0]],
            factor_correlation: 0.0,
            path_mag_se: 0.31,
            path_se_sq: 0.61,
            sq_link: SqLink::Probit,
        }
    }
}

impl GroundTruthModel {
    /// Loadings as a `6 x 2` matrix.
    pub fn pattern(&self) -> DMatrix<f64> {
        DMatrix::from_fn(6, 2, |i, j| self.loadings[i][j])
    }

    fn communality(&self, row: usize) -> f64 {
        let [a, b] = self.loadings[row];
        a * a + b * b + 2.0 * a * b * self.factor_correlation
    }

    /// Analytic covariance of `[features..., se, sq]` with SQ as numeric 0/1.
    pub fn implied_covariance(&self) -> DMatrix<f64> {
        let phi = self.factor_correlation;
        let l = self.pattern();
        let factor_cov = DMatrix::from_row_slice(2, 2, &[1.0, phi, phi, 1.0]);
        let mut sigma = DMatrix::zeros(8, 8);
        let block = &l * &factor_cov * l.transpose();
        for i in 0..6 {
            for j in 0..6 {
                sigma[(i, j)] = if i == j { 1.0 } else { block[(i, j)] };
            }
            // cov(feature, magnitude) = L_i1 + L_i2 * phi
            let with_mag = l[(i, 0)] + l[(i, 1)] * phi;
            let with_se = self.path_mag_se * with_mag;
            sigma[(i, 6)] = with_se;
            sigma[(6, i)] = with_se;
            let with_sq = with_se * 0.5 * self.path_se_sq;
            sigma[(i, 7)] = with_sq;
            sigma[(7, i)] = with_sq;
        }
        sigma[(6, 6)] = 1.0;
        sigma[(6, 7)] = 0.5 * self.path_se_sq;
        sigma[(7, 6)] = 0.5 * self.path_se_sq;
        sigma[(7, 7)] = 0.25;
        sigma
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Config(m));
        if self.loadings.iter().flatten().any(|v| !v.is_finite()) {
            return bad("loadings must be finite".into());
        }
        if !(self.factor_correlation.abs() < 1.0) {
            return bad("factor correlation must lie in (-1, 1)".into());
        }
        for (i, name) in EdaFeatureVector::NAMES.iter().enumerate() {
            if !(self.communality(i) < 1.0) {
                return bad(format!("{name}: communality {:.4} leaves no unique variance", self.communality(i)));
            }
        }
        if !(self.path_mag_se.abs() < 1.0) {
            return bad("|path_mag_se| must be below 1".into());
        }
        if !(self.path_se_sq.abs() < MAX_POINT_BISERIAL) {
            return bad(format!("|path_se_sq| must be below {MAX_POINT_BISERIAL:.4}"));
        }
        if self.implied_covariance().cholesky().is_none() {
            return bad("implied covariance is not positive definite".into());
        }
        Ok(())
    }

    /// Slope `g` of the SQ link `P(SQ = 1 | SE) = link(g * SE)` that gives
    /// `corr(SE, SQ) = path_se_sq`.
    pub fn sq_slope(&self) -> f64 {
        let target = self.path_se_sq;
        let slope = match self.sq_link {
            SqLink::Probit => {
                let rho = target.abs() / MAX_POINT_BISERIAL;
                rho / (1.0 - rho * rho).sqrt()
            }
            SqLink::Logit => {
                // corr(Z, 1[u < sigmoid(g Z)]) = 2 E[Z sigmoid(g Z)], increasing in g
                let corr = |g: f64| {
                    let steps = 4000;
                    let h = 20.0 / steps as f64;
                    (0..=steps)
                        .map(|i| {
                            let z = -10.0 + i as f64 * h;
                            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
                            w * z * normal_pdf(z) / (1.0 + (-g * z).exp())
                        })
                        .sum::<f64>()
                        * h
                        * 2.0
                };
                let (mut lo, mut hi) = (0.0, 1.0);
                while corr(hi) < target.abs() && hi < 1e6 {
                    hi *= 2.0;
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if corr(mid) < target.abs() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        };
        slope.copysign(target)
    }
}

/// A generated table plus the hidden latent values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularSample {
    /// Six feature columns, `se` (continuous) and `sq` (0/1).
    pub data: MixedDataset,
    pub magnitude: Vec<f64>,
    pub storms: Vec<f64>,
}

impl TabularSample {
    /// Feature-table rows for this sample. Nights cycle over
    /// `participants` starting at `first_date`; the standardized SE value
    /// becomes the fraction `0.80 + 0.05 * se` (clamped to [0, 1]) and SQ
    /// becomes rating 3 (good) or 2 (poor).
    pub fn feature_rows(&self, participants: usize, first_date: chrono::NaiveDate) -> Vec<FeatureRow> {
        let participants = participants.max(1);
        let col = |name: &str| self.data.column(name).expect("generated column").as_f64();
        let feats: Vec<Vec<f64>> = EdaFeatureVector::NAMES.iter().map(|n| col(n)).collect();
        let (se, sq) = (col(SE), col(SQ));
        (0..self.data.n())
            .map(|i| {
                let day = chrono::Days::new((i / participants) as u64);
                FeatureRow {
                    participant_id: format!("P{:02}", i % participants + 1),
                    night_date: first_date.checked_add_days(day).expect("date in range"),
                    peak_epoch_count: feats[0][i],
                    storm_count: feats[1][i],
                    storm_mean: feats[2][i],
                    storm_sd: feats[3][i],
                    storm_max: feats[4][i],
                    peak_count: feats[5][i],
                    sleep_efficiency: (0.80 + 0.05 * se[i]).clamp(0.0, 1.0),
                    sq_rating: if sq[i] == 1.0 { 3 } else { 2 },
                    sensor_sleep_efficiency: None,
                }
            })
            .collect()
    }
}

pub fn generate_tabular(model: &GroundTruthModel, n: usize, seed: u64) -> Result<TabularSample, SynthError> {
    model.validate()?;
    if n < 10 {
        return Err(SynthError::Config("n must be at least 10".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = || -> f64 { rng.sample(StandardNormal) };
    let phi = model.factor_correlation;
    let unique: Vec<f64> = (0..6).map(|i| (1.0 - model.communality(i)).sqrt()).collect();
    let se_noise = (1.0 - model.path_mag_se.powi(2)).sqrt();
    let slope = model.sq_slope();

    let mut features: Vec<Vec<f64>> = (0..6).map(|_| Vec::with_capacity(n)).collect();
    let mut se = Vec::with_capacity(n);
    let mut sq = Vec::with_capacity(n);
    let mut magnitude = Vec::with_capacity(n);
    let mut storms = Vec::with_capacity(n);
    for _ in 0..n {
        let m = z();
        let s = phi * m + (1.0 - phi * phi).sqrt() * z();
        for (j, col) in features.iter_mut().enumerate() {
            let [a, b] = model.loadings[j];
            col.push(a * m + b * s + unique[j] * z());
        }
        let e = model.path_mag_se * m + se_noise * z();
        let u = z();
        let positive = match model.sq_link {
            SqLink::Probit => slope * e + u > 0.0,
            // logistic noise from the same normal draw via the probability integral transform
            SqLink::Logit => {
                let p = crate::stats::normal_cdf(u);
                (p / (1.0 - p)).ln() + slope * e > 0.0
            }
        };
        magnitude.push(m);
        storms.push(s);
        se.push(e);
        sq.push(i64::from(positive));
    }
    let mut names: Vec<String> = EdaFeatureVector::NAMES.iter().map(|s| s.to_string()).collect();
    names.push(SE.into());
    names.push(SQ.into());
    let mut columns: Vec<Column> = features.into_iter().map(Column::Continuous).collect();
    columns.push(Column::Continuous(se));
    columns.push(Column::Discrete(sq));
    let data = MixedDataset::new(names, columns).map_err(|e| SynthError::Config(format!("degenerate sample: {e}")))?;
    Ok(TabularSample { data, magnitude, storms })
}
