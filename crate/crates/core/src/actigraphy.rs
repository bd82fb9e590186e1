//! Accelerometer sleep/wake scoring (Cole's weighted moving sum) and the
//! self-report targets SE and SQ.
//!
//! Self-reported SE is the ground truth used downstream. The sensor-derived
//! SE is reported next to it for comparison only.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{NightReport, SignalTrace};

#[derive(Debug, Error, PartialEq)]
pub enum ActigraphyError {
    #[error("accelerometer axes are misaligned: {0}")]
    Alignment(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("sq_rating {0} outside 1-4")]
    Validation(i64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActivityCounts {
    pub epoch_len_s: f64,
    pub counts: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SleepState {
    Sleep,
    Wake,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SleepWakeSeries {
    pub epoch_len_s: f64,
    pub states: Vec<SleepState>,
}

/// Weights of the scoring sum over lags -4..=+2, applied as
/// `scale * sum(w[k] * count[i + k - 4])`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColeWeights {
    pub scale: f64,
    pub weights: [f64; 7],
}

impl Default for ColeWeights {
    fn default() -> Self {
        Self { scale: 1e-5, weights: [404.0, 598.0, 326.0, 441.0, 1408.0, 508.0, 350.0] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SqClass {
    Poor,
    Good,
}

impl SqClass {
    pub fn as_binary(self) -> u8 {
        match self {
            SqClass::Poor => 0,
            SqClass::Good => 1,
        }
    }
}

/// Per-epoch activity: the largest deviation of the acceleration magnitude
/// from 1 g within the epoch, times `count_gain`.
pub fn activity_counts(
    acc: &[SignalTrace; 3],
    epoch_len_s: f64,
    count_gain: f64,
) -> Result<ActivityCounts, ActigraphyError> {
    if !(epoch_len_s > 0.0 && epoch_len_s.is_finite()) {
        return Err(ActigraphyError::Config(format!("epoch length {epoch_len_s} must be positive")));
    }
    if !(count_gain > 0.0) {
        return Err(ActigraphyError::Config(format!("count gain {count_gain} must be positive")));
    }
    let [x, y, z] = acc;
    if x.samples.len() != y.samples.len() || x.samples.len() != z.samples.len() {
        return Err(ActigraphyError::Alignment(format!(
            "axis lengths {}, {}, {}",
            x.samples.len(),
            y.samples.len(),
            z.samples.len()
        )));
    }
    if x.rate_hz != y.rate_hz || x.rate_hz != z.rate_hz {
        return Err(ActigraphyError::Alignment("axes sampled at different rates".into()));
    }
    let rate = x.rate_hz;
    let n_epochs = ((x.samples.len() as f64 / rate) / epoch_len_s).ceil() as usize;
    let mut counts = vec![0.0f64; n_epochs.max(1)];
    for j in 0..x.samples.len() {
        let mag = (x.samples[j].powi(2) + y.samples[j].powi(2) + z.samples[j].powi(2)).sqrt();
        let e = ((j as f64 / rate / epoch_len_s).floor() as usize).min(counts.len() - 1);
        counts[e] = counts[e].max((mag - 1.0).abs() * count_gain);
    }
    Ok(ActivityCounts { epoch_len_s, counts })
}

/// Score each epoch; out-of-range neighbours count as zero.
pub fn cole_sleep_wake(counts: &ActivityCounts, weights: &ColeWeights) -> SleepWakeSeries {
    let c = &counts.counts;
    let n = c.len() as isize;
    let states = (0..n)
        .map(|i| {
            let d: f64 = (-4isize..=2)
                .filter_map(|k| {
                    let j = i + k;
                    (0..n).contains(&j).then(|| weights.weights[(k + 4) as usize] * c[j as usize])
                })
                .sum::<f64>()
                * weights.scale;
            if d < 1.0 {
                SleepState::Sleep
            } else {
                SleepState::Wake
            }
        })
        .collect();
    SleepWakeSeries { epoch_len_s: counts.epoch_len_s, states }
}

/// Minutes asleep over minutes in bed.
pub fn sleep_efficiency(report: &NightReport) -> Result<f64, ActigraphyError> {
    if !(report.minutes_in_bed > 0.0) {
        return Err(ActigraphyError::Domain("minutes_in_bed must be positive".into()));
    }
    Ok(report.minutes_asleep / report.minutes_in_bed)
}

/// Fraction of epochs scored as sleep.
pub fn sensor_sleep_efficiency(series: &SleepWakeSeries) -> Result<f64, ActigraphyError> {
    if series.states.is_empty() {
        return Err(ActigraphyError::Domain("empty sleep/wake series".into()));
    }
    let sleep = series.states.iter().filter(|s| **s == SleepState::Sleep).count();
    Ok(sleep as f64 / series.states.len() as f64)
}

/// Ratings 1-2 are poor sleep, 3-4 good sleep.
pub fn sq_binarize(rating: i64) -> Result<SqClass, ActigraphyError> {
    match rating {
        1 | 2 => Ok(SqClass::Poor),
        3 | 4 => Ok(SqClass::Good),
        r => Err(ActigraphyError::Validation(r)),
    }
}
