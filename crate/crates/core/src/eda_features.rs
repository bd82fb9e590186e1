//! Night-level EDA features: skin-conductance peaks, peak epochs and storms.
//!
//! The pipeline is smoothing -> peak detection -> 30 s epoch flags -> storms
//! (maximal runs of flagged epochs). Storm statistics are measured in epochs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{ChannelLabel, NightSession, SignalTrace};

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("expected an EDA trace, got {0:?}")]
    Channel(ChannelLabel),
    #[error("invalid feature configuration: {0}")]
    Config(String),
    #[error("peak at {time_s} s lies outside a {duration_s} s trace")]
    Range { time_s: f64, duration_s: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub smoothing_window_s: f64,
    pub min_amplitude_us: f64,
    pub min_rise_rate_us_per_s: f64,
    pub epoch_len_s: f64,
    pub storm_min_epochs: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            smoothing_window_s: 2.0,
            min_amplitude_us: 0.05,
            min_rise_rate_us_per_s: 0.01,
            epoch_len_s: 30.0,
            storm_min_epochs: 2,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<(), FeatureError> {
        let positive = [
            ("smoothing_window_s", self.smoothing_window_s),
            ("min_amplitude_us", self.min_amplitude_us),
            ("min_rise_rate_us_per_s", self.min_rise_rate_us_per_s),
            ("epoch_len_s", self.epoch_len_s),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(FeatureError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.storm_min_epochs == 0 {
            return Err(FeatureError::Config("storm_min_epochs must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeakEvent {
    pub sample_index: usize,
    pub time_offset_s: f64,
    /// Rise above the preceding trough, microsiemens.
    pub amplitude_us: f64,
    pub rise_rate_us_per_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochFlags {
    pub epoch_len_s: f64,
    pub flags: Vec<bool>,
}

impl EpochFlags {
    pub fn peak_epoch_count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Storm {
    pub start_epoch: usize,
    pub length_epochs: usize,
}

/// The six night-level EDA features. Storm statistics are in epochs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdaFeatureVector {
    pub peak_epoch_count: usize,
    pub storm_count: usize,
    pub storm_mean: f64,
    pub storm_sd: f64,
    pub storm_max: f64,
    pub peak_count: usize,
}

impl EdaFeatureVector {
    pub const NAMES: [&'static str; 6] =
        ["peak_epoch_count", "storm_count", "storm_mean", "storm_sd", "storm_max", "peak_count"];

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.peak_epoch_count as f64,
            self.storm_count as f64,
            self.storm_mean,
            self.storm_sd,
            self.storm_max,
            self.peak_count as f64,
        ]
    }

    /// Assemble the vector from already computed parts.
    pub fn from_parts(peak_count: usize, flags: &EpochFlags, storms: &[Storm]) -> Self {
        let lengths: Vec<f64> = storms.iter().map(|s| s.length_epochs as f64).collect();
        let n = lengths.len();
        let (mean, sd, max) = match n {
            0 => (0.0, 0.0, 0.0),
            _ => {
                let mean = lengths.iter().sum::<f64>() / n as f64;
                let sd = if n > 1 {
                    (lengths.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
                } else {
                    0.0
                };
                (mean, sd, lengths.iter().cloned().fold(f64::MIN, f64::max))
            }
        };
        Self {
            peak_epoch_count: flags.peak_epoch_count(),
            storm_count: n,
            storm_mean: mean,
            storm_sd: sd,
            storm_max: max,
            peak_count,
        }
    }
}

/// Centered moving average; windows are truncated at the trace edges.
pub fn smooth(samples: &[f64], window: usize) -> Vec<f64> {
    let n = samples.len();
    let half = window / 2;
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &s in samples {
        acc += s;
        prefix.push(acc);
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Detect skin-conductance peaks.
///
/// The trace is smoothed, then every local maximum is compared against the
/// preceding local minimum. A maximum is accepted
/// when that rise reaches `min_amplitude_us` and the mean slope from the
/// trough reaches `min_rise_rate_us_per_s`.
pub fn detect_peaks(trace: &SignalTrace, config: &FeatureConfig) -> Result<Vec<PeakEvent>, FeatureError> {
    if trace.channel != ChannelLabel::Eda {
        return Err(FeatureError::Channel(trace.channel));
    }
    config.validate()?;
    if trace.rate_hz < 1.0 {
        return Err(FeatureError::Config(format!("EDA rate {} Hz is below 1 Hz", trace.rate_hz)));
    }
    let rate = trace.rate_hz;
    let window = ((config.smoothing_window_s * rate).round() as usize).max(1);
    let s = smooth(&trace.samples, window);
    let n = s.len();

    let mut peaks = Vec::new();
    let (mut trough, mut trough_idx) = (s[0], 0usize);
    let mut i = 1;
    while i < n {
        if s[i] <= trough {
            trough = s[i];
            trough_idx = i;
        }
        if s[i] > s[i - 1] {
            // end of a possible plateau at this level
            let mut end = i;
            while end + 1 < n && s[end + 1] == s[i] {
                end += 1;
            }
            if end + 1 < n && s[end + 1] < s[i] {
                let rise = s[i] - trough;
                let dt = (i - trough_idx) as f64 / rate;
                let slope = rise / dt;
                if rise >= config.min_amplitude_us && slope >= config.min_rise_rate_us_per_s {
                    peaks.push(PeakEvent {
                        sample_index: i,
                        time_offset_s: i as f64 / rate,
                        amplitude_us: rise,
                        rise_rate_us_per_s: slope,
                    });
                }
                trough = s[i];
                trough_idx = i;
            }
            i = end + 1;
            continue;
        }
        i += 1;
    }
    Ok(peaks)
}

/// Flag every epoch containing at least one peak.
pub fn epoch_peaks(peaks: &[PeakEvent], duration_s: f64, config: &FeatureConfig) -> Result<EpochFlags, FeatureError> {
    config.validate()?;
    let n_epochs = (duration_s / config.epoch_len_s).ceil().max(0.0) as usize;
    let mut flags = vec![false; n_epochs];
    for p in peaks {
        if !(p.time_offset_s >= 0.0 && p.time_offset_s < duration_s) {
            return Err(FeatureError::Range { time_s: p.time_offset_s, duration_s });
        }
        let e = ((p.time_offset_s / config.epoch_len_s).floor() as usize).min(n_epochs - 1);
        flags[e] = true;
    }
    Ok(EpochFlags { epoch_len_s: config.epoch_len_s, flags })
}

/// Maximal runs of flagged epochs at least `storm_min_epochs` long.
pub fn detect_storms(flags: &EpochFlags, config: &FeatureConfig) -> Vec<Storm> {
    let mut storms = Vec::new();
    let mut run_start = None;
    for (i, &f) in flags.flags.iter().chain(std::iter::once(&false)).enumerate() {
        match (f, run_start) {
            (true, None) => run_start = Some(i),
            (false, Some(start)) => {
                if i - start >= config.storm_min_epochs {
                    storms.push(Storm { start_epoch: start, length_epochs: i - start });
                }
                run_start = None;
            }
            _ => {}
        }
    }
    storms
}

/// Peaks, flags and storms for one trace, kept for reporting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceAnalysis {
    pub peaks: Vec<PeakEvent>,
    pub flags: EpochFlags,
    pub storms: Vec<Storm>,
    pub features: EdaFeatureVector,
}

pub fn analyze_trace(trace: &SignalTrace, config: &FeatureConfig) -> Result<TraceAnalysis, FeatureError> {
    let peaks = detect_peaks(trace, config)?;
    let flags = epoch_peaks(&peaks, trace.duration_s(), config)?;
    let storms = detect_storms(&flags, config);
    let features = EdaFeatureVector::from_parts(peaks.len(), &flags, &storms);
    Ok(TraceAnalysis { peaks, flags, storms, features })
}

pub fn extract_night_features(
    session: &NightSession,
    config: &FeatureConfig,
) -> Result<EdaFeatureVector, FeatureError> {
    analyze_trace(&session.eda, config).map(|a| a.features)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eda(samples: Vec<f64>, rate: f64) -> SignalTrace {
        SignalTrace::new(ChannelLabel::Eda, 0.0, rate, samples).unwrap()
    }

    fn flags(bits: &[u8]) -> EpochFlags {
        EpochFlags { epoch_len_s: 30.0, flags: bits.iter().map(|&b| b == 1).collect() }
    }

    fn peak_at(t: f64) -> PeakEvent {
        PeakEvent { sample_index: (t * 4.0) as usize, time_offset_s: t, amplitude_us: 0.1, rise_rate_us_per_s: 0.1 }
    }

    #[test]
    fn constant_trace_has_no_peaks() {
        let t = eda(vec![0.3; 4000], 4.0);
        assert!(detect_peaks(&t, &FeatureConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn planted_bump_is_one_peak() {
        // 0.2 uS rise over 5 s at 4 Hz, then a slow decay back down
        let rate = 4.0;
        let mut s = vec![0.3; 200];
        for i in 0..20 {
            s.push(0.3 + 0.2 * (i + 1) as f64 / 20.0);
        }
        for i in 0..200 {
            s.push(0.3 + 0.2 * (-(i as f64) / 4.0 / 8.0).exp());
        }
        s.extend(vec![0.3; 200]);
        let peaks = detect_peaks(&eda(s, rate), &FeatureConfig::default()).unwrap();
        assert_eq!(peaks.len(), 1);
        assert!((peaks[0].amplitude_us - 0.2).abs() < 0.03);
        assert!(peaks[0].rise_rate_us_per_s >= 0.01);
    }

    #[test]
    fn slow_rise_fails_rate_threshold() {
        // 0.1 uS over 20 s is 0.005 uS/s, below the 0.01 default
        let mut s = vec![0.3; 40];
        for i in 0..80 {
            s.push(0.3 + 0.1 * (i + 1) as f64 / 80.0);
        }
        s.extend(vec![0.3; 40]);
        assert!(detect_peaks(&eda(s, 4.0), &FeatureConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn rejects_non_eda_channel() {
        let t = SignalTrace::new(ChannelLabel::AccX, 0.0, 4.0, vec![0.0; 10]).unwrap();
        assert_eq!(detect_peaks(&t, &FeatureConfig::default()), Err(FeatureError::Channel(ChannelLabel::AccX)));
    }

    #[test]
    fn epoch_flags() {
        let c = FeatureConfig::default();
        let none = epoch_peaks(&[], 300.0, &c).unwrap();
        assert_eq!(none.flags.len(), 10);
        assert_eq!(none.peak_epoch_count(), 0);

        let same = epoch_peaks(&[peak_at(10.0), peak_at(20.0)], 300.0, &c).unwrap();
        assert!(same.flags[0]);
        assert_eq!(same.peak_epoch_count(), 1);

        let two = epoch_peaks(&[peak_at(10.0), peak_at(50.0)], 300.0, &c).unwrap();
        assert_eq!(two.peak_epoch_count(), 2);

        assert!(matches!(epoch_peaks(&[peak_at(301.0)], 300.0, &c), Err(FeatureError::Range { .. })));
        // partial last epoch still counts
        assert_eq!(epoch_peaks(&[], 301.0, &c).unwrap().flags.len(), 11);
    }

    #[test]
    fn storms_are_maximal_runs() {
        let c = FeatureConfig::default();
        assert!(detect_storms(&flags(&[0, 0, 0]), &c).is_empty());
        assert_eq!(detect_storms(&flags(&[1, 1, 0, 1]), &c), vec![Storm { start_epoch: 0, length_epochs: 2 }]);
        let s = detect_storms(&flags(&[1, 1, 1, 0, 1, 1]), &c);
        assert_eq!(s.iter().map(|s| s.length_epochs).collect::<Vec<_>>(), vec![3, 2]);
    }

    #[test]
    fn feature_vector_arithmetic() {
        let c = FeatureConfig::default();
        let f = flags(&[1, 1, 1, 0, 1, 1]);
        let storms = detect_storms(&f, &c);
        let v = EdaFeatureVector::from_parts(7, &f, &storms);
        assert_eq!(v.peak_epoch_count, 5);
        assert_eq!(v.storm_count, 2);
        assert_eq!(v.storm_mean, 2.5);
        assert!((v.storm_sd - 0.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(v.storm_max, 3.0);
        assert_eq!(v.peak_count, 7);

        let single = flags(&[0, 1, 1, 1, 1, 0]);
        let v = EdaFeatureVector::from_parts(4, &single, &detect_storms(&single, &c));
        assert_eq!((v.storm_count, v.storm_sd, v.storm_max), (1, 0.0, 4.0));
    }

    #[test]
    fn flat_trace_gives_zero_features() {
        let a = analyze_trace(&eda(vec![0.3; 2400], 4.0), &FeatureConfig::default()).unwrap();
        assert_eq!(a.features.to_array(), [0.0; 6]);
    }

    #[test]
    fn config_must_be_positive() {
        let c = FeatureConfig { epoch_len_s: 0.0, ..Default::default() };
        assert!(matches!(c.validate(), Err(FeatureError::Config(_))));
        let c = FeatureConfig { storm_min_epochs: 0, ..Default::default() };
        assert!(c.validate().is_err());
    }
}
