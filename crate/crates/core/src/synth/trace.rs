//! Scripted EDA traces.
//!
//! Script format, one `key = value` per line, `#` starts a comment:
//!
//! ```text
//! duration_s = 28800
//! rate_hz = 4
//! baseline_us = 0.3
//! noise_sd_us = 0.005
//! event = 600 0.1            # onset_s amplitude_us
//! storm = 3600 3720 15 0.08  # start_s end_s spacing_s amplitude_us
//! ```

use std::f64::consts::PI;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::ingest::{ChannelLabel, SignalTrace};

pub const RISE_S: f64 = 2.0;
pub const DECAY_TAU_S: f64 = 8.0;
/// Events closer than this are rejected.
pub const MIN_EVENT_GAP_S: f64 = 1.0;
/// Response tail beyond which contributions are dropped (`e^-20`).
const TAIL_S: f64 = RISE_S + 20.0 * DECAY_TAU_S;

/// Unit skin-conductance response `t` seconds after onset: raised-cosine
/// rise over 2 s, then exponential decay with an 8 s time constant.
pub fn scr_shape(t: f64) -> f64 {
    if t < 0.0 {
        0.0
    } else if t < RISE_S {
        0.5 * (1.0 - (PI * t / RISE_S).cos())
    } else {
        (-(t - RISE_S) / DECAY_TAU_S).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StormBlock {
    pub start_s: f64,
    pub end_s: f64,
    pub spacing_s: f64,
    pub amplitude_us: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceScript {
    pub duration_s: f64,
    pub rate_hz: f64,
    pub start_time_s: f64,
    pub baseline_us: f64,
    pub noise_sd_us: f64,
    /// `(onset_s, amplitude_us)`.
    pub events: Vec<(f64, f64)>,
    pub storms: Vec<StormBlock>,
}

impl Default for TraceScript {
    fn default() -> Self {
        Self {
            duration_s: 28_800.0,
            rate_hz: 4.0,
            start_time_s: 0.0,
            baseline_us: 0.3,
            noise_sd_us: 0.005,
            events: Vec::new(),
            storms: Vec::new(),
        }
    }
}

fn numbers(value: &str, count: usize, line: usize) -> Result<Vec<f64>, SynthError> {
    let parts: Vec<f64> = value
        .split_whitespace()
        .map(f64::from_str)
        .collect::<Result<_, _>>()
        .map_err(|_| SynthError::Script { line, message: format!("expected numbers, got {value:?}") })?;
    if parts.len() != count || parts.iter().any(|v| !v.is_finite()) {
        return Err(SynthError::Script { line, message: format!("expected {count} finite numbers, got {value:?}") });
    }
    Ok(parts)
}

impl TraceScript {
    pub fn parse(text: &str) -> Result<Self, SynthError> {
        let mut s = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| SynthError::Script { line, message: "expected key = value".into() })?;
            let value = value.trim();
            match key.trim() {
                "duration_s" => s.duration_s = numbers(value, 1, line)?[0],
                "rate_hz" => s.rate_hz = numbers(value, 1, line)?[0],
                "start_time_s" => s.start_time_s = numbers(value, 1, line)?[0],
                "baseline_us" => s.baseline_us = numbers(value, 1, line)?[0],
                "noise_sd_us" => s.noise_sd_us = numbers(value, 1, line)?[0],
                "event" => {
                    let v = numbers(value, 2, line)?;
                    s.events.push((v[0], v[1]));
                }
                "storm" => {
                    let v = numbers(value, 4, line)?;
                    s.storms.push(StormBlock { start_s: v[0], end_s: v[1], spacing_s: v[2], amplitude_us: v[3] });
                }
                other => return Err(SynthError::Script { line, message: format!("unknown key {other:?}") }),
            }
        }
        Ok(s)
    }

    /// Scripted events plus expanded storm blocks, sorted by onset.
    pub fn all_events(&self) -> Result<Vec<(f64, f64)>, SynthError> {
        let mut events = self.events.clone();
        for b in &self.storms {
            if !(b.spacing_s > 0.0) || b.end_s < b.start_s {
                return Err(SynthError::Script {
                    line: 0,
                    message: "storm needs end >= start and positive spacing".into(),
                });
            }
            let mut t = b.start_s;
            while t < b.end_s {
                events.push((t, b.amplitude_us));
                t += b.spacing_s;
            }
        }
        events.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(events)
    }
}

/// Planted ground truth for a generated trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedTruth {
    pub onsets_s: Vec<f64>,
    /// Onset plus the rise time, relative to the trace start.
    pub peak_times_s: Vec<f64>,
    pub amplitudes_us: Vec<f64>,
}

pub fn generate_eda_trace(script: &TraceScript, seed: u64) -> Result<(SignalTrace, PlantedTruth), SynthError> {
    let err = |message: String| SynthError::Script { line: 0, message };
    if !(script.rate_hz >= 1.0 && script.rate_hz.is_finite()) {
        return Err(err("rate_hz must be at least 1".into()));
    }
    if !(script.duration_s > 0.0 && script.duration_s.is_finite()) {
        return Err(err("duration_s must be positive".into()));
    }
    if !(script.noise_sd_us >= 0.0) {
        return Err(err("noise_sd_us must be non-negative".into()));
    }
    let events = script.all_events()?;
    for w in events.windows(2) {
        if w[1].0 - w[0].0 < MIN_EVENT_GAP_S {
            return Err(err(format!("events at {} s and {} s are closer than {MIN_EVENT_GAP_S} s", w[0].0, w[1].0)));
        }
    }
    if let Some(&(t, _)) = events.iter().find(|(t, _)| *t < 0.0 || *t >= script.duration_s) {
        return Err(err(format!("event at {t} s lies outside the trace")));
    }

    let n = (script.duration_s * script.rate_hz).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples: Vec<f64> =
        (0..n).map(|_| script.baseline_us + script.noise_sd_us * rng.sample::<f64, _>(StandardNormal)).collect();
    for &(onset, amp) in &events {
        let first = (onset * script.rate_hz).ceil() as usize;
        let last = (((onset + TAIL_S) * script.rate_hz).ceil() as usize).min(n);
        for (i, s) in samples.iter_mut().enumerate().take(last).skip(first) {
            *s += amp * scr_shape(i as f64 / script.rate_hz - onset);
        }
    }
    let trace = SignalTrace::new(ChannelLabel::Eda, script.start_time_s, script.rate_hz, samples)
        .map_err(|e| err(e.to_string()))?;
    Ok((
        trace,
        PlantedTruth {
            onsets_s: events.iter().map(|e| e.0).collect(),
            peak_times_s: events.iter().map(|e| e.0 + RISE_S).collect(),
            amplitudes_us: events.iter().map(|e| e.1).collect(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eda_features::{detect_peaks, FeatureConfig};

    #[test]
    fn empty_noiseless_script_is_flat() {
        let s = TraceScript { duration_s: 60.0, noise_sd_us: 0.0, ..Default::default() };
        let (t, truth) = generate_eda_trace(&s, 1).unwrap();
        assert_eq!(t.samples.len(), 240);
        assert!(t.samples.iter().all(|&v| v == 0.3));
        assert!(truth.onsets_s.is_empty());
    }

    #[test]
    fn parse_script() {
        let s = TraceScript::parse(
            "# night\nduration_s = 600\nrate_hz = 8\nevent = 10 0.2\nstorm = 100 130 10 0.1 # three\nnoise_sd_us=0\n",
        )
        .unwrap();
        assert_eq!(s.rate_hz, 8.0);
        assert_eq!(s.all_events().unwrap(), vec![(10.0, 0.2), (100.0, 0.1), (110.0, 0.1), (120.0, 0.1)]);
        assert!(matches!(TraceScript::parse("bogus = 1"), Err(SynthError::Script { line: 1, .. })));
        assert!(matches!(TraceScript::parse("event = 1"), Err(SynthError::Script { line: 1, .. })));
    }

    #[test]
    fn close_events_are_rejected() {
        let s = TraceScript { duration_s: 60.0, events: vec![(10.0, 0.1), (10.5, 0.1)], ..Default::default() };
        assert!(matches!(generate_eda_trace(&s, 1), Err(SynthError::Script { .. })));
    }

    #[test]
    fn planted_events_are_recovered() {
        let events = (0..12).map(|i| (1200.0 + 2000.0 * i as f64, 0.1)).collect();
        let s = TraceScript { events, ..Default::default() };
        let (t, truth) = generate_eda_trace(&s, 7).unwrap();
        assert_eq!(t.samples.len(), 115_200);
        let peaks = detect_peaks(&t, &FeatureConfig::default()).unwrap();
        assert_eq!(peaks.len(), 12);
        for (p, expected) in peaks.iter().zip(&truth.peak_times_s) {
            assert!((p.time_offset_s - expected).abs() < 2.0, "{} vs {expected}", p.time_offset_s);
        }
        let (again, _) = generate_eda_trace(&s, 7).unwrap();
        assert_eq!(t, again);
    }

    #[test]
    fn shape_is_continuous_with_unit_peak() {
        assert_eq!(scr_shape(-1.0), 0.0);
        assert!((scr_shape(RISE_S) - 1.0).abs() < 1e-15);
        assert!((scr_shape(RISE_S - 1e-9) - 1.0).abs() < 1e-9);
    }
}
