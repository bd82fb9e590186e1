//! Synthetic raw nights (EDA and accelerometer files plus self-reports)
//! driven by the tabular latent model, for end-to-end runs.

use std::path::{Path, PathBuf};

use chrono::{Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::trace::{generate_eda_trace, PlantedTruth, TraceScript};
use super::{generate_tabular, GroundTruthModel, SynthError, SE, SQ};
use crate::exec::replicate_seed;
use crate::ingest::{write_channel_file, write_report_log, ChannelLabel, NightKey, NightReport, SignalTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RawNightOptions {
    pub nights: usize,
    pub participants: usize,
    pub first_date: NaiveDate,
    pub duration_s: f64,
    pub eda_rate_hz: f64,
    pub acc_rate_hz: f64,
}

impl Default for RawNightOptions {
    fn default() -> Self {
        Self {
            nights: 12,
            participants: 3,
            first_date: NaiveDate::from_ymd_opt(2019, 3, 4).expect("valid date"),
            duration_s: 3600.0,
            eda_rate_hz: 4.0,
            acc_rate_hz: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawNight {
    pub key: NightKey,
    pub eda: SignalTrace,
    pub acc: [SignalTrace; 3],
    pub report: NightReport,
    pub truth: PlantedTruth,
}

/// Recording starts at 23:00 UTC on the night's date.
const START_HOUR_S: i64 = 23 * 3600;

pub fn generate_raw_nights(
    model: &GroundTruthModel,
    opts: &RawNightOptions,
    seed: u64,
) -> Result<Vec<RawNight>, SynthError> {
    if opts.participants == 0 || !(opts.duration_s >= 600.0) {
        return Err(SynthError::Config("need at least one participant and 10 minutes per night".into()));
    }
    let table = generate_tabular(model, opts.nights, seed)?;
    let se = table.data.column(SE).map_err(|e| SynthError::Config(e.to_string()))?.as_f64();
    let sq = table.data.column(SQ).map_err(|e| SynthError::Config(e.to_string()))?.as_f64();
    let hours = opts.duration_s / 3600.0;
    let mut out = Vec::with_capacity(opts.nights);
    for i in 0..opts.nights {
        let mut rng = ChaCha8Rng::seed_from_u64(replicate_seed(seed, i + 1));
        let participant_id = format!("P{:02}", i % opts.participants + 1);
        let night_date = opts
            .first_date
            .checked_add_days(Days::new((i / opts.participants) as u64))
            .ok_or_else(|| SynthError::Config("date overflow".into()))?;
        let start = night_date.and_hms_opt(0, 0, 0).expect("midnight").and_utc().timestamp() + START_HOUR_S;

        // isolated responses scale with magnitude, storm blocks with storms
        let n_events = ((6.0 + 3.0 * table.magnitude[i]) * hours).round().max(0.0) as usize;
        let n_storms = ((1.0 + table.storms[i]) * hours).round().max(0.0) as usize;
        let slots = n_events + n_storms;
        let slot_len = opts.duration_s / (slots + 1) as f64;
        let mut script = TraceScript {
            duration_s: opts.duration_s,
            rate_hz: opts.eda_rate_hz,
            start_time_s: start as f64,
            ..Default::default()
        };
        let mut kinds: Vec<bool> = (0..slots).map(|k| k < n_storms).collect();
        for k in (1..kinds.len()).rev() {
            kinds.swap(k, rng.random_range(0..=k));
        }
        for (k, is_storm) in kinds.into_iter().enumerate() {
            let base = slot_len * (k as f64 + 0.25);
            let amp = 0.08 + 0.04 * rng.random::<f64>();
            if is_storm && slot_len > 120.0 {
                // 1.5 to 8 epochs of 30 s, bounded by the slot
                let len = (45.0 + 195.0 * rng.random::<f64>()).min(0.45 * slot_len);
                script.storms.push(super::trace::StormBlock {
                    start_s: base,
                    end_s: base + len,
                    spacing_s: 12.0,
                    amplitude_us: amp,
                });
            } else {
                script.events.push((base, amp));
            }
        }
        let (eda, truth) = generate_eda_trace(&script, replicate_seed(seed, 10_000 + i))?;

        let se_frac = (0.85 + 0.06 * se[i]).clamp(0.4, 1.0);
        let minutes_in_bed = (opts.duration_s / 60.0).round();
        let sq_rating = if sq[i] > 0.5 { 3 + rng.random_range(0..2u8) } else { 1 + rng.random_range(0..2u8) };
        let report = NightReport {
            participant_id: participant_id.clone(),
            night_date,
            minutes_asleep: (minutes_in_bed * se_frac).round(),
            minutes_in_bed,
            sq_rating,
        };

        let n_acc = (opts.duration_s * opts.acc_rate_hz).round() as usize;
        let wake = 1.0 - se_frac;
        let bout = (60.0 * opts.acc_rate_hz) as usize;
        let mut axes = [vec![0.0; n_acc], vec![0.0; n_acc], vec![1.0; n_acc]];
        for start_idx in (0..n_acc).step_by(bout.max(1)) {
            let moving = rng.random::<f64>() < wake;
            for j in start_idx..(start_idx + bout).min(n_acc) {
                for axis in axes.iter_mut() {
                    let jitter: f64 = rng.sample(StandardNormal);
                    axis[j] += if moving { 0.3 * jitter } else { 0.002 * jitter };
                }
            }
        }
        let [x, y, z] = axes;
        let mk = |label, samples| {
            SignalTrace::new(label, start as f64, opts.acc_rate_hz, samples)
                .map_err(|e| SynthError::Config(e.to_string()))
        };
        let acc = [mk(ChannelLabel::AccX, x)?, mk(ChannelLabel::AccY, y)?, mk(ChannelLabel::AccZ, z)?];
        out.push(RawNight { key: NightKey { participant_id, night_date }, eda, acc, report, truth });
    }
    Ok(out)
}

/// Write `root/traces/<participant>/<date>/{EDA,ACC}.csv` and
/// `root/reports.csv`. Returns `(traces_dir, reports_path)`.
pub fn write_raw_nights(root: &Path, nights: &[RawNight]) -> Result<(PathBuf, PathBuf), SynthError> {
    let traces = root.join("traces");
    for night in nights {
        let dir = traces.join(&night.key.participant_id).join(night.key.night_date.to_string());
        std::fs::create_dir_all(&dir)?;
        std::fs::write(dir.join("EDA.csv"), write_channel_file(std::slice::from_ref(&night.eda)))?;
        std::fs::write(dir.join("ACC.csv"), write_channel_file(&night.acc))?;
    }
    std::fs::create_dir_all(root)?;
    let reports: Vec<NightReport> = nights.iter().map(|n| n.report.clone()).collect();
    let reports_path = root.join("reports.csv");
    std::fs::write(&reports_path, write_report_log(&reports))?;
    Ok((traces, reports_path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Exec;
    use crate::ingest::{assemble_sessions, load_report_log, load_trace_dir, AlignmentConfig};

    #[test]
    fn written_nights_assemble_cleanly() {
        let opts = RawNightOptions { nights: 10, duration_s: 900.0, ..Default::default() };
        let nights = generate_raw_nights(&GroundTruthModel::default(), &opts, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (traces, reports) = write_raw_nights(dir.path(), &nights).unwrap();
        let loaded = load_trace_dir(&traces, Exec::Sequential).unwrap();
        let reports = load_report_log(&reports).unwrap();
        let asm = assemble_sessions(loaded, reports, &AlignmentConfig::default());
        assert!(asm.warnings.is_empty(), "{:?}", asm.warnings);
        assert_eq!(asm.sessions.len(), 10);
        for n in &nights {
            let s = asm.sessions.iter().find(|s| s.key == n.key).unwrap();
            assert_eq!(s.eda, n.eda);
        }
    }
}
