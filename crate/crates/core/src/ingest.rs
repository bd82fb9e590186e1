//! Sensor channel files and self-report logs.
//!
//! Channel files follow the wrist-sensor export convention: line 1 holds the
//! UTC start timestamp, line 2 the sampling rate, and every further line one
//! sample (one column for EDA in microsiemens, three for ACC in g). Header
//! lines of multi-column files may repeat the value once per column.
//!
//! Sessions on disk are laid out as `<participant>/<YYYY-MM-DD>/EDA.csv` and
//! `<participant>/<YYYY-MM-DD>/ACC.csv`; the path carries the night identity.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use chrono::{NaiveDate, NaiveTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Exec;

pub const REPORT_HEADER: &str = "participant_id,night_date,minutes_asleep,minutes_in_bed,sq_rating";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("channel file contains no samples")]
    EmptyTrace,
    #[error("invalid value at line {line}: {message}")]
    Validation { line: usize, message: String },
    #[error("duplicate report for participant {participant_id} on {night_date}")]
    Duplicate { participant_id: String, night_date: NaiveDate },
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<IngestError>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ChannelLabel {
    #[serde(rename = "EDA")]
    Eda,
    #[serde(rename = "ACC_X")]
    AccX,
    #[serde(rename = "ACC_Y")]
    AccY,
    #[serde(rename = "ACC_Z")]
    AccZ,
}

/// Which export a channel file is: single-column EDA or three-axis ACC.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelFile {
    Eda,
    Acc,
}

impl ChannelFile {
    pub fn columns(self) -> usize {
        match self {
            ChannelFile::Eda => 1,
            ChannelFile::Acc => 3,
        }
    }

    fn labels(self) -> &'static [ChannelLabel] {
        match self {
            ChannelFile::Eda => &[ChannelLabel::Eda],
            ChannelFile::Acc => &[ChannelLabel::AccX, ChannelLabel::AccY, ChannelLabel::AccZ],
        }
    }

    pub fn file_name(self) -> &'static str {
        match self {
            ChannelFile::Eda => "EDA.csv",
            ChannelFile::Acc => "ACC.csv",
        }
    }
}

/// A uniformly sampled sensor channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalTrace {
    pub channel: ChannelLabel,
    pub start_time_s: f64,
    pub rate_hz: f64,
    pub samples: Vec<f64>,
}

impl SignalTrace {
    pub fn new(channel: ChannelLabel, start_time_s: f64, rate_hz: f64, samples: Vec<f64>) -> Result<Self, IngestError> {
        if !(rate_hz > 0.0 && rate_hz.is_finite()) {
            return Err(IngestError::InvalidTrace(format!("rate {rate_hz} must be positive")));
        }
        if !start_time_s.is_finite() {
            return Err(IngestError::InvalidTrace("start time must be finite".into()));
        }
        if samples.is_empty() {
            return Err(IngestError::EmptyTrace);
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(IngestError::InvalidTrace(format!("sample {i} is not finite")));
        }
        Ok(Self { channel, start_time_s, rate_hz, samples })
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.rate_hz
    }

    pub fn end_time_s(&self) -> f64 {
        self.start_time_s + self.duration_s()
    }
}

fn parse_header_value(line: &str, lineno: usize, columns: usize, what: &str) -> Result<f64, IngestError> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != 1 && fields.len() != columns {
        return Err(IngestError::Parse {
            line: lineno,
            message: format!("{what} header has {} fields, expected 1 or {columns}", fields.len()),
        });
    }
    let mut value = None;
    for f in fields {
        let v: f64 = f.parse().map_err(|_| IngestError::Parse {
            line: lineno,
            message: format!("{what} header {f:?} is not a number"),
        })?;
        match value {
            None => value = Some(v),
            Some(prev) if prev != v => {
                return Err(IngestError::Parse { line: lineno, message: format!("{what} header values disagree") })
            }
            _ => {}
        }
    }
    value.ok_or(IngestError::Parse { line: lineno, message: format!("missing {what}") })
}

/// Parse one channel export. EDA files yield one trace, ACC files three
/// (X, Y, Z) sharing start time and rate.
pub fn parse_channel_file(bytes: &[u8], kind: ChannelFile) -> Result<Vec<SignalTrace>, IngestError> {
    let text =
        std::str::from_utf8(bytes).map_err(|e| IngestError::Parse { line: 0, message: format!("not UTF-8: {e}") })?;
    let columns = kind.columns();
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (n1, l1) = lines.next().ok_or(IngestError::Parse { line: 1, message: "missing start-time header".into() })?;
    let start = parse_header_value(l1, n1, columns, "start time")?;
    let (n2, l2) =
        lines.next().ok_or(IngestError::Parse { line: 2, message: "missing sampling-rate header".into() })?;
    let rate = parse_header_value(l2, n2, columns, "sampling rate")?;
    if !(rate > 0.0) {
        return Err(IngestError::Parse { line: n2, message: format!("sampling rate {rate} must be positive") });
    }

    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); columns];
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != columns {
            return Err(IngestError::Parse {
                line: lineno,
                message: format!("expected {columns} column(s), found {}", fields.len()),
            });
        }
        for (c, f) in fields.iter().enumerate() {
            let v: f64 = f
                .parse()
                .map_err(|_| IngestError::Parse { line: lineno, message: format!("sample {f:?} is not a number") })?;
            if !v.is_finite() {
                return Err(IngestError::Parse { line: lineno, message: "sample is not finite".into() });
            }
            cols[c].push(v);
        }
    }
    if cols[0].is_empty() {
        return Err(IngestError::EmptyTrace);
    }
    kind.labels().iter().zip(cols).map(|(&label, samples)| SignalTrace::new(label, start, rate, samples)).collect()
}

/// Serialize traces back into the export format. All traces must share start
/// time, rate and length; one trace writes an EDA file, three write ACC.
pub fn write_channel_file(traces: &[SignalTrace]) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let first = &traces[0];
    let repeat = |v: f64| vec![v.to_string(); traces.len()].join(", ");
    let _ = writeln!(out, "{}", repeat(first.start_time_s));
    let _ = writeln!(out, "{}", repeat(first.rate_hz));
    for i in 0..first.samples.len() {
        let row: Vec<String> = traces.iter().map(|t| t.samples[i].to_string()).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

/// One night's self-report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NightReport {
    pub participant_id: String,
    pub night_date: NaiveDate,
    pub minutes_asleep: f64,
    pub minutes_in_bed: f64,
    pub sq_rating: u8,
}

impl NightReport {
    pub fn key(&self) -> NightKey {
        NightKey { participant_id: self.participant_id.clone(), night_date: self.night_date }
    }
}

#[derive(Debug, Deserialize)]
struct ReportRow {
    participant_id: String,
    night_date: String,
    minutes_asleep: String,
    minutes_in_bed: String,
    sq_rating: String,
}

pub fn parse_report_log(bytes: &[u8]) -> Result<Vec<NightReport>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let header = rdr
        .headers()
        .map_err(|e| IngestError::Parse { line: 1, message: e.to_string() })?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != REPORT_HEADER {
        return Err(IngestError::Parse {
            line: 1,
            message: format!("header must be `{REPORT_HEADER}`, found `{header}`"),
        });
    }

    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<ReportRow>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| IngestError::Parse { line, message: e.to_string() })?;
        let num = |s: &str, what: &str| -> Result<f64, IngestError> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or(IngestError::Parse { line, message: format!("{what} {s:?} is not a number") })
        };
        let night_date = NaiveDate::parse_from_str(&row.night_date, "%Y-%m-%d").map_err(|_| IngestError::Parse {
            line,
            message: format!("date {:?} is not YYYY-MM-DD", row.night_date),
        })?;
        let asleep = num(&row.minutes_asleep, "minutes_asleep")?;
        let in_bed = num(&row.minutes_in_bed, "minutes_in_bed")?;
        let sq: i64 = row.sq_rating.parse().map_err(|_| IngestError::Parse {
            line,
            message: format!("sq_rating {:?} is not an integer", row.sq_rating),
        })?;
        if !(1..=4).contains(&sq) {
            return Err(IngestError::Validation { line, message: format!("sq_rating {sq} outside 1-4") });
        }
        if in_bed <= 0.0 {
            return Err(IngestError::Validation { line, message: "minutes_in_bed must be positive".into() });
        }
        if asleep < 0.0 {
            return Err(IngestError::Validation { line, message: "minutes_asleep must be non-negative".into() });
        }
        if asleep > in_bed {
            return Err(IngestError::Validation {
                line,
                message: format!("minutes_asleep {asleep} exceeds minutes_in_bed {in_bed}"),
            });
        }
        if !seen.insert((row.participant_id.clone(), night_date)) {
            return Err(IngestError::Duplicate { participant_id: row.participant_id, night_date });
        }
        out.push(NightReport {
            participant_id: row.participant_id,
            night_date,
            minutes_asleep: asleep,
            minutes_in_bed: in_bed,
            sq_rating: sq as u8,
        });
    }
    Ok(out)
}

pub fn write_report_log(reports: &[NightReport]) -> String {
    let mut out = format!("{REPORT_HEADER}\n");
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.participant_id, r.night_date, r.minutes_asleep, r.minutes_in_bed, r.sq_rating
        ));
    }
    out
}

/// Identity of one night: participant plus the calendar date the night starts on.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NightKey {
    pub participant_id: String,
    pub night_date: NaiveDate,
}

impl fmt::Display for NightKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.participant_id, self.night_date)
    }
}

#[derive(Debug, Clone)]
pub struct TaggedTrace {
    pub key: NightKey,
    pub trace: SignalTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NightSession {
    pub key: NightKey,
    pub eda: SignalTrace,
    /// X, Y, Z in that order.
    pub acc: [SignalTrace; 3],
    pub report: NightReport,
}

/// A trace belongs to a night when its span intersects
/// `[date + start_hour, date + 1 day + end_hour]` in local time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignmentConfig {
    pub utc_offset_hours: f64,
    pub window_start_hour: u32,
    pub window_end_hour: u32,
}

impl Default for AlignmentConfig {
    fn default() -> Self {
        Self { utc_offset_hours: 0.0, window_start_hour: 18, window_end_hour: 14 }
    }
}

impl AlignmentConfig {
    /// Night window in UTC seconds.
    pub fn window(&self, date: NaiveDate) -> (f64, f64) {
        let at = |d: NaiveDate, h: u32| {
            let t = NaiveTime::from_hms_opt(h.min(23), 0, 0).unwrap_or(NaiveTime::MIN);
            d.and_time(t).and_utc().timestamp() as f64 - self.utc_offset_hours * 3600.0
        };
        let next = date.succ_opt().unwrap_or(date);
        (at(date, self.window_start_hour), at(next, self.window_end_hour))
    }

    pub fn overlaps(&self, trace: &SignalTrace, date: NaiveDate) -> bool {
        let (lo, hi) = self.window(date);
        trace.start_time_s < hi && trace.end_time_s() > lo
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AssemblyWarning {
    pub night: NightKey,
    pub reason: String,
}

impl fmt::Display for AssemblyWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "night {}: {}", self.night, self.reason)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Assembly {
    pub sessions: Vec<NightSession>,
    pub warnings: Vec<AssemblyWarning>,
}

#[derive(Default)]
struct Slot {
    eda: Option<SignalTrace>,
    acc: [Option<SignalTrace>; 3],
    report: Option<NightReport>,
    extra: Vec<ChannelLabel>,
}

/// Group traces and reports by night. Every night key ends up either as a
/// session or as exactly one warning; sessions come out sorted by key.
pub fn assemble_sessions(traces: Vec<TaggedTrace>, reports: Vec<NightReport>, align: &AlignmentConfig) -> Assembly {
    let mut slots: BTreeMap<NightKey, Slot> = BTreeMap::new();
    for TaggedTrace { key, trace } in traces {
        let slot = slots.entry(key).or_default();
        let target = match trace.channel {
            ChannelLabel::Eda => &mut slot.eda,
            ChannelLabel::AccX => &mut slot.acc[0],
            ChannelLabel::AccY => &mut slot.acc[1],
            ChannelLabel::AccZ => &mut slot.acc[2],
        };
        if target.is_some() {
            slot.extra.push(trace.channel);
        } else {
            *target = Some(trace);
        }
    }
    for r in reports {
        let slot = slots.entry(r.key()).or_default();
        slot.report = Some(r);
    }

    let mut out = Assembly::default();
    for (key, slot) in slots {
        let mut missing = Vec::new();
        if slot.eda.is_none() {
            missing.push("EDA");
        }
        for (i, name) in ["ACC_X", "ACC_Y", "ACC_Z"].iter().enumerate() {
            if slot.acc[i].is_none() {
                missing.push(name);
            }
        }
        if slot.report.is_none() {
            missing.push("report");
        }
        if !missing.is_empty() {
            out.warnings.push(AssemblyWarning { night: key, reason: format!("missing {}", missing.join(", ")) });
            continue;
        }
        if !slot.extra.is_empty() {
            out.warnings.push(AssemblyWarning { night: key, reason: format!("duplicate channel(s) {:?}", slot.extra) });
            continue;
        }
        let (Some(eda), [Some(x), Some(y), Some(z)], Some(report)) = (slot.eda, slot.acc, slot.report) else {
            unreachable!("completeness checked above");
        };
        let outside: Vec<String> = [&eda, &x, &y, &z]
            .iter()
            .filter(|t| !align.overlaps(t, key.night_date))
            .map(|t| format!("{:?}", t.channel))
            .collect();
        if !outside.is_empty() {
            out.warnings.push(AssemblyWarning {
                night: key,
                reason: format!("trace(s) {} fall outside the night window", outside.join(", ")),
            });
            continue;
        }
        out.sessions.push(NightSession { key, eda, acc: [x, y, z], report });
    }
    out
}

fn read(path: &Path) -> Result<Vec<u8>, IngestError> {
    std::fs::read(path).map_err(|source| IngestError::Io { path: path.to_path_buf(), source })
}

fn in_file<T>(path: &Path, r: Result<T, IngestError>) -> Result<T, IngestError> {
    r.map_err(|e| IngestError::File { path: path.to_path_buf(), source: Box::new(e) })
}

/// Read every `<participant>/<date>/{EDA,ACC}.csv` under `root`. Directories
/// whose name is not a date are skipped. Files are parsed in parallel.
pub fn load_trace_dir(root: &Path, exec: Exec) -> Result<Vec<TaggedTrace>, IngestError> {
    let io = |path: &Path, source| IngestError::Io { path: path.to_path_buf(), source };
    let mut jobs: Vec<(NightKey, PathBuf, ChannelFile)> = Vec::new();
    let mut participants: Vec<PathBuf> = std::fs::read_dir(root)
        .map_err(|e| io(root, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    participants.sort();
    for pdir in participants {
        let participant_id = pdir.file_name().unwrap_or_default().to_string_lossy().into_owned();
        let mut nights: Vec<PathBuf> = std::fs::read_dir(&pdir)
            .map_err(|e| io(&pdir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_dir())
            .collect();
        nights.sort();
        for ndir in nights {
            let name = ndir.file_name().unwrap_or_default().to_string_lossy().into_owned();
            let Ok(night_date) = NaiveDate::parse_from_str(&name, "%Y-%m-%d") else {
                continue;
            };
            let key = NightKey { participant_id: participant_id.clone(), night_date };
            for kind in [ChannelFile::Eda, ChannelFile::Acc] {
                let path = ndir.join(kind.file_name());
                if path.is_file() {
                    jobs.push((key.clone(), path, kind));
                }
            }
        }
    }

    let parsed = exec.map(&jobs, |(key, path, kind)| {
        let bytes = read(path)?;
        let traces = in_file(path, parse_channel_file(&bytes, *kind))?;
        Ok::<_, IngestError>(
            traces.into_iter().map(|trace| TaggedTrace { key: key.clone(), trace }).collect::<Vec<_>>(),
        )
    });
    let mut out = Vec::new();
    for p in parsed {
        out.extend(p?);
    }
    Ok(out)
}

pub fn load_report_log(path: &Path) -> Result<Vec<NightReport>, IngestError> {
    let bytes = read(path)?;
    in_file(path, parse_report_log(&bytes))
}
