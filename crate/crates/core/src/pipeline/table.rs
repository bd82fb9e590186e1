//! The per-night feature table: six EDA features plus the two targets.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use thiserror::Error;

use crate::eda_features::EdaFeatureVector;

pub const FEATURE_TABLE_HEADER: [&str; 11] = [
    "participant_id",
    "night_date",
    "peak_epoch_count",
    "storm_count",
    "storm_mean",
    "storm_sd",
    "storm_max",
    "peak_count",
    "sleep_efficiency",
    "sq_rating",
    "sensor_sleep_efficiency",
];

/// One night. Features are stored as reals so tables produced by the
/// tabular generator (continuous indicators) load through the same path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub participant_id: String,
    pub night_date: NaiveDate,
    pub peak_epoch_count: f64,
    pub storm_count: f64,
    pub storm_mean: f64,
    pub storm_sd: f64,
    pub storm_max: f64,
    pub peak_count: f64,
    /// Self-reported minutes asleep over minutes in bed.
    pub sleep_efficiency: f64,
    pub sq_rating: u8,
    /// Actigraphy estimate, when accelerometer data was available.
    pub sensor_sleep_efficiency: Option<f64>,
}

impl FeatureRow {
    pub fn from_features(
        participant_id: String,
        night_date: NaiveDate,
        f: &EdaFeatureVector,
        sleep_efficiency: f64,
        sq_rating: u8,
        sensor_sleep_efficiency: Option<f64>,
    ) -> Self {
        let [a, b, c, d, e, g] = f.to_array();
        Self {
            participant_id,
            night_date,
            peak_epoch_count: a,
            storm_count: b,
            storm_mean: c,
            storm_sd: d,
            storm_max: e,
            peak_count: g,
            sleep_efficiency,
            sq_rating,
            sensor_sleep_efficiency,
        }
    }

    /// Features in [`EdaFeatureVector::NAMES`] order.
    pub fn features(&self) -> [f64; 6] {
        [self.peak_epoch_count, self.storm_count, self.storm_mean, self.storm_sd, self.storm_max, self.peak_count]
    }

    pub fn sq_good(&self) -> bool {
        self.sq_rating >= 3
    }
}

#[derive(Debug, Error)]
pub enum TableError {
    #[error("feature table: {0}")]
    Csv(#[from] csv::Error),
    #[error("feature table header must be {expected}, found {found}")]
    Header { expected: String, found: String },
    #[error("feature table row {row}: {message}")]
    Row { row: usize, message: String },
}

pub fn write_feature_table(rows: &[FeatureRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

pub fn parse_feature_table(text: &str) -> Result<Vec<FeatureRow>, TableError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != FEATURE_TABLE_HEADER {
        return Err(TableError::Header { expected: FEATURE_TABLE_HEADER.join(","), found: header.join(",") });
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.deserialize::<FeatureRow>().enumerate() {
        let row = rec?;
        let line = i + 2;
        if row.features().iter().chain([&row.sleep_efficiency]).any(|v| !v.is_finite()) {
            return Err(TableError::Row { row: line, message: "non-finite value".into() });
        }
        if !(1..=4).contains(&row.sq_rating) {
            return Err(TableError::Row { row: line, message: format!("sq_rating {} outside 1-4", row.sq_rating) });
        }
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(p: &str, sensor: Option<f64>) -> FeatureRow {
        FeatureRow {
            participant_id: p.into(),
            night_date: NaiveDate::from_ymd_opt(2019, 3, 4).unwrap(),
            peak_epoch_count: 12.0,
            storm_count: 2.0,
            storm_mean: 2.5,
            storm_sd: std::f64::consts::FRAC_1_SQRT_2,
            storm_max: 3.0,
            peak_count: 17.0,
            sleep_efficiency: 0.875,
            sq_rating: 3,
            sensor_sleep_efficiency: sensor,
        }
    }

    #[test]
    fn round_trip() {
        let rows = vec![row("P01", Some(0.91)), row("P02", None)];
        let text = write_feature_table(&rows);
        assert!(text.starts_with(&FEATURE_TABLE_HEADER.join(",")));
        assert_eq!(parse_feature_table(&text).unwrap(), rows);
    }

    #[test]
    fn bad_rating_names_the_row() {
        let text = write_feature_table(&[row("P01", None)]).replace(",3,", ",7,");
        assert!(matches!(parse_feature_table(&text), Err(TableError::Row { row: 2, .. })));
    }

    #[test]
    fn wrong_header() {
        assert!(matches!(parse_feature_table("a,b\n1,2\n"), Err(TableError::Header { .. })));
    }
}
