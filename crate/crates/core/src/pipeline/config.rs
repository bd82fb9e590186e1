//! Run configuration: one JSON document plus `key=value` overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::actigraphy::ColeWeights;
use crate::causal::ScoreConfig;
use crate::eda_features::FeatureConfig;
use crate::factors::EfaOptions;
use crate::ingest::AlignmentConfig;

use super::{ErrorKind, PipelineError, Stage};

/// Raw sessions (`traces_dir` + `reports`) or an already extracted
/// feature table. Relative paths resolve against the config file's folder.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub traces_dir: Option<PathBuf>,
    pub reports: Option<PathBuf>,
    pub feature_table: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    /// Factor scores plus SE and SQ.
    #[default]
    Scores,
    /// The six raw features plus SE and SQ.
    RawFeatures,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub mode: SearchMode,
    pub score: ScoreConfig,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { mode: SearchMode::Scores, score: ScoreConfig { pooled_fallback: true, ..Default::default() } }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActigraphyConfig {
    pub epoch_len_s: f64,
    pub count_gain: f64,
    pub cole: ColeWeights,
}

impl Default for ActigraphyConfig {
    fn default() -> Self {
        Self { epoch_len_s: 30.0, count_gain: 100.0, cole: ColeWeights::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    pub k: usize,
    pub threshold: f64,
    pub ridge: f64,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self { k: 10, threshold: 0.5, ridge: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: InputConfig,
    /// Required: seeds the cross-validation shuffles.
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub alignment: AlignmentConfig,
    pub features: FeatureConfig,
    pub actigraphy: ActigraphyConfig,
    pub efa: EfaOptions,
    pub search: SearchConfig,
    pub cv: CvConfig,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn config_err(message: String) -> PipelineError {
    PipelineError::new(Stage::Config, ErrorKind::Config, message)
}

/// Set a dotted key inside a JSON object, creating objects on the way.
/// The value is parsed as JSON when possible and taken as a string otherwise.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<(), PipelineError> {
    let (key, raw) =
        assignment.split_once('=').ok_or_else(|| config_err(format!("override `{assignment}` is not key=value")))?;
    let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(config_err(format!("override key `{key}` is malformed")));
    }
    let mut node = doc;
    for part in &parts[..parts.len() - 1] {
        if node.is_null() {
            *node = Value::Object(Default::default());
        }
        let obj =
            node.as_object_mut().ok_or_else(|| config_err(format!("override `{key}`: `{part}` is not an object")))?;
        node = obj.entry(part.to_string()).or_insert(Value::Null);
    }
    if node.is_null() {
        *node = Value::Object(Default::default());
    }
    let obj =
        node.as_object_mut().ok_or_else(|| config_err(format!("override `{key}` does not address an object field")))?;
    obj.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

impl PipelineConfig {
    /// Parse a config document, apply overrides, resolve paths against `base_dir`.
    pub fn from_json(text: &str, base_dir: &Path, overrides: &[String]) -> Result<Self, PipelineError> {
        let mut doc: Value = if text.trim().is_empty() {
            Value::Object(Default::default())
        } else {
            serde_json::from_str(text).map_err(|e| config_err(format!("config is not valid JSON: {e}")))?
        };
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let mut cfg: PipelineConfig = serde_json::from_value(doc).map_err(|e| config_err(format!("config: {e}")))?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&text, &base, overrides)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn seed(&self) -> Result<u64, PipelineError> {
        self.seed.ok_or_else(|| config_err("seed is required (set `seed` or pass --seed)".into()))
    }

    /// Checks that do not touch the data: input mode, paths, option ranges.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let i = &self.input;
        let paths: Vec<&PathBuf> = match (&i.feature_table, &i.traces_dir, &i.reports) {
            (Some(t), None, None) => vec![t],
            (None, Some(d), Some(r)) => vec![d, r],
            _ => {
                return Err(config_err("input needs either `feature_table` or both `traces_dir` and `reports`".into()))
            }
        };
        for p in paths {
            let full = self.resolve(p);
            if !full.exists() {
                return Err(config_err(format!("input path {} does not exist", full.display())));
            }
        }
        self.features.validate().map_err(|e| config_err(e.to_string()))?;
        self.search.score.validate().map_err(|e| config_err(e.to_string()))?;
        if self.cv.k < 2 {
            return Err(config_err(format!("cv.k = {} must be at least 2", self.cv.k)));
        }
        if !(self.cv.threshold > 0.0 && self.cv.threshold < 1.0) {
            return Err(config_err(format!("cv.threshold = {} must lie in (0, 1)", self.cv.threshold)));
        }
        if self.efa.promax_power < 1 {
            return Err(config_err("efa.promax_power must be at least 1".into()));
        }
        self.seed()?;
        Ok(())
    }
}
