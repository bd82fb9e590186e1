//! End-to-end run: ingest, features, factor analysis, structure search,
//! Markov blankets, path model, predictors.
//!
//! Every stage is a public function so the CLI subcommands can produce
//! exactly one slice of the full report.

mod config;
mod output;
mod table;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actigraphy::{activity_counts, cole_sleep_wake, sensor_sleep_efficiency, sleep_efficiency, sq_binarize};
use crate::causal::{fgs_search, markov_blanket, CausalError, Column, Dag, MixedDataset, SearchResult};
use crate::eda_features::{extract_night_features, EdaFeatureVector};
use crate::exec::Exec;
use crate::factors::{efa_fit, factor_scores, FactorError, FactorSolution, StandardizedMatrix};
use crate::ingest::{assemble_sessions, load_report_log, load_trace_dir, NightSession};
use crate::predictors::{
    cross_validate, logistic_fit, ols_fit, partial_correlation, CvOptions, EvalReport, Features, LogisticFit,
    LogisticOptions, ModelKind, PartialCorrelation, PredictError, RegressionFit,
};
use crate::sem::{fit_path_model, LatentSpec, PathModelSpec, SemError, SemFit};
use crate::stats::{mean, variance};

pub use config::{apply_override, ActigraphyConfig, CvConfig, InputConfig, PipelineConfig, SearchConfig, SearchMode};
pub use output::{loadings_csv, markdown_summary, metrics_csv, roc_csv, write_outputs};
pub use table::{parse_feature_table, write_feature_table, FeatureRow, TableError, FEATURE_TABLE_HEADER};

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const SE: &str = "se";
pub const SQ: &str = "sq";

/// Factor names by column order of the rotated solution (largest sum of
/// squared loadings first).
pub fn factor_name(j: usize) -> String {
    match j {
        0 => "eda_magnitude".into(),
        1 => "eda_storms".into(),
        _ => format!("eda_factor_{}", j + 1),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    Ingest,
    Features,
    Efa,
    Search,
    Sem,
    Predict,
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::Features => "features",
            Stage::Efa => "efa",
            Stage::Search => "search",
            Stage::Sem => "sem",
            Stage::Predict => "predict",
            Stage::Output => "output",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("[{stage}] {message}")]
pub struct PipelineError {
    pub stage: Stage,
    pub kind: ErrorKind,
    pub message: String,
}

impl PipelineError {
    pub fn new(stage: Stage, kind: ErrorKind, message: impl Into<String>) -> Self {
        Self { stage, kind, message: message.into() }
    }

    /// 2 config, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numerical => 4,
        }
    }
}

fn factor_err(e: FactorError) -> PipelineError {
    let kind = match e {
        FactorError::Numerical(_) => ErrorKind::Numerical,
        _ => ErrorKind::Data,
    };
    PipelineError::new(Stage::Efa, kind, e.to_string())
}

fn causal_err(stage: Stage, e: CausalError) -> PipelineError {
    let kind = match e {
        CausalError::Config(_) => ErrorKind::Config,
        CausalError::Numerical(_) => ErrorKind::Numerical,
        _ => ErrorKind::Data,
    };
    PipelineError::new(stage, kind, e.to_string())
}

fn sem_err(e: SemError) -> PipelineError {
    let kind = match e {
        SemError::Numerical(_) | SemError::Contract(_) => ErrorKind::Numerical,
        _ => ErrorKind::Data,
    };
    PipelineError::new(Stage::Sem, kind, e.to_string())
}

// ---------------------------------------------------------------- ingest

/// Load per-night rows from whichever input the config names. Returns the
/// rows sorted by night and the assembly warnings.
pub fn load_rows(cfg: &PipelineConfig, exec: Exec) -> Result<(Vec<FeatureRow>, Vec<String>), PipelineError> {
    cfg.validate()?;
    let data = |m: String| PipelineError::new(Stage::Ingest, ErrorKind::Data, m);
    let (mut rows, warnings) = if let Some(t) = &cfg.input.feature_table {
        let path = cfg.resolve(t);
        let text = std::fs::read_to_string(&path).map_err(|e| data(format!("cannot read {}: {e}", path.display())))?;
        let rows = parse_feature_table(&text).map_err(|e| data(format!("{}: {e}", path.display())))?;
        (rows, Vec::new())
    } else {
        let dir = cfg.resolve(cfg.input.traces_dir.as_ref().expect("validated"));
        let reports = cfg.resolve(cfg.input.reports.as_ref().expect("validated"));
        let traces = load_trace_dir(&dir, exec).map_err(|e| data(e.to_string()))?;
        let reports = load_report_log(&reports).map_err(|e| data(e.to_string()))?;
        let asm = assemble_sessions(traces, reports, &cfg.alignment);
        let warnings = asm.warnings.iter().map(ToString::to_string).collect();
        (extract_rows(&asm.sessions, cfg, exec)?, warnings)
    };
    rows.sort_by(|a, b| (&a.participant_id, a.night_date).cmp(&(&b.participant_id, b.night_date)));
    if rows.is_empty() {
        return Err(data("no complete nights in the input".into()));
    }
    Ok((rows, warnings))
}

/// Features, self-report targets and actigraphy SE for each session.
pub fn extract_rows(
    sessions: &[NightSession],
    cfg: &PipelineConfig,
    exec: Exec,
) -> Result<Vec<FeatureRow>, PipelineError> {
    exec.map(sessions, |s| night_row(s, cfg)).into_iter().collect()
}

fn night_row(s: &NightSession, cfg: &PipelineConfig) -> Result<FeatureRow, PipelineError> {
    let tag = |kind, m: String| PipelineError::new(Stage::Features, kind, format!("night {}: {m}", s.key));
    let features: EdaFeatureVector =
        extract_night_features(s, &cfg.features).map_err(|e| tag(ErrorKind::Data, e.to_string()))?;
    let se = sleep_efficiency(&s.report).map_err(|e| tag(ErrorKind::Data, e.to_string()))?;
    sq_binarize(i64::from(s.report.sq_rating)).map_err(|e| tag(ErrorKind::Data, e.to_string()))?;
    let a = &cfg.actigraphy;
    let counts =
        activity_counts(&s.acc, a.epoch_len_s, a.count_gain).map_err(|e| tag(ErrorKind::Data, e.to_string()))?;
    let sensor =
        sensor_sleep_efficiency(&cole_sleep_wake(&counts, &a.cole)).map_err(|e| tag(ErrorKind::Data, e.to_string()))?;
    Ok(FeatureRow::from_features(
        s.key.participant_id.clone(),
        s.key.night_date,
        &features,
        se,
        s.report.sq_rating,
        Some(sensor),
    ))
}

// ---------------------------------------------------------------- efa

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorAssignment {
    pub variable: String,
    pub factor: String,
    pub loading: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfaStage {
    pub variables: Vec<String>,
    pub eigenvalues: Vec<f64>,
    /// Kaiser count; 0 means no factor was retained and the search falls
    /// back to the raw features.
    pub retained: usize,
    pub factor_names: Vec<String>,
    pub solution: Option<FactorSolution>,
    pub assignment: Vec<FactorAssignment>,
}

pub fn feature_matrix(rows: &[FeatureRow]) -> Result<StandardizedMatrix, PipelineError> {
    let cols: Vec<Vec<f64>> = (0..6).map(|j| rows.iter().map(|r| r.features()[j]).collect()).collect();
    let names = EdaFeatureVector::NAMES.iter().map(|s| s.to_string()).collect();
    StandardizedMatrix::from_columns(names, &cols).map_err(factor_err)
}

pub fn run_efa(rows: &[FeatureRow], cfg: &PipelineConfig) -> Result<EfaStage, PipelineError> {
    let m = feature_matrix(rows)?;
    let variables = m.names().to_vec();
    match efa_fit(&m, &cfg.efa) {
        Ok(sol) => {
            let factor_names: Vec<String> = (0..sol.k).map(factor_name).collect();
            let assignment = sol
                .primary_factor()
                .into_iter()
                .enumerate()
                .map(|(i, j)| FactorAssignment {
                    variable: variables[i].clone(),
                    factor: factor_names[j].clone(),
                    loading: sol.loadings[(i, j)],
                })
                .collect();
            Ok(EfaStage {
                variables,
                eigenvalues: sol.eigenvalues.clone(),
                retained: sol.k,
                factor_names,
                solution: Some(sol),
                assignment,
            })
        }
        Err(FactorError::NoFactorsRetained { eigenvalues }) => Ok(EfaStage {
            variables,
            eigenvalues,
            retained: 0,
            factor_names: Vec::new(),
            solution: None,
            assignment: Vec::new(),
        }),
        Err(e) => Err(factor_err(e)),
    }
}

// ---------------------------------------------------------------- search

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphStage {
    pub requested_mode: SearchMode,
    /// Differs from `requested_mode` when no factor was retained.
    pub mode: SearchMode,
    pub variables: Vec<String>,
    pub discrete: Vec<String>,
    pub result: SearchResult,
    /// Edge list, one `A -> B` or `A -- B` per entry.
    pub edges: Vec<String>,
}

fn zscore(x: &[f64]) -> Option<Vec<f64>> {
    let (m, sd) = (mean(x), variance(x).sqrt());
    (sd > 0.0 && sd.is_finite()).then(|| x.iter().map(|v| (v - m) / sd).collect())
}

/// Search variables: EDA columns (factor scores or standardized raw
/// features), standardized SE, and binary SQ.
pub fn search_dataset(
    rows: &[FeatureRow],
    efa: &EfaStage,
    mode: SearchMode,
) -> Result<(MixedDataset, SearchMode), PipelineError> {
    let m = feature_matrix(rows)?;
    let effective = if efa.solution.is_none() { SearchMode::RawFeatures } else { mode };
    let (mut names, mut cols): (Vec<String>, Vec<Column>) = match (effective, &efa.solution) {
        (SearchMode::Scores, Some(sol)) => {
            let scores: DMatrix<f64> = factor_scores(&m, sol).map_err(factor_err)?;
            (
                efa.factor_names.clone(),
                scores.column_iter().map(|c| Column::Continuous(c.iter().copied().collect())).collect(),
            )
        }
        _ => (
            m.names().to_vec(),
            m.data().column_iter().map(|c| Column::Continuous(c.iter().copied().collect())).collect(),
        ),
    };
    let se: Vec<f64> = rows.iter().map(|r| r.sleep_efficiency).collect();
    let se = zscore(&se)
        .ok_or_else(|| PipelineError::new(Stage::Search, ErrorKind::Data, "sleep efficiency has zero variance"))?;
    names.push(SE.into());
    cols.push(Column::Continuous(se));
    names.push(SQ.into());
    cols.push(Column::Discrete(rows.iter().map(|r| i64::from(r.sq_good())).collect()));
    let data = MixedDataset::new(names, cols).map_err(|e| causal_err(Stage::Search, e))?;
    Ok((data, effective))
}

pub fn run_search(
    data: &MixedDataset,
    requested_mode: SearchMode,
    mode: SearchMode,
    cfg: &PipelineConfig,
    exec: Exec,
) -> Result<GraphStage, PipelineError> {
    let result = fgs_search(data, &cfg.search.score, exec).map_err(|e| causal_err(Stage::Search, e))?;
    let edges = result.cpdag.to_string().lines().map(str::to_string).collect();
    let discrete =
        data.names().iter().zip(data.columns()).filter(|(_, c)| c.is_discrete()).map(|(n, _)| n.clone()).collect();
    Ok(GraphStage { requested_mode, mode, variables: data.names().to_vec(), discrete, result, edges })
}

pub fn markov_blankets(dag: &Dag) -> Result<BTreeMap<String, Vec<String>>, PipelineError> {
    dag.nodes
        .iter()
        .map(|v| {
            let mb = markov_blanket(dag, v).map_err(|e| causal_err(Stage::Search, e))?;
            Ok((v.clone(), mb.into_iter().collect()))
        })
        .collect()
}

// ---------------------------------------------------------------- sem

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemStage {
    pub spec: Option<PathModelSpec>,
    pub fit: Option<SemFit>,
    pub note: Option<String>,
}

/// Path model implied by the searched DAG. In score mode each factor becomes
/// a latent measured by the features that load on it most strongly.
pub fn path_model(efa: &EfaStage, graph: &GraphStage) -> (PathModelSpec, Option<String>) {
    let mut spec = PathModelSpec::default();
    let mut dropped = Vec::new();
    if graph.mode == SearchMode::Scores {
        for name in &efa.factor_names {
            let indicators: Vec<String> =
                efa.assignment.iter().filter(|a| &a.factor == name).map(|a| a.variable.clone()).collect();
            if indicators.is_empty() {
                dropped.push(name.clone());
            } else {
                spec.latents.push(LatentSpec { name: name.clone(), indicators });
            }
        }
    }
    spec.edges =
        graph.result.dag.edges.iter().filter(|(a, b)| !dropped.contains(a) && !dropped.contains(b)).cloned().collect();
    let note =
        (!dropped.is_empty()).then(|| format!("factors without a primary indicator left out: {}", dropped.join(", ")));
    (spec, note)
}

pub fn sem_dataset(rows: &[FeatureRow], search: &MixedDataset) -> Result<MixedDataset, PipelineError> {
    let m = feature_matrix(rows)?;
    let mut names = m.names().to_vec();
    let mut cols: Vec<Column> =
        m.data().column_iter().map(|c| Column::Continuous(c.iter().copied().collect())).collect();
    for v in [SE, SQ] {
        names.push(v.into());
        cols.push(search.column(v).map_err(|e| causal_err(Stage::Sem, e))?.clone());
    }
    MixedDataset::new(names, cols).map_err(|e| causal_err(Stage::Sem, e))
}

pub fn run_sem(
    rows: &[FeatureRow],
    efa: &EfaStage,
    graph: &GraphStage,
    search: &MixedDataset,
) -> Result<SemStage, PipelineError> {
    let (spec, note) = path_model(efa, graph);
    if spec.latents.is_empty() && spec.edges.is_empty() {
        return Ok(SemStage {
            spec: None,
            fit: None,
            note: Some("searched graph has no edges; no path model to fit".into()),
        });
    }
    let data = sem_dataset(rows, search)?;
    let fit = fit_path_model(&spec, &data).map_err(sem_err)?;
    Ok(SemStage { spec: Some(spec), fit: Some(fit), note })
}

// ---------------------------------------------------------------- predict

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    /// The target's Markov blanket, widened for SQ by the EDA variables
    /// in SE's blanket.
    WithEda,
    /// The same set without EDA variables.
    WithoutEda,
    /// Only the EDA variables of the target's blanket (sensor-only model).
    EdaOnly,
}

impl FeatureSet {
    pub fn label(self) -> &'static str {
        match self {
            FeatureSet::WithEda => "with_eda",
            FeatureSet::WithoutEda => "without_eda",
            FeatureSet::EdaOnly => "eda_only",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalEntry {
    pub target: String,
    pub model: ModelKind,
    pub feature_set: FeatureSet,
    pub features: Vec<String>,
    pub report: Option<EvalReport>,
    /// Why `report` is absent (empty set, a fold missing a class, ...).
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsEntry {
    pub feature_set: FeatureSet,
    pub features: Vec<String>,
    pub fit: Option<RegressionFit>,
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticEntry {
    pub feature_set: FeatureSet,
    pub features: Vec<String>,
    pub fit: Option<LogisticFit>,
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialEntry {
    pub variable: String,
    pub target: String,
    pub controls: Vec<String>,
    pub result: Option<PartialCorrelation>,
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictStage {
    pub eda_variables: Vec<String>,
    pub cv: Vec<EvalEntry>,
    pub ols: Vec<OlsEntry>,
    pub logistic: Vec<LogisticEntry>,
    pub partial: Vec<PartialEntry>,
}

/// Feature sets per target, in dataset column order.
pub fn feature_sets(
    data: &MixedDataset,
    blankets: &BTreeMap<String, Vec<String>>,
    eda: &BTreeSet<String>,
) -> Vec<(&'static str, FeatureSet, Vec<String>)> {
    let order =
        |set: BTreeSet<String>| -> Vec<String> { data.names().iter().filter(|n| set.contains(*n)).cloned().collect() };
    let mb = |v: &str| -> BTreeSet<String> { blankets.get(v).map(|b| b.iter().cloned().collect()).unwrap_or_default() };
    let (mb_se, mb_sq) = (mb(SE), mb(SQ));
    let se_eda: BTreeSet<String> = mb_se.intersection(eda).cloned().collect();
    let mut sq_with: BTreeSet<String> = mb_sq.union(&se_eda).cloned().collect();
    sq_with.remove(SQ);
    vec![
        (SE, FeatureSet::WithEda, order(mb_se.clone())),
        (SE, FeatureSet::WithoutEda, order(mb_se.difference(eda).cloned().collect())),
        (SE, FeatureSet::EdaOnly, order(se_eda)),
        (SQ, FeatureSet::WithEda, order(sq_with)),
        (SQ, FeatureSet::WithoutEda, order(mb_sq.difference(eda).cloned().collect())),
    ]
}

fn features_of(data: &MixedDataset, names: &[String]) -> Result<Features, PredictError> {
    let cols = names.iter().map(|n| data.column(n).map(|c| c.as_f64()).expect("name from dataset")).collect();
    Features::new(names.to_vec(), cols)
}

pub fn run_predict(
    data: &MixedDataset,
    blankets: &BTreeMap<String, Vec<String>>,
    eda_variables: &[String],
    cfg: &PipelineConfig,
    exec: Exec,
) -> Result<PredictStage, PipelineError> {
    let seed = cfg.seed()?;
    let eda: BTreeSet<String> = eda_variables.iter().cloned().collect();
    let cv_opts = CvOptions { k: cfg.cv.k, seed, threshold: cfg.cv.threshold, ridge: cfg.cv.ridge };
    let target = |t: &str| data.column(t).map(|c| c.as_f64()).map_err(|e| causal_err(Stage::Predict, e));
    let (y_se, y_sq) = (target(SE)?, target(SQ)?);
    let sq_labels: Vec<bool> = y_sq.iter().map(|&v| v == 1.0).collect();
    let logistic_opts = LogisticOptions { ridge: cfg.cv.ridge, ..Default::default() };

    let mut stage = PredictStage {
        eda_variables: eda_variables.to_vec(),
        cv: Vec::new(),
        ols: Vec::new(),
        logistic: Vec::new(),
        partial: Vec::new(),
    };
    for (t, set, names) in feature_sets(data, blankets, &eda) {
        let (y, models): (&[f64], &[ModelKind]) =
            if t == SE { (&y_se, &[ModelKind::Ols]) } else { (&y_sq, &[ModelKind::Logistic, ModelKind::NaiveBayes]) };
        let x = if names.is_empty() {
            Err(PredictError::Shape("empty feature set".into()))
        } else {
            features_of(data, &names)
        };
        for &model in models {
            let res = x.as_ref().map_err(Clone::clone).and_then(|x| cross_validate(model, y, x, &cv_opts, exec));
            let (report, skipped) = split(res);
            stage.cv.push(EvalEntry {
                target: t.into(),
                model,
                feature_set: set,
                features: names.clone(),
                report,
                skipped,
            });
        }
        if t == SE {
            let (fit, skipped) = split(x.as_ref().map_err(Clone::clone).and_then(|x| ols_fit(y, x)));
            stage.ols.push(OlsEntry { feature_set: set, features: names.clone(), fit, skipped });
        } else {
            let (fit, skipped) =
                split(x.as_ref().map_err(Clone::clone).and_then(|x| logistic_fit(&sq_labels, x, &logistic_opts)));
            stage.logistic.push(LogisticEntry { feature_set: set, features: names.clone(), fit, skipped });
        }
    }

    // EDA variables next to SE, controlling for the rest of SE's blanket
    let mb_se: Vec<String> = blankets.get(SE).cloned().unwrap_or_default();
    let controls: Vec<String> = mb_se.iter().filter(|v| !eda.contains(*v)).cloned().collect();
    let control_cols: Vec<Vec<f64>> = controls.iter().map(|c| target(c)).collect::<Result<_, _>>()?;
    for v in mb_se.iter().filter(|v| eda.contains(*v)) {
        let (result, skipped) = split(partial_correlation(&target(v)?, &y_se, &control_cols));
        stage.partial.push(PartialEntry {
            variable: v.clone(),
            target: SE.into(),
            controls: controls.clone(),
            result,
            skipped,
        });
    }
    Ok(stage)
}

fn split<T>(r: Result<T, PredictError>) -> (Option<T>, Option<String>) {
    match r {
        Ok(v) => (Some(v), None),
        Err(e) => (None, Some(e.to_string())),
    }
}

// ---------------------------------------------------------------- report

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub software_version: String,
    pub config: PipelineConfig,
    pub warnings: Vec<String>,
    pub nights: Vec<FeatureRow>,
    pub efa: EfaStage,
    pub graph: GraphStage,
    pub markov_blankets: BTreeMap<String, Vec<String>>,
    pub sem: SemStage,
    pub eval: PredictStage,
}

impl RunReport {
    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Results of the stages run so far.
#[derive(Debug, Clone, Default)]
pub struct StageResults {
    pub nights: Vec<FeatureRow>,
    pub warnings: Vec<String>,
    pub efa: Option<EfaStage>,
    pub dataset: Option<MixedDataset>,
    pub graph: Option<GraphStage>,
    pub markov_blankets: Option<BTreeMap<String, Vec<String>>>,
    pub sem: Option<SemStage>,
    pub eval: Option<PredictStage>,
}

/// Run the stages in order, stopping after `last`.
pub fn run_stages(cfg: &PipelineConfig, exec: Exec, last: Stage) -> Result<StageResults, PipelineError> {
    let mut out = StageResults::default();
    let (nights, warnings) = load_rows(cfg, exec)?;
    out.nights = nights;
    out.warnings = warnings;
    if matches!(last, Stage::Config | Stage::Ingest | Stage::Features) {
        return Ok(out);
    }
    let efa = run_efa(&out.nights, cfg)?;
    out.efa = Some(efa.clone());
    if last == Stage::Efa {
        return Ok(out);
    }
    let (data, mode) = search_dataset(&out.nights, &efa, cfg.search.mode)?;
    let graph = run_search(&data, cfg.search.mode, mode, cfg, exec)?;
    let blankets = markov_blankets(&graph.result.dag)?;
    out.dataset = Some(data.clone());
    out.graph = Some(graph.clone());
    out.markov_blankets = Some(blankets.clone());
    if last == Stage::Search {
        return Ok(out);
    }
    out.sem = Some(run_sem(&out.nights, &efa, &graph, &data)?);
    if last == Stage::Sem {
        return Ok(out);
    }
    let eda: Vec<String> = data.names().iter().filter(|n| *n != SE && *n != SQ).cloned().collect();
    out.eval = Some(run_predict(&data, &blankets, &eda, cfg, exec)?);
    Ok(out)
}

pub fn run_pipeline(cfg: &PipelineConfig, exec: Exec) -> Result<RunReport, PipelineError> {
    let r = run_stages(cfg, exec, Stage::Predict)?;
    Ok(RunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        software_version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        warnings: r.warnings,
        nights: r.nights,
        efa: r.efa.expect("efa ran"),
        graph: r.graph.expect("search ran"),
        markov_blankets: r.markov_blankets.expect("search ran"),
        sem: r.sem.expect("sem ran"),
        eval: r.eval.expect("predict ran"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset() -> MixedDataset {
        let n = 12;
        let col = |k: usize| Column::Continuous((0..n).map(|i| ((i * (k + 3)) % 7) as f64 + 0.1 * k as f64).collect());
        MixedDataset::new(
            vec!["eda_magnitude".into(), "eda_storms".into(), SE.into(), SQ.into()],
            vec![col(0), col(1), col(2), Column::Discrete((0..n).map(|i| (i % 2) as i64).collect())],
        )
        .unwrap()
    }

    #[test]
    fn feature_sets_follow_the_blankets() {
        let data = dataset();
        let mut mb = BTreeMap::new();
        mb.insert(SE.to_string(), vec!["eda_magnitude".to_string(), SQ.to_string()]);
        mb.insert(SQ.to_string(), vec![SE.to_string()]);
        let eda: BTreeSet<String> = ["eda_magnitude", "eda_storms"].iter().map(|s| s.to_string()).collect();
        let sets = feature_sets(&data, &mb, &eda);
        let get = |t: &str, f: FeatureSet| sets.iter().find(|s| s.0 == t && s.1 == f).unwrap().2.clone();
        assert_eq!(get(SE, FeatureSet::WithEda), ["eda_magnitude", "sq"]);
        assert_eq!(get(SE, FeatureSet::WithoutEda), ["sq"]);
        assert_eq!(get(SE, FeatureSet::EdaOnly), ["eda_magnitude"]);
        assert_eq!(get(SQ, FeatureSet::WithEda), ["eda_magnitude", "se"]);
        assert_eq!(get(SQ, FeatureSet::WithoutEda), ["se"]);
    }

    #[test]
    fn exit_codes_by_kind() {
        assert_eq!(PipelineError::new(Stage::Config, ErrorKind::Config, "x").exit_code(), 2);
        assert_eq!(PipelineError::new(Stage::Ingest, ErrorKind::Data, "x").exit_code(), 3);
        let e = PipelineError::new(Stage::Efa, ErrorKind::Numerical, "singular");
        assert_eq!(e.exit_code(), 4);
        assert_eq!(e.to_string(), "[efa] singular");
    }

    #[test]
    fn factor_names_by_position() {
        assert_eq!(factor_name(0), "eda_magnitude");
        assert_eq!(factor_name(1), "eda_storms");
        assert_eq!(factor_name(2), "eda_factor_3");
    }

    #[test]
    fn empty_graph_gives_no_path_model() {
        let data = dataset();
        let efa = EfaStage {
            variables: vec![],
            eigenvalues: vec![],
            retained: 0,
            factor_names: vec![],
            solution: None,
            assignment: vec![],
        };
        let graph = GraphStage {
            requested_mode: SearchMode::Scores,
            mode: SearchMode::RawFeatures,
            variables: data.names().to_vec(),
            discrete: vec![SQ.into()],
            result: SearchResult {
                cpdag: crate::causal::Cpdag { nodes: data.names().to_vec(), directed: vec![], undirected: vec![] },
                dag: Dag::new(data.names().to_vec(), vec![]).unwrap(),
                score: 0.0,
                inserts: 0,
                deletes: 0,
                pooled_fallback_used: false,
            },
            edges: vec![],
        };
        let sem = run_sem(&[], &efa, &graph, &data).unwrap();
        assert!(sem.fit.is_none() && sem.note.is_some());
    }
}
