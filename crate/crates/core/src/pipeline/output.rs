//! Report files: JSON, a Markdown summary and plot-data CSVs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::predictors::{roc_curve, ModelKind};

use super::{write_feature_table, EfaStage, ErrorKind, PipelineError, PredictStage, RunReport, Stage};

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `variable,factor,loading,uniqueness`, one row per variable and factor.
pub fn loadings_csv(efa: &EfaStage) -> String {
    let mut s = String::from("variable,factor,loading,uniqueness\n");
    if let Some(sol) = &efa.solution {
        for (i, v) in sol.variables.iter().enumerate() {
            for (j, f) in efa.factor_names.iter().enumerate() {
                let _ = writeln!(s, "{v},{f},{},{}", sol.loadings[(i, j)], sol.uniquenesses[i]);
            }
        }
    }
    s
}

/// One row per model and fold plus a `pooled` row per model.
pub fn metrics_csv(eval: &PredictStage) -> String {
    let mut s = String::from("target,model,feature_set,fold,n_train,n_test,rmse,mae,auc,f1,precision,recall\n");
    for e in &eval.cv {
        let Some(r) = &e.report else { continue };
        let head = format!("{},{},{}", e.target, e.model.label(), e.feature_set.label());
        for f in &r.per_fold {
            let _ = writeln!(
                s,
                "{head},{},{},{},{},{},{},{},{},{}",
                f.fold,
                f.n_train,
                f.n_test,
                opt(f.rmse),
                opt(f.mae),
                opt(f.auc),
                opt(f.f1),
                opt(f.precision),
                opt(f.recall)
            );
        }
        let _ = writeln!(
            s,
            "{head},pooled,,{},{},{},{},{},{},{}",
            r.n,
            opt(r.rmse),
            opt(r.mae),
            opt(r.auc),
            opt(r.f1),
            opt(r.precision),
            opt(r.recall)
        );
    }
    s
}

/// ROC points of every cross-validated classifier.
pub fn roc_csv(eval: &PredictStage, labels: &[bool]) -> String {
    let mut s = String::from("target,model,feature_set,threshold,fpr,tpr\n");
    for e in &eval.cv {
        let Some(r) = &e.report else { continue };
        if r.model == ModelKind::Ols {
            continue;
        }
        let Ok(points) = roc_curve(&r.predictions, labels) else { continue };
        for (t, fpr, tpr) in points {
            let _ = writeln!(s, "{},{},{},{t},{fpr},{tpr}", e.target, e.model.label(), e.feature_set.label());
        }
    }
    s
}

fn f3(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into())
}

pub fn markdown_summary(r: &RunReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Run summary\n");
    let _ = writeln!(
        s,
        "Nights: {}. Schema version {}, software {}.\n",
        r.nights.len(),
        r.schema_version,
        r.software_version
    );
    if !r.warnings.is_empty() {
        let _ = writeln!(s, "Assembly warnings: {}.\n", r.warnings.len());
    }

    let _ = writeln!(s, "## Factor analysis\n");
    let eig: Vec<String> = r.efa.eigenvalues.iter().map(|e| format!("{e:.3}")).collect();
    let _ = writeln!(s, "Eigenvalues: {}. Retained: {}.\n", eig.join(", "), r.efa.retained);
    if let Some(sol) = &r.efa.solution {
        let _ = writeln!(s, "| variable | {} | uniqueness |", r.efa.factor_names.join(" | "));
        let _ = writeln!(s, "|---|{}---|", "---|".repeat(sol.k));
        for (i, v) in sol.variables.iter().enumerate() {
            let l: Vec<String> = (0..sol.k).map(|j| format!("{:.3}", sol.loadings[(i, j)])).collect();
            let _ = writeln!(s, "| {v} | {} | {:.3} |", l.join(" | "), sol.uniquenesses[i]);
        }
        let total: f64 = sol.variance_explained.iter().sum();
        let _ = writeln!(s, "\nVariance explained: {:.1}%.\n", 100.0 * total);
    }

    let _ = writeln!(s, "## Graph\n");
    let _ = writeln!(s, "Search over {:?} (score {:.3}).\n", r.graph.mode, r.graph.result.score);
    let _ = writeln!(s, "```\n{}\n```\n", r.graph.edges.join("\n"));
    for (v, mb) in &r.markov_blankets {
        let _ = writeln!(s, "- blanket({v}) = {{{}}}", mb.join(", "));
    }
    s.push('\n');

    let _ = writeln!(s, "## Path model\n");
    match &r.sem.fit {
        Some(fit) => {
            let _ = writeln!(
                s,
                "chi2({}) = {:.2}, p = {:.3}, RMSEA = {:.3}, CFI = {:.3}, converged = {}.\n",
                fit.df, fit.chi_square, fit.p_value, fit.rmsea, fit.cfi, fit.converged
            );
            let _ = writeln!(s, "```\n{fit}```\n");
        }
        None => {
            let _ = writeln!(s, "{}\n", r.sem.note.as_deref().unwrap_or("not fitted"));
        }
    }

    let _ = writeln!(s, "## Prediction ({}-fold, pooled)\n", r.config.cv.k);
    let _ = writeln!(s, "| target | model | set | features | RMSE | MAE | AUC | F1 | precision | recall |");
    let _ = writeln!(s, "|---|---|---|---|---|---|---|---|---|---|");
    for e in &r.eval.cv {
        match &e.report {
            Some(m) => {
                let _ = writeln!(
                    s,
                    "| {} | {} | {} | {} | {} | {} | {} | {} | {} | {} |",
                    e.target,
                    e.model.label(),
                    e.feature_set.label(),
                    e.features.join(", "),
                    f3(m.rmse),
                    f3(m.mae),
                    f3(m.auc),
                    f3(m.f1),
                    f3(m.precision),
                    f3(m.recall)
                );
            }
            None => {
                let _ = writeln!(
                    s,
                    "| {} | {} | {} | skipped: {} | | | | | | |",
                    e.target,
                    e.model.label(),
                    e.feature_set.label(),
                    e.skipped.as_deref().unwrap_or("")
                );
            }
        }
    }
    for p in &r.eval.partial {
        if let Some(pc) = &p.result {
            let _ = writeln!(
                s,
                "\nPartial r({}, {} | {}) = {:.3}, p = {:.4}.",
                p.variable,
                p.target,
                p.controls.join(", "),
                pc.r,
                pc.p_value
            );
        }
    }
    s
}

/// Write every report file into `dir` and return their paths.
pub fn write_outputs(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let io = |p: &Path, e: std::io::Error| {
        PipelineError::new(Stage::Output, ErrorKind::Data, format!("cannot write {}: {e}", p.display()))
    };
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let labels: Vec<bool> = report.nights.iter().map(|n| n.sq_good()).collect();
    let files = [
        ("report.json", report.to_json()),
        ("summary.md", markdown_summary(report)),
        ("features.csv", write_feature_table(&report.nights)),
        ("loadings.csv", loadings_csv(&report.efa)),
        ("graph.txt", report.graph.edges.iter().map(|e| format!("{e}\n")).collect()),
        ("metrics.csv", metrics_csv(&report.eval)),
        ("roc.csv", roc_csv(&report.eval, &labels)),
    ];
    let mut out = Vec::new();
    for (name, body) in files {
        let p = dir.join(name);
        std::fs::write(&p, body).map_err(|e| io(&p, e))?;
        out.push(p);
    }
    Ok(out)
}
