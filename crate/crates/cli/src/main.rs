use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use eda_sleep::ingest::write_channel_file;
use eda_sleep::pipeline::{
    apply_override, loadings_csv, metrics_csv, roc_csv, run_pipeline, run_stages, write_feature_table, write_outputs,
    ErrorKind, PipelineConfig, PipelineError, Stage,
};
use eda_sleep::synth::{
    generate_eda_trace, generate_raw_nights, generate_tabular, write_raw_nights, GroundTruthModel, RawNightOptions,
    SynthError, TraceScript,
};
use eda_sleep::Exec;

#[derive(Parser)]
#[command(name = "eda-sleep", version, about = "Sleep analytics from wrist EDA and actigraphy")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-night features and targets (features.csv, nights.json).
    Extract(RunArgs),
    /// Factor analysis of the six features (efa.json, loadings.csv).
    Efa(RunArgs),
    /// Structure search and Markov blankets (graph.json, graph.txt, markov_blankets.json).
    Search(RunArgs),
    /// Path model implied by the searched graph (sem.json).
    Sem(RunArgs),
    /// Cross-validated predictors (eval.json, metrics.csv, roc.csv).
    Predict(RunArgs),
    /// Every stage; writes report.json, summary.md and the CSVs.
    Pipeline(RunArgs),
    /// Generate synthetic data with known ground truth.
    Synth(SynthArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for the cross-validation shuffles (overrides `seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides `out_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// `key=value` override, dotted keys address nested fields.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Run without worker threads.
    #[arg(long)]
    sequential: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    /// Feature table from the latent model (features.csv, truth.json).
    Tabular,
    /// Raw EDA/ACC nights plus a report log (traces/, reports.csv, truth.json).
    Raw,
    /// One EDA trace from a script file (EDA.csv, truth.json).
    Trace,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(value_enum)]
    kind: SynthKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Rows (tabular) or nights (raw).
    #[arg(long, default_value_t = 77)]
    n: usize,
    #[arg(long, default_value_t = 6)]
    participants: usize,
    /// Night length in seconds for raw nights.
    #[arg(long, default_value_t = 3600.0)]
    duration_s: f64,
    /// Trace script (key = value lines).
    #[arg(long)]
    script: Option<PathBuf>,
    /// Ground-truth model as JSON.
    #[arg(long)]
    model: Option<PathBuf>,
    /// `key=value` override on the model.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Failure { code: e.exit_code() as u8, message: e.to_string() }
    }
}

impl From<SynthError> for Failure {
    fn from(e: SynthError) -> Self {
        let code = if matches!(e, SynthError::Io(_)) { 3 } else { 2 };
        Failure { code, message: format!("[synth] {e}") }
    }
}

fn output_err(path: &Path, e: std::io::Error) -> Failure {
    PipelineError::new(Stage::Output, ErrorKind::Data, format!("cannot write {}: {e}", path.display())).into()
}

fn write(dir: &Path, name: &str, body: &str) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| output_err(dir, e))?;
    let p = dir.join(name);
    std::fs::write(&p, body).map_err(|e| output_err(&p, e))
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn load_config(a: &RunArgs) -> Result<PipelineConfig, Failure> {
    let mut set = a.set.clone();
    if let Some(seed) = a.seed {
        set.push(format!("seed={seed}"));
    }
    let cfg = match &a.config {
        Some(p) => PipelineConfig::load(p, &set)?,
        None => PipelineConfig::from_json("{}", Path::new("."), &set)?,
    };
    Ok(cfg)
}

fn out_dir(a: &RunArgs, cfg: &PipelineConfig) -> PathBuf {
    a.out.clone().or_else(|| cfg.out_dir.as_ref().map(|p| cfg.resolve(p))).unwrap_or_else(|| PathBuf::from("out"))
}

fn run(a: &RunArgs, last: Stage) -> Result<(), Failure> {
    let cfg = load_config(a)?;
    let exec = if a.sequential { Exec::Sequential } else { Exec::Parallel };
    let out = out_dir(a, &cfg);
    if last == Stage::Output {
        let report = run_pipeline(&cfg, exec)?;
        let files = write_outputs(&report, &out)?;
        for f in files {
            println!("{}", f.display());
        }
        return Ok(());
    }
    let r = run_stages(&cfg, exec, last)?;
    match last {
        Stage::Features => {
            write(&out, "features.csv", &write_feature_table(&r.nights))?;
            write(&out, "nights.json", &json(&r.nights))?;
        }
        Stage::Efa => {
            let efa = r.efa.expect("efa ran");
            write(&out, "efa.json", &json(&efa))?;
            write(&out, "loadings.csv", &loadings_csv(&efa))?;
        }
        Stage::Search => {
            let graph = r.graph.expect("search ran");
            write(&out, "graph.json", &json(&graph))?;
            write(&out, "graph.txt", &graph.edges.iter().map(|e| format!("{e}\n")).collect::<String>())?;
            write(&out, "markov_blankets.json", &json(&r.markov_blankets))?;
        }
        Stage::Sem => write(&out, "sem.json", &json(&r.sem))?,
        Stage::Predict => {
            let eval = r.eval.expect("predict ran");
            let labels: Vec<bool> = r.nights.iter().map(|n| n.sq_good()).collect();
            write(&out, "eval.json", &json(&eval))?;
            write(&out, "metrics.csv", &metrics_csv(&eval))?;
            write(&out, "roc.csv", &roc_csv(&eval, &labels))?;
        }
        _ => unreachable!("no subcommand stops at {last}"),
    }
    println!("{}", out.display());
    Ok(())
}

fn load_model(a: &SynthArgs) -> Result<GroundTruthModel, Failure> {
    let bad = |m: String| Failure { code: 2, message: format!("[synth] {m}") };
    let mut doc: Value = match &a.model {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| bad(format!("cannot read {}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| bad(format!("{}: {e}", p.display())))?
        }
        None => Value::Object(Default::default()),
    };
    for s in &a.set {
        apply_override(&mut doc, s)?;
    }
    serde_json::from_value(doc).map_err(|e| bad(format!("model: {e}")))
}

fn synth(a: &SynthArgs) -> Result<(), Failure> {
    let model = load_model(a)?;
    let first_date = RawNightOptions::default().first_date;
    match a.kind {
        SynthKind::Tabular => {
            let sample = generate_tabular(&model, a.n, a.seed)?;
            write(&a.out, "features.csv", &write_feature_table(&sample.feature_rows(a.participants, first_date)))?;
            let truth = serde_json::json!({
                "seed": a.seed,
                "n": a.n,
                "model": model,
                "implied_covariance": model.implied_covariance().row_iter().map(|r| r.iter().copied().collect::<Vec<f64>>()).collect::<Vec<_>>(),
                "magnitude": sample.magnitude,
                "storms": sample.storms,
            });
            write(&a.out, "truth.json", &json(&truth))?;
        }
        SynthKind::Raw => {
            let opts = RawNightOptions {
                nights: a.n,
                participants: a.participants,
                duration_s: a.duration_s,
                ..Default::default()
            };
            let nights = generate_raw_nights(&model, &opts, a.seed)?;
            write_raw_nights(&a.out, &nights)?;
            let truth: Vec<Value> =
                nights.iter().map(|n| serde_json::json!({"night": n.key.to_string(), "planted": n.truth})).collect();
            write(&a.out, "truth.json", &json(&serde_json::json!({"seed": a.seed, "options": opts, "nights": truth})))?;
        }
        SynthKind::Trace => {
            let path =
                a.script.as_ref().ok_or_else(|| Failure { code: 2, message: "[synth] trace needs --script".into() })?;
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure { code: 2, message: format!("[synth] cannot read {}: {e}", path.display()) })?;
            let script = TraceScript::parse(&text)?;
            let (trace, truth) = generate_eda_trace(&script, a.seed)?;
            write(&a.out, "EDA.csv", &write_channel_file(std::slice::from_ref(&trace)))?;
            write(&a.out, "truth.json", &json(&truth))?;
        }
    }
    println!("{}", a.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Extract(a) => run(a, Stage::Features),
        Command::Efa(a) => run(a, Stage::Efa),
        Command::Search(a) => run(a, Stage::Search),
        Command::Sem(a) => run(a, Stage::Sem),
        Command::Predict(a) => run(a, Stage::Predict),
        Command::Pipeline(a) => run(a, Stage::Output),
        Command::Synth(a) => synth(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
