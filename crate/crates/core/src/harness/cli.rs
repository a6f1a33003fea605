//! Command-line front end. Every subcommand is a thin wrapper over library
//! calls; exit codes are 0 (ok), 1 (usage), 2 (data), 3 (solver or tuning).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::dgp::{gen_scenario_stream, ScenarioConfig};
use crate::error::{AlqrError, Result};
use crate::eval::{ar1_coefficient, rolling_forecast, RollingPlan};
use crate::model::{QuantileLevel, SolverStatus};
use crate::pipeline::{Fitter, LambdaChoice, Method};
use crate::solver::SolverOptions;
use crate::tuning::Criterion;

use super::data::write_csv;
use super::{prepare_output_dir, read_config, read_table, run_monte_carlo, write_outputs, ExperimentConfig};

/// AR(1) coefficient at or above which a series is flagged as highly persistent.
pub const PERSISTENCE_CUTOFF: f64 = 0.9;

#[derive(Parser, Debug)]
#[command(name = "alqr", version, about = "Adaptive lasso quantile regression for predictive models with mixed roots")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit one model on a CSV panel and print its coefficients.
    Fit(FitArgs),
    /// Rolling one-step-ahead evaluation on a CSV panel.
    Forecast(ForecastArgs),
    /// Write a simulated scenario panel as CSV.
    Simulate(SimulateArgs),
    /// Monte Carlo replications of the rolling evaluation.
    Mc(McArgs),
    /// AR(1) persistence of every column of a CSV panel.
    Diagnose(DiagnoseArgs),
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Input CSV file.
    #[arg(long)]
    data: PathBuf,
    /// Name of the response column.
    #[arg(long, default_value = "y")]
    response: String,
}

#[derive(Args, Debug)]
struct ModelArgs {
    #[arg(long, value_enum, default_value = "bic")]
    criterion: CriterionArg,
    /// Exponent of the adaptive weights.
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Penalize predictors on the scale of their standard deviations.
    #[arg(long)]
    standardize: bool,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum CriterionArg {
    Bic,
    Gic,
}

impl From<CriterionArg> for Criterion {
    fn from(c: CriterionArg) -> Self {
        match c {
            CriterionArg::Bic => Criterion::Bic,
            CriterionArg::Gic => Criterion::Gic,
        }
    }
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    /// qr, lasso, alqr, ridge or quant.
    #[arg(long, default_value = "alqr")]
    method: String,
    /// Fixed penalty level instead of tuning.
    #[arg(long)]
    lambda: Option<f64>,
    #[command(flatten)]
    model: ModelArgs,
    /// Write the fit as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

#[derive(Args, Debug)]
struct ForecastArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_delimiter = ',', default_values_t = super::DEFAULT_TAUS)]
    tau: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "qr,lasso,alqr,quant")]
    method: Vec<String>,
    #[arg(long, default_value_t = 12)]
    horizon: usize,
    /// Rolling window width (default: all observations before the first target).
    #[arg(long)]
    window: Option<usize>,
    #[command(flatten)]
    model: ModelArgs,
    /// Output directory for report.json and summary.csv (default: summary to stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Scenario 1, 2 or 3.
    #[arg(long)]
    scenario: u64,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Replication stream.
    #[arg(long, default_value_t = 0)]
    stream: u64,
    /// Correlation of the unit-root innovations.
    #[arg(long, default_value_t = 0.0)]
    rho: f64,
    /// Output CSV (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

#[derive(Args, Debug)]
struct McArgs {
    /// Experiment configuration (JSON).
    #[arg(long, conflicts_with = "scenario")]
    config: Option<PathBuf>,
    /// Preset scenario instead of a config file.
    #[arg(long)]
    scenario: Option<u64>,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    tau: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    method: Option<Vec<String>>,
    #[arg(long, value_enum)]
    criterion: Option<CriterionArg>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    standardize: bool,
    /// Output directory (default: summary to stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

#[derive(Args, Debug)]
struct DiagnoseArgs {
    #[arg(long)]
    data: PathBuf,
    /// Response column, listed first when given.
    #[arg(long)]
    response: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

/// Failure of a subcommand with its exit code.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Lib(AlqrError),
}

impl From<AlqrError> for Failure {
    fn from(e: AlqrError) -> Self {
        Failure::Lib(e)
    }
}

pub fn exit_code(e: &AlqrError) -> i32 {
    use AlqrError::*;
    match e {
        InvalidQuantile(_) | NegativeLambda(_) | InvalidWeights(_) | InvalidParameter(_) | Config(_) => 1,
        DimensionMismatch(_) | NonFinite(_) | InvalidPanel(_) | EmptyInput(_) | InsufficientObservations { .. }
        | Data(_) | Io(_) => 2,
        FirstStageFailed(_) | TuningFailed(_) | Degenerate(_) | TooManyFailures { .. } => 3,
    }
}

/// Parses `argv` (including the program name) and runs the subcommand.
pub fn cli_main<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let res = match cli.command {
        Command::Fit(a) => fit(a),
        Command::Forecast(a) => forecast(a),
        Command::Simulate(a) => simulate(a),
        Command::Mc(a) => mc(a),
        Command::Diagnose(a) => diagnose(a),
    };
    match res {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn parse_method(name: &str, gamma: f64) -> Result<Method> {
    let m: Method = name.parse()?;
    let m = match m {
        Method::Alqr { .. } => Method::Alqr { gamma },
        other => other,
    };
    m.validate()?;
    Ok(m)
}

fn parse_methods(names: &[String], gamma: f64) -> Result<Vec<Method>> {
    names.iter().map(|n| parse_method(n.trim(), gamma)).collect()
}

/// Refuses to replace `path` unless `force`.
fn guard(path: &Path, force: bool) -> std::result::Result<(), Failure> {
    if path.exists() && !force {
        return Err(Failure::Usage(format!("{} exists; pass --force to overwrite", path.display())));
    }
    Ok(())
}

fn write_file(path: &Path, body: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, body).map_err(|e| AlqrError::Io(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, force: bool, body: &[u8]) -> std::result::Result<(), Failure> {
    match out {
        Some(p) => {
            guard(p, force)?;
            write_file(p, body)?;
        }
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(body).map_err(AlqrError::from)?;
        }
    }
    Ok(())
}

fn fit(a: FitArgs) -> std::result::Result<i32, Failure> {
    let method = parse_method(&a.method, a.model.gamma)?;
    let tau = QuantileLevel::new(a.tau)?;
    if let Some(p) = &a.out {
        guard(p, a.force)?;
    }
    let (x, y) = read_table(&a.data.data, None)?.split(&a.data.response)?;
    let opts = SolverOptions { standardize: a.model.standardize, ..SolverOptions::default() };
    let fitter = Fitter::new(&x, &y, tau, opts);
    let choice = match a.lambda {
        Some(l) => LambdaChoice::Fixed(l),
        None => LambdaChoice::Tune(a.model.criterion.into()),
    };
    let model = fitter.fit(method, choice)?;
    let names = x.col_names();
    let mut text = format!("method {}\ntau {}\n", method, a.tau);
    let mut json = serde_json::json!({ "method": method, "tau": a.tau });
    let mut ok = true;
    if let Some(q) = model.quantile {
        text.push_str(&format!("quantile {q}\n"));
        json["quantile"] = q.into();
    }
    if let Some(f) = &model.fit {
        ok = f.solver_status == SolverStatus::Optimal;
        text.push_str(&format!("lambda {}\nintercept {}\n", f.lambda_used, f.intercept));
        for (n, b) in names.iter().zip(&f.coefficients) {
            text.push_str(&format!("  {n} {b}\n"));
        }
        let active: Vec<&str> = f.active_set.iter().map(|&j| names[j].as_str()).collect();
        text.push_str(&format!(
            "active {} [{}]\nobjective {}\ncheck_loss {}\nstatus {:?}\n",
            active.len(),
            active.join(", "),
            f.objective,
            f.check_loss,
            f.solver_status
        ));
        let coefs: serde_json::Map<String, serde_json::Value> =
            names.iter().zip(&f.coefficients).map(|(n, &b)| (n.clone(), b.into())).collect();
        json["lambda"] = f.lambda_used.into();
        json["intercept"] = f.intercept.into();
        json["coefficients"] = coefs.into();
        json["active_set"] = active.into();
        json["objective"] = f.objective.into();
        json["check_loss"] = f.check_loss.into();
        json["solver_status"] = format!("{:?}", f.solver_status).into();
    }
    print!("{text}");
    if let Some(p) = &a.out {
        let body = serde_json::to_string_pretty(&json).map_err(AlqrError::from)?;
        write_file(p, body.as_bytes())?;
    }
    if ok {
        Ok(0)
    } else {
        eprintln!("error: solver did not certify optimality");
        Ok(3)
    }
}

fn forecast(a: ForecastArgs) -> std::result::Result<i32, Failure> {
    let methods = parse_methods(&a.method, a.model.gamma)?;
    for &t in &a.tau {
        QuantileLevel::new(t)?;
    }
    if let Some(dir) = &a.out {
        guard(&dir.join("report.json"), a.force)?;
    }
    let (x, y) = read_table(&a.data.data, None)?.split(&a.data.response)?;
    let plan = match a.window {
        Some(w) => RollingPlan::with_width(x.n_rows(), a.horizon, w)?,
        None => RollingPlan::new(x.n_rows(), a.horizon)?,
    };
    let opts = SolverOptions { standardize: a.model.standardize, ..SolverOptions::default() };
    let report = rolling_forecast(&x, &y, &methods, &a.tau, &plan, a.model.criterion.into(), &opts)?;
    let failed: usize = report.cells.iter().map(|c| c.failures).sum();
    let csv = report.to_csv()?;
    match &a.out {
        Some(dir) => {
            write_file(&dir.join("report.json"), report.to_json()?.as_bytes())?;
            write_file(&dir.join("summary.csv"), csv.as_bytes())?;
        }
        None => emit(None, false, csv.as_bytes())?,
    }
    if failed > 0 {
        eprintln!("warning: {failed} forecast steps failed; see the report for details");
    }
    Ok(0)
}

fn require_seed(seed: Option<u64>, cmd: &str) -> std::result::Result<u64, Failure> {
    seed.ok_or_else(|| Failure::Usage(format!("{cmd} requires an explicit --seed")))
}

fn simulate(a: SimulateArgs) -> std::result::Result<i32, Failure> {
    let seed = require_seed(a.seed, "simulate")?;
    let mut cfg = ScenarioConfig::preset(a.scenario, a.n, seed)?;
    cfg.innovation_rho = a.rho;
    cfg.validate()?;
    if let Some(p) = &a.out {
        guard(p, a.force)?;
    }
    let data = gen_scenario_stream(&cfg, a.stream)?;
    let mut buf = Vec::new();
    write_csv(&mut buf, &data.panel, &data.y, "y")?;
    emit(a.out.as_deref(), true, &buf)?;
    Ok(0)
}

fn mc(a: McArgs) -> std::result::Result<i32, Failure> {
    let seed = require_seed(a.seed, "mc")?;
    let mut cfg = match (&a.config, a.scenario) {
        (Some(p), _) => read_config(p)?,
        (None, Some(s)) => ExperimentConfig::new(ScenarioConfig::preset(s, a.n, seed)?, seed),
        (None, None) => return Err(Failure::Usage("mc needs --config or --scenario".into())),
    };
    cfg.master_seed = seed;
    cfg.scenario.seed = seed;
    if let Some(r) = a.reps {
        cfg.replications = r;
    }
    if let Some(h) = a.horizon {
        cfg.horizon = h;
    }
    if a.window.is_some() {
        cfg.window = a.window;
    }
    if let Some(t) = a.tau {
        cfg.taus = t;
    }
    if let Some(g) = a.gamma {
        for m in &mut cfg.methods {
            if let Method::Alqr { gamma } = m {
                *gamma = g;
            }
        }
    }
    if let Some(m) = &a.method {
        cfg.methods = parse_methods(m, a.gamma.unwrap_or(1.0))?;
    }
    if let Some(c) = a.criterion {
        cfg.criterion = c.into();
    }
    cfg.standardize |= a.standardize;
    cfg.validate()?;
    let out = a.out.clone().or_else(|| cfg.output_dir.clone());
    if let Some(dir) = &out {
        prepare_output_dir(dir, &cfg.fingerprint(), a.force)?;
    }
    let outcome = run_monte_carlo(&cfg)?;
    match &out {
        Some(dir) => write_outputs(dir, &cfg, &outcome)?,
        None => emit(None, false, outcome.table.to_csv()?.as_bytes())?,
    }
    Ok(0)
}

fn diagnose(a: DiagnoseArgs) -> std::result::Result<i32, Failure> {
    if let Some(p) = &a.out {
        guard(p, a.force)?;
    }
    let table = read_table(&a.data, None)?;
    let mut order: Vec<usize> = (0..table.names.len()).collect();
    if let Some(r) = &a.response {
        let j = table
            .names
            .iter()
            .position(|n| n == r)
            .ok_or_else(|| AlqrError::Data(format!("response column \"{r}\" not found")))?;
        order.retain(|&k| k != j);
        order.insert(0, j);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["variable", "high_persistence", "ar1"]).map_err(|e| AlqrError::Io(e.to_string()))?;
    for j in order {
        let (flag, coef) = match ar1_coefficient(&table.columns[j]) {
            Ok(c) => ((if c >= PERSISTENCE_CUTOFF { "yes" } else { "no" }).to_string(), format!("{c}")),
            Err(AlqrError::Degenerate(_)) => ("no".to_string(), String::new()),
            Err(e) => return Err(e.into()),
        };
        w.write_record([table.names[j].as_str(), flag.as_str(), coef.as_str()]).map_err(|e| AlqrError::Io(e.to_string()))?;
    }
    let body = w.into_inner().map_err(|e| AlqrError::Io(e.to_string()))?;
    emit(a.out.as_deref(), true, &body)?;
    Ok(0)
}
