//! Monte Carlo experiments, data files, and the command-line front end.

pub mod cli;
pub mod data;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dgp::{gen_scenario_stream, ScenarioConfig};
use crate::error::{AlqrError, Result};
use crate::eval::{rolling_forecast, ForecastReport, RollingPlan};
use crate::pipeline::Method;
use crate::solver::SolverOptions;
use crate::tuning::Criterion;

pub use data::{load_csv, read_table, save_csv, LoadOptions, Table};

pub const DEFAULT_TAUS: [f64; 5] = [0.05, 0.1, 0.5, 0.9, 0.95];

fn default_methods() -> Vec<Method> {
    vec![Method::Qr, Method::LassoQr, Method::alqr(), Method::Quant]
}

fn default_taus() -> Vec<f64> {
    DEFAULT_TAUS.to_vec()
}

fn default_replications() -> usize {
    200
}

fn default_horizon() -> usize {
    12
}

/// Replications abort once more than this share of them fail.
pub const MAX_FAILURE_RATE: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_taus")]
    pub taus: Vec<f64>,
    #[serde(default)]
    pub criterion: Criterion,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    /// Rolling window width; `n - horizon` when absent.
    #[serde(default)]
    pub window: Option<usize>,
    /// Seed of every replication's data; overrides `scenario.seed`.
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub standardize: bool,
    /// Not part of the fingerprint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(scenario: ScenarioConfig, master_seed: u64) -> Self {
        Self {
            scenario,
            methods: default_methods(),
            taus: default_taus(),
            criterion: Criterion::Bic,
            replications: default_replications(),
            horizon: default_horizon(),
            window: None,
            master_seed,
            standardize: false,
            output_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.replications == 0 {
            return Err(AlqrError::Config("replications must be at least 1".into()));
        }
        if self.methods.is_empty() || self.taus.is_empty() {
            return Err(AlqrError::Config("methods and taus must be non-empty".into()));
        }
        for (i, &t) in self.taus.iter().enumerate() {
            if !(t > 0.0 && t < 1.0) {
                return Err(AlqrError::InvalidQuantile(t));
            }
            if self.taus[..i].contains(&t) {
                return Err(AlqrError::Config(format!("quantile level {t} listed twice")));
            }
        }
        for m in &self.methods {
            m.validate()?;
        }
        self.plan()?;
        Ok(())
    }

    pub fn plan(&self) -> Result<RollingPlan> {
        match self.window {
            Some(w) => RollingPlan::with_width(self.scenario.n, self.horizon, w),
            None => RollingPlan::new(self.scenario.n, self.horizon),
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions { standardize: self.standardize, ..SolverOptions::default() }
    }

    /// SHA-256 of the canonical JSON of every field except `output_dir`.
    pub fn fingerprint(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        let json = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub replication: u64,
    pub fingerprint: String,
    pub report: Option<ForecastReport>,
    pub error: Option<String>,
}

impl ReplicationRecord {
    fn failed(&self) -> bool {
        self.report.as_ref().map_or(true, |r| r.cells.iter().any(|c| c.failures > 0))
    }
}

/// Means over replications for one `(method, tau)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McCell {
    pub method: Method,
    pub tau: f64,
    pub fpe: Option<f64>,
    /// Mean benchmark (window quantile) FPE.
    pub benchmark_fpe: Option<f64>,
    /// `1 - fpe / benchmark_fpe`, both averaged over replications.
    pub oos_r2: Option<f64>,
    /// Mean of the per-replication R² values.
    pub mean_oos_r2: Option<f64>,
    pub avg_active: Option<f64>,
    pub avg_lambda: Option<f64>,
    /// Replications entering the means.
    pub replications: usize,
    /// Replications excluded because a step or the whole run failed.
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McTable {
    pub fingerprint: String,
    pub replications: usize,
    pub cells: Vec<McCell>,
}

#[derive(Debug, Serialize)]
struct McRow<'a> {
    method: &'a str,
    tau: f64,
    fpe: Option<f64>,
    benchmark_fpe: Option<f64>,
    oos_r2: Option<f64>,
    mean_oos_r2: Option<f64>,
    avg_active: Option<f64>,
    avg_lambda: Option<f64>,
    replications: usize,
    failures: usize,
    fingerprint: &'a str,
}

impl McTable {
    pub fn cell(&self, method: Method, tau: f64) -> Option<&McCell> {
        self.cells.iter().find(|c| c.method == method && c.tau == tau)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for c in &self.cells {
            w.serialize(McRow {
                method: c.method.label(),
                tau: c.tau,
                fpe: c.fpe,
                benchmark_fpe: c.benchmark_fpe,
                oos_r2: c.oos_r2,
                mean_oos_r2: c.mean_oos_r2,
                avg_active: c.avg_active,
                avg_lambda: c.avg_lambda,
                replications: c.replications,
                failures: c.failures,
                fingerprint: &self.fingerprint,
            })
            .map_err(|e| AlqrError::Io(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| AlqrError::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| AlqrError::Io(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McOutcome {
    pub table: McTable,
    pub records: Vec<ReplicationRecord>,
}

/// One replication: data from stream `r`, then the rolling evaluation.
pub fn run_replication(config: &ExperimentConfig, r: u64) -> Result<ForecastReport> {
    let mut scenario = config.scenario.clone();
    scenario.seed = config.master_seed;
    let data = gen_scenario_stream(&scenario, r)?;
    rolling_forecast(
        &data.panel,
        &data.y,
        &config.methods,
        &config.taus,
        &config.plan()?,
        config.criterion,
        &config.solver_options(),
    )
}

/// Runs replications `1..=R` in parallel and averages them in index order,
/// so the result does not depend on the thread count.
pub fn run_monte_carlo(config: &ExperimentConfig) -> Result<McOutcome> {
    config.validate()?;
    let fingerprint = config.fingerprint();
    let records: Vec<ReplicationRecord> = (1..=config.replications as u64)
        .into_par_iter()
        .map(|r| match run_replication(config, r) {
            Ok(report) => ReplicationRecord { replication: r, fingerprint: fingerprint.clone(), report: Some(report), error: None },
            Err(e) => ReplicationRecord { replication: r, fingerprint: fingerprint.clone(), report: None, error: Some(e.to_string()) },
        })
        .collect();
    let failed: Vec<&ReplicationRecord> = records.iter().filter(|r| r.failed()).collect();
    if failed.len() as f64 > MAX_FAILURE_RATE * records.len() as f64 {
        let sample: Vec<String> = failed
            .iter()
            .take(3)
            .map(|r| {
                let why = r.error.clone().unwrap_or_else(|| {
                    let rep = r.report.as_ref().unwrap();
                    rep.cells
                        .iter()
                        .flat_map(|c| c.steps.iter().filter_map(move |s| s.error.as_ref().map(|e| format!("{} tau={}: {e}", c.method, c.tau))))
                        .next()
                        .unwrap_or_default()
                });
                format!("r{}: {why}", r.replication)
            })
            .collect();
        eprintln!("failed replications (first {}): {}", sample.len(), sample.join("; "));
        return Err(AlqrError::TooManyFailures { failed: failed.len(), total: records.len() });
    }
    let table = summarize(config, &fingerprint, &records);
    Ok(McOutcome { table, records })
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Cell means over the replications whose cell has no failed step.
pub fn summarize(config: &ExperimentConfig, fingerprint: &str, records: &[ReplicationRecord]) -> McTable {
    let mut cells = Vec::new();
    for &tau in &config.taus {
        for &method in &config.methods {
            let (mut f, mut fq, mut r2, mut act, mut lam) = (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
            let mut failures = 0;
            for rec in records {
                let c = rec.report.as_ref().and_then(|r| r.cell(method, tau)).filter(|c| c.failures == 0);
                let Some(c) = c else {
                    failures += 1;
                    continue;
                };
                f.extend(c.fpe);
                fq.extend(c.benchmark_fpe);
                r2.extend(c.oos_r2);
                act.extend(c.avg_active);
                lam.extend(c.avg_lambda);
            }
            let (fpe, benchmark_fpe) = (mean(&f), mean(&fq));
            let oos_r2 = match (fpe, benchmark_fpe) {
                _ if method == Method::Quant => fpe.map(|_| 0.0),
                (Some(a), Some(b)) if b > 0.0 => Some(1.0 - a / b),
                _ => None,
            };
            cells.push(McCell {
                method,
                tau,
                fpe,
                benchmark_fpe,
                oos_r2,
                mean_oos_r2: mean(&r2),
                avg_active: mean(&act),
                avg_lambda: mean(&lam),
                replications: f.len(),
                failures,
            });
        }
    }
    McTable { fingerprint: fingerprint.to_string(), replications: records.len(), cells }
}

#[derive(Deserialize)]
struct Stamped {
    fingerprint: String,
}

/// Refuses to touch an existing output directory unless `force` is set.
pub fn prepare_output_dir(dir: &Path, fingerprint: &str, force: bool) -> Result<()> {
    let cfg = dir.join("config.json");
    if cfg.exists() && !force {
        let old = std::fs::read_to_string(&cfg)
            .ok()
            .and_then(|s| serde_json::from_str::<Stamped>(&s).ok())
            .map(|s| s.fingerprint);
        let detail = match old {
            Some(f) if f == fingerprint => "outputs for this configuration already exist".to_string(),
            Some(f) => format!("outputs of another configuration ({}) already exist", &f[..f.len().min(12)]),
            None => "an unrecognized config.json already exists".to_string(),
        };
        return Err(AlqrError::Config(format!("{}: {detail}; pass --force to overwrite", dir.display())));
    }
    if force && dir.join("replications").exists() {
        std::fs::remove_dir_all(dir.join("replications"))?;
    }
    std::fs::create_dir_all(dir.join("replications"))?;
    Ok(())
}

#[derive(Serialize)]
struct ConfigFile<'a> {
    fingerprint: &'a str,
    config: &'a ExperimentConfig,
}

/// Writes `config.json`, `replications/r<k>.json` and `summary.csv`.
pub fn write_outputs(dir: &Path, config: &ExperimentConfig, outcome: &McOutcome) -> Result<()> {
    let fp = &outcome.table.fingerprint;
    std::fs::create_dir_all(dir.join("replications"))?;
    for rec in &outcome.records {
        let path = dir.join("replications").join(format!("r{}.json", rec.replication));
        std::fs::write(path, serde_json::to_string_pretty(rec)?)?;
    }
    std::fs::write(dir.join("summary.csv"), outcome.table.to_csv()?)?;
    let mut c = config.clone();
    c.output_dir = None;
    std::fs::write(dir.join("config.json"), serde_json::to_string_pretty(&ConfigFile { fingerprint: fp, config: &c })?)?;
    Ok(())
}

/// Reads a config file: either a bare config or the `config.json` written
/// next to earlier outputs.
pub fn read_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| AlqrError::Io(format!("{}: {e}", path.display())))?;
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Either {
        Wrapped { config: ExperimentConfig },
        Bare(ExperimentConfig),
    }
    match serde_json::from_str::<Either>(&text) {
        Ok(Either::Wrapped { config }) | Ok(Either::Bare(config)) => Ok(config),
        Err(_) => serde_json::from_str::<ExperimentConfig>(&text)
            .map_err(|e| AlqrError::Config(format!("{}: {e}", path.display()))),
    }
}
