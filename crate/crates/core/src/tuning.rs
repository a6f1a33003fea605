//! Penalty grids and information-criterion selection of `lambda`.

use serde::{Deserialize, Serialize};

use crate::error::{AlqrError, Result};
use crate::model::{PredictorPanel, QuantileFit, QuantileLevel, ResponseSeries, SolverStatus};
use crate::pipeline::{Fitter, Method};
use crate::solver::SolverOptions;
use crate::scalar::Scalar;

/// Information criterion used to pick the penalty level.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    #[default]
    Bic,
    Gic,
}

impl std::str::FromStr for Criterion {
    type Err = AlqrError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bic" => Ok(Criterion::Bic),
            "gic" => Ok(Criterion::Gic),
            other => Err(AlqrError::InvalidParameter(format!("unknown criterion '{other}'"))),
        }
    }
}

impl std::fmt::Display for Criterion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Criterion::Bic => "bic",
            Criterion::Gic => "gic",
        })
    }
}

/// Per-active-predictor penalty of the criterion: `ln n / n` (BIC) or
/// `ln p * ln ln n / n` (GIC).
pub fn gamma_n<T: Scalar>(criterion: Criterion, n: usize, p: usize) -> Result<T> {
    let nf = n as f64;
    if n < 3 {
        return Err(AlqrError::InvalidParameter(format!("criterion needs n >= 3, got {n}")));
    }
    let g = match criterion {
        Criterion::Bic => nf.ln() / nf,
        Criterion::Gic => {
            if p < 2 {
                return Err(AlqrError::InvalidParameter(format!("GIC needs p >= 2, got {p}")));
            }
            (p as f64).ln() * nf.ln().ln() / nf
        }
    };
    Ok(T::lit(g))
}

/// Criterion value of one fit. `degenerate` marks an interpolating fit
/// (zero check loss), scored as negative infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcScore<T = f64> {
    pub value: T,
    pub degenerate: bool,
}

/// `ln(check_loss / n_used) + gamma_n * |active|`; the intercept is not counted.
pub fn ic_score<T: Scalar>(fit: &QuantileFit<T>, n_used: usize, criterion: Criterion, p: usize) -> Result<IcScore<T>> {
    let g = gamma_n::<T>(criterion, n_used, p)?;
    if !(fit.check_loss > T::zero()) {
        return Ok(IcScore { value: T::neg_infinity(), degenerate: true });
    }
    let value = (fit.check_loss / T::from_usize_lossy(n_used)).ln() + g * T::from_usize_lossy(fit.active_set.len());
    Ok(IcScore { value, degenerate: false })
}

/// Strictly decreasing positive penalty levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaGrid<T = f64> {
    values: Vec<T>,
}

impl<T: Scalar> LambdaGrid<T> {
    pub const DEFAULT_LEN: usize = 100;
    pub const DEFAULT_DECADES: f64 = 8.0;

    /// `len` log-spaced points from `top` down to `top * 10^-decades`.
    pub fn log_spaced(top: T, len: usize, decades: f64) -> Result<Self> {
        if !(top > T::zero()) || !top.is_finite() {
            return Err(AlqrError::InvalidParameter(format!(
                "grid top must be finite and positive, got {}",
                top.to_f64().unwrap_or(f64::NAN)
            )));
        }
        if len == 0 || !(decades > 0.0) {
            return Err(AlqrError::InvalidParameter("grid needs len >= 1 and decades > 0".into()));
        }
        if len == 1 {
            return Ok(Self { values: vec![top] });
        }
        let top64 = top.to_f64().unwrap_or(f64::NAN);
        let values = (0..len)
            .map(|i| {
                if i == 0 {
                    top
                } else {
                    T::lit(top64 * 10f64.powf(-decades * i as f64 / (len - 1) as f64))
                }
            })
            .collect();
        Self::from_values(values)
    }

    /// The default grid: 100 points over eight decades below `top`.
    pub fn default_for(top: T) -> Result<Self> {
        Self::log_spaced(top, Self::DEFAULT_LEN, Self::DEFAULT_DECADES)
    }

    pub fn from_values(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(AlqrError::EmptyInput("lambda grid".into()));
        }
        if values.iter().any(|v| !(v.is_finite() && *v > T::zero())) {
            return Err(AlqrError::InvalidParameter("grid values must be finite and positive".into()));
        }
        if values.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(AlqrError::InvalidParameter("grid values must be strictly decreasing".into()));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// One grid evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry<T = f64> {
    pub lambda: T,
    /// `None` when the fit at this level failed.
    pub score: Option<T>,
    pub active: usize,
    pub status: Option<SolverStatus>,
}

/// Outcome of a grid search.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection<T = f64> {
    pub lambda: T,
    pub fit: QuantileFit<T>,
    pub score: IcScore<T>,
    pub trace: Vec<TraceEntry<T>>,
}

/// Picks the minimizer of the criterion among per-level fits, given in grid
/// order. Ties go to the earlier (larger) penalty level. Fits that errored or
/// did not reach optimality are recorded in the trace and skipped.
pub fn select_from_fits<T: Scalar>(
    grid: &LambdaGrid<T>,
    fits: Vec<Result<QuantileFit<T>>>,
    n_used: usize,
    criterion: Criterion,
    p: usize,
) -> Result<Selection<T>> {
    if fits.len() != grid.len() {
        return Err(AlqrError::DimensionMismatch(format!("{} fits for {} grid points", fits.len(), grid.len())));
    }
    let mut trace = Vec::with_capacity(grid.len());
    let mut best: Option<(usize, IcScore<T>)> = None;
    let mut kept = Vec::with_capacity(grid.len());
    let mut failures = Vec::new();
    for (i, (fit, &lambda)) in fits.into_iter().zip(grid.values()).enumerate() {
        match fit {
            Ok(f) if f.solver_status == SolverStatus::Optimal => {
                let s = ic_score(&f, n_used, criterion, p)?;
                trace.push(TraceEntry { lambda, score: Some(s.value), active: f.active_set.len(), status: Some(f.solver_status) });
                if best.map_or(true, |(_, b)| s.value < b.value) {
                    best = Some((i, s));
                }
                kept.push(Some(f));
            }
            Ok(f) => {
                failures.push(format!("lambda {}: {:?}", lambda.to_f64().unwrap_or(f64::NAN), f.solver_status));
                trace.push(TraceEntry { lambda, score: None, active: f.active_set.len(), status: Some(f.solver_status) });
                kept.push(None);
            }
            Err(e) => {
                failures.push(format!("lambda {}: {e}", lambda.to_f64().unwrap_or(f64::NAN)));
                trace.push(TraceEntry { lambda, score: None, active: 0, status: None });
                kept.push(None);
            }
        }
    }
    let (i, score) = best.ok_or_else(|| AlqrError::TuningFailed(failures.join("; ")))?;
    let fit = kept[i].take().expect("selected fit is kept");
    Ok(Selection { lambda: grid.values()[i], fit, score, trace })
}

/// Fits `method` at every grid level and returns the criterion minimizer.
pub fn select_lambda<T: Scalar>(
    x: &PredictorPanel<T>,
    y: &ResponseSeries<T>,
    tau: QuantileLevel<T>,
    method: Method,
    grid: &LambdaGrid<T>,
    criterion: Criterion,
    opts: &SolverOptions<T>,
) -> Result<Selection<T>> {
    Fitter::new(x, y, tau, *opts).select(method, grid, criterion)
}
