//! Rolling one-step-ahead evaluation and forecast metrics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AlqrError, Result};
use crate::loss::check_loss;
use crate::model::{PredictorPanel, QuantileLevel, ResponseSeries};
use crate::pipeline::{Fitter, LambdaChoice, Method};
use crate::scalar::Scalar;
use crate::solver::SolverOptions;
use crate::tuning::Criterion;

/// Mean check loss of the forecast errors.
pub fn fpe<T: Scalar>(y_true: &[T], y_pred: &[T], tau: QuantileLevel<T>) -> Result<T> {
    if y_true.len() != y_pred.len() {
        return Err(AlqrError::DimensionMismatch(format!(
            "{} realized values for {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(AlqrError::EmptyInput("no forecasts to evaluate".into()));
    }
    let total = y_true.iter().zip(y_pred).fold(T::zero(), |acc, (&y, &p)| acc + check_loss(y - p, tau));
    Ok(total / T::from_usize_lossy(y_true.len()))
}

/// Out-of-sample R² against the unconditional-quantile benchmark.
pub fn oos_r2<T: Scalar>(y_true: &[T], y_pred: &[T], y_quant_pred: &[T], tau: QuantileLevel<T>) -> Result<T> {
    let num = fpe(y_true, y_pred, tau)?;
    let den = fpe(y_true, y_quant_pred, tau)?;
    r2_from_fpe(num, den)
}

fn r2_from_fpe<T: Scalar>(num: T, den: T) -> Result<T> {
    if !(den > T::zero()) {
        return Err(AlqrError::Degenerate("benchmark forecasts have zero loss".into()));
    }
    Ok(T::one() - num / den)
}

/// Least-squares slope of `series[t]` on `(1, series[t-1])`.
pub fn ar1_coefficient<T: Scalar>(series: &[T]) -> Result<T> {
    if series.len() < 3 {
        return Err(AlqrError::InsufficientObservations { used: series.len(), params: 3 });
    }
    if let Some(i) = series.iter().position(|v| !v.is_finite()) {
        return Err(AlqrError::NonFinite(format!("series element {i}")));
    }
    let lag = &series[..series.len() - 1];
    let cur = &series[1..];
    let m = T::from_usize_lossy(lag.len());
    let mx = lag.iter().copied().sum::<T>() / m;
    let my = cur.iter().copied().sum::<T>() / m;
    let (mut sxy, mut sxx) = (T::zero(), T::zero());
    for (&a, &b) in lag.iter().zip(cur) {
        sxy = sxy + (a - mx) * (b - my);
        sxx = sxx + (a - mx) * (a - mx);
    }
    let scale = lag.iter().fold(T::zero(), |s, v| s.max(v.abs())).max(T::min_positive_value());
    if !(sxx > T::epsilon() * T::lit(16.0) * scale * scale * m) {
        return Err(AlqrError::Degenerate("lagged regressor has zero variance".into()));
    }
    Ok(sxy / sxx)
}

/// Fixed-width rolling windows over the last `horizon` observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RollingPlan {
    pub total_length: usize,
    pub horizon: usize,
    pub width: usize,
}

impl RollingPlan {
    /// Window width `n - S`.
    pub fn new(total_length: usize, horizon: usize) -> Result<Self> {
        let width = total_length.checked_sub(horizon).unwrap_or(0);
        Self::with_width(total_length, horizon, width)
    }

    pub fn with_width(total_length: usize, horizon: usize, width: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(AlqrError::InvalidParameter("horizon must be at least 1".into()));
        }
        if horizon + width > total_length {
            return Err(AlqrError::InvalidParameter(format!(
                "window {width} plus horizon {horizon} exceeds the {total_length} observations"
            )));
        }
        Ok(Self { total_length, horizon, width })
    }

    pub fn check(&self, p: usize, n_rows: usize) -> Result<()> {
        if n_rows != self.total_length {
            return Err(AlqrError::DimensionMismatch(format!(
                "plan covers {} observations, data has {n_rows}",
                self.total_length
            )));
        }
        if self.width <= p + 2 {
            return Err(AlqrError::InvalidParameter(format!(
                "window width {} must exceed p + 2 = {}",
                self.width,
                p + 2
            )));
        }
        Ok(())
    }

    /// Forecast target indices, in time order.
    pub fn targets(&self) -> std::ops::Range<usize> {
        self.total_length - self.horizon..self.total_length
    }

    /// Rows `[start, end)` of the training window for `target`.
    pub fn window(&self, target: usize) -> (usize, usize) {
        (target - self.width, target)
    }
}

/// One forecast of one method at one target date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub target: usize,
    pub realized: f64,
    pub prediction: Option<f64>,
    pub active: Option<usize>,
    pub lambda: Option<f64>,
    pub error: Option<String>,
}

/// Aggregates for one `(method, tau)` cell. Averages skip failed steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastCell {
    pub method: Method,
    pub tau: f64,
    pub fpe: Option<f64>,
    /// FPE of the window quantiles over the same steps.
    pub benchmark_fpe: Option<f64>,
    /// `None` when the benchmark loss is zero.
    pub oos_r2: Option<f64>,
    pub avg_active: Option<f64>,
    pub avg_lambda: Option<f64>,
    pub failures: usize,
    pub steps: Vec<StepRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastReport {
    pub plan: RollingPlan,
    pub criterion: Criterion,
    pub cells: Vec<ForecastCell>,
}

#[derive(Debug, Serialize)]
struct SummaryRow<'a> {
    method: &'a str,
    tau: f64,
    fpe: Option<f64>,
    oos_r2: Option<f64>,
    avg_active: Option<f64>,
    avg_lambda: Option<f64>,
    failures: usize,
}

impl ForecastReport {
    pub fn cell(&self, method: Method, tau: f64) -> Option<&ForecastCell> {
        self.cells.iter().find(|c| c.method == method && c.tau == tau)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Summary table, one row per `(method, tau)`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for c in &self.cells {
            w.serialize(SummaryRow {
                method: c.method.label(),
                tau: c.tau,
                fpe: c.fpe,
                oos_r2: c.oos_r2,
                avg_active: c.avg_active,
                avg_lambda: c.avg_lambda,
                failures: c.failures,
            })
            .map_err(|e| AlqrError::Io(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| AlqrError::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| AlqrError::Io(e.to_string()))
    }
}

/// Prediction, benchmark prediction, active count and penalty level.
type StepResult = std::result::Result<(f64, f64, usize, f64), String>;

fn aggregate(method: Method, tau: f64, targets: &[usize], realized: &[f64], results: Vec<StepResult>) -> Result<ForecastCell> {
    let ql = QuantileLevel::new(tau)?;
    let mut steps = Vec::with_capacity(targets.len());
    let (mut yv, mut pred, mut bench) = (Vec::new(), Vec::new(), Vec::new());
    let (mut act_sum, mut lam_sum) = (0.0, 0.0);
    for ((&target, &y), res) in targets.iter().zip(realized).zip(results) {
        let mut rec = StepRecord { target, realized: y, prediction: None, active: None, lambda: None, error: None };
        match res {
            Ok((p, q, act, lam)) => {
                yv.push(y);
                pred.push(p);
                bench.push(q);
                act_sum += act as f64;
                lam_sum += lam;
                rec.prediction = Some(p);
                rec.active = Some(act);
                rec.lambda = Some(lam);
            }
            Err(e) => rec.error = Some(e),
        }
        steps.push(rec);
    }
    let ok = yv.len();
    let mut cell = ForecastCell {
        method,
        tau,
        fpe: None,
        benchmark_fpe: None,
        oos_r2: None,
        avg_active: None,
        avg_lambda: None,
        failures: targets.len() - ok,
        steps,
    };
    if ok > 0 {
        let f = fpe(&yv, &pred, ql)?;
        let fq = fpe(&yv, &bench, ql)?;
        cell.fpe = Some(f);
        cell.benchmark_fpe = Some(fq);
        cell.oos_r2 = if method == Method::Quant { Some(0.0) } else { r2_from_fpe(f, fq).ok() };
        cell.avg_active = Some(act_sum / ok as f64);
        cell.avg_lambda = Some(lam_sum / ok as f64);
    }
    Ok(cell)
}

struct StepOutcome {
    quant: Result<f64>,
    per_method: Vec<std::result::Result<(f64, usize, f64), String>>,
}

/// Rolling one-step-ahead forecasts for every method and quantile level,
/// retuning penalized methods on each window with `criterion`.
///
/// The unconditional quantile of each training window is always computed
/// as the benchmark for R², whether or not `Quant` is requested.
pub fn rolling_forecast<T: Scalar>(
    panel: &PredictorPanel<T>,
    y: &ResponseSeries<T>,
    methods: &[Method],
    taus: &[f64],
    plan: &RollingPlan,
    criterion: Criterion,
    opts: &SolverOptions<T>,
) -> Result<ForecastReport> {
    if methods.is_empty() || taus.is_empty() {
        return Err(AlqrError::EmptyInput("no methods or quantile levels to evaluate".into()));
    }
    if y.len() != panel.n_rows() {
        return Err(AlqrError::DimensionMismatch(format!(
            "{} responses for {} predictor rows",
            y.len(),
            panel.n_rows()
        )));
    }
    plan.check(panel.p_cols(), panel.n_rows())?;
    for m in methods {
        m.validate()?;
    }
    let levels = taus.iter().map(|&t| QuantileLevel::new(T::lit(t))).collect::<Result<Vec<_>>>()?;
    let targets: Vec<usize> = plan.targets().collect();

    let jobs: Vec<(usize, usize)> = (0..levels.len()).flat_map(|a| targets.iter().map(move |&t| (a, t))).collect();
    let outcomes: Vec<StepOutcome> = jobs
        .par_iter()
        .map(|&(a, target)| forecast_step(panel, y, methods, levels[a], plan, target, criterion, opts))
        .collect::<Result<Vec<_>>>()?;

    let realized: Vec<f64> = targets.iter().map(|&t| y.values()[t].to_f64().unwrap_or(f64::NAN)).collect();
    let mut cells = Vec::with_capacity(methods.len() * taus.len());
    for (a, &tau) in taus.iter().enumerate() {
        let block = &outcomes[a * targets.len()..(a + 1) * targets.len()];
        for (m, &method) in methods.iter().enumerate() {
            let results: Vec<StepResult> = block
                .iter()
                .map(|o| match (&o.per_method[m], &o.quant) {
                    (Ok((p, act, lam)), Ok(q)) => Ok((*p, *q, *act, *lam)),
                    (Err(e), _) => Err(e.clone()),
                    (_, Err(e)) => Err(format!("benchmark quantile: {e}")),
                })
                .collect();
            cells.push(aggregate(method, tau, &targets, &realized, results)?);
        }
    }
    Ok(ForecastReport { plan: *plan, criterion, cells })
}

#[allow(clippy::too_many_arguments)]
fn forecast_step<T: Scalar>(
    panel: &PredictorPanel<T>,
    y: &ResponseSeries<T>,
    methods: &[Method],
    tau: QuantileLevel<T>,
    plan: &RollingPlan,
    target: usize,
    criterion: Criterion,
    opts: &SolverOptions<T>,
) -> Result<StepOutcome> {
    let (start, end) = plan.window(target);
    let xw = panel.slice_rows(start, end)?;
    let yw = y.slice(start, end)?;
    let x_new = panel.row(target - 1);
    let fitter = Fitter::new(&xw, &yw, tau, *opts);
    let run = |method: Method| -> std::result::Result<(f64, usize, f64), String> {
        let choice = if method.is_penalized() { LambdaChoice::Tune(criterion) } else { LambdaChoice::Fixed(T::zero()) };
        let model = fitter.fit(method, choice).map_err(|e| e.to_string())?;
        let p = model.predict(x_new).map_err(|e| e.to_string())?;
        let lam = model.lambda().to_f64().unwrap_or(f64::NAN);
        Ok((p.to_f64().unwrap_or(f64::NAN), model.active_count(), lam))
    };
    let quant = run(Method::Quant).map(|v| v.0).map_err(AlqrError::Degenerate);
    Ok(StepOutcome { quant, per_method: methods.iter().map(|&m| run(m)).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(t: f64) -> QuantileLevel {
        QuantileLevel::new(t).unwrap()
    }

    #[test]
    fn fpe_examples() {
        assert_eq!(fpe(&[1.0, 3.0], &[0.0, 5.0], q(0.5)).unwrap(), 0.75);
        assert_eq!(fpe(&[0.4, -2.0], &[0.4, -2.0], q(0.3)).unwrap(), 0.0);
        let v = fpe(&[0.0; 3], &[1.0; 3], q(0.9)).unwrap();
        assert!((v - 0.1).abs() < 1e-15);
        assert!(fpe(&[1.0], &[1.0, 2.0], q(0.5)).is_err());
        assert!(fpe::<f64>(&[], &[], q(0.5)).is_err());
    }

    #[test]
    fn r2_examples() {
        let y = [1.0, -0.5, 2.0];
        let b = [0.2, 0.2, 0.2];
        assert_eq!(oos_r2(&y, &b, &b, q(0.5)).unwrap(), 0.0);
        assert_eq!(oos_r2(&y, &y, &b, q(0.5)).unwrap(), 1.0);
        assert!(matches!(oos_r2(&y, &b, &y, q(0.5)), Err(AlqrError::Degenerate(_))));
        let r2: f64 = r2_from_fpe(0.0122, 0.0124).unwrap();
        assert!((r2 - 0.016).abs() < 5e-4, "{r2}");
    }

    #[test]
    fn ar1_examples() {
        assert!((ar1_coefficient(&[1.0f64, 2.0, 4.0, 8.0, 16.0]).unwrap() - 2.0).abs() < 1e-12);
        assert!(matches!(ar1_coefficient(&[3.0; 6]), Err(AlqrError::Degenerate(_))));
        assert!(ar1_coefficient(&[1.0, 2.0]).is_err());
        let mut r = crate::dgp::SimRng::new(11, crate::dgp::Block::Other(5), 0);
        let noise = r.normals(5000);
        assert!(ar1_coefficient(&noise).unwrap().abs() <= 0.05);
    }

    #[test]
    fn plan_windows() {
        let p = RollingPlan::new(100, 12).unwrap();
        assert_eq!(p.width, 88);
        assert_eq!(p.targets(), 88..100);
        assert_eq!(p.window(95), (7, 95));
        assert!(RollingPlan::new(10, 0).is_err());
        assert!(RollingPlan::with_width(10, 3, 8).is_err());
        assert!(p.check(85, 100).is_ok());
        assert!(p.check(86, 100).is_err());
        assert!(p.check(3, 99).is_err());
    }

    #[test]
    fn constant_response_quant_is_exact() {
        let x = PredictorPanel::from_columns(&[(0..30).map(|i| i as f64).collect()], None).unwrap();
        let y = ResponseSeries::new(vec![2.5; 30]).unwrap();
        let plan = RollingPlan::new(30, 1).unwrap();
        let rep =
            rolling_forecast(&x, &y, &[Method::Quant], &[0.5], &plan, Criterion::Bic, &SolverOptions::default())
                .unwrap();
        let c = &rep.cells[0];
        assert_eq!(c.steps[0].prediction, Some(2.5));
        assert_eq!(c.fpe, Some(0.0));
        assert_eq!(c.oos_r2, Some(0.0));
    }

    #[test]
    fn noiseless_qr_forecasts_exactly() {
        let n = 80;
        let a: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin() * 3.0).collect();
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.31).cos() + 0.01 * i as f64).collect();
        let mut ys = vec![0.0];
        ys.extend((1..n).map(|t| 0.5 + 1.2 * a[t - 1] - 0.7 * b[t - 1]));
        let x = PredictorPanel::from_columns(&[a, b], None).unwrap();
        let y = ResponseSeries::new(ys).unwrap();
        let plan = RollingPlan::new(n, 6).unwrap();
        let taus = [0.05, 0.5, 0.95];
        let rep = rolling_forecast(&x, &y, &[Method::Qr], &taus, &plan, Criterion::Bic, &SolverOptions::default())
            .unwrap();
        for c in &rep.cells {
            assert_eq!(c.failures, 0);
            assert!(c.fpe.unwrap() <= 1e-6, "{:?}", c.fpe);
        }
    }

    #[test]
    fn report_invariants_and_serialization() {
        use crate::dgp::{gen_scenario_stream, ScenarioConfig};
        let cfg = ScenarioConfig::preset(1, 160, 5).unwrap();
        let m = gen_scenario_stream(&cfg, 1).unwrap();
        let plan = RollingPlan::new(160, 4).unwrap();
        let methods = [Method::Qr, Method::LassoQr, Method::alqr(), Method::Quant];
        let run = || {
            rolling_forecast(&m.panel, &m.y, &methods, &[0.1, 0.5], &plan, Criterion::Bic, &SolverOptions::default())
                .unwrap()
        };
        let rep = run();
        assert_eq!(rep.cells.len(), 8);
        for tau in [0.1, 0.5] {
            let fq = rep.cell(Method::Quant, tau).unwrap().fpe.unwrap();
            for c in rep.cells.iter().filter(|c| c.tau == tau) {
                assert_eq!(c.failures, 0);
                let f = c.fpe.unwrap();
                assert!(f >= 0.0);
                if c.method != Method::Quant {
                    assert_eq!(c.oos_r2.unwrap() > 0.0, f < fq);
                }
            }
        }
        assert_eq!(rep.to_json().unwrap(), run().to_json().unwrap());
        let csv = rep.to_csv().unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "method,tau,fpe,oos_r2,avg_active,avg_lambda,failures");
        assert_eq!(lines.count(), 8);
        let back: ForecastReport = serde_json::from_str(&rep.to_json().unwrap()).unwrap();
        assert_eq!(back, rep);
    }

    #[test]
    fn failed_steps_are_counted() {
        let results = vec![Ok((1.0, 0.0, 3, 0.5)), Err("no fit".to_string()), Ok((2.0, 0.0, 5, 1.5))];
        let c = aggregate(Method::LassoQr, 0.5, &[7, 8, 9], &[1.0, 9.0, 3.0], results).unwrap();
        assert_eq!(c.failures, 1);
        assert_eq!(c.steps[1].error.as_deref(), Some("no fit"));
        assert_eq!(c.fpe, Some(0.25));
        assert_eq!(c.avg_active, Some(4.0));
        assert_eq!(c.avg_lambda, Some(1.0));
        assert_eq!(c.oos_r2, Some(1.0 - 0.25 / 1.0));
        let none = aggregate(Method::Qr, 0.5, &[1], &[1.0], vec![Err("x".into())]).unwrap();
        assert_eq!((none.failures, none.fpe), (1, None));
    }

    #[test]
    fn invalid_method_is_rejected() {
        let x = PredictorPanel::from_columns(&[(0..40).map(|i| (i % 7) as f64).collect()], None).unwrap();
        let y = ResponseSeries::new((0..40).map(|i| (i % 5) as f64).collect()).unwrap();
        let plan = RollingPlan::new(40, 3).unwrap();
        let bad = Method::Alqr { gamma: -1.0 };
        assert!(rolling_forecast(&x, &y, &[bad], &[0.5], &plan, Criterion::Bic, &SolverOptions::default()).is_err());
    }
}
