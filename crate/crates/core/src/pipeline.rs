//! Uniform fit/predict interface over the estimators: ordinary QR, lasso QR,
//! adaptive lasso QR (two-step), ridge QR and the unconditional quantile.

use std::cell::OnceCell;

use serde::{Deserialize, Serialize};

use crate::error::{AlqrError, Result};
use crate::loss::empirical_quantile;
use crate::model::{PenaltySpec, PredictorPanel, QuantileFit, QuantileLevel, ResponseSeries, SolverStatus, Weight};
use crate::scalar::Scalar;
use crate::solver::{fit_penalized_qr, fit_qr, fit_ridge_qr, fit_ridge_qr_from, lambda_max, L1Path, SolverOptions};
use crate::tuning::{select_from_fits, Criterion, LambdaGrid, Selection, TraceEntry};

/// First-stage magnitudes below this are treated as zero and the predictor
/// is dropped from the second stage.
pub const WEIGHT_FLOOR: f64 = 1e-10;

/// Estimator choice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Method {
    Qr,
    #[serde(rename = "lasso")]
    LassoQr,
    Alqr {
        #[serde(default = "default_gamma")]
        gamma: f64,
    },
    #[serde(rename = "ridge")]
    RidgeQr,
    Quant,
}

fn default_gamma() -> f64 {
    1.0
}

impl Method {
    pub fn alqr() -> Self {
        Method::Alqr { gamma: 1.0 }
    }

    /// Label used in reports.
    pub fn label(&self) -> &'static str {
        match self {
            Method::Qr => "QR",
            Method::LassoQr => "LASSO",
            Method::Alqr { .. } => "ALQR",
            Method::RidgeQr => "RIDGE",
            Method::Quant => "QUANT",
        }
    }

    /// Whether the method has a penalty level to choose.
    pub fn is_penalized(&self) -> bool {
        matches!(self, Method::LassoQr | Method::Alqr { .. } | Method::RidgeQr)
    }

    pub fn validate(&self) -> Result<()> {
        if let Method::Alqr { gamma } = self {
            if !(gamma.is_finite() && *gamma > 0.0) {
                return Err(AlqrError::InvalidParameter(format!("gamma must be positive, got {gamma}")));
            }
        }
        Ok(())
    }
}

impl std::str::FromStr for Method {
    type Err = AlqrError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qr" => Ok(Method::Qr),
            "lasso" | "lassoqr" | "lasso-qr" => Ok(Method::LassoQr),
            "alqr" => Ok(Method::alqr()),
            "ridge" | "ridgeqr" | "ridge-qr" => Ok(Method::RidgeQr),
            "quant" => Ok(Method::Quant),
            other => Err(AlqrError::InvalidParameter(format!("unknown method '{other}'"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Fixed penalty level or criterion-based selection over a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaChoice<T = f64> {
    Fixed(T),
    Tune(Criterion),
}

/// A fitted estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel<T = f64> {
    pub method: Method,
    /// Absent for `Quant`.
    pub fit: Option<QuantileFit<T>>,
    /// The stored constant of `Quant`.
    pub quantile: Option<T>,
    pub tuning_trace: Option<Vec<TraceEntry<T>>>,
}

impl<T: Scalar> FittedModel<T> {
    pub fn predict(&self, x_new: &[T]) -> Result<T> {
        match (&self.fit, self.quantile) {
            (Some(fit), _) => fit.predict(x_new),
            (None, Some(q)) => Ok(q),
            (None, None) => Err(AlqrError::InvalidParameter("model holds neither a fit nor a quantile".into())),
        }
    }

    pub fn active_count(&self) -> usize {
        self.fit.as_ref().map_or(0, |f| f.active_set.len())
    }

    /// Penalty level used; zero for unpenalized methods.
    pub fn lambda(&self) -> T {
        self.fit.as_ref().map_or(T::zero(), |f| f.lambda_used)
    }
}

/// `w_j = |beta_j|^gamma`, or `Excluded` when `|beta_j|` is below [`WEIGHT_FLOOR`].
pub fn adaptive_weights<T: Scalar>(beta_init: &[T], gamma: T) -> Result<Vec<Weight<T>>> {
    if !(gamma > T::zero()) || !gamma.is_finite() {
        return Err(AlqrError::InvalidParameter("gamma must be positive".into()));
    }
    let floor = T::lit(WEIGHT_FLOOR);
    beta_init
        .iter()
        .enumerate()
        .map(|(j, &b)| {
            if !b.is_finite() {
                return Err(AlqrError::NonFinite(format!("initial coefficient {j}")));
            }
            let w = b.abs().powf(gamma);
            // A tiny |b| can still underflow under a large gamma.
            Ok(if b.abs() < floor || !(w > T::zero()) { Weight::Excluded } else { Weight::Value(w) })
        })
        .collect()
}

/// Fits `method` on `(x, y)` at quantile `tau`.
pub fn fit_method<T: Scalar>(
    method: Method,
    x: &PredictorPanel<T>,
    y: &ResponseSeries<T>,
    tau: QuantileLevel<T>,
    lambda: LambdaChoice<T>,
    opts: &SolverOptions<T>,
) -> Result<FittedModel<T>> {
    Fitter::new(x, y, tau, *opts).fit(method, lambda)
}

/// Fits the second ALQR stage from a given first-stage fit.
pub fn fit_alqr_from_initial<T: Scalar>(
    initial: &QuantileFit<T>,
    gamma: T,
    x: &PredictorPanel<T>,
    y: &ResponseSeries<T>,
    lambda: T,
    opts: &SolverOptions<T>,
) -> Result<QuantileFit<T>> {
    if initial.solver_status != SolverStatus::Optimal {
        return Err(AlqrError::FirstStageFailed(format!("{:?}", initial.solver_status)));
    }
    let spec = PenaltySpec::new(lambda, adaptive_weights(&initial.coefficients, gamma)?, gamma)?;
    fit_penalized_qr(x, y, initial.tau, &spec, opts)
}

/// Fits several methods on one data window, sharing the ordinary QR fit
/// (the ALQR first stage and the low end of the penalty path).
pub struct Fitter<'a, T: Scalar> {
    x: &'a PredictorPanel<T>,
    y: &'a ResponseSeries<T>,
    tau: QuantileLevel<T>,
    opts: SolverOptions<T>,
    pub grid_len: usize,
    pub ridge_grid_len: usize,
    pub grid_decades: f64,
    qr: OnceCell<Result<QuantileFit<T>>>,
}

impl<'a, T: Scalar> Fitter<'a, T> {
    /// Ridge fits are much more expensive than LP fits, so their grid is coarser.
    pub const DEFAULT_RIDGE_GRID_LEN: usize = 25;

    pub fn new(x: &'a PredictorPanel<T>, y: &'a ResponseSeries<T>, tau: QuantileLevel<T>, opts: SolverOptions<T>) -> Self {
        Self {
            x,
            y,
            tau,
            opts,
            grid_len: LambdaGrid::<T>::DEFAULT_LEN,
            ridge_grid_len: Self::DEFAULT_RIDGE_GRID_LEN,
            grid_decades: LambdaGrid::<T>::DEFAULT_DECADES,
            qr: OnceCell::new(),
        }
    }

    fn n_used(&self) -> usize {
        self.y.len().saturating_sub(1)
    }

    /// The ordinary QR fit, computed once.
    pub fn qr(&self) -> Result<&QuantileFit<T>> {
        self.qr
            .get_or_init(|| fit_qr(self.x, self.y, self.tau, &self.opts))
            .as_ref()
            .map_err(Clone::clone)
    }

    fn l1_weights(&self, method: Method) -> Result<Vec<Weight<T>>> {
        match method {
            Method::LassoQr => Ok(vec![Weight::Value(T::one()); self.x.p_cols()]),
            Method::Alqr { gamma } => {
                let first = match self.qr() {
                    Ok(f) => f,
                    Err(e) => return Err(AlqrError::FirstStageFailed(e.to_string())),
                };
                if first.solver_status != SolverStatus::Optimal {
                    return Err(AlqrError::FirstStageFailed(format!("{:?}", first.solver_status)));
                }
                adaptive_weights(&first.coefficients, T::lit(gamma))
            }
            _ => Err(AlqrError::InvalidParameter(format!("{} has no L1 penalty", method.label()))),
        }
    }

    fn gamma_of(method: Method) -> T {
        match method {
            Method::Alqr { gamma } => T::lit(gamma),
            _ => T::one(),
        }
    }

    /// The default grid for a penalized method: it starts at `lambda_max`
    /// of the method's weights (unit weights for ridge).
    pub fn default_grid(&self, method: Method) -> Result<LambdaGrid<T>> {
        let (weights, len) = match method {
            Method::RidgeQr => (vec![Weight::Value(T::one()); self.x.p_cols()], self.ridge_grid_len),
            _ => (self.l1_weights(method)?, self.grid_len),
        };
        let mut top = lambda_max(self.x, self.y, self.tau, &weights)?;
        if !(top > T::zero()) {
            // Every admissible direction is flat at zero; any positive level works.
            top = T::one();
        }
        LambdaGrid::log_spaced(top, len, self.grid_decades)
    }

    pub fn fit(&self, method: Method, lambda: LambdaChoice<T>) -> Result<FittedModel<T>> {
        method.validate()?;
        let plain = |fit: QuantileFit<T>| FittedModel { method, fit: Some(fit), quantile: None, tuning_trace: None };
        match (method, lambda) {
            (Method::Quant, _) => {
                let q = empirical_quantile(self.y.usable(), self.tau)?;
                Ok(FittedModel { method, fit: None, quantile: Some(q), tuning_trace: None })
            }
            (Method::Qr, _) => Ok(plain(self.qr()?.clone())),
            (Method::RidgeQr, LambdaChoice::Fixed(l)) => Ok(plain(fit_ridge_qr(self.x, self.y, self.tau, l, &self.opts)?)),
            (_, LambdaChoice::Fixed(l)) => {
                let spec = PenaltySpec::new(l, self.l1_weights(method)?, Self::gamma_of(method))?;
                Ok(plain(fit_penalized_qr(self.x, self.y, self.tau, &spec, &self.opts)?))
            }
            (_, LambdaChoice::Tune(criterion)) => {
                let grid = self.default_grid(method)?;
                let sel = self.select(method, &grid, criterion)?;
                Ok(FittedModel { method, fit: Some(sel.fit), quantile: None, tuning_trace: Some(sel.trace) })
            }
        }
    }

    /// Criterion-based selection over `grid`.
    pub fn select(&self, method: Method, grid: &LambdaGrid<T>, criterion: Criterion) -> Result<Selection<T>> {
        method.validate()?;
        let n_used = self.n_used();
        let p = self.x.p_cols();
        let fits = match method {
            Method::RidgeQr => {
                let mut fits: Vec<Result<QuantileFit<T>>> = Vec::with_capacity(grid.len());
                for &l in grid.values() {
                    let prev = fits.last().and_then(|f| f.as_ref().ok());
                    fits.push(fit_ridge_qr_from(self.x, self.y, self.tau, l, &self.opts, prev));
                }
                fits
            }
            Method::LassoQr | Method::Alqr { .. } => {
                let base = PenaltySpec::new(T::zero(), self.l1_weights(method)?, Self::gamma_of(method))?;
                self.l1_path(&base, grid)?
            }
            _ => return Err(AlqrError::InvalidParameter(format!("{} has no penalty to tune", method.label()))),
        };
        select_from_fits(grid, fits, n_used, criterion, p)
    }

    /// Penalized fits along a decreasing grid, each warm-started from the
    /// previous basis.
    ///
    /// Once the fit coincides with the unpenalized optimum on the same
    /// predictors, that solution stays optimal for every smaller level and
    /// is reused instead of re-solved.
    fn l1_path(&self, base: &PenaltySpec<T>, grid: &LambdaGrid<T>) -> Result<Vec<Result<QuantileFit<T>>>> {
        let g = grid.values();
        let reference = if base.excluded().is_empty() {
            self.qr().ok().cloned()
        } else {
            fit_penalized_qr(self.x, self.y, self.tau, base, &self.opts).ok()
        }
        .filter(QuantileFit::is_optimal);

        let mut path = L1Path::new(self.x, self.y, self.tau, base.weights(), &self.opts)?;
        let mut fits = Vec::with_capacity(g.len());
        for (i, &lambda) in g.iter().enumerate() {
            let f = path.fit(lambda);
            let reached = matches!((&f, &reference), (Ok(f), Some(r)) if f.is_optimal() && same_solution(f, r));
            if reached {
                let fit = f.as_ref().unwrap().clone();
                fits.push(f);
                for &l in &g[i + 1..] {
                    fits.push(Ok(self.relabel(&fit, base, l)?));
                }
                break;
            }
            fits.push(f);
        }
        Ok(fits)
    }

    /// Copy of `fit` re-evaluated as a solution at penalty level `lambda`.
    fn relabel(&self, fit: &QuantileFit<T>, base: &PenaltySpec<T>, lambda: T) -> Result<QuantileFit<T>> {
        let spec = base.with_lambda(lambda)?;
        let pen = spec
            .coefficient_penalties()
            .iter()
            .zip(&fit.coefficients)
            .fold(T::zero(), |acc, (l, b)| acc + l.map_or(T::zero(), |l| l * b.abs()));
        let mut out = fit.clone();
        out.lambda_used = lambda;
        out.objective = fit.check_loss + pen;
        Ok(out)
    }
}

fn same_solution<T: Scalar>(a: &QuantileFit<T>, b: &QuantileFit<T>) -> bool {
    let scale = b.coefficients.iter().fold(b.intercept.abs(), |m, v| m.max(v.abs())).max(T::one());
    let tol = T::lit(1e-9).max(T::epsilon() * T::lit(64.0)) * scale;
    a.active_set == b.active_set
        && (a.intercept - b.intercept).abs() <= tol
        && a.coefficients.iter().zip(&b.coefficients).all(|(u, v)| (*u - *v).abs() <= tol)
}

/// Point prediction of a fitted model.
pub fn predict<T: Scalar>(model: &FittedModel<T>, x_new: &[T]) -> Result<T> {
    model.predict(x_new)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(t: f64) -> QuantileLevel {
        QuantileLevel::new(t).unwrap()
    }

    fn noiseless() -> (PredictorPanel, ResponseSeries) {
        // y_t = 2 x_{t-1,0} + 0 x_{t-1,1}
        let n = 40;
        let a: Vec<f64> = (0..n).map(|i| ((i * 13) % 17) as f64 / 4.0 - 2.0).collect();
        let b: Vec<f64> = (0..n).map(|i| ((i * 5) % 11) as f64 / 3.0 - 1.5).collect();
        let mut y = vec![0.0];
        y.extend(a[..n - 1].iter().map(|v| 2.0 * v));
        (PredictorPanel::from_columns(&[a, b], None).unwrap(), ResponseSeries::new(y).unwrap())
    }

    #[test]
    fn weight_examples() {
        assert_eq!(adaptive_weights(&[0.5], 1.0).unwrap(), vec![Weight::Value(0.5)]);
        let spec = PenaltySpec::new(3.0, adaptive_weights(&[0.5], 1.0).unwrap(), 1.0).unwrap();
        assert_eq!(spec.coefficient_penalties(), vec![Some(6.0)]);
        assert_eq!(adaptive_weights(&[0.0, 1.0], 1.0).unwrap(), vec![Weight::Excluded, Weight::Value(1.0)]);
        assert_eq!(adaptive_weights(&[-2.0], 2.0).unwrap(), vec![Weight::Value(4.0)]);
        assert!(adaptive_weights(&[1.0], 0.0).is_err());
        assert!(adaptive_weights(&[f64::NAN], 1.0).is_err());
    }

    #[test]
    fn quant_predicts_constant() {
        let x = PredictorPanel::intercept_only(6).unwrap();
        let y = ResponseSeries::new(vec![9.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let m = fit_method(Method::Quant, &x, &y, q(0.5), LambdaChoice::Tune(Criterion::Bic), &SolverOptions::default())
            .unwrap();
        assert_eq!(m.quantile, Some(3.0));
        assert_eq!(m.predict(&[123.0]).unwrap(), 3.0);
        assert_eq!(m.predict(&[]).unwrap(), 3.0);
    }

    #[test]
    fn predict_arithmetic() {
        let (x, y) = noiseless();
        let mut m = fit_method(Method::Qr, &x, &y, q(0.5), LambdaChoice::Fixed(0.0), &SolverOptions::default()).unwrap();
        let f = m.fit.as_mut().unwrap();
        f.intercept = 1.0;
        f.coefficients = vec![2.0, -1.0];
        assert_eq!(predict(&m, &[3.0, 4.0]).unwrap(), 3.0);
        assert!(matches!(m.predict(&[1.0]), Err(AlqrError::DimensionMismatch(_))));
    }

    #[test]
    fn alqr_recovers_noiseless_support() {
        let (x, y) = noiseless();
        let opts = SolverOptions::default();
        let m = fit_method(Method::alqr(), &x, &y, q(0.5), LambdaChoice::Fixed(1e-3), &opts).unwrap();
        let f = m.fit.as_ref().unwrap();
        assert_eq!(f.active_set, vec![0]);
        assert!((f.coefficients[0] - 2.0).abs() < 1e-3);
        for t in 1..y.len() {
            assert!((m.predict(x.row(t - 1)).unwrap() - y.values()[t]).abs() < 1e-6);
        }
    }

    #[test]
    fn tuned_noiseless_selects_true_support() {
        let (x, y) = noiseless();
        for method in [Method::alqr(), Method::LassoQr] {
            let m = fit_method(method, &x, &y, q(0.5), LambdaChoice::Tune(Criterion::Bic), &SolverOptions::default())
                .unwrap();
            assert_eq!(m.fit.as_ref().unwrap().active_set, vec![0], "{method}");
            let trace = m.tuning_trace.as_ref().unwrap();
            assert_eq!(trace.len(), 100);
        }
    }

    #[test]
    fn lasso_at_zero_equals_qr() {
        let (x, mut y) = noiseless();
        let mut v = y.values().to_vec();
        for (i, e) in v.iter_mut().enumerate() {
            *e += ((i * 7919) % 13) as f64 / 13.0 - 0.5;
        }
        y = ResponseSeries::new(v).unwrap();
        let opts = SolverOptions::default();
        let l = fit_method(Method::LassoQr, &x, &y, q(0.3), LambdaChoice::Fixed(0.0), &opts).unwrap();
        let r = fit_method(Method::Qr, &x, &y, q(0.3), LambdaChoice::Fixed(0.0), &opts).unwrap();
        let (a, b) = (l.fit.unwrap().objective, r.fit.unwrap().objective);
        assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0));
    }

    #[test]
    fn path_shortcuts_match_direct_fits() {
        let (x, y0) = noiseless();
        let mut v = y0.values().to_vec();
        for (i, e) in v.iter_mut().enumerate() {
            *e += ((i * 31) % 7) as f64 / 7.0 - 0.4;
        }
        let y = ResponseSeries::new(v).unwrap();
        let opts = SolverOptions::default();
        let fitter = Fitter::new(&x, &y, q(0.6), opts);
        for method in [Method::LassoQr, Method::alqr()] {
            let grid = fitter.default_grid(method).unwrap();
            let sel = fitter.select(method, &grid, Criterion::Bic).unwrap();
            let base = PenaltySpec::new(0.0, fitter.l1_weights(method).unwrap(), 1.0).unwrap();
            for (entry, &l) in sel.trace.iter().zip(grid.values()) {
                let direct = fit_penalized_qr(&x, &y, q(0.6), &base.with_lambda(l).unwrap(), &opts).unwrap();
                let s = crate::tuning::ic_score(&direct, y.len() - 1, Criterion::Bic, 2).unwrap().value;
                assert!((entry.score.unwrap() - s).abs() < 1e-7, "{method} lambda {l}");
                assert_eq!(entry.active, direct.active_set.len());
            }
        }
    }

    #[test]
    fn alqr_first_stage_failure_is_distinct() {
        let (x, y) = noiseless();
        let opts = SolverOptions { max_iterations: 1, ..SolverOptions::default() };
        match fit_method(Method::alqr(), &x, &y, q(0.5), LambdaChoice::Fixed(0.1), &opts) {
            Err(AlqrError::FirstStageFailed(_)) => {}
            // The polish step can still certify a vertex after one iteration.
            Ok(m) => assert!(m.fit.is_some()),
            Err(e) => panic!("unexpected {e}"),
        }
        let err = fit_alqr_from_initial(
            &QuantileFit { solver_status: SolverStatus::MaxIterations, ..fit_qr(&x, &y, q(0.5), &SolverOptions::default()).unwrap() },
            1.0,
            &x,
            &y,
            0.1,
            &SolverOptions::default(),
        );
        assert!(matches!(err, Err(AlqrError::FirstStageFailed(_))));
    }

    #[test]
    fn method_parsing_and_validation() {
        assert_eq!("alqr".parse::<Method>().unwrap(), Method::Alqr { gamma: 1.0 });
        assert_eq!("LASSO".parse::<Method>().unwrap(), Method::LassoQr);
        assert!("foo".parse::<Method>().is_err());
        assert!(Method::Alqr { gamma: -1.0 }.validate().is_err());
        let json = serde_json::to_string(&Method::alqr()).unwrap();
        assert_eq!(serde_json::from_str::<Method>(&json).unwrap(), Method::alqr());
    }
}
