//! Exact solvers for ordinary, weighted-L1 and ridge penalized quantile
//! regression.
//!
//! L1 fits are linear programs. Each penalized coefficient contributes two
//! pseudo-observations with response zero and design rows `+l_j e_j` and
//! `-l_j e_j`, whose check losses sum to `l_j |beta_j|` for every `tau`. The
//! augmented unpenalized problem is solved through its bounded dual
//!
//! ```text
//! minimize  -y'a   subject to  X'a = (1 - tau) X'1,  0 <= a <= 1
//! ```
//!
//! The default solver is a bounded dual simplex on the equivalent form in
//! [`simplex`] where penalties only bound slack variables, which allows warm
//! starts along a penalty path ([`L1Path`]). When the simplex does not finish,
//! the augmented dual above is solved with the interior-point method in
//! [`lp`]; the slopes are the negated equality multipliers, and the interior
//! solution is snapped to a vertex of the optimal face when that does not
//! increase the objective. Either way the returned status is certified by
//! the primal-dual gap.

pub mod lp;
mod ridge;
mod simplex;

use serde::{Deserialize, Serialize};

use crate::error::{AlqrError, Result};
use crate::linalg::{is_rank_deficient, lu_solve, Matrix};
use crate::loss::{empirical_quantile, psi, total_check_loss};
use crate::model::{
    active_set, dot, lagged_residuals, PenaltySpec, PredictorPanel, QuantileFit, QuantileLevel,
    ResponseSeries, SolverDiagnostics, SolverStatus, Weight,
};
use crate::scalar::Scalar;

pub use lp::{solve_lp, IpmOptions, IpmStatus, LpProblem, LpSolution};
pub use ridge::{fit_ridge_qr, fit_ridge_qr_from};

/// Knobs shared by every fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions<T = f64> {
    pub max_iterations: usize,
    pub duality_gap_tol: T,
    pub step_tol: T,
    pub penalize_intercept: bool,
    /// Divide each predictor by its standard deviation before fitting; the
    /// returned coefficients are mapped back to the raw scale.
    pub standardize: bool,
    /// Run the singular-value collinearity diagnostic.
    pub check_rank: bool,
}

impl<T: Scalar> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            duality_gap_tol: T::default_gap_tol(),
            step_tol: T::lit(1e-10).max(T::epsilon() * T::lit(16.0)),
            penalize_intercept: false,
            standardize: false,
            check_rank: true,
        }
    }
}

impl<T: Scalar> SolverOptions<T> {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(AlqrError::InvalidParameter("max_iterations must be positive".into()));
        }
        if !(self.duality_gap_tol > T::zero() && self.step_tol > T::zero()) {
            return Err(AlqrError::InvalidParameter("solver tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Validates lengths and the observation count, returning the number of
/// usable (lag-aligned) rows.
pub(crate) fn check_inputs<T: Scalar>(x: &PredictorPanel<T>, y: &ResponseSeries<T>) -> Result<usize> {
    if x.n_rows() != y.len() {
        return Err(AlqrError::DimensionMismatch(format!(
            "panel has {} rows but response has {} entries",
            x.n_rows(),
            y.len()
        )));
    }
    let used = y.len() - 1;
    let params = x.p_cols() + 1;
    if used <= params {
        return Err(AlqrError::InsufficientObservations { used, params });
    }
    Ok(used)
}

/// Column scales used by the optional standardization (ones when disabled).
pub(crate) fn column_scales<T: Scalar>(x: &PredictorPanel<T>, opts: &SolverOptions<T>) -> Vec<T> {
    let p = x.p_cols();
    if !opts.standardize {
        return vec![T::one(); p];
    }
    let rows = x.n_rows() - 1;
    let nt = T::from_usize_lossy(rows);
    (0..p)
        .map(|j| {
            let mean = (0..rows).map(|t| x.get(t, j)).sum::<T>() / nt;
            let var = (0..rows).map(|t| (x.get(t, j) - mean).powi(2)).sum::<T>() / nt;
            let sd = var.sqrt();
            if sd > T::zero() {
                sd
            } else {
                T::one()
            }
        })
        .collect()
}

/// Augmented regression problem: real rows followed by penalty pseudo-rows.
struct Augmented<T> {
    /// `n_aug x k` with the intercept in column 0.
    rows: Matrix<T>,
    response: Vec<T>,
    n_real: usize,
    /// Original coefficient index of design column `c + 1`.
    included: Vec<usize>,
}

/// Penalty per original coefficient. `None` = excluded, `Some(0)` = free.
fn build_augmented<T: Scalar>(
    x: &PredictorPanel<T>,
    y: &ResponseSeries<T>,
    penalties: &[Option<T>],
    intercept_penalty: T,
    scales: &[T],
) -> Augmented<T> {
    let included: Vec<usize> = (0..x.p_cols()).filter(|&j| penalties[j].is_some()).collect();
    let k = included.len() + 1;
    let n_real = y.len() - 1;
    let penalized: Vec<(usize, T)> = std::iter::once((0, intercept_penalty))
        .chain(included.iter().enumerate().map(|(c, &j)| (c + 1, penalties[j].unwrap_or(T::zero()))))
        .filter(|(_, l)| *l > T::zero())
        .collect();
    let n_aug = n_real + 2 * penalized.len();
    let mut data = Vec::with_capacity(n_aug * k);
    let mut response = Vec::with_capacity(n_aug);
    let ys = y.values();
    for t in 1..=n_real {
        let row = x.row(t - 1);
        data.push(T::one());
        data.extend(included.iter().map(|&j| row[j] / scales[j]));
        response.push(ys[t]);
    }
    for &(col, l) in &penalized {
        for sign in [T::one(), -T::one()] {
            let start = data.len();
            data.extend(std::iter::repeat(T::zero()).take(k));
            data[start + col] = sign * l;
            response.push(T::zero());
        }
    }
    Augmented { rows: Matrix::from_row_major(n_aug, k, data), response, n_real, included }
}

fn augmented_objective<T: Scalar>(aug: &Augmented<T>, theta: &[T], tau: QuantileLevel<T>) -> T {
    (0..aug.rows.rows())
        .map(|i| crate::loss::check_loss(aug.response[i] - dot(aug.rows.row(i), theta), tau))
        .sum()
}

/// Picks `k` linearly independent rows in the given priority order and
/// solves for the parameter vector interpolating them.
fn vertex_through<T: Scalar>(aug: &Augmented<T>, order: &[usize]) -> Option<Vec<T>> {
    let k = aug.rows.cols();
    let mut basis: Vec<Vec<T>> = Vec::with_capacity(k);
    let mut chosen = Vec::with_capacity(k);
    let tol = T::lit(1e-9).max(T::epsilon() * T::lit(1e3));
    for &i in order {
        let a = aug.rows.row(i);
        let norm = dot(a, a).sqrt();
        if norm == T::zero() {
            continue;
        }
        let mut v: Vec<T> = a.iter().map(|&e| e / norm).collect();
        for q in &basis {
            let proj = dot(q, &v);
            v.iter_mut().zip(q).for_each(|(vi, &qi)| *vi = *vi - proj * qi);
        }
        let vn = dot(&v, &v).sqrt();
        if vn > tol {
            v.iter_mut().for_each(|e| *e = *e / vn);
            basis.push(v);
            chosen.push(i);
            if chosen.len() == k {
                break;
            }
        }
    }
    if chosen.len() < k {
        return None;
    }
    let mut mat = Vec::with_capacity(k * k);
    let mut rhs = Vec::with_capacity(k);
    for &i in &chosen {
        mat.extend_from_slice(aug.rows.row(i));
        rhs.push(aug.response[i]);
    }
    lu_solve(mat, k, rhs, T::epsilon() * T::lit(1e2))
}

/// Core L1 path shared by [`fit_qr`] and [`fit_penalized_qr`].
fn fit_l1_ipm<T: Scalar>(
    x: &PredictorPanel<T>,
    y: &ResponseSeries<T>,
    tau: QuantileLevel<T>,
    penalties: &[Option<T>],
    lambda: T,
    opts: &SolverOptions<T>,
) -> Result<QuantileFit<T>> {
    opts.validate()?;
    check_inputs(x, y)?;
    if penalties.len() != x.p_cols() {
        return Err(AlqrError::DimensionMismatch(format!(
            "{} penalty weights for {} predictors",
            penalties.len(),
            x.p_cols()
        )));
    }
    let scales = column_scales(x, opts);
    let intercept_penalty = if opts.penalize_intercept { lambda } else { T::zero() };
    let aug = build_augmented(x, y, penalties, intercept_penalty, &scales);
    let k = aug.rows.cols();
    let n_aug = aug.rows.rows();
    let t = tau.value();
    let one_minus = T::one() - t;

    // Bounded dual: variables a_i in [0, 1], X'a = (1 - tau) X'1.
    let mut rhs = vec![T::zero(); k];
    for i in 0..n_aug {
        for (r, &v) in rhs.iter_mut().zip(aug.rows.row(i)) {
            *r = *r + one_minus * v;
        }
    }
    let cost: Vec<T> = aug.response.iter().map(|&v| -v).collect();
    let problem = LpProblem::new(aug.rows.clone(), cost, rhs, vec![T::one(); n_aug]);
    let ipm = IpmOptions {
        max_iterations: opts.max_iterations,
        gap_tol: opts.duality_gap_tol * T::lit(1e-2),
        step_tol: opts.step_tol,
    };
    let sol = solve_lp(&problem, &ipm, &vec![one_minus; n_aug]);

    let theta_ipm: Vec<T> = sol.y.iter().map(|&v| -v).collect();
    let obj_ipm = augmented_objective(&aug, &theta_ipm, tau);
    // Dual value of the augmented QR problem at the (feasible) iterate.
    let dual = dot(&aug.response, &sol.x) - one_minus * aug.response.iter().copied().sum::<T>();
    let scale = obj_ipm.abs().max(T::one());

    let mut theta = theta_ipm.clone();
    let mut polished = false;
    let resid: Vec<T> = (0..n_aug).map(|i| aug.response[i] - dot(aug.rows.row(i), &theta_ipm)).collect();
    let mut by_resid: Vec<usize> = (0..n_aug).collect();
    by_resid.sort_by(|&i, &j| {
        let ri = resid[i].abs() / dot(aug.rows.row(i), aug.rows.row(i)).sqrt().max(T::min_positive_value());
        let rj = resid[j].abs() / dot(aug.rows.row(j), aug.rows.row(j)).sqrt().max(T::min_positive_value());
        ri.partial_cmp(&rj).unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut by_interior: Vec<usize> = (0..n_aug).collect();
    by_interior.sort_by(|&i, &j| {
        let ii = sol.x[i].min(T::one() - sol.x[i]);
        let ij = sol.x[j].min(T::one() - sol.x[j]);
        ij.partial_cmp(&ii).unwrap_or(std::cmp::Ordering::Equal)
    });
    for order in [&by_resid, &by_interior] {
        if let Some(v) = vertex_through(&aug, order) {
            let obj_v = augmented_objective(&aug, &v, tau);
            if obj_v <= obj_ipm + T::epsilon() * T::lit(64.0) * scale {
                theta = v;
                polished = true;
                break;
            }
        }
    }

    let collinear = opts.check_rank && {
        let real = &aug.rows.data()[..aug.n_real * k];
        is_rank_deficient(real, aug.n_real, k, T::lit(1e-10).max(T::epsilon() * T::lit(1e2)))
    };
    Ok(assemble_fit(
        x,
        y,
        tau,
        penalties,
        intercept_penalty,
        lambda,
        &scales,
        &aug.included,
        &theta,
        dual,
        sol.iterations,
        polished,
        collinear,
        opts,
    ))
}

fn fit_l1<T: Scalar>(
    x: &PredictorPanel<T>,
    y: &ResponseSeries<T>,
    tau: QuantileLevel<T>,
    penalties: &[Option<T>],
    lambda: T,
    opts: &SolverOptions<T>,
) -> Result<QuantileFit<T>> {
    let mut path = L1Path::with_rates(x, y, tau, penalties.to_vec(), opts)?;
    let intercept = if opts.penalize_intercept { lambda } else { T::zero() };
    path.solve(penalties, intercept, lambda)
}

/// Warm-started sequence of weighted-L1 fits on one data set; coefficient
/// `j` carries penalty `lambda / w_j` at level `lambda`.
pub struct L1Path<'a, T: Scalar> {
    x: &'a PredictorPanel<T>,
    y: &'a ResponseSeries<T>,
    tau: QuantileLevel<T>,
    opts: SolverOptions<T>,
    /// Penalty per unit of `lambda`; `None` = excluded.
    rates: Vec<Option<T>>,
    scales: Vec<T>,
    included: Vec<usize>,
    simplex: simplex::DualSimplex<T>,
    collinear: Option<bool>,
}

impl<'a, T: Scalar> L1Path<'a, T> {
    pub fn new(
        x: &'a PredictorPanel<T>,
        y: &'a ResponseSeries<T>,
        tau: QuantileLevel<T>,
        weights: &[Weight<T>],
        opts: &SolverOptions<T>,
    ) -> Result<Self> {
        let rates = weights
            .iter()
            .map(|w| match w {
                Weight::Value(v) if *v > T::zero() && v.is_finite() => Ok(Some(T::one() / *v)),
                Weight::Value(_) => Err(AlqrError::InvalidWeights("weights must be finite and positive".into())),
                Weight::Excluded => Ok(None),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::with_rates(x, y, tau, rates, opts)
    }

    fn with_rates(
        x: &'a PredictorPanel<T>,
        y: &'a ResponseSeries<T>,
        tau: QuantileLevel<T>,
        rates: Vec<Option<T>>,
        opts: &SolverOptions<T>,
    ) -> Result<Self> {
        opts.validate()?;
        check_inputs(x, y)?;
        if rates.len() != x.p_cols() {
            return Err(AlqrError::DimensionMismatch(format!(
                "{} penalty weights for {} predictors",
                rates.len(),
                x.p_cols()
            )));
        }
        let scales = column_scales(x, opts);
        let included: Vec<usize> = (0..x.p_cols()).filter(|&j| rates[j].is_some()).collect();
        let n = y.len() - 1;
        let k = included.len() + 1;
        let mut data = Vec::with_capacity(n * k);
        for t in 0..n {
            let row = x.row(t);
            data.push(T::one());
            data.extend(included.iter().map(|&j| row[j] / scales[j]));
        }
        let design = Matrix::from_row_major(n, k, data);
        let simplex = simplex::DualSimplex::new(design, y.values()[1..].to_vec(), tau.value(), vec![T::zero(); k]);
        Ok(Self { x, y, tau, opts: *opts, rates, scales, included, simplex, collinear: None })
    }

    /// Fit at penalty level `lambda`, warm-started from the previous level.
    pub fn fit(&mut self, lambda: T) -> Result<QuantileFit<T>> {
        if !(lambda >= T::zero()) || !lambda.is_finite() {
            return Err(AlqrError::NegativeLambda(lambda.to_f64().unwrap_or(f64::NAN)));
        }
        let pens: Vec<Option<T>> = self.rates.iter().map(|r| r.map(|r| r * lambda)).collect();
        let intercept = if self.opts.penalize_intercept { lambda } else { T::zero() };
        self.solve(&pens, intercept, lambda)
    }

    fn solve(&mut self, pens: &[Option<T>], intercept_penalty: T, lambda: T) -> Result<QuantileFit<T>> {
        let bounds: Vec<T> = std::iter::once(intercept_penalty)
            .chain(self.included.iter().map(|&j| pens[j].unwrap_or(T::zero())))
            .collect();
        if self.collinear.is_none() {
            self.collinear = Some(self.opts.check_rank && {
                let d = self.simplex.design();
                is_rank_deficient(d.data(), d.rows(), d.cols(), T::lit(1e-10).max(T::epsilon() * T::lit(1e2)))
            });
        }
        let cap = 20 * (self.simplex.design().rows() + self.simplex.n_cols()) + 1000;
        for attempt in 0..2 {
            if attempt == 1 {
                let d = self.simplex.design().clone();
                self.simplex = simplex::DualSimplex::new(d, self.y.values()[1..].to_vec(), self.tau.value(), bounds.clone());
            }
            self.simplex.set_bounds(&bounds);
            let before = self.simplex.iterations;
            if self.simplex.solve(cap).is_err() {
                continue;
            }
            let theta = self.simplex.theta();
            let fit = assemble_fit(
                self.x,
                self.y,
                self.tau,
                pens,
                intercept_penalty,
                lambda,
                &self.scales,
                &self.included,
                &theta,
                self.simplex.dual_value(),
                self.simplex.iterations - before,
                true,
                self.collinear.unwrap_or(false),
                &self.opts,
            );
            if fit.solver_status == SolverStatus::Optimal {
                return Ok(fit);
            }
        }
        // Restart from scratch so the next level does not inherit a bad basis.
        let d = self.simplex.design().clone();
        self.simplex = simplex::DualSimplex::new(d, self.y.values()[1..].to_vec(), self.tau.value(), bounds);
        fit_l1_ipm(self.x, self.y, self.tau, pens, lambda, &self.opts)
    }
}

/// Maps a solution in design coordinates back to the caller's scale and
/// certifies it against the dual value `dual`.
#[allow(clippy::too_many_arguments)]
fn assemble_fit<T: Scalar>(
    x: &PredictorPanel<T>,
    y: &ResponseSeries<T>,
    tau: QuantileLevel<T>,
    penalties: &[Option<T>],
    intercept_penalty: T,
    lambda: T,
    scales: &[T],
    included: &[usize],
    theta: &[T],
    dual: T,
    iterations: usize,
    polished: bool,
    collinear: bool,
    opts: &SolverOptions<T>,
) -> QuantileFit<T> {
    let mut coefficients = vec![T::zero(); x.p_cols()];
    for (c, &j) in included.iter().enumerate() {
        coefficients[j] = theta[c + 1] / scales[j];
    }
    let intercept = theta[0];
    let residuals = lagged_residuals(x, y, intercept, &coefficients);
    let check_loss = total_check_loss(&residuals, tau);
    let penalty: T = penalties
        .iter()
        .zip(&coefficients)
        .zip(scales)
        .map(|((p, &b), &s)| p.map_or(T::zero(), |l| l * (b * s).abs()))
        .sum::<T>()
        + intercept_penalty * intercept.abs();
    let objective = check_loss + penalty;
    let gap = objective - dual;
    let ok = gap.is_finite() && gap <= opts.duality_gap_tol * objective.abs().max(T::one());
    QuantileFit {
        tau,
        intercept,
        active_set: active_set(&coefficients),
        coefficients,
        residuals,
        objective,
        check_loss,
        lambda_used: lambda,
        solver_status: if ok { SolverStatus::Optimal } else { SolverStatus::MaxIterations },
        diagnostics: SolverDiagnostics {
            iterations,
            duality_gap: gap.to_f64().unwrap_or(f64::NAN),
            collinear,
            vertex_polished: polished,
        },
    }
}

/// Ordinary quantile regression of `y_t` on `(1, x_{t-1})`.
pub fn fit_qr<T: Scalar>(
    x: &PredictorPanel<T>,
    y: &ResponseSeries<T>,
    tau: QuantileLevel<T>,
    opts: &SolverOptions<T>,
) -> Result<QuantileFit<T>> {
    let free = vec![Some(T::zero()); x.p_cols()];
    fit_l1(x, y, tau, &free, T::zero(), opts)
}

/// Weighted-L1 penalized quantile regression; coefficient `j` carries
/// penalty `lambda / w_j`, and excluded coefficients are fixed at zero.
pub fn fit_penalized_qr<T: Scalar>(
    x: &PredictorPanel<T>,
    y: &ResponseSeries<T>,
    tau: QuantileLevel<T>,
    penalty: &PenaltySpec<T>,
    opts: &SolverOptions<T>,
) -> Result<QuantileFit<T>> {
    if penalty.weights().len() != x.p_cols() {
        return Err(AlqrError::DimensionMismatch(format!(
            "{} penalty weights for {} predictors",
            penalty.weights().len(),
            x.p_cols()
        )));
    }
    fit_l1(x, y, tau, &penalty.coefficient_penalties(), penalty.lambda(), opts)
}

/// Penalty level above which the intercept-only fit is optimal, with a
/// factor-two margin:
/// `2 * max_j w_j * (|sum_t x_{t-1,j} psi(y_t - q)| + sum_{t: y_t = q} |x_{t-1,j}|)`,
/// where `q` is the empirical quantile of the usable responses. The second
/// term covers the free subgradient at interpolated observations.
pub fn lambda_max<T: Scalar>(
    x: &PredictorPanel<T>,
    y: &ResponseSeries<T>,
    tau: QuantileLevel<T>,
    weights: &[Weight<T>],
) -> Result<T> {
    check_inputs(x, y)?;
    if weights.len() != x.p_cols() {
        return Err(AlqrError::DimensionMismatch(format!(
            "{} weights for {} predictors",
            weights.len(),
            x.p_cols()
        )));
    }
    let usable = y.usable();
    let q = empirical_quantile(usable, tau)?;
    let mut best = T::zero();
    for (j, w) in weights.iter().enumerate() {
        let Weight::Value(wj) = *w else { continue };
        let mut grad = T::zero();
        let mut slack = T::zero();
        for (t, &yt) in usable.iter().enumerate() {
            let xv = x.get(t, j);
            let r = yt - q;
            grad = grad + xv * psi(r, tau);
            if r == T::zero() {
                slack = slack + xv.abs();
            }
        }
        best = best.max(wj * (grad.abs() + slack));
    }
    Ok(T::lit(2.0) * best)
}
