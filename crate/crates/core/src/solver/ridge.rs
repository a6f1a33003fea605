//! Ridge-penalized quantile regression.
//!
//! The check loss is replaced by its Huberized version of half-width `kappa`
//! (quadratic on `[-kappa, kappa]`, exact outside), minimized by damped
//! Newton steps while `kappa` shrinks by a factor ten per stage down to
//! `1e-6 * scale(y)`. The final iterate is polished by solving the KKT system
//! of the nonsmooth problem with the near-zero residuals held at zero, and
//! stationarity is measured on the original objective.

use crate::error::Result;
use crate::linalg::{lu_solve, Cholesky};
use crate::loss::{empirical_quantile, total_check_loss};
use crate::model::{
    active_set, dot, lagged_residuals, PredictorPanel, QuantileFit, QuantileLevel, ResponseSeries,
    SolverDiagnostics, SolverStatus,
};
use crate::scalar::Scalar;

use super::{check_inputs, column_scales, SolverOptions};

struct Problem<'a, T> {
    /// `n x k` row-major, intercept first.
    rows: &'a [T],
    y: &'a [T],
    k: usize,
    tau: T,
    lambda: T,
    /// Penalize parameter `j` (the intercept only when requested).
    penalized: Vec<bool>,
}

impl<T: Scalar> Problem<'_, T> {
    fn n(&self) -> usize {
        self.y.len()
    }

    fn row(&self, i: usize) -> &[T] {
        &self.rows[i * self.k..(i + 1) * self.k]
    }

    fn residuals(&self, theta: &[T]) -> Vec<T> {
        (0..self.n()).map(|i| self.y[i] - dot(self.row(i), theta)).collect()
    }

    fn ridge(&self, theta: &[T]) -> T {
        theta
            .iter()
            .zip(&self.penalized)
            .filter(|(_, &p)| p)
            .map(|(&v, _)| v * v)
            .sum::<T>()
            * self.lambda
    }

    fn smooth_loss(&self, u: T, kappa: T) -> T {
        let t = self.tau;
        if u >= kappa {
            t * u
        } else if u <= -kappa {
            (t - T::one()) * u
        } else {
            (t - T::one()) * u + (u + kappa) * (u + kappa) / (T::lit(4.0) * kappa)
        }
    }

    fn smooth_slope(&self, u: T, kappa: T) -> T {
        let t = self.tau;
        if u >= kappa {
            t
        } else if u <= -kappa {
            t - T::one()
        } else {
            (t - T::one()) + (u + kappa) / (T::lit(2.0) * kappa)
        }
    }

    fn smooth_objective(&self, theta: &[T], kappa: T) -> T {
        (0..self.n())
            .map(|i| self.smooth_loss(self.y[i] - dot(self.row(i), theta), kappa))
            .sum::<T>()
            + self.ridge(theta)
    }

    fn exact_objective(&self, theta: &[T]) -> T {
        let tau = QuantileLevel::new(self.tau).expect("validated tau");
        total_check_loss(&self.residuals(theta), tau) + self.ridge(theta)
    }

    /// Damped Newton on the smoothed objective at fixed `kappa`.
    fn newton(&self, theta: &mut [T], kappa: T, max_iter: usize) -> usize {
        let k = self.k;
        let n = self.n();
        let two = T::lit(2.0);
        let col_sq: Vec<T> = (0..k)
            .map(|j| (0..n).map(|i| self.row(i)[j].powi(2)).sum::<T>() / T::from_usize_lossy(n))
            .collect();
        let mut iters = 0;
        for _ in 0..max_iter {
            iters += 1;
            let r = self.residuals(theta);
            let mut g = vec![T::zero(); k];
            let mut h = vec![T::zero(); k * k];
            let curv = T::one() / (two * kappa);
            for i in 0..n {
                let a = self.row(i);
                let s = self.smooth_slope(r[i], kappa);
                for j in 0..k {
                    g[j] = g[j] - s * a[j];
                }
                if r[i].abs() < kappa {
                    for p in 0..k {
                        for q in 0..=p {
                            h[p * k + q] = h[p * k + q] + curv * a[p] * a[q];
                        }
                    }
                }
            }
            for j in 0..k {
                if self.penalized[j] {
                    g[j] = g[j] + two * self.lambda * theta[j];
                    h[j * k + j] = h[j * k + j] + two * self.lambda;
                }
                // Levenberg floor so directions with no residual inside the
                // quadratic band still get a bounded step.
                h[j * k + j] = h[j * k + j] + T::lit(1e-3) * curv * col_sq[j].max(T::epsilon());
            }
            let f0 = self.smooth_objective(theta, kappa);
            let gnorm = g.iter().fold(T::zero(), |m, v| m.max(v.abs()));
            if gnorm <= T::epsilon() * T::lit(1e3) * (T::one() + f0.abs()) {
                break;
            }
            let chol = Cholesky::factor(&h, k, T::epsilon() * T::lit(1e2));
            let step: Vec<T> = chol.solve(&g).into_iter().map(|v| -v).collect();
            let slope = dot(&g, &step);
            let mut alpha = T::one();
            let mut accepted = false;
            for _ in 0..60 {
                let trial: Vec<T> = theta.iter().zip(&step).map(|(&t, &s)| t + alpha * s).collect();
                if self.smooth_objective(&trial, kappa) <= f0 + T::lit(1e-4) * alpha * slope {
                    theta.copy_from_slice(&trial);
                    accepted = true;
                    break;
                }
                alpha = alpha * T::lit(0.5);
            }
            let moved = step.iter().fold(T::zero(), |m, v| m.max(v.abs())) * alpha;
            let size = theta.iter().fold(T::one(), |m, v| m.max(v.abs()));
            if !accepted || moved <= T::epsilon() * T::lit(16.0) * size {
                break;
            }
        }
        iters
    }

    /// Smallest-norm-ish subgradient of the exact objective: zero-residual
    /// rows take the KKT multipliers `s`, clamped to `[tau - 1, tau]`.
    fn stationarity(&self, theta: &[T], zero_set: &[usize], s: &[T]) -> T {
        let k = self.k;
        let r = self.residuals(theta);
        let tau = QuantileLevel::new(self.tau).expect("validated tau");
        let mut g = vec![T::zero(); k];
        let mut zi = 0;
        for i in 0..self.n() {
            let a = self.row(i);
            let slope = if zi < zero_set.len() && zero_set[zi] == i {
                let v = s[zi].max(self.tau - T::one()).min(self.tau);
                zi += 1;
                v
            } else {
                crate::loss::psi(r[i], tau)
            };
            for j in 0..k {
                g[j] = g[j] - slope * a[j];
            }
        }
        for j in 0..k {
            if self.penalized[j] {
                g[j] = g[j] + T::lit(2.0) * self.lambda * theta[j];
            }
        }
        g.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Exact solution from the rows inside the smoothing band, with its
    /// stationarity measure and whether it certifies.
    fn polish(&self, theta: &[T], kappa: T) -> (Vec<T>, T, bool) {
        let k = self.k;
        let r = self.residuals(theta);
        let mut near: Vec<usize> = (0..self.n()).filter(|&i| r[i].abs() <= kappa).collect();
        if near.len() > k {
            near.sort_by(|&a, &b| r[a].abs().partial_cmp(&r[b].abs()).unwrap_or(std::cmp::Ordering::Equal));
            near.truncate(k);
            near.sort_unstable();
        }
        let smooth_obj = self.exact_objective(theta);
        let t = self.tau;
        let slack = T::lit(1e-9).max(T::epsilon() * T::lit(1e3));
        if let Some((th, s)) = self.kkt(theta, &near) {
            let in_box = s.iter().all(|&v| v >= t - T::one() - slack && v <= t + slack);
            let obj = self.exact_objective(&th);
            if in_box && obj <= smooth_obj + T::epsilon() * T::lit(1e3) * (T::one() + smooth_obj.abs()) {
                let st = self.stationarity(&th, &near, &s);
                if st <= T::lit(1e-6) * (T::one() + obj.abs()) {
                    return (th, st, true);
                }
            }
        }
        // Multipliers of the band rows from the smoothed slope.
        let s: Vec<T> = near.iter().map(|&i| self.smooth_slope(r[i], kappa)).collect();
        let st = self.stationarity(theta, &near, &s);
        (theta.to_vec(), st, false)
    }

    /// Solves the stationarity system with residuals in `zero_set` fixed at
    /// zero, returning the parameters and the zero-row multipliers.
    fn kkt(&self, theta: &[T], zero_set: &[usize]) -> Option<(Vec<T>, Vec<T>)> {
        let k = self.k;
        let nz = zero_set.len();
        let dim = k + nz;
        let r = self.residuals(theta);
        let tau = QuantileLevel::new(self.tau).expect("validated tau");
        let mut mat = vec![T::zero(); dim * dim];
        let mut rhs = vec![T::zero(); dim];
        // Rows 0..k: 2 lambda P theta - sum_Z s_i a_i = sum_{not Z} psi_i a_i.
        let mut zi = 0;
        for i in 0..self.n() {
            let a = self.row(i);
            if zi < nz && zero_set[zi] == i {
                for j in 0..k {
                    mat[j * dim + k + zi] = -a[j];
                }
                zi += 1;
            } else {
                let p = crate::loss::psi(r[i], tau);
                for j in 0..k {
                    rhs[j] = rhs[j] + p * a[j];
                }
            }
        }
        for j in 0..k {
            if self.penalized[j] {
                mat[j * dim + j] = T::lit(2.0) * self.lambda;
            }
        }
        // Rows k..: a_i' theta = y_i.
        for (z, &i) in zero_set.iter().enumerate() {
            let a = self.row(i);
            mat[(k + z) * dim..(k + z) * dim + k].copy_from_slice(a);
            rhs[k + z] = self.y[i];
        }
        let sol = lu_solve(mat, dim, rhs, T::epsilon() * T::lit(1e2))?;
        let (th, s) = sol.split_at(k);
        Some((th.to_vec(), s.to_vec()))
    }
}

/// Minimizes `sum_t rho_tau(y_t - mu - x_{t-1}'beta) + lambda * ||beta||^2`
/// (the intercept is penalized only when `opts.penalize_intercept`).
pub fn fit_ridge_qr<T: Scalar>(
    x: &PredictorPanel<T>,
    y: &ResponseSeries<T>,
    tau: QuantileLevel<T>,
    lambda: T,
    opts: &SolverOptions<T>,
) -> Result<QuantileFit<T>> {
    fit_ridge_qr_from(x, y, tau, lambda, opts, None)
}

/// Like [`fit_ridge_qr`], started from a nearby solution (typically the fit at
/// the previous level of a penalty path). An uncertified warm solve is
/// retried from scratch.
pub fn fit_ridge_qr_from<T: Scalar>(
    x: &PredictorPanel<T>,
    y: &ResponseSeries<T>,
    tau: QuantileLevel<T>,
    lambda: T,
    opts: &SolverOptions<T>,
    start: Option<&QuantileFit<T>>,
) -> Result<QuantileFit<T>> {
    if let Some(s) = start {
        let fit = ridge_solve(x, y, tau, lambda, opts, Some(s))?;
        if fit.is_optimal() {
            return Ok(fit);
        }
    }
    ridge_solve(x, y, tau, lambda, opts, None)
}

fn ridge_solve<T: Scalar>(
    x: &PredictorPanel<T>,
    y: &ResponseSeries<T>,
    tau: QuantileLevel<T>,
    lambda: T,
    opts: &SolverOptions<T>,
    start: Option<&QuantileFit<T>>,
) -> Result<QuantileFit<T>> {
    opts.validate()?;
    check_inputs(x, y)?;
    if !(lambda >= T::zero()) || !lambda.is_finite() {
        return Err(crate::error::AlqrError::NegativeLambda(lambda.to_f64().unwrap_or(f64::NAN)));
    }
    let scales = column_scales(x, opts);
    let p = x.p_cols();
    let k = p + 1;
    let ys = &y.values()[1..];
    let n = ys.len();
    let mut rows = Vec::with_capacity(n * k);
    for t in 0..n {
        rows.push(T::one());
        rows.extend(x.row(t).iter().zip(&scales).map(|(&v, &s)| v / s));
    }
    let mut penalized = vec![true; k];
    penalized[0] = opts.penalize_intercept;
    let prob = Problem { rows: &rows, y: ys, k, tau: tau.value(), lambda, penalized };

    let q = empirical_quantile(ys, tau)?;
    let mut theta = vec![T::zero(); k];
    theta[0] = q;
    let scale = ys.iter().map(|&v| (v - q).abs()).sum::<T>() / T::from_usize_lossy(n);
    let mut iterations = 0;
    let mut polished = false;
    let mut stationarity = T::zero();

    let mut kappa = scale;
    if let Some(s) = start.filter(|s| s.coefficients.len() == p) {
        theta[0] = s.intercept;
        for j in 0..p {
            theta[j + 1] = s.coefficients[j] * scales[j];
        }
        kappa = T::lit(1e-3) * scale;
    }

    if scale > T::zero() {
        let kappa_min = T::lit(1e-6) * scale;
        loop {
            iterations += prob.newton(&mut theta, kappa, opts.max_iterations);
            // Stop as soon as the band rows give a certified exact solution.
            let (th, st, ok) = prob.polish(&theta, kappa);
            if ok || kappa <= kappa_min {
                polished = ok;
                if ok {
                    theta = th;
                }
                stationarity = st;
                break;
            }
            kappa = (kappa * T::lit(0.1)).max(kappa_min);
        }
    }

    let coefficients: Vec<T> = theta[1..].iter().zip(&scales).map(|(&b, &s)| b / s).collect();
    let intercept = theta[0];
    let residuals = lagged_residuals(x, y, intercept, &coefficients);
    let check_loss = total_check_loss(&residuals, tau);
    let mut penalty: T = coefficients.iter().zip(&scales).map(|(&b, &s)| (b * s).powi(2)).sum::<T>() * lambda;
    if opts.penalize_intercept {
        penalty = penalty + lambda * intercept * intercept;
    }
    let objective = check_loss + penalty;
    let tol = T::lit(1e-6) * (T::one() + objective.abs());
    let status = if stationarity <= tol { SolverStatus::Optimal } else { SolverStatus::MaxIterations };
    Ok(QuantileFit {
        tau,
        intercept,
        active_set: active_set(&coefficients),
        coefficients,
        residuals,
        objective,
        check_loss,
        lambda_used: lambda,
        solver_status: status,
        diagnostics: SolverDiagnostics {
            iterations,
            duality_gap: stationarity.to_f64().unwrap_or(f64::NAN),
            collinear: false,
            vertex_polished: polished,
        },
    })
}
