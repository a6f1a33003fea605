//! Bounded-variable linear programs and a Mehrotra predictor-corrector
//! primal-dual interior-point method.
//!
//! Problem form:
//!
//! ```text
//! minimize    c'x
//! subject to  A x = b,   0 <= x <= u
//! ```
//!
//! `A` has few rows (the number of regression parameters) and many columns
//! (one per observation), so each Newton step reduces to an `m x m`
//! positive-definite system `A D A' dy = r`.

use crate::linalg::{Cholesky, Matrix};
use crate::model::dot;
use crate::scalar::Scalar;

/// Standard-form LP with finite upper bounds. Every variable is bounded
/// below by zero.
#[derive(Debug, Clone)]
pub struct LpProblem<T> {
    /// Column `i` of `A`, stored as row `i` of this `n_vars x n_cons` matrix.
    pub columns: Matrix<T>,
    pub cost: Vec<T>,
    pub rhs: Vec<T>,
    pub upper: Vec<T>,
}

impl<T: Scalar> LpProblem<T> {
    pub fn new(columns: Matrix<T>, cost: Vec<T>, rhs: Vec<T>, upper: Vec<T>) -> Self {
        assert_eq!(columns.rows(), cost.len(), "one cost per variable");
        assert_eq!(columns.rows(), upper.len(), "one upper bound per variable");
        assert_eq!(columns.cols(), rhs.len(), "one right-hand side per constraint");
        Self { columns, cost, rhs, upper }
    }

    pub fn n_vars(&self) -> usize {
        self.columns.rows()
    }

    pub fn n_cons(&self) -> usize {
        self.columns.cols()
    }

    /// `A x`.
    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let m = self.n_cons();
        let mut out = vec![T::zero(); m];
        for (i, &xi) in x.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.columns.row(i)) {
                *o = *o + a * xi;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IpmOptions<T> {
    pub max_iterations: usize,
    pub gap_tol: T,
    pub step_tol: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IpmStatus {
    Converged,
    MaxIterations,
    Stalled,
}

#[derive(Debug, Clone)]
pub struct LpSolution<T> {
    pub x: Vec<T>,
    /// Multipliers of the equality constraints.
    pub y: Vec<T>,
    /// Reduced costs of the lower bounds.
    pub z: Vec<T>,
    /// Reduced costs of the upper bounds.
    pub w: Vec<T>,
    pub status: IpmStatus,
    pub iterations: usize,
    pub primal_objective: T,
    pub dual_objective: T,
}

impl<T: Scalar> LpSolution<T> {
    pub fn gap(&self) -> T {
        self.primal_objective - self.dual_objective
    }
}

/// Longest step in `[0, 1]` keeping `v + alpha * dv >= 0`.
fn max_step<T: Scalar>(v: &[T], dv: &[T]) -> T {
    v.iter().zip(dv).fold(T::one(), |a, (&vi, &di)| if di < T::zero() { a.min(-vi / di) } else { a })
}

/// Longest step keeping `s - alpha * dx >= 0`.
fn max_step_neg<T: Scalar>(s: &[T], dx: &[T]) -> T {
    s.iter().zip(dx).fold(T::one(), |a, (&si, &di)| if di > T::zero() { a.min(si / di) } else { a })
}

fn inf_norm<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

/// Solves the LP from `x0`, which must lie strictly inside the bounds
/// (entries outside are moved to the box midpoint).
pub fn solve_lp<T: Scalar>(problem: &LpProblem<T>, opts: &IpmOptions<T>, x0: &[T]) -> LpSolution<T> {
    let n = problem.n_vars();
    let m = problem.n_cons();
    let a = &problem.columns;
    let c = &problem.cost;
    let b = &problem.rhs;
    let u = &problem.upper;
    let half = T::lit(0.5);
    let eta = T::lit(0.99995);
    let chol_tol = T::epsilon() * T::lit(1e2);

    let mut x: Vec<T> = x0
        .iter()
        .zip(u)
        .map(|(&xi, &ui)| if xi > T::zero() && xi < ui { xi } else { ui * half })
        .collect();
    let mut s: Vec<T> = x.iter().zip(u).map(|(&xi, &ui)| ui - xi).collect();

    // Least-squares dual start: (A A') y = A c.
    let mut gram = vec![T::zero(); m * m];
    let mut ac = vec![T::zero(); m];
    for i in 0..n {
        let ai = a.row(i);
        for r in 0..m {
            let v = ai[r];
            ac[r] = ac[r] + v * c[i];
            for q in 0..=r {
                gram[r * m + q] = gram[r * m + q] + v * ai[q];
            }
        }
    }
    let mut y = Cholesky::factor(&gram, m, chol_tol).solve(&ac);
    let resid: Vec<T> = (0..n).map(|i| c[i] - dot(a.row(i), &y)).collect();
    let mean_abs = resid.iter().map(|r| r.abs()).sum::<T>() / T::from_usize_lossy(n.max(1));
    let c_scale = inf_norm(c).max(T::one());
    let shift = (T::lit(0.1) * mean_abs).max(T::lit(1e-3) * c_scale);
    let mut z: Vec<T> = resid.iter().map(|&r| r.max(T::zero()) + shift).collect();
    let mut w: Vec<T> = resid.iter().map(|&r| (-r).max(T::zero()) + shift).collect();

    let b_scale = inf_norm(b).max(T::one());
    let n_t = T::from_usize_lossy(2 * n);

    let mut theta = vec![T::zero(); n];
    let mut rho = vec![T::zero(); n];
    let mut dx = vec![T::zero(); n];
    let mut dz = vec![T::zero(); n];
    let mut dw = vec![T::zero(); n];
    let mut rxz = vec![T::zero(); n];
    let mut rsw = vec![T::zero(); n];
    let mut rd = vec![T::zero(); n];
    let mut normal = vec![T::zero(); m * m];

    let mut status = IpmStatus::MaxIterations;
    let mut iterations = 0;

    let objectives = |x: &[T], y: &[T], w: &[T]| {
        let p = dot(c, x);
        let d = dot(b, y) - dot(u, w);
        (p, d)
    };

    while iterations < opts.max_iterations {
        // Residuals.
        let ax = problem.apply(&x);
        let rp: Vec<T> = b.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect();
        for i in 0..n {
            rd[i] = c[i] - dot(a.row(i), &y) - z[i] + w[i];
        }
        let gap = dot(&x, &z) + dot(&s, &w);
        let (pobj, _) = objectives(&x, &y, &w);
        if gap <= opts.gap_tol * pobj.abs().max(T::one())
            && inf_norm(&rp) <= opts.gap_tol * b_scale
            && inf_norm(&rd) <= opts.gap_tol * c_scale
        {
            status = IpmStatus::Converged;
            break;
        }
        iterations += 1;
        let mu = gap / n_t;

        // Normal matrix A Theta A'.
        normal.iter_mut().for_each(|v| *v = T::zero());
        for i in 0..n {
            theta[i] = T::one() / (z[i] / x[i] + w[i] / s[i]);
            let ai = a.row(i);
            let t = theta[i];
            for r in 0..m {
                let tr = t * ai[r];
                let row = &mut normal[r * m..r * m + r + 1];
                for (q, nv) in row.iter_mut().enumerate() {
                    *nv = *nv + tr * ai[q];
                }
            }
        }
        let chol = Cholesky::factor(&normal, m, chol_tol);

        // Shared solve for a given complementarity right-hand side.
        let mut direction = |rxz: &[T], rsw: &[T], dx: &mut [T], dz: &mut [T], dw: &mut [T]| -> Vec<T> {
            for i in 0..n {
                rho[i] = rd[i] - rxz[i] / x[i] + rsw[i] / s[i];
            }
            let mut rhs = rp.clone();
            for i in 0..n {
                let f = theta[i] * rho[i];
                for (r, &av) in rhs.iter_mut().zip(a.row(i)) {
                    *r = *r + av * f;
                }
            }
            let dy = chol.solve(&rhs);
            for i in 0..n {
                dx[i] = theta[i] * (dot(a.row(i), &dy) - rho[i]);
                dz[i] = (rxz[i] - z[i] * dx[i]) / x[i];
                dw[i] = (rsw[i] + w[i] * dx[i]) / s[i];
            }
            dy
        };

        // Affine-scaling predictor.
        for i in 0..n {
            rxz[i] = -x[i] * z[i];
            rsw[i] = -s[i] * w[i];
        }
        let _ = direction(&rxz, &rsw, &mut dx, &mut dz, &mut dw);
        let ap = max_step(&x, &dx).min(max_step_neg(&s, &dx));
        let ad = max_step(&z, &dz).min(max_step(&w, &dw));
        let mut mu_aff = T::zero();
        for i in 0..n {
            mu_aff = mu_aff
                + (x[i] + ap * dx[i]) * (z[i] + ad * dz[i])
                + (s[i] - ap * dx[i]) * (w[i] + ad * dw[i]);
        }
        mu_aff = mu_aff / n_t;
        let sigma = (mu_aff / mu).powi(3).min(T::one());

        // Corrector with second-order terms.
        for i in 0..n {
            rxz[i] = sigma * mu - x[i] * z[i] - dx[i] * dz[i];
            rsw[i] = sigma * mu - s[i] * w[i] + dx[i] * dw[i];
        }
        let dy = direction(&rxz, &rsw, &mut dx, &mut dz, &mut dw);
        let ap = (eta * max_step(&x, &dx).min(max_step_neg(&s, &dx))).min(T::one());
        let ad = (eta * max_step(&z, &dz).min(max_step(&w, &dw))).min(T::one());

        for i in 0..n {
            x[i] = x[i] + ap * dx[i];
            s[i] = s[i] - ap * dx[i];
            z[i] = z[i] + ad * dz[i];
            w[i] = w[i] + ad * dw[i];
        }
        for (yr, d) in y.iter_mut().zip(&dy) {
            *yr = *yr + ad * *d;
        }

        let moved = (ap * inf_norm(&dx)).max(ad * inf_norm(&dy));
        if moved <= opts.step_tol {
            status = IpmStatus::Stalled;
            break;
        }
    }

    let (primal_objective, dual_objective) = objectives(&x, &y, &w);
    LpSolution { x, y, z, w, status, iterations, primal_objective, dual_objective }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> IpmOptions<f64> {
        IpmOptions { max_iterations: 100, gap_tol: 1e-10, step_tol: 1e-14 }
    }

    #[test]
    fn knapsack_relaxation() {
        // min -3x1 - 2x2 - x3 s.t. x1 + x2 + x3 = 1.5, 0 <= x <= 1.
        // Optimum x = (1, 0.5, 0), value -4.
        let cols = Matrix::from_rows(&[vec![1.0], vec![1.0], vec![1.0]]);
        let lp = LpProblem::new(cols, vec![-3.0, -2.0, -1.0], vec![1.5], vec![1.0; 3]);
        let sol = solve_lp(&lp, &opts(), &[0.5, 0.5, 0.5]);
        assert_eq!(sol.status, IpmStatus::Converged);
        assert!((sol.primal_objective + 4.0).abs() < 1e-8);
        assert!(sol.gap().abs() < 1e-8);
        assert!((sol.x[0] - 1.0).abs() < 1e-6 && (sol.x[1] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn two_constraints() {
        // min x1 + 2x2 + 3x3 + 4x4 s.t. x1 + x2 = 1, x3 + x4 = 1, 0 <= x <= 2.
        let cols = Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0]]);
        let lp = LpProblem::new(cols, vec![1.0, 2.0, 3.0, 4.0], vec![1.0, 1.0], vec![2.0; 4]);
        let sol = solve_lp(&lp, &opts(), &[0.5; 4]);
        assert_eq!(sol.status, IpmStatus::Converged);
        assert!((sol.primal_objective - 4.0).abs() < 1e-8);
        assert!(sol.dual_objective <= sol.primal_objective + 1e-12);
    }
}
