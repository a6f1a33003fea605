//! Bounded dual simplex for weighted-L1 quantile regression.
//!
//! Works on the dual
//!
//! ```text
//! max  y'd   s.t.  X'd - s = 0,  tau - 1 <= d_i <= tau,  -lambda_c <= s_c <= lambda_c
//! ```
//!
//! with one row of `X` per observation (intercept first). Penalty levels only
//! enter the bounds of the slacks `s`, so an optimal basis for one level stays
//! dual feasible for any other and the solve can be warm-started along a
//! penalty path. The primal coefficients are minus the constraint prices.

use crate::linalg::Matrix;
use crate::model::dot;
use crate::scalar::Scalar;

/// A solve did not finish (iteration cap or numerical breakdown).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct SimplexFailure;

pub(crate) struct DualSimplex<T> {
    /// `n x k` design, intercept in column 0.
    x: Matrix<T>,
    y: Vec<T>,
    d_lo: T,
    d_hi: T,
    /// Slack half-widths per column.
    lam: Vec<T>,
    n: usize,
    k: usize,
    /// Basic variable per constraint row; indices `>= n` are slacks.
    basis: Vec<usize>,
    /// Position in `basis`, or `usize::MAX` when nonbasic.
    pos: Vec<usize>,
    at_upper: Vec<bool>,
    value: Vec<T>,
    binv: Vec<T>,
    prices: Vec<T>,
    reduced: Vec<T>,
    pub iterations: usize,
}

impl<T: Scalar> DualSimplex<T> {
    /// Cold start: every slack basic, all coefficients zero.
    pub fn new(x: Matrix<T>, y: Vec<T>, tau: T, lam: Vec<T>) -> Self {
        let (n, k) = (x.rows(), x.cols());
        let mut s = Self {
            x,
            y,
            d_lo: tau - T::one(),
            d_hi: tau,
            lam,
            n,
            k,
            basis: (n..n + k).collect(),
            pos: vec![usize::MAX; n + k],
            at_upper: vec![false; n + k],
            value: vec![T::zero(); n + k],
            binv: vec![T::zero(); k * k],
            prices: vec![T::zero(); k],
            reduced: vec![T::zero(); n + k],
            iterations: 0,
        };
        for (r, &b) in s.basis.iter().enumerate() {
            s.pos[b] = r;
        }
        for i in 0..n {
            s.at_upper[i] = s.y[i] > T::zero();
        }
        s
    }

    pub fn n_cols(&self) -> usize {
        self.k
    }

    /// Replaces the slack half-widths; the basis is kept.
    pub fn set_bounds(&mut self, lam: &[T]) {
        self.lam.copy_from_slice(lam);
    }

    fn bounds(&self, j: usize) -> (T, T) {
        if j < self.n {
            (self.d_lo, self.d_hi)
        } else {
            let l = self.lam[j - self.n];
            (-l, l)
        }
    }

    /// `A_j' v` for constraint-space vector `v`.
    fn col_dot(&self, j: usize, v: &[T]) -> T {
        if j < self.n {
            dot(self.x.row(j), v)
        } else {
            -v[j - self.n]
        }
    }

    fn invert_basis(&mut self) -> Result<(), SimplexFailure> {
        let k = self.k;
        // Basis matrix with column r = A_{basis[r]}, stored row-major.
        let mut a = vec![T::zero(); k * k];
        for (r, &j) in self.basis.iter().enumerate() {
            if j < self.n {
                for (c, &v) in self.x.row(j).iter().enumerate() {
                    a[c * k + r] = v;
                }
            } else {
                a[(j - self.n) * k + r] = -T::one();
            }
        }
        let mut inv = vec![T::zero(); k * k];
        for i in 0..k {
            inv[i * k + i] = T::one();
        }
        let scale = a.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        for col in 0..k {
            let piv = (col..k)
                .max_by(|&p, &q| a[p * k + col].abs().partial_cmp(&a[q * k + col].abs()).unwrap_or(std::cmp::Ordering::Equal))
                .unwrap();
            if !(a[piv * k + col].abs() > T::epsilon() * T::lit(1e3) * scale) {
                return Err(SimplexFailure);
            }
            if piv != col {
                for j in 0..k {
                    a.swap(col * k + j, piv * k + j);
                    inv.swap(col * k + j, piv * k + j);
                }
            }
            let d = a[col * k + col];
            for j in 0..k {
                a[col * k + j] = a[col * k + j] / d;
                inv[col * k + j] = inv[col * k + j] / d;
            }
            for r in 0..k {
                if r != col {
                    let f = a[r * k + col];
                    if f != T::zero() {
                        for j in 0..k {
                            a[r * k + j] = a[r * k + j] - f * a[col * k + j];
                            inv[r * k + j] = inv[r * k + j] - f * inv[col * k + j];
                        }
                    }
                }
            }
        }
        self.binv = inv;
        Ok(())
    }

    /// Recomputes prices, reduced costs, and primal values from the basis;
    /// nonbasic variables sit at the bound matching their reduced-cost sign.
    fn refresh(&mut self) {
        let (n, k) = (self.n, self.k);
        // prices' = c_B' B^{-1}; c is -y on observations and 0 on slacks.
        let mut pr = vec![T::zero(); k];
        for (r, &j) in self.basis.iter().enumerate() {
            if j < n {
                let c = -self.y[j];
                for (p, &b) in pr.iter_mut().zip(&self.binv[r * k..(r + 1) * k]) {
                    *p = *p + c * b;
                }
            }
        }
        self.prices = pr;
        for j in 0..n + k {
            if self.pos[j] != usize::MAX {
                self.reduced[j] = T::zero();
                continue;
            }
            let c = if j < n { -self.y[j] } else { T::zero() };
            let rc = c - self.col_dot(j, &self.prices);
            self.reduced[j] = rc;
            if rc > T::zero() {
                self.at_upper[j] = false;
            } else if rc < T::zero() {
                self.at_upper[j] = true;
            }
            let (lo, hi) = self.bounds(j);
            self.value[j] = if self.at_upper[j] { hi } else { lo };
        }
        // x_B = -B^{-1} sum_N A_j x_j
        let mut rhs = vec![T::zero(); k];
        for i in 0..n {
            if self.pos[i] == usize::MAX {
                let v = self.value[i];
                if v != T::zero() {
                    for (r, &xv) in rhs.iter_mut().zip(self.x.row(i)) {
                        *r = *r + v * xv;
                    }
                }
            }
        }
        for c in 0..k {
            let j = n + c;
            if self.pos[j] == usize::MAX {
                rhs[c] = rhs[c] - self.value[j];
            }
        }
        for r in 0..k {
            let v = dot(&self.binv[r * k..(r + 1) * k], &rhs);
            self.value[self.basis[r]] = -v;
        }
    }

    /// Runs dual simplex pivots until primal feasibility.
    pub fn solve(&mut self, max_iterations: usize) -> Result<(), SimplexFailure> {
        let (n, k) = (self.n, self.k);
        self.invert_basis()?;
        self.refresh();
        let ytol = self.y.iter().fold(T::one(), |m, v| m.max(v.abs()));
        let mut cands: Vec<(T, usize, T)> = Vec::with_capacity(n);
        let mut stall = 0usize;
        for _ in 0..max_iterations {
            // Leaving row: largest scaled bound violation.
            let mut leave: Option<(usize, T, T)> = None;
            for r in 0..k {
                let j = self.basis[r];
                let (lo, hi) = self.bounds(j);
                let v = self.value[j];
                let tol = T::lit(1e-11).max(T::epsilon() * T::lit(64.0)) * (T::one() + hi.abs());
                let delta = if v < lo - tol {
                    v - lo
                } else if v > hi + tol {
                    v - hi
                } else {
                    continue;
                };
                let score = delta.abs() / (T::one() + hi.abs());
                if leave.map_or(true, |(_, _, s)| score > s) {
                    leave = Some((r, delta, score));
                }
            }
            let Some((r, delta, _)) = leave else {
                return Ok(());
            };
            self.iterations += 1;
            let sigma = if delta < T::zero() { -T::one() } else { T::one() };
            let rho: Vec<T> = self.binv[r * k..(r + 1) * k].to_vec();

            // Ratio test with bound flipping.
            cands.clear();
            let mut amax = T::zero();
            for j in 0..n + k {
                if self.pos[j] != usize::MAX {
                    continue;
                }
                let (lo, hi) = self.bounds(j);
                if hi <= lo {
                    continue;
                }
                let a = self.col_dot(j, &rho);
                amax = amax.max(a.abs());
                let sa = sigma * a;
                let eligible = if self.at_upper[j] { sa < T::zero() } else { sa > T::zero() };
                if eligible {
                    let t = (self.reduced[j] / sa).max(T::zero());
                    cands.push((t, j, a));
                }
            }
            let piv_tol = T::lit(1e-9) * amax.max(T::one() / ytol);
            cands.retain(|c| c.2.abs() > piv_tol);
            if cands.is_empty() {
                return Err(SimplexFailure);
            }
            cands.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
            let mut slope = delta.abs();
            let mut chosen = cands.len() - 1;
            for (idx, &(_, j, a)) in cands.iter().enumerate() {
                let (lo, hi) = self.bounds(j);
                slope = slope - a.abs() * (hi - lo);
                if slope <= T::zero() {
                    chosen = idx;
                    break;
                }
            }
            // Among candidates tied with the chosen ratio, take the largest pivot.
            let t_star = cands[chosen].0;
            let tie = T::lit(1e-12) * (T::one() + t_star);
            let mut q_idx = chosen;
            for idx in (0..cands.len()).rev() {
                if (cands[idx].0 - t_star).abs() <= tie && cands[idx].2.abs() > cands[q_idx].2.abs() && idx <= chosen {
                    q_idx = idx;
                }
            }
            if t_star <= tie {
                stall += 1;
            } else {
                stall = 0;
            }
            if stall > 50 * k + 100 {
                return Err(SimplexFailure);
            }
            let q = cands[q_idx].1;
            let p = self.basis[r];
            self.pos[p] = usize::MAX;
            self.at_upper[p] = sigma > T::zero();
            self.basis[r] = q;
            self.pos[q] = r;
            self.invert_basis()?;
            // Candidates passed by the dual step now have reduced costs of the
            // opposite sign; refresh moves them to their other bound.
            self.refresh();
        }
        Err(SimplexFailure)
    }

    /// Primal coefficients (intercept first).
    pub fn theta(&self) -> Vec<T> {
        self.prices.iter().map(|&p| -p).collect()
    }

    /// Dual objective `y'd` at the current basic solution.
    pub fn dual_value(&self) -> T {
        (0..self.n).fold(T::zero(), |acc, i| acc + self.y[i] * self.value[i])
    }

    pub fn design(&self) -> &Matrix<T> {
        &self.x
    }
}
