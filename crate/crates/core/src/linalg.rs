//! Small dense linear algebra: row-major matrices, Cholesky with pivot
//! regularization, partial-pivoting LU and one-sided Jacobi singular values.
//!
//! Everything here operates on systems whose order is the number of model
//! parameters (a few dozen at most).

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T = f64> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    /// Panics when `data.len() != rows * cols`.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self { rows: rows.len(), cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    /// `self * v`.
    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows).map(|i| crate::model::dot(self.row(i), v)).collect()
    }

    /// Writes `self * v` into `out`.
    pub fn mul_vec_into(&self, v: &[T], out: &mut [T]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = crate::model::dot(self.row(i), v);
        }
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive semidefinite
/// matrix. Pivots that collapse below `rel_tol * max_diag` are replaced by a
/// huge value, which zeroes the corresponding solution component instead of
/// failing.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    n: usize,
    l: Vec<T>,
    pub regularized: usize,
}

impl<T: Scalar> Cholesky<T> {
    /// Factors the symmetric matrix whose lower triangle is stored row-major in `a`.
    pub fn factor(a: &[T], n: usize, rel_tol: T) -> Self {
        let mut l = a.to_vec();
        let max_diag = (0..n).fold(T::zero(), |m, i| m.max(a[i * n + i].abs()));
        let floor = rel_tol * max_diag.max(T::min_positive_value());
        let huge = T::max_value().sqrt().sqrt();
        let mut regularized = 0;
        for j in 0..n {
            let mut d = l[j * n + j];
            for k in 0..j {
                d = d - l[j * n + k] * l[j * n + k];
            }
            let pivot = if d <= floor {
                regularized += 1;
                huge
            } else {
                d.sqrt()
            };
            l[j * n + j] = pivot;
            for i in j + 1..n {
                let mut s = l[i * n + j];
                for k in 0..j {
                    s = s - l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / pivot;
            }
        }
        Self { n, l, regularized }
    }

    /// Row-major factor; only the lower triangle is meaningful.
    pub fn lower(&self) -> &[T] {
        &self.l
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut x = b.to_vec();
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s = s - self.l[i * n + k] * x[k];
            }
            x[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s = s - self.l[k * n + i] * x[k];
            }
            x[i] = s / self.l[i * n + i];
        }
        x
    }
}

/// Solves `a x = b` for square `a` (row-major) by LU with partial pivoting.
/// Returns `None` when a pivot is below `rel_tol` times the largest entry.
pub fn lu_solve<T: Scalar>(mut a: Vec<T>, n: usize, mut b: Vec<T>, rel_tol: T) -> Option<Vec<T>> {
    let scale = a.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    if scale == T::zero() {
        return None;
    }
    for col in 0..n {
        let (piv, pmax) = (col..n)
            .map(|r| (r, a[r * n + col].abs()))
            .fold((col, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pmax <= rel_tol * scale {
            return None;
        }
        if piv != col {
            for j in 0..n {
                a.swap(col * n + j, piv * n + j);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] / d;
            if f != T::zero() {
                for j in col..n {
                    a[r * n + j] = a[r * n + j] - f * a[col * n + j];
                }
                b[r] = b[r] - f * b[col];
            }
        }
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for j in i + 1..n {
            s = s - a[i * n + j] * x[j];
        }
        x[i] = s / a[i * n + i];
    }
    Some(x)
}

/// Singular values of an `m x n` row-major matrix (one-sided Jacobi on the
/// columns), sorted in decreasing order.
pub fn singular_values<T: Scalar>(a: &[T], m: usize, n: usize) -> Vec<T> {
    // Column-major working copy.
    let mut cols: Vec<Vec<T>> = (0..n).map(|j| (0..m).map(|i| a[i * n + j]).collect()).collect();
    let eps = T::epsilon();
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (T::zero(), T::zero(), T::zero());
                for i in 0..m {
                    alpha = alpha + cols[p][i] * cols[p][i];
                    beta = beta + cols[q][i] * cols[q][i];
                    gamma = gamma + cols[p][i] * cols[q][i];
                }
                if gamma.abs() <= eps * (alpha * beta).sqrt() || gamma == T::zero() {
                    continue;
                }
                rotated = true;
                let two = T::lit(2.0);
                let zeta = (beta - alpha) / (two * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let xp = cols[p][i];
                    let xq = cols[q][i];
                    cols[p][i] = c * xp - s * xq;
                    cols[q][i] = s * xp + c * xq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<T> = cols.iter().map(|c| c.iter().map(|&v| v * v).sum::<T>().sqrt()).collect();
    sv.sort_by(|a, b| b.partial_cmp(a).expect("finite singular values"));
    sv
}

/// Numerical rank deficiency: smallest singular value at or below
/// `rel_tol * sigma_max`.
pub fn is_rank_deficient<T: Scalar>(a: &[T], m: usize, n: usize, rel_tol: T) -> bool {
    if n == 0 {
        return false;
    }
    if m < n {
        return true;
    }
    let sv = singular_values(a, m, n);
    sv[n - 1] <= rel_tol * sv[0]
}
