//! Domain types shared by the solver, the estimators and the evaluators.

use serde::{Deserialize, Serialize};

use crate::error::{AlqrError, Result};
use crate::scalar::Scalar;

/// Quantile level `tau`, strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QuantileLevel<T = f64>(T);

impl<T: Scalar> QuantileLevel<T> {
    pub fn new(tau: T) -> Result<Self> {
        if tau.is_finite() && tau > T::zero() && tau < T::one() {
            Ok(Self(tau))
        } else {
            Err(AlqrError::InvalidQuantile(tau.to_f64().unwrap_or(f64::NAN)))
        }
    }

    #[inline]
    pub fn value(self) -> T {
        self.0
    }
}

/// Time-ordered design matrix. Row `t` is the predictor vector used to
/// forecast the response at `t + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorPanel<T = f64> {
    values: Vec<T>,
    n_rows: usize,
    p_cols: usize,
    col_names: Vec<String>,
    time_labels: Option<Vec<String>>,
}

impl<T: Scalar> PredictorPanel<T> {
    /// Builds a panel from row-major values.
    pub fn new(
        values: Vec<T>,
        n_rows: usize,
        col_names: Vec<String>,
        time_labels: Option<Vec<String>>,
    ) -> Result<Self> {
        let p_cols = col_names.len();
        if p_cols == 0 {
            return Err(AlqrError::InvalidPanel("panel needs at least one column".into()));
        }
        Self::build(values, n_rows, col_names, time_labels)
    }

    /// Panel with zero predictor columns; fits against it estimate only the intercept.
    pub fn intercept_only(n_rows: usize) -> Result<Self> {
        Self::build(Vec::new(), n_rows, Vec::new(), None)
    }

    fn build(
        values: Vec<T>,
        n_rows: usize,
        col_names: Vec<String>,
        time_labels: Option<Vec<String>>,
    ) -> Result<Self> {
        let p_cols = col_names.len();
        if n_rows < 2 {
            return Err(AlqrError::InvalidPanel(format!("need at least 2 rows, got {n_rows}")));
        }
        if values.len() != n_rows * p_cols {
            return Err(AlqrError::DimensionMismatch(format!(
                "{} values for a {}x{} panel",
                values.len(),
                n_rows,
                p_cols
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(AlqrError::NonFinite(format!(
                "panel row {}, column {}",
                i / p_cols,
                col_names[i % p_cols]
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for name in &col_names {
            if !seen.insert(name.as_str()) {
                return Err(AlqrError::InvalidPanel(format!("duplicate column name {name:?}")));
            }
        }
        if let Some(labels) = &time_labels {
            if labels.len() != n_rows {
                return Err(AlqrError::DimensionMismatch(format!(
                    "{} time labels for {} rows",
                    labels.len(),
                    n_rows
                )));
            }
        }
        Ok(Self { values, n_rows, p_cols, col_names, time_labels })
    }

    /// Builds a panel from columns, naming them `x1..xp` when `names` is `None`.
    pub fn from_columns(columns: &[Vec<T>], names: Option<Vec<String>>) -> Result<Self> {
        let p = columns.len();
        let n = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n) {
            return Err(AlqrError::DimensionMismatch("columns of unequal length".into()));
        }
        let names = names.unwrap_or_else(|| (1..=p).map(|j| format!("x{j}")).collect());
        let mut values = Vec::with_capacity(n * p);
        for t in 0..n {
            values.extend(columns.iter().map(|c| c[t]));
        }
        Self::new(values, n, names, None)
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn p_cols(&self) -> usize {
        self.p_cols
    }

    #[inline]
    pub fn row(&self, t: usize) -> &[T] {
        &self.values[t * self.p_cols..(t + 1) * self.p_cols]
    }

    #[inline]
    pub fn get(&self, t: usize, j: usize) -> T {
        self.values[t * self.p_cols + j]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.n_rows).map(|t| self.get(t, j)).collect()
    }

    pub fn col_names(&self) -> &[String] {
        &self.col_names
    }

    pub fn time_labels(&self) -> Option<&[String]> {
        self.time_labels.as_deref()
    }

    /// Contiguous block of rows `[start, end)`.
    pub fn slice_rows(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.n_rows {
            return Err(AlqrError::DimensionMismatch(format!(
                "row range {start}..{end} outside panel of {} rows",
                self.n_rows
            )));
        }
        let values = self.values[start * self.p_cols..end * self.p_cols].to_vec();
        let labels = self.time_labels.as_ref().map(|l| l[start..end].to_vec());
        Self::build(values, end - start, self.col_names.clone(), labels)
    }

    /// Panel restricted to the given columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        if let Some(&bad) = cols.iter().find(|&&j| j >= self.p_cols) {
            return Err(AlqrError::DimensionMismatch(format!("column {bad} out of range")));
        }
        let mut values = Vec::with_capacity(self.n_rows * cols.len());
        for t in 0..self.n_rows {
            let row = self.row(t);
            values.extend(cols.iter().map(|&j| row[j]));
        }
        let names = cols.iter().map(|&j| self.col_names[j].clone()).collect();
        Self::build(values, self.n_rows, names, self.time_labels.clone())
    }

    /// Every entry multiplied by `c`.
    pub fn scaled(&self, c: T) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = *v * c);
        out
    }
}

/// Response series aligned with a [`PredictorPanel`]: `values[t]` is
/// predicted by panel row `t - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ResponseSeries<T = f64> {
    values: Vec<T>,
}

impl<T: Scalar> ResponseSeries<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(AlqrError::NonFinite(format!("response entry {i}")));
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

    /// Responses that enter a fit against a panel of the same length:
    /// entries `1..n`.
    pub fn usable(&self) -> &[T] {
        self.values.get(1..).unwrap_or(&[])
    }

    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.values.len() {
            return Err(AlqrError::DimensionMismatch(format!(
                "range {start}..{end} outside series of length {}",
                self.values.len()
            )));
        }
        Ok(Self { values: self.values[start..end].to_vec() })
    }

    pub fn scaled(&self, c: T) -> Self {
        Self { values: self.values.iter().map(|&v| v * c).collect() }
    }
}

/// Termination state of a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolverStatus {
    Optimal,
    MaxIterations,
    Infeasible,
}

/// Per-fit numerical diagnostics.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub iterations: usize,
    /// Primal objective minus the dual bound (LP fits) or the largest
    /// subgradient coordinate (ridge fits).
    pub duality_gap: f64,
    /// The design has numerically deficient column rank.
    pub collinear: bool,
    /// The interior solution was snapped to an exact vertex.
    pub vertex_polished: bool,
}

/// Result of a (penalized) quantile regression fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileFit<T = f64> {
    pub tau: QuantileLevel<T>,
    pub intercept: T,
    pub coefficients: Vec<T>,
    pub residuals: Vec<T>,
    /// Penalized objective at the solution.
    pub objective: T,
    /// Unpenalized check loss at the solution.
    pub check_loss: T,
    pub active_set: Vec<usize>,
    pub lambda_used: T,
    pub solver_status: SolverStatus,
    pub diagnostics: SolverDiagnostics,
}

impl<T: Scalar> QuantileFit<T> {
    pub fn predict(&self, x: &[T]) -> Result<T> {
        if x.len() != self.coefficients.len() {
            return Err(AlqrError::DimensionMismatch(format!(
                "predictor vector of length {} for {} coefficients",
                x.len(),
                self.coefficients.len()
            )));
        }
        Ok(self.intercept + dot(x, &self.coefficients))
    }

    pub fn is_optimal(&self) -> bool {
        self.solver_status == SolverStatus::Optimal
    }
}

#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Relative cutoff below which a coefficient counts as zero:
/// `1e-6 * max(1, max_j |beta_j|)`.
pub fn zero_threshold<T: Scalar>(coefficients: &[T]) -> T {
    let inf_norm = coefficients.iter().fold(T::zero(), |m, c| m.max(c.abs()));
    T::lit(1e-6) * inf_norm.max(T::one())
}

/// Indices of coefficients above [`zero_threshold`].
pub fn active_set<T: Scalar>(coefficients: &[T]) -> Vec<usize> {
    let cut = zero_threshold(coefficients);
    coefficients
        .iter()
        .enumerate()
        .filter(|(_, c)| c.abs() > cut)
        .map(|(j, _)| j)
        .collect()
}

/// Residuals `y_t - intercept - x_{t-1}' coefficients` over the usable rows.
pub fn lagged_residuals<T: Scalar>(
    x: &PredictorPanel<T>,
    y: &ResponseSeries<T>,
    intercept: T,
    coefficients: &[T],
) -> Vec<T> {
    let ys = y.values();
    (1..ys.len()).map(|t| ys[t] - intercept - dot(x.row(t - 1), coefficients)).collect()
}

/// Adaptive weight of a single coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Weight<T = f64> {
    /// Penalty on the coefficient is `lambda / w`.
    Value(T),
    /// Coefficient is held at exactly zero.
    Excluded,
}

/// Weighted L1 penalty `sum_j (lambda / w_j) |beta_j|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec<T = f64> {
    lambda: T,
    weights: Vec<Weight<T>>,
    gamma: T,
}

impl<T: Scalar> PenaltySpec<T> {
    pub fn new(lambda: T, weights: Vec<Weight<T>>, gamma: T) -> Result<Self> {
        if !(lambda >= T::zero()) || !lambda.is_finite() {
            return Err(AlqrError::NegativeLambda(lambda.to_f64().unwrap_or(f64::NAN)));
        }
        if !(gamma > T::zero()) {
            return Err(AlqrError::InvalidParameter("gamma must be positive".into()));
        }
        for (j, w) in weights.iter().enumerate() {
            if let Weight::Value(v) = w {
                if !(v.is_finite() && *v > T::zero()) {
                    return Err(AlqrError::InvalidWeights(format!(
                        "weight {j} must be finite and positive"
                    )));
                }
            }
        }
        Ok(Self { lambda, weights, gamma })
    }

    /// Plain lasso: every weight equal to one.
    pub fn lasso(lambda: T, p: usize) -> Result<Self> {
        Self::new(lambda, vec![Weight::Value(T::one()); p], T::one())
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn weights(&self) -> &[Weight<T>] {
        &self.weights
    }

    pub fn with_lambda(&self, lambda: T) -> Result<Self> {
        Self::new(lambda, self.weights.clone(), self.gamma)
    }

    /// Per-coefficient penalty `lambda / w_j`, `None` for excluded entries.
    pub fn coefficient_penalties(&self) -> Vec<Option<T>> {
        self.weights
            .iter()
            .map(|w| match w {
                Weight::Value(v) => Some(self.lambda / *v),
                Weight::Excluded => None,
            })
            .collect()
    }

    pub fn excluded(&self) -> Vec<usize> {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, w)| matches!(w, Weight::Excluded))
            .map(|(j, _)| j)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_level_rejects_boundaries() {
        assert!(QuantileLevel::new(0.0).is_err());
        assert!(QuantileLevel::new(1.0).is_err());
        assert!(QuantileLevel::new(f64::NAN).is_err());
        assert_eq!(QuantileLevel::new(0.3).unwrap().value(), 0.3);
    }

    #[test]
    fn panel_validation() {
        let names = vec!["a".to_string(), "a".to_string()];
        assert!(PredictorPanel::new(vec![0.0; 4], 2, names, None).is_err());
        let names = vec!["a".to_string(), "b".to_string()];
        assert!(PredictorPanel::new(vec![0.0, 1.0, f64::NAN, 2.0], 2, names.clone(), None).is_err());
        assert!(PredictorPanel::new(vec![0.0; 2], 1, names.clone(), None).is_err());
        let p = PredictorPanel::new(vec![1.0, 2.0, 3.0, 4.0], 2, names, None).unwrap();
        assert_eq!(p.row(1), &[3.0, 4.0]);
        assert_eq!(p.column(0), vec![1.0, 3.0]);
    }

    #[test]
    fn threshold_is_relative() {
        assert_eq!(active_set(&[0.5e-6, 2.0e-6]), vec![1]);
        assert_eq!(active_set(&[1000.0, 1e-4, 2e-3]), vec![0, 2]);
    }

    #[test]
    fn penalty_spec_rejects_negative_lambda() {
        assert!(matches!(PenaltySpec::lasso(-1.0, 2), Err(AlqrError::NegativeLambda(_))));
        let spec = PenaltySpec::new(2.0, vec![Weight::Value(0.5), Weight::Excluded], 1.0).unwrap();
        assert_eq!(spec.coefficient_penalties(), vec![Some(4.0), None]);
        assert!(PenaltySpec::new(1.0, vec![Weight::Value(0.0)], 1.0).is_err());
    }
}
