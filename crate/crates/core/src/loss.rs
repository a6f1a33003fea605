//! Check (pinball) loss and the sample quantile it induces.

use crate::error::{AlqrError, Result};
use crate::model::QuantileLevel;
use crate::scalar::Scalar;

/// `rho_tau(u) = u * (tau - 1{u < 0})`.
#[inline]
pub fn check_loss<T: Scalar>(u: T, tau: QuantileLevel<T>) -> T {
    u * psi(u, tau)
}

/// `psi_tau(u) = tau - 1{u < 0}`, the right-continuous subgradient selection.
#[inline]
pub fn psi<T: Scalar>(u: T, tau: QuantileLevel<T>) -> T {
    if u < T::zero() {
        tau.value() - T::one()
    } else {
        tau.value()
    }
}

/// Summed check loss over a residual vector.
pub fn total_check_loss<T: Scalar>(residuals: &[T], tau: QuantileLevel<T>) -> T {
    residuals.iter().map(|&u| check_loss(u, tau)).sum()
}

/// Lower order statistic `y_(ceil(n * tau))`, a minimizer of
/// `sum_t rho_tau(y_t - c)` over `c`.
pub fn empirical_quantile<T: Scalar>(y: &[T], tau: QuantileLevel<T>) -> Result<T> {
    if y.is_empty() {
        return Err(AlqrError::EmptyInput("empirical quantile of an empty sample".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(AlqrError::NonFinite("empirical quantile input".into()));
    }
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    Ok(sorted[order_index(y.len(), tau)])
}

/// Zero-based index of `ceil(n * tau)`. The product is rounded to 12
/// significant digits first so that `4 * 0.5` style products land exactly.
fn order_index<T: Scalar>(n: usize, tau: QuantileLevel<T>) -> usize {
    let prod = n as f64 * tau.value().to_f64().expect("finite tau");
    let snapped = (prod * 1e12).round() / 1e12;
    let k = snapped.ceil() as usize;
    k.clamp(1, n) - 1
}
