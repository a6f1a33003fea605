//! Solver checks against brute-force oracles.
//!
//! Two independent oracles are used:
//! * grid search over the parameter box (values computed offline at
//!   resolution 1e-3 and frozen below);
//! * exhaustive vertex enumeration: an optimum of a piecewise-linear convex
//!   objective in `k` parameters interpolates `k` of the (pseudo-)observations,
//!   so minimizing over every `k`-subset of rows is exact.

mod common;

use alqr::{
    fit_penalized_qr, fit_qr, fit_ridge_qr, lambda_max, PenaltySpec, PredictorPanel, ResponseSeries, SolverOptions,
    SolverStatus, Weight,
};
use common::{q, rho};

const XA: [f64; 10] = [0.0, 0.3, -0.27, -0.89, -0.45, -0.99, 0.06, 1.34, -0.49, -0.62];
const YA: [f64; 10] = [0.84, 0.75, 1.02, -0.56, -0.86, 0.31, -1.93, 0.27, 1.18, -1.14];
const XB: [[f64; 2]; 12] = [
    [-1.84, -0.24],
    [-1.27, 0.27],
    [0.16, -0.19],
    [-2.52, -0.54],
    [-0.05, 0.11],
    [-1.53, -0.48],
    [-0.98, -0.81],
    [1.06, -0.81],
    [-0.03, 0.88],
    [-0.58, -0.11],
    [0.11, 0.06],
    [-1.23, 0.08],
];
const YB: [f64; 12] = [0.98, -2.59, -0.9, 0.63, -2.83, 1.2, -0.96, -1.15, 1.93, 0.2, -0.45, 0.75];

fn instance_a() -> (PredictorPanel, ResponseSeries) {
    (
        PredictorPanel::from_columns(&[XA.to_vec()], None).unwrap(),
        ResponseSeries::new(YA.to_vec()).unwrap(),
    )
}

fn instance_b() -> (PredictorPanel, ResponseSeries) {
    let cols = vec![XB.iter().map(|r| r[0]).collect(), XB.iter().map(|r| r[1]).collect()];
    (PredictorPanel::from_columns(&cols, None).unwrap(), ResponseSeries::new(YB.to_vec()).unwrap())
}

// Grid minima over [-5, 5]^2 at step 1e-3 (objective, mu, beta).
const GRID_A_QR_050: (f64, f64, f64) = (2.209865, 0.198, 1.189);
const GRID_A_QR_025: (f64, f64, f64) = (1.52418, -0.519, 1.268);
const GRID_C_RIDGE_050: (f64, f64, f64) = (3.019126, 0.227, 0.711);
const GRID_C_RIDGE_025: (f64, f64, f64) = (2.61, -0.398, 0.600);
// Coarse-to-fine grid over [-5, 5]^3 ending at step 1e-3 (objective, mu, b1, b2), lambda 0.7.
const GRID_B_PEN_050: (f64, [f64; 3]) = (2.563785, [0.519, 1.329, 0.0]);
const GRID_B_PEN_075: (f64, [f64; 3]) = (2.265685, [0.643, 1.214, 0.0]);

#[test]
fn qr_matches_two_dimensional_grid() {
    let (x, y) = instance_a();
    for (tau, (obj, mu, beta)) in [(0.5, GRID_A_QR_050), (0.25, GRID_A_QR_025)] {
        let fit = fit_qr(&x, &y, q(tau), &SolverOptions::default()).unwrap();
        assert_eq!(fit.solver_status, SolverStatus::Optimal);
        assert!(fit.objective <= obj + 1e-9, "LP {} above grid {obj}", fit.objective);
        assert!((fit.objective - obj).abs() <= 1e-3, "tau {tau}: {} vs {obj}", fit.objective);
        assert!((fit.intercept - mu).abs() < 2e-3 && (fit.coefficients[0] - beta).abs() < 2e-3);
    }
}

#[test]
fn penalized_matches_three_dimensional_grid() {
    let (x, y) = instance_b();
    for (tau, (obj, params)) in [(0.5, GRID_B_PEN_050), (0.75, GRID_B_PEN_075)] {
        let spec = PenaltySpec::lasso(0.7, 2).unwrap();
        let fit = fit_penalized_qr(&x, &y, q(tau), &spec, &SolverOptions::default()).unwrap();
        assert_eq!(fit.solver_status, SolverStatus::Optimal);
        assert!((fit.objective - obj).abs() <= 1e-3, "tau {tau}: {} vs {obj}", fit.objective);
        assert!((fit.intercept - params[0]).abs() < 5e-3);
        assert!((fit.coefficients[0] - params[1]).abs() < 5e-3);
        assert_eq!(fit.coefficients[1], 0.0);
        assert_eq!(fit.active_set, vec![0]);
    }
}

#[test]
fn ridge_matches_two_dimensional_grid() {
    let (x, y) = instance_a();
    for (tau, (obj, mu, beta)) in [(0.5, GRID_C_RIDGE_050), (0.25, GRID_C_RIDGE_025)] {
        let fit = fit_ridge_qr(&x, &y, q(tau), 1.0, &SolverOptions::default()).unwrap();
        assert_eq!(fit.solver_status, SolverStatus::Optimal);
        assert!(fit.objective <= obj + 1e-9);
        assert!((fit.objective - obj).abs() <= 1e-3, "tau {tau}: {} vs {obj}", fit.objective);
        assert!((fit.intercept - mu).abs() < 1e-2 && (fit.coefficients[0] - beta).abs() < 1e-2);
    }
}

#[test]
fn exhaustive_battery_against_vertex_oracle() {
    let stats = common::battery(2024, 500).unwrap();
    assert_eq!(stats.fits, 2000);
}

#[test]
fn lambda_max_within_factor_four_of_bisection() {
    // Exact zero crossing along the 1-D path found by bisection.
    let (x, y) = instance_a();
    let opts = SolverOptions::default();
    for tau in [0.25, 0.5, 0.75] {
        let lmax = lambda_max(&x, &y, q(tau), &[Weight::Value(1.0)]).unwrap();
        let zero_at = |l: f64| {
            let spec = PenaltySpec::lasso(l, 1).unwrap();
            fit_penalized_qr(&x, &y, q(tau), &spec, &opts).unwrap().active_set.is_empty()
        };
        assert!(zero_at(lmax));
        let (mut lo, mut hi) = (0.0, lmax);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if zero_at(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert!(hi > 0.0 && lmax <= 4.0 * hi && lmax >= hi, "tau {tau}: lmax {lmax}, crossing {hi}");
    }
}

#[test]
fn lambda_max_at_penalized_fit_is_intercept_only_quantile() {
    let (x, y) = instance_b();
    let tau = q(0.5);
    let w = vec![Weight::Value(1.0); 2];
    let lmax = lambda_max(&x, &y, tau, &w).unwrap();
    let fit = fit_penalized_qr(&x, &y, tau, &PenaltySpec::lasso(lmax, 2).unwrap(), &SolverOptions::default()).unwrap();
    assert!(fit.active_set.is_empty());
    let qv = alqr::empirical_quantile(y.usable(), tau).unwrap();
    // The intercept-only optimum is any point of the quantile interval; its
    // check loss must equal the loss at the order-statistic convention.
    let at_q: f64 = y.usable().iter().map(|&v| rho(v - qv, 0.5)).sum();
    assert!((fit.check_loss - at_q).abs() < 1e-9);
}

#[test]
fn monotone_shrinkage_along_lambda_path() {
    let (x, y) = instance_b();
    let opts = SolverOptions::default();
    let w = vec![Weight::Value(0.7), Weight::Value(1.3)];
    let lmax = lambda_max(&x, &y, q(0.4), &w).unwrap();
    let mut last = -1.0;
    for i in 0..40 {
        let l = lmax * (i as f64 / 39.0);
        let spec = PenaltySpec::new(l, w.clone(), 1.0).unwrap();
        let fit = fit_penalized_qr(&x, &y, q(0.4), &spec, &opts).unwrap();
        assert!(fit.check_loss >= last - 1e-9, "lambda {l}: {} < {last}", fit.check_loss);
        last = fit.check_loss;
    }
}
