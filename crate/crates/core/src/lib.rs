//! Adaptive-lasso quantile regression for predictive regressions whose
//! predictors mix stationary, local-to-unity and cointegrated processes.
//!
//! The numeric layers ([`loss`], [`solver`], [`pipeline`], [`tuning`],
//! [`eval`]) are generic over [`Scalar`] (`f32` or `f64`); the `f64`
//! aliases below are what the simulators and the batch harness use.

pub mod dgp;
pub mod error;
pub mod harness;
pub mod eval;
pub mod linalg;
pub mod loss;
pub mod model;
pub mod pipeline;
pub mod scalar;
pub mod solver;
pub mod tuning;

pub use error::{AlqrError, Result};
pub use loss::{check_loss, empirical_quantile, psi};
pub use model::{
    active_set, zero_threshold, PenaltySpec, PredictorPanel, QuantileFit, QuantileLevel,
    ResponseSeries, SolverDiagnostics, SolverStatus, Weight,
};
pub use scalar::Scalar;
pub use solver::{fit_penalized_qr, fit_qr, fit_ridge_qr, fit_ridge_qr_from, lambda_max, L1Path, SolverOptions};
pub use pipeline::{adaptive_weights, fit_method, FittedModel, Fitter, LambdaChoice, Method};
pub use eval::{ar1_coefficient, fpe, oos_r2, rolling_forecast, ForecastCell, ForecastReport, RollingPlan, StepRecord};
pub use tuning::{gamma_n, ic_score, select_lambda, Criterion, LambdaGrid, Selection};
