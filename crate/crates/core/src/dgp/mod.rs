//! Seeded simulators for stationary, cointegrated and (local-to-)unit-root
//! predictor blocks and the three simulation scenarios.

mod rng;
mod scenario;

pub use rng::{Block, SimRng};
pub use scenario::{gen_scenario, gen_scenario_stream, MixedPanel, NoiseSpec, ScenarioConfig, ScenarioId};

use crate::error::{AlqrError, Result};
use crate::linalg::{Cholesky, Matrix};

/// Lag-one coefficients of the stationary VAR(2).
pub const VAR2_PHI1: [[f64; 4]; 4] = [
    [0.427, -0.059, 0.0, -0.017],
    [0.0, 0.0, 0.0, 0.074],
    [0.0, 0.022, 0.538, 0.0],
    [1.0, 0.0, 0.0, 0.0],
];

/// Lag-two coefficients of the stationary VAR(2).
pub const VAR2_PHI2: [[f64; 4]; 4] = [
    [0.208, 0.0, 0.0, 0.0],
    [0.421, -0.089, -0.312, 0.0],
    [0.092, 0.023, 0.239, 0.0],
    [0.0, 0.0, 1.038, 0.0],
];

/// Transition matrix of the cointegrated VAR(1) block.
pub const COINT_A: [[f64; 4]; 4] = [
    [0.14, 0.8495, 0.0039, -0.1545],
    [0.19, 0.8084, 0.0033, -0.0507],
    [-1.24, 1.2438, 0.9788, 0.3206],
    [0.02, -0.0205, 0.0009, 0.9835],
];

/// Discarded warm-up length of the stationary block.
pub const VAR2_BURN_IN: usize = 200;

fn check_len(n: usize) -> Result<()> {
    if n < 10 {
        return Err(AlqrError::InvalidParameter(format!("simulated length must be at least 10, got {n}")));
    }
    Ok(())
}

fn mat4_vec(m: &[[f64; 4]; 4], v: &[f64]) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (i, row) in m.iter().enumerate() {
        out[i] = row.iter().zip(v).map(|(a, b)| a * b).sum();
    }
    out
}

fn standard_normal_matrix(rng: &mut SimRng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_row_major(rows, cols, rng.normals(rows * cols))
}

/// Runs the VAR(2) recursion from zero initial values over the given
/// innovation rows and drops the first `burn_in` rows.
pub fn var2_recursion(innovations: &Matrix, burn_in: usize) -> Result<Matrix> {
    if innovations.cols() != 4 {
        return Err(AlqrError::DimensionMismatch(format!("VAR(2) needs 4 innovation columns, got {}", innovations.cols())));
    }
    if innovations.rows() <= burn_in {
        return Err(AlqrError::InvalidParameter("burn-in consumes every innovation row".into()));
    }
    let total = innovations.rows();
    let mut out = Matrix::zeros(total - burn_in, 4);
    let (mut lag1, mut lag2) = ([0.0; 4], [0.0; 4]);
    for t in 0..total {
        let a = mat4_vec(&VAR2_PHI1, &lag1);
        let b = mat4_vec(&VAR2_PHI2, &lag2);
        let u = innovations.row(t);
        let z = [a[0] + b[0] + u[0], a[1] + b[1] + u[1], a[2] + b[2] + u[2], a[3] + b[3] + u[3]];
        if t >= burn_in {
            out.row_mut(t - burn_in).copy_from_slice(&z);
        }
        lag2 = lag1;
        lag1 = z;
    }
    Ok(out)
}

/// Stationary block: `n x 4` draws of the VAR(2) after a 200-step burn-in.
pub fn gen_var2(n: usize, seed: u64) -> Result<Matrix> {
    gen_var2_with(n, &mut SimRng::new(seed, Block::Stationary, 0))
}

pub fn gen_var2_with(n: usize, rng: &mut SimRng) -> Result<Matrix> {
    check_len(n)?;
    var2_recursion(&standard_normal_matrix(rng, n + VAR2_BURN_IN, 4), VAR2_BURN_IN)
}

/// Runs `x_t = A x_{t-1} + v_t` from `x_0 = 0`; row `t - 1` holds `x_t`.
pub fn cointegrated_recursion(innovations: &Matrix) -> Result<Matrix> {
    if innovations.cols() != 4 {
        return Err(AlqrError::DimensionMismatch(format!(
            "cointegrated block needs 4 innovation columns, got {}",
            innovations.cols()
        )));
    }
    let mut out = Matrix::zeros(innovations.rows(), 4);
    let mut prev = [0.0; 4];
    for t in 0..innovations.rows() {
        let a = mat4_vec(&COINT_A, &prev);
        let v = innovations.row(t);
        prev = [a[0] + v[0], a[1] + v[1], a[2] + v[2], a[3] + v[3]];
        out.row_mut(t).copy_from_slice(&prev);
    }
    Ok(out)
}

/// Cointegrated block: `n x 4` path of the VAR(1), zero start.
pub fn gen_cointegrated(n: usize, seed: u64) -> Result<Matrix> {
    gen_cointegrated_with(n, &mut SimRng::new(seed, Block::Cointegrated, 0))
}

pub fn gen_cointegrated_with(n: usize, rng: &mut SimRng) -> Result<Matrix> {
    check_len(n)?;
    cointegrated_recursion(&standard_normal_matrix(rng, n, 4))
}

/// `x_t = (1 + c_j / n) x_{t-1,j} + v_{t,j}` from `x_0 = 0`, with
/// `n = innovations.rows()`.
pub fn gen_local_unit_root(c: &[f64], innovations: &Matrix) -> Result<Matrix> {
    let n = innovations.rows();
    let k = innovations.cols();
    if c.len() != k {
        return Err(AlqrError::DimensionMismatch(format!("{} drift constants for {k} columns", c.len())));
    }
    if n == 0 {
        return Err(AlqrError::EmptyInput("innovations".into()));
    }
    if innovations.data().iter().any(|v| !v.is_finite()) {
        return Err(AlqrError::NonFinite("innovations".into()));
    }
    let roots: Vec<f64> = c.iter().map(|cj| 1.0 + cj / n as f64).collect();
    if let Some(j) = roots.iter().position(|r| !(*r > 0.0)) {
        return Err(AlqrError::InvalidParameter(format!("autoregressive root 1 + c/n = {} for column {j} is not positive", roots[j])));
    }
    let mut out = Matrix::zeros(n, k);
    let mut prev = vec![0.0; k];
    for t in 0..n {
        let v = innovations.row(t);
        for j in 0..k {
            prev[j] = roots[j] * prev[j] + v[j];
        }
        out.row_mut(t).copy_from_slice(&prev);
    }
    Ok(out)
}

/// Triangular cointegrated system: `x2c` is local-to-unity with constants
/// `c2` and `x1c = A1 x2c + v1c` with standard-normal `v1c`.
pub fn gen_triangular(n: usize, a1: &Matrix, c2: &[f64], seed: u64) -> Result<(Matrix, Matrix)> {
    if a1.cols() != c2.len() {
        return Err(AlqrError::DimensionMismatch(format!("A1 is {}x{} but c2 has {} entries", a1.rows(), a1.cols(), c2.len())));
    }
    if n == 0 {
        return Err(AlqrError::EmptyInput("sample size".into()));
    }
    let mut rng = SimRng::new(seed, Block::Cointegrated, 0);
    let v2 = standard_normal_matrix(&mut rng, n, c2.len());
    let v1 = standard_normal_matrix(&mut rng, n, a1.rows());
    let x2 = gen_local_unit_root(c2, &v2)?;
    let x1 = triangular_from_parts(a1, &x2, &v1)?;
    Ok((x1, x2))
}

/// `x1c = A1 x2c + v1c`, row by row.
pub fn triangular_from_parts(a1: &Matrix, x2: &Matrix, v1: &Matrix) -> Result<Matrix> {
    if a1.cols() != x2.cols() || a1.rows() != v1.cols() || x2.rows() != v1.rows() {
        return Err(AlqrError::DimensionMismatch("triangular system blocks".into()));
    }
    let mut x1 = Matrix::zeros(x2.rows(), a1.rows());
    for t in 0..x2.rows() {
        let ax = a1.mul_vec(x2.row(t));
        for (i, (o, v)) in x1.row_mut(t).iter_mut().zip(v1.row(t)).enumerate() {
            *o = ax[i] + v;
        }
    }
    Ok(x1)
}

/// Equicorrelated innovations: standard normals mixed by the Cholesky factor
/// of `(1 - rho) I + rho 11'`.
pub fn correlated_innovations(rng: &mut SimRng, n: usize, p: usize, rho: f64) -> Result<Matrix> {
    if p == 0 {
        return Err(AlqrError::EmptyInput("column count".into()));
    }
    let lower = if p > 1 { -1.0 / (p as f64 - 1.0) } else { f64::NEG_INFINITY };
    if !(rho < 1.0 && rho > lower) {
        return Err(AlqrError::InvalidParameter(format!("equicorrelation {rho} is not positive definite for p = {p}")));
    }
    let e = standard_normal_matrix(rng, n, p);
    if p == 1 || rho == 0.0 {
        return Ok(e);
    }
    let mut s = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..=i {
            s[i * p + j] = if i == j { 1.0 } else { rho };
        }
    }
    let ch = Cholesky::factor(&s, p, 1e-14);
    let l = ch.lower();
    let mut v = Matrix::zeros(n, p);
    for t in 0..n {
        let et = e.row(t);
        for i in 0..p {
            v[(t, i)] = (0..=i).map(|j| l[i * p + j] * et[j]).sum();
        }
    }
    Ok(v)
}

/// Random walks whose innovations are equicorrelated with correlation `rho`.
pub fn gen_correlated_unit_root(n: usize, p: usize, rho: f64, seed: u64) -> Result<Matrix> {
    gen_correlated_unit_root_with(n, p, rho, &mut SimRng::new(seed, Block::UnitRoot, 0))
}

pub fn gen_correlated_unit_root_with(n: usize, p: usize, rho: f64, rng: &mut SimRng) -> Result<Matrix> {
    let v = correlated_innovations(rng, n, p, rho)?;
    gen_local_unit_root(&vec![0.0; p], &v)
}
