//! Oracles and fixtures shared by the integration suites.
#![allow(dead_code)]

use alqr::{
    fit_penalized_qr, fit_qr, lambda_max, PenaltySpec, PredictorPanel, QuantileLevel, ResponseSeries, SolverOptions,
    SolverStatus, Weight,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn q(t: f64) -> QuantileLevel {
    QuantileLevel::new(t).unwrap()
}

pub fn rho(u: f64, tau: f64) -> f64 {
    u * (tau - if u < 0.0 { 1.0 } else { 0.0 })
}

/// Minimum over all `k`-row interpolants of the augmented problem.
pub fn vertex_oracle(rows: &[Vec<f64>], resp: &[f64], tau: f64) -> f64 {
    let k = rows[0].len();
    let n = rows.len();
    let objective = |theta: &DVector<f64>| -> f64 {
        rows.iter()
            .zip(resp)
            .map(|(r, &yv)| rho(yv - r.iter().zip(theta.iter()).map(|(a, b)| a * b).sum::<f64>(), tau))
            .sum()
    };
    let mut best = f64::INFINITY;
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let a = DMatrix::from_fn(k, k, |i, j| rows[idx[i]][j]);
        let b = DVector::from_fn(k, |i, _| resp[idx[i]]);
        if a.determinant().abs() > 1e-12 {
            if let Some(theta) = a.lu().solve(&b) {
                best = best.min(objective(&theta));
            }
        }
        // Next combination.
        let mut i = k;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if idx[i] < n - k + i {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

pub fn augmented(x: &PredictorPanel, y: &ResponseSeries, pens: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let p = x.p_cols();
    let mut rows = Vec::new();
    let mut resp = Vec::new();
    for t in 1..y.len() {
        let mut r = vec![1.0];
        r.extend_from_slice(x.row(t - 1));
        rows.push(r);
        resp.push(y.values()[t]);
    }
    for (j, &l) in pens.iter().enumerate() {
        if l > 0.0 {
            for s in [1.0, -1.0] {
                let mut r = vec![0.0; p + 1];
                r[j + 1] = s * l;
                rows.push(r);
                resp.push(0.0);
            }
        }
    }
    (rows, resp)
}

pub fn residual_sign_holds(residuals: &[f64], tau: f64) -> bool {
    let neg = residuals.iter().filter(|&&r| r < -1e-9).count() as f64;
    let zero = residuals.iter().filter(|&&r| r.abs() <= 1e-9).count() as f64;
    let target = residuals.len() as f64 * tau;
    neg <= target + 1e-9 && target <= neg + zero + 1e-9
}


/// Counts from a passing [`battery`] run.
#[derive(Debug, Default)]
pub struct BatteryStats {
    pub instances: usize,
    pub fits: usize,
    pub qr_fits: usize,
    pub worst_gap: f64,
}

/// Random instances with `p <= 2`, `n <= 12`, each solved at
/// `lambda in {0, 0.3, 0.7, lambda_max}` and compared with the vertex oracle.
/// The first violation is returned as an error.
pub fn battery(seed: u64, count: usize) -> Result<BatteryStats, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let opts = SolverOptions::default();
    let mut stats = BatteryStats::default();
    for inst in 0..count {
        let p = 1 + inst % 2;
        let n = rng.gen_range(p + 3..=12);
        let tau = [0.1, 0.25, 0.5, 0.75, 0.9][rng.gen_range(0..5)];
        let cols: Vec<Vec<f64>> = (0..p)
            .map(|_| (0..n).map(|_| (rng.gen_range(-200..=200) as f64) / 100.0).collect())
            .collect();
        let beta: Vec<f64> = (0..p).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mut ys = vec![0.0];
        for t in 1..n {
            let lin: f64 = (0..p).map(|j| beta[j] * cols[j][t - 1]).sum();
            ys.push(((0.5 + lin + rng.gen_range(-1.0..1.0)) * 100.0).round() / 100.0);
        }
        let x = PredictorPanel::from_columns(&cols, None).unwrap();
        let y = ResponseSeries::new(ys).unwrap();
        let weights: Vec<f64> =
            (0..p).map(|_| if inst % 4 < 2 { 1.0 } else { rng.gen_range(0.5..2.0) }).collect();
        let w: Vec<Weight> = weights.iter().map(|&v| Weight::Value(v)).collect();
        let lmax = lambda_max(&x, &y, q(tau), &w).map_err(|e| format!("instance {inst}: {e}"))?;
        let qr = fit_qr(&x, &y, q(tau), &opts).map_err(|e| format!("instance {inst}: {e}"))?;
        if qr.solver_status != SolverStatus::Optimal {
            return Err(format!("instance {inst}: QR {:?}", qr.solver_status));
        }
        if !residual_sign_holds(&qr.residuals, tau) {
            return Err(format!("instance {inst}: residual signs {:?} at tau {tau}", qr.residuals));
        }
        stats.qr_fits += 1;
        for lambda in [0.0, 0.3, 0.7, lmax] {
            let spec = PenaltySpec::new(lambda, w.clone(), 1.0).unwrap();
            let fit = fit_penalized_qr(&x, &y, q(tau), &spec, &opts).map_err(|e| format!("instance {inst}: {e}"))?;
            if fit.solver_status != SolverStatus::Optimal {
                return Err(format!("instance {inst} lambda {lambda}: {:?}", fit.solver_status));
            }
            let pens: Vec<f64> = weights.iter().map(|v| lambda / v).collect();
            let (rows, resp) = augmented(&x, &y, &pens);
            let oracle = vertex_oracle(&rows, &resp, tau);
            let gap = (fit.objective - oracle).abs();
            stats.worst_gap = stats.worst_gap.max(gap);
            if gap > 1e-3 {
                return Err(format!("instance {inst} lambda {lambda}: LP {} vs oracle {oracle}", fit.objective));
            }
            if lambda == 0.0 && (fit.objective - qr.objective).abs() > 1e-8 * qr.objective.abs().max(1e-300) {
                return Err(format!("instance {inst}: lambda 0 gives {} but QR gives {}", fit.objective, qr.objective));
            }
            if lambda == lmax && !fit.active_set.is_empty() {
                return Err(format!("instance {inst}: nonzero coefficients {:?} at lambda_max", fit.coefficients));
            }
            stats.fits += 1;
        }
        stats.instances += 1;
    }
    Ok(stats)
}
