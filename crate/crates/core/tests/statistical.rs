//! Distributional properties checked over many seeded replications.

use alqr::dgp::{gen_scenario, gen_scenario_stream, ScenarioConfig};
use alqr::harness::{run_monte_carlo, ExperimentConfig};
use alqr::{rolling_forecast, Criterion, Fitter, LambdaChoice, Method, QuantileLevel, RollingPlan, SolverOptions};

fn tuned_active(cfg: &ScenarioConfig, method: Method) -> Vec<usize> {
    let sim = gen_scenario(cfg).unwrap();
    let fitter = Fitter::new(&sim.panel, &sim.y, QuantileLevel::new(0.5).unwrap(), SolverOptions::default());
    let m = fitter.fit(method, LambdaChoice::Tune(Criterion::Bic)).unwrap();
    m.fit.unwrap().active_set
}

#[test]
fn false_inclusion_falls_with_sample_size() {
    let rate = |n: usize| {
        let mut false_in = 0;
        let mut slots = 0;
        for seed in 0..100 {
            let cfg = ScenarioConfig::preset(1, n, 900 + seed).unwrap();
            let truth = cfg.true_beta();
            let active = tuned_active(&cfg, Method::alqr());
            let zeros: Vec<usize> = (0..truth.len()).filter(|&j| truth[j] == 0.0).collect();
            false_in += zeros.iter().filter(|j| active.contains(j)).count();
            slots += zeros.len();
        }
        false_in as f64 / slots as f64
    };
    let (small, large) = (rate(500), rate(2000));
    assert!(large <= small, "false inclusion {large} at n=2000 vs {small} at n=500");
}

#[test]
fn lasso_selects_more_than_alqr_on_average() {
    for scenario in [1, 2] {
        let (mut lasso, mut alqr) = (0usize, 0usize);
        for seed in 0..100 {
            let cfg = ScenarioConfig::preset(scenario, 400, 300 + seed).unwrap();
            lasso += tuned_active(&cfg, Method::LassoQr).len();
            alqr += tuned_active(&cfg, Method::alqr()).len();
        }
        assert!(lasso >= alqr, "scenario {scenario}: LASSO {lasso} vs ALQR {alqr} selections");
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let mut cfg = ExperimentConfig::new(ScenarioConfig::preset(2, 150, 0).unwrap(), 12);
    cfg.replications = 5;
    cfg.horizon = 3;
    cfg.taus = vec![0.1, 0.5];
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_monte_carlo(&cfg).unwrap())
    };
    let (a, b) = (run(1), run(4));
    assert_eq!(a.table, b.table);
    assert_eq!(serde_json::to_string(&a.records).unwrap(), serde_json::to_string(&b.records).unwrap());

    let sim = gen_scenario_stream(&ScenarioConfig::preset(1, 120, 4).unwrap(), 2).unwrap();
    let plan = RollingPlan::new(120, 4).unwrap();
    let methods = [Method::Qr, Method::RidgeQr, Method::Quant];
    let forecast = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            rolling_forecast(&sim.panel, &sim.y, &methods, &[0.5, 0.9], &plan, Criterion::Bic, &SolverOptions::default())
                .unwrap()
        })
    };
    assert_eq!(forecast(1).to_json().unwrap(), forecast(3).to_json().unwrap());
}
