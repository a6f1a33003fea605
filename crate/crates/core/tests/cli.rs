use std::path::Path;
use std::process::{Command, Output};

fn alqr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_alqr")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn simulate_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for f in [&a, &b] {
        let o = alqr(&["simulate", "--scenario", "1", "--n", "1000", "--seed", "42", "--out", p(f)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (ba, bb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ba, bb);
    let text = String::from_utf8(ba).unwrap();
    assert_eq!(text.lines().next().unwrap(), "y,z1,z2,z3,z4,xc1,xc2,xc3,xc4,x1,x2,x3,x4");
    assert_eq!(text.lines().count(), 1001);
    let stdout = alqr(&["simulate", "--scenario", "1", "--n", "1000", "--seed", "42"]);
    assert_eq!(stdout.stdout, std::fs::read(&a).unwrap());
}

#[test]
fn seed_is_mandatory() {
    let o = alqr(&["simulate", "--scenario", "1", "--n", "50"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("--seed"));
    let o = alqr(&["mc", "--scenario", "1", "--n", "60", "--reps", "1"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&alqr(&[])), 1);
    assert_eq!(code(&alqr(&["bogus"])), 1);
    assert_eq!(code(&alqr(&["simulate", "--scenario", "1", "--seed", "x"])), 1);
    assert_eq!(code(&alqr(&["simulate", "--scenario", "9", "--seed", "1"])), 1);
    assert_eq!(code(&alqr(&["--help"])), 0);
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    assert_eq!(code(&alqr(&["fit", "--data", p(&missing)])), 2);
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "y,a\n1,2\n2,\n").unwrap();
    let o = alqr(&["fit", "--data", p(&bad), "--method", "qr"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("row 2"));
    let o = alqr(&["diagnose", "--data", p(&bad)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn fit_prints_model() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("s1.csv");
    assert_eq!(code(&alqr(&["simulate", "--scenario", "1", "--n", "300", "--seed", "3", "--out", p(&data)])), 0);
    let json = dir.path().join("fit.json");
    let o = alqr(&["fit", "--data", p(&data), "--tau", "0.5", "--method", "alqr", "--criterion", "bic", "--out", p(&json)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("method ALQR") && text.contains("active ") && text.contains("objective "));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["coefficients"].as_object().unwrap().len(), 12);
    assert_eq!(v["solver_status"], "Optimal");
    // Refuses to overwrite without --force.
    let o = alqr(&["fit", "--data", p(&data), "--method", "qr", "--out", p(&json)]);
    assert_eq!(code(&o), 1);
    let o = alqr(&["fit", "--data", p(&data), "--method", "qr", "--out", p(&json), "--force"]);
    assert_eq!(code(&o), 0);
    assert_eq!(code(&alqr(&["fit", "--data", p(&data), "--tau", "1.5"])), 1);
    assert_eq!(code(&alqr(&["fit", "--data", p(&data), "--method", "alqr", "--gamma", "-1"])), 1);
}

#[test]
fn solver_stage_failures_exit_three() {
    // Three usable observations for four parameters.
    let dir = tempfile::tempdir().unwrap();
    let tiny = dir.path().join("tiny.csv");
    std::fs::write(&tiny, "y,a,b,c\n1,2,3,4\n2,1,0,5\n0,3,1,1\n4,4,2,0\n").unwrap();
    assert_eq!(code(&alqr(&["fit", "--data", p(&tiny), "--method", "alqr"])), 3);
    assert_eq!(code(&alqr(&["fit", "--data", p(&tiny), "--method", "qr"])), 2);
    let one = dir.path().join("one.csv");
    let mut body = String::from("y,a\n");
    for i in 0..30 {
        body.push_str(&format!("{},{}\n", (i * 7 % 5) as f64, (i % 3) as f64));
    }
    std::fs::write(&one, body).unwrap();
    assert_eq!(code(&alqr(&["fit", "--data", p(&one), "--method", "lasso", "--criterion", "gic"])), 1);
    assert_eq!(code(&alqr(&["fit", "--data", p(&one), "--method", "lasso", "--criterion", "bic"])), 0);
}

#[test]
fn forecast_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("s1.csv");
    assert_eq!(code(&alqr(&["simulate", "--scenario", "1", "--n", "200", "--seed", "8", "--out", p(&data)])), 0);
    let out = dir.path().join("fc");
    let args =
        ["forecast", "--data", p(&data), "--tau", "0.1,0.5", "--method", "qr,alqr,quant", "--horizon", "3", "--out", p(&out)];
    let o = alqr(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "method,tau,fpe,oos_r2,avg_active,avg_lambda,failures");
    assert_eq!(csv.lines().count(), 7);
    let rep: alqr::ForecastReport =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(rep.cells.len(), 6);
    assert_eq!(rep.plan.width, 197);
    assert_eq!(code(&alqr(&args)), 1);
    let o = alqr(&["forecast", "--data", p(&data), "--horizon", "3", "--window", "150", "--method", "qr", "--tau", "0.5"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8(o.stdout).unwrap().starts_with("method,tau"));
    assert_eq!(code(&alqr(&["forecast", "--data", p(&data), "--window", "199"])), 1);
}

#[test]
fn mc_outputs_and_shape() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s1.json");
    std::fs::write(&cfg, r#"{"scenario": {"n": 120, "scenario_id": 1}, "replications": 2, "horizon": 2}"#).unwrap();
    let out = dir.path().join("mc");
    let o = alqr(&["mc", "--config", p(&cfg), "--seed", "5", "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    // 4 methods x 5 quantile levels.
    assert_eq!(summary.lines().count(), 21);
    assert!(out.join("replications/r1.json").exists() && out.join("replications/r2.json").exists());
    assert!(out.join("config.json").exists());
    let again = alqr(&["mc", "--config", p(&cfg), "--seed", "5", "--out", p(&out)]);
    assert_eq!(code(&again), 1);
    assert!(String::from_utf8_lossy(&again.stderr).contains("--force"));
    let forced = alqr(&["mc", "--config", p(&cfg), "--seed", "5", "--out", p(&out), "--force"]);
    assert_eq!(code(&forced), 0);
    assert_eq!(std::fs::read_to_string(out.join("summary.csv")).unwrap(), summary);
}

#[test]
fn diagnose_flags_random_walks() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("s1.csv");
    assert_eq!(code(&alqr(&["simulate", "--scenario", "1", "--n", "816", "--seed", "21", "--out", p(&data)])), 0);
    let o = alqr(&["diagnose", "--data", p(&data), "--response", "y"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let mut rows = text.lines();
    assert_eq!(rows.next().unwrap(), "variable,high_persistence,ar1");
    assert!(rows.next().unwrap().starts_with("y,"));
    for line in text.lines().filter(|l| l.starts_with('x') && !l.starts_with("xc")) {
        let ar1: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(ar1 >= 0.95, "{line}");
        assert!(line.contains(",yes,"));
    }
}
