use std::fs;
use std::process::{Command, Output};

fn exflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_exflow")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn value(summary: &str, key: &str) -> Option<String> {
    summary
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")).map(str::to_string))
}

#[test]
fn help_documents_exit_codes() {
    let o = exflow(&["--help"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    for needle in ["64", "refuted", "EXFLOW_WORKERS", "check-hypothesis", "kernel-demo", "hardy-test"] {
        assert!(text.contains(needle), "help lacks {needle}");
    }
}

#[test]
fn hypothesis_exit_codes() {
    let o = exflow(&["check-hypothesis", "--phi", "3.14159", "--mu", "0", "--amp", "0", "--n-random", "4"]);
    assert_eq!(code(&o), 0);
    let d: f64 = value(&stdout(&o), "criterion_delta").unwrap().parse().unwrap();
    assert!((d - 0.5).abs() < 1e-5);

    let o = exflow(&["check-hypothesis", "--phi", "0", "--mu", "6.2832", "--amp", "0", "--n-random", "4"]);
    assert_eq!(code(&o), 2);
    assert!(value(&stdout(&o), "witness_alpha").is_some());

    let o = exflow(&["check-hypothesis", "--phi", "0", "--mu", "0", "--amp", "0", "--n-random", "4"]);
    assert_eq!(code(&o), 0);
    assert_eq!(value(&stdout(&o), "criterion_delta").unwrap().parse::<f64>().unwrap(), 0.0);
}

#[test]
fn negative_flux_is_accepted() {
    let o = exflow(&["check-hypothesis", "--phi", "-3.14159", "--n-random", "2"]);
    assert_eq!(code(&o), 0);
}

#[test]
fn malformed_input_exits_64() {
    assert_eq!(code(&exflow(&["simulate", "--bogus"])), 64);
    assert_eq!(code(&exflow(&["counterexample-scan", "--alphas="])), 64);
    assert_eq!(code(&exflow(&["kernel-demo", "--probe", "triangle"])), 64);
    assert_eq!(code(&exflow(&["simulate", "--dt", "-1"])), 64);
    assert_eq!(code(&exflow(&[])), 64);

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "phi = \"fast\"\n").unwrap();
    let o = exflow(&["check-hypothesis", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 64);
    assert!(String::from_utf8_lossy(&o.stderr).contains("exflow:"));

    fs::write(&cfg, "alphas = []\n").unwrap();
    assert_eq!(code(&exflow(&["counterexample-scan", "--config", cfg.to_str().unwrap()])), 64);
}

#[test]
fn worker_override_is_validated() {
    let o = Command::new(env!("CARGO_BIN_EXE_exflow"))
        .args(["kernel-demo", "--t-grid", "2"])
        .env("EXFLOW_WORKERS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), 64);
    let o = Command::new(env!("CARGO_BIN_EXE_exflow"))
        .args(["kernel-demo", "--t-grid", "2"])
        .env("EXFLOW_WORKERS", "2")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
}

#[test]
fn scan_checks_closed_forms() {
    let o = exflow(&["counterexample-scan", "--alphas", "0.8,0.4,0.2,0.1", "--csv"]);
    assert_eq!(code(&o), 0);
    let csv = stdout(&o);
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# verifies: "));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let g = header.iter().position(|c| *c == "grad_energy").unwrap();
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 4);
    for r in rows {
        assert!((r[g] / (4.0 * std::f64::consts::PI) - 1.0).abs() < 1e-6);
    }
}

#[test]
fn kernel_demo_step_probe() {
    let o = exflow(&["kernel-demo", "--probe", "step", "--t-grid", "2,8,32", "--csv"]);
    assert_eq!(code(&o), 0);
    let csv = stdout(&o);
    for line in csv.lines().skip(2) {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        let t = v[0];
        let want = 4.0 / 3.0 * (t.powf(1.5) - (t - 1.0).powf(1.5)) / t;
        assert!(((v[2] - want) / want).abs() < 1e-8);
    }
}

#[test]
fn hardy_small_batch() {
    let o = exflow(&["hardy-test", "--n-fields", "8", "--seed", "3"]);
    assert_eq!(code(&o), 0);
    let q: f64 = value(&stdout(&o), "max_log_quotient").unwrap().parse().unwrap();
    assert!(q > 0.0 && q <= 2.0);
}

#[test]
fn simulate_zero_horizon_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        let o = exflow(&[
            "simulate", "--phi", "3.14159", "--r-max", "4", "--n-modes-theta", "2", "--n-modes-radial", "4",
            "--T", "0.2", "--dt", "0.02", "--seed", "11", "--out", out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        fs::read(out.join("simulate-trace.csv")).unwrap()
    };
    assert_eq!(run("a"), run("b"));

    let o = exflow(&["simulate", "--r-max", "4", "--n-modes-theta", "2", "--n-modes-radial", "4", "--T", "0", "--csv"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).lines().count(), 3);
}

#[test]
fn config_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "command = \"kernel-demo\"\nt_grid = [2.0, 8.0]\n\n[probe]\nkind = \"power_decay\"\np = 1.0\n").unwrap();
    let o = exflow(&["kernel-demo", "--config", cfg.to_str().unwrap(), "--csv"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).lines().count(), 4);
    let o = exflow(&["kernel-demo", "--config", cfg.to_str().unwrap(), "--t-grid", "3", "--csv"]);
    assert_eq!(stdout(&o).lines().count(), 3);
    // config naming another command is rejected
    assert_eq!(code(&exflow(&["hardy-test", "--config", cfg.to_str().unwrap()])), 64);
}
