use std::path::Path;
use std::process::{Command, Output};

use bp2_cli::csv_io::{read_ensemble, read_equilibrium, read_ode, read_support, read_sweep, read_tags};

fn bp2(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bp2"))
        .args(args)
        .current_dir(dir)
        .env("BP2_THREADS", "2")
        .output()
        .expect("run bp2")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn simulate_accurate_post_under_full_information() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "fi.toml",
        "schema_version = 1\nseed = 11\n[scenario]\npolicy = \"fully_informative\"\nlambda = 0.5\ncondition_state = 1\n",
    );
    let o = bp2(&["simulate", "--config", &cfg, "--out", "runs/fi.csv", "--fast"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = read_ensemble(&dir.path().join("runs/fi.csv")).unwrap();
    assert_eq!(rows.len(), 1501);
    assert_eq!(rows[0].event_index, 0);
    assert!(rows.last().unwrap().mean_eta < 0.05);
    let tags = read_tags(&dir.path().join("runs/fi.tags.csv")).unwrap();
    assert_eq!(tags.len(), 1);
    assert_eq!(tags[0].belief, 1.0);
}

#[test]
fn simulate_hybrid_summary_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "h.toml", "schema_version = 1\n[scenario]\nk = 1.0\nlambda = 0.5\n");
    let o = bp2(&["simulate", "--config", &cfg, "--out", "h.csv", "--seed", "5"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let line = stdout(&o);
    let field = |key: &str| -> f64 {
        let rest = &line[line.find(key).unwrap() + key.len()..];
        rest.split_whitespace().next().unwrap().parse().unwrap()
    };
    assert!((field("final ") - 0.5).abs() <= 0.02, "{line}");
    assert_eq!(field("predicted "), 0.5);
}

#[test]
fn seed_controls_output() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str, out: &str| {
        let o = bp2(&["simulate", "--fast", "--seed", seed, "--out", out], dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read(dir.path().join(out)).unwrap()
    };
    assert_eq!(run("1", "a.csv"), run("1", "b.csv"));
    assert_ne!(run("1", "a.csv"), run("2", "c.csv"));
}

#[test]
fn ensemble_writes_ode_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "e.toml",
        "schema_version = 1\n[ensemble]\nalpha_xx = 0.25\nalpha_yx = 0.75\n[branching]\nn_events = 500\n",
    );
    let o = bp2(&["ensemble", "--config", &cfg, "--replications", "40", "--out", "e.csv"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read_ensemble(&dir.path().join("e.csv")).unwrap().len(), 501);
    let ode = read_ode(&dir.path().join("e.ode.csv")).unwrap();
    let end = ode.last().unwrap();
    assert!((end.t - 500f64.ln()).abs() < 1e-9);
    assert!((end.eta - 0.5).abs() < 1e-3);
}

#[test]
fn equilibrium_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = bp2(&["equilibrium", "--k", "0.6", "--out", "eq.csv"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let row = read_equilibrium(&dir.path().join("eq.csv")).unwrap()[0];
    assert!((row.lambda_bar - 5.0 / 6.0).abs() < 1e-10);
    assert!((row.lambda_star - row.lambda_bar).abs() <= row.lambda_bar / 200.0 + 1e-12);
    assert!(row.psi <= 0.0 && row.curvature >= -1e-9);
    let support = read_support(&dir.path().join("eq.support.csv")).unwrap();
    assert!(support.iter().all(|s| s.belief == 0.0 || s.belief == 1.0));
    assert!(dir.path().join("eq.txt").exists());

    let o = bp2(&["equilibrium", "--k", "1", "--out", "eq1.csv"], dir.path());
    let row = read_equilibrium(&dir.path().join("eq1.csv")).unwrap()[0];
    assert!(o.status.success());
    assert!((row.lambda_star - 0.5).abs() < 1e-12 && (row.sender_value - 0.5).abs() < 1e-9);
}

#[test]
fn sweep_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", "schema_version = 1\n[sweep]\nk = 1.0\nlambdas = [0.2, 0.35, 0.5]\n");
    let o = bp2(&["sweep", "--config", &cfg, "--fast", "--out", "s.csv"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = read_sweep(&dir.path().join("s.csv")).unwrap();
    assert_eq!(rows.len(), 3);
    for r in rows {
        assert!((r.predicted_eta - (1.0 - r.lambda)).abs() < 1e-12);
        assert!((r.simulated_eta - r.predicted_eta).abs() <= 3.0 * r.std_error + 0.03);
    }
}

#[test]
fn verify_default_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = bp2(&["verify", "--fast", "--out", "report.txt"], dir.path());
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    let report = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert_eq!(report.lines().count(), 7);
    assert!(report.lines().all(|l| l.starts_with("PASS")));
}

#[test]
fn verify_fixtures_fail() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "flip.toml", "schema_version = 1\n[fixtures]\nflip_ic_sign = true\n");
    let o = bp2(&["verify", "--fast", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL g identity"));

    let cfg = write(dir.path(), "sub.toml", "schema_version = 1\n[fixtures]\nsubcritical_m = 0.5\n");
    let o = bp2(&["verify", "--fast", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.contains("FAIL fixed point vs ODE") && out.contains("subcritical"), "{out}");
}

#[test]
fn validation_failures_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = bp2(&["equilibrium", "--k", "0.4"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("c'(1)"));

    let cfg = write(dir.path(), "bad.toml", "schema_version = 1\n[scenario]\nk = 1.0\nlambda = 0.6\n");
    let o = bp2(&["simulate", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("lambda_bar"));

    let cfg = write(dir.path(), "v.toml", "schema_version = 9\n");
    assert_eq!(bp2(&["simulate", "--config", &cfg], dir.path()).status.code(), Some(2));
    let cfg = write(dir.path(), "typo.toml", "schema_version = 1\n[branching]\nx_0 = 3\n");
    assert_eq!(bp2(&["ensemble", "--config", &cfg], dir.path()).status.code(), Some(2));
    let cfg = write(dir.path(), "neg.toml", "schema_version = 1\n[ensemble]\nalpha_xx = 1.5\n");
    assert_eq!(bp2(&["ensemble", "--config", &cfg], dir.path()).status.code(), Some(2));
    assert_eq!(bp2(&["nope"], dir.path()).status.code(), Some(2));
    assert_eq!(bp2(&["simulate", "--replications", "0"], dir.path()).status.code(), Some(2));
}

#[test]
fn runtime_failures_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = bp2(&["simulate", "--config", "missing.toml"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    // Output path is a directory.
    std::fs::create_dir(dir.path().join("taken")).unwrap();
    let o = bp2(&["simulate", "--fast", "--out", "taken"], dir.path());
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}
