use std::path::Path;
use std::process::{Command, Output};

fn zeno(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zeno"))
        .args(args)
        .env_remove("ZENO_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

#[test]
fn witness_reports_satisfiable_bundled_instance() {
    let o = zeno(&["witness", "--bundled", "--theta", "0.2"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).trim(), "satisfiable");
}

#[test]
fn witness_reports_unsatisfiable_variant_with_exit_zero() {
    let o = zeno(&["witness", "--bundled", "--add-clause", "1 2 3", "--theta", "0.2"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).trim(), "unsatisfiable");
}

#[test]
fn witness_reads_dimacs_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.cnf");
    std::fs::write(&path, "p cnf 3 2\n1 2 3 0\n-1 -2 -3 0\n").unwrap();
    let o = zeno(&["witness", path.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).trim(), "satisfiable");
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(code(&zeno(&["witness"])), 2);
    assert_eq!(code(&zeno(&["witness", "--bundled", "--theta", "0"])), 2);
    assert_eq!(code(&zeno(&["witness", "--bundled", "--add-clause", "1 x"])), 2);
    assert_eq!(code(&zeno(&["witness", "/nonexistent/file.cnf"])), 2);
    assert_eq!(code(&zeno(&["experiment", "fig99"])), 2);
    assert_eq!(code(&zeno(&["sweep", "--bundled", "--engine", "warp"])), 2);
    assert_eq!(code(&zeno(&["no-such-command"])), 2);
}

#[test]
fn malformed_dimacs_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cnf");
    std::fs::write(&path, "p cnf 3 1\n1 2 banana 0\n").unwrap();
    let o = zeno(&["witness", path.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}

#[test]
fn stochastic_commands_require_a_seed() {
    assert_eq!(code(&zeno(&["solve-iterative", "--bundled"])), 2);
    assert_eq!(code(&zeno(&["generate", "--planted", "--n", "5"])), 2);
    assert_eq!(code(&zeno(&["experiment", "stirap-check"])), 2);
}

#[test]
fn iterative_solver_finds_planted_assignment() {
    let o = zeno(&["solve-iterative", "--bundled", "--seed", "3", "--steps", "20"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).trim(), "satisfiable 00000");
    let o = zeno(&["solve-iterative", "--bundled", "--add-clause", "1 2 3", "--seed", "3", "--steps", "20"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).trim(), "unsatisfiable");
}

#[test]
fn generate_is_reproducible_and_writes_files() {
    let a = zeno(&["generate", "--planted", "--n", "6", "--seed", "9"]);
    let b = zeno(&["generate", "--planted", "--n", "6", "--seed", "9"]);
    assert_eq!(code(&a), 0);
    assert_eq!(stdout(&a), stdout(&b));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.cnf");
    let o = zeno(&["generate", "--planted", "--n", "6", "--seed", "9", "--output", path.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read_to_string(&path).unwrap(), stdout(&a));
    assert_eq!(code(&zeno(&["generate", "--n", "6", "--seed", "9"])), 2);
}

#[test]
fn projected_sweep_on_unsatisfiable_instance_reports_empty_kernel() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = zeno(&[
        "sweep", "--bundled", "--add-clause", "1 2 3", "--engine", "projected", "--steps", "10", "--out", out,
    ]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("empty allowed subspace"));
}

#[test]
fn sweep_writes_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for engine in ["dissipative", "measurement", "adiabatic", "projected", "tf"] {
        let o = zeno(&["sweep", "--bundled", "--engine", engine, "--steps", "10", "--total-time", "5", "--out", out]);
        assert_eq!(code(&o), 0, "{engine}: {}", String::from_utf8_lossy(&o.stderr));
        let csv = std::fs::read_to_string(dir.path().join(format!("sweep_{engine}.csv"))).unwrap();
        assert!(csv.starts_with("theta,survival,success\n"));
        assert_eq!(csv.lines().count(), 11);
        assert!(dir.path().join(format!("sweep_{engine}.config.toml")).exists());
    }
}

#[test]
fn experiment_writes_scan_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = zeno(&["experiment", "fig7-scan", "--strengths", "1000", "--steps", "10", "--out", out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("fig7-scan.csv")).unwrap();
    assert!(csv.starts_with("strength,success_3state,success_tf,success_projected,"));
    assert_eq!(csv.lines().count(), 2);
    let meta = std::fs::read_to_string(dir.path().join("fig7-scan.meta.json")).unwrap();
    assert!(meta.contains("\"experiment\": \"fig7-scan\""));
}

#[test]
fn effective_config_reproduces_outputs() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let o = zeno(&[
        "experiment", "figE-dw4", "--steps", "20", "--t-grid", "1,10", "--theta-points", "5",
        "--out", first.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let cfg = first.path().join("figE-dw4.config.toml");
    let o = zeno(&["experiment", "--config", cfg.to_str().unwrap(), "--out", second.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for entry in std::fs::read_dir(first.path()).unwrap() {
        let name = entry.unwrap().file_name();
        if name.to_string_lossy().ends_with(".config.toml") {
            continue;
        }
        let a = std::fs::read(first.path().join(&name)).unwrap();
        let b = std::fs::read(second.path().join(&name)).unwrap();
        assert_eq!(a, b, "{name:?} differs");
    }
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "command = \"witness\"\nbundled = true\ntheta = 0.2\n").unwrap();
    let o = zeno(&["witness", "--config", cfg.to_str().unwrap()]);
    assert_eq!(stdout(&o).trim(), "satisfiable");
    let o = zeno(&["witness", "--config", cfg.to_str().unwrap(), "--add-clause", "1 2 3"]);
    assert_eq!(stdout(&o).trim(), "unsatisfiable");
    std::fs::write(&cfg, "command = \"witness\"\nbogus = 1\n").unwrap();
    assert_eq!(code(&zeno(&["witness", "--config", cfg.to_str().unwrap()])), 2);
}

#[test]
fn output_directory_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_zeno"))
        .args(["experiment", "stirap-check", "--seed", "1"])
        .env("ZENO_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(Path::new(&dir.path().join("stirap-check_random.csv")).exists());
    assert!(dir.path().join("stirap-check.meta.json").exists());
}

#[test]
fn experiment_list_prints_catalog() {
    let o = zeno(&["experiment", "list"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).lines().count(), 11);
}
