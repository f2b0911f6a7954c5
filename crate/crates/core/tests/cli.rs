use std::path::{Path, PathBuf};
use std::process::Command;

use ethlab::cli::{output::sha256_hex, ExperimentConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ethlab"))
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn exit_code(args: &[&str]) -> i32 {
    bin().args(args).output().unwrap().status.code().unwrap()
}

const SMALL: &str = r#"
experiment = "spectrum"
symmetries = ["parity"]

[hamiltonian]
kind = "qubit"
sites = 6
"#;

#[test]
fn config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = write(tmp.path(), "empty.toml", "");
    let broken = write(tmp.path(), "broken.toml", "experiment = \n[hamiltonian");
    let unknown = write(tmp.path(), "unknown.toml", &format!("{SMALL}\ncolour = 3\n"));
    let nested = write(tmp.path(), "nested.toml", &format!("{SMALL}\nfoo = 1\n"));
    let charge_on_qubits = write(tmp.path(), "charge.toml", &SMALL.replace("parity", "charge"));
    for p in [&empty, &broken, &unknown, &nested, &charge_on_qubits] {
        assert_eq!(exit_code(&["spectrum", "--config", p.to_str().unwrap()]), 2, "{}", p.display());
    }
    let missing = tmp.path().join("nope.toml");
    assert_ne!(exit_code(&["spectrum", "--config", missing.to_str().unwrap()]), 0);
    // experiment named in the file disagrees with the subcommand
    let ok = write(tmp.path(), "ok.toml", SMALL);
    assert_eq!(exit_code(&["levels", "--config", ok.to_str().unwrap()]), 2);
}

#[test]
fn bad_usage_exits_with_two() {
    assert_eq!(exit_code(&[]), 2);
    assert_eq!(exit_code(&["frobnicate"]), 2);
    assert_eq!(exit_code(&["spectrum"]), 2);
    assert_eq!(exit_code(&["--help"]), 0);
}

#[test]
fn bad_thread_count_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "ok.toml", SMALL);
    let out = bin()
        .args(["spectrum", "--config", cfg.to_str().unwrap()])
        .env("ETHLAB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn runtime_failure_exits_with_one() {
    // an energy no state can reach exhausts the rejection sampler
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "evolve.toml",
        r#"
experiment = "evolve"
symmetries = ["parity"]

[hamiltonian]
kind = "qubit"
sites = 6

[evolve]
state = "product"
target_energy = -0.99
energy_tol = 0.001
max_attempts = 20
observables = ["sz(1)"]
t0 = 0.0
t1 = 1.0
"#,
    );
    let out = tmp.path().join("out");
    let code = exit_code(&["evolve", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 1);
}

#[test]
fn manifest_records_checksums_and_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "ok.toml", SMALL);
    let out = tmp.path().join("run");
    let status = bin()
        .args(["spectrum", "--config", cfg.to_str().unwrap(), "--seed", "42", "--out", out.to_str().unwrap()])
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["command"], "spectrum");
    assert_eq!(m["seed"], 42);
    assert_eq!(m["config"]["hamiltonian"]["sites"], 6);
    let files = m["files"].as_array().unwrap();
    assert!(!files.is_empty());
    for f in files {
        let bytes = std::fs::read(out.join(f["name"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"].as_str().unwrap(), sha256_hex(&bytes));
        assert_eq!(f["bytes"].as_u64().unwrap() as usize, bytes.len());
    }
    let spectrum = std::fs::read_to_string(out.join("spectrum.csv")).unwrap();
    assert_eq!(spectrum.lines().count(), 1 + 64);
}

#[test]
fn shipped_recipes_parse_and_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().and_then(|e| e.to_str()) != Some("toml") {
            continue;
        }
        let cfg = ExperimentConfig::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        let kind = cfg.experiment.unwrap_or_else(|| panic!("{} names no experiment", p.display()));
        cfg.validate(kind).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        n += 1;
    }
    assert!(n >= 10);
}
