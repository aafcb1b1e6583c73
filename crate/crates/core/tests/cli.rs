use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use plap::config::ExperimentConfig;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn plap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plap")).args(args).output().unwrap()
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

const HEAT: &str = r#"
[grid]
n_cells = 16

[time]
T = 0.05
dt = 0.005

[model]
p = 2.0

[noise]
kind = "zero"

[initial.u0]
kind = "sine"

[mc]
seed = 1
n_paths = 2
"#;

const SMALL: &str = r#"
[grid]
n_cells = 16

[time]
T = 0.02
dt = 0.005

[model]
p = [2.0, 3.0]

[noise]
kind = "bounded_trunc"
L = 1.0
M = 2.0

[initial.u0]
kind = "spike"
height = 5.0

[initial.v0]
kind = "sine"

[mc]
seed = 3
n_paths = 4
"#;

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn shipped_configs_validate() {
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let o = plap(&["validate", path.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}: {}", path.display(), text(&o));
    }
}

#[test]
fn exit_zero_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let out = dir.path().join("out");
    let o = plap(&["verify-contraction", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    for f in [
        "verify-contraction_p2.csv",
        "verify-contraction_p3.csv",
        "verify-contraction_summary.json",
        "verify-contraction_manifest.json",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    let csv = std::fs::read_to_string(out.join("verify-contraction_p2.csv")).unwrap();
    assert!(csv.starts_with("quantity,level,mean,stderr,n,dt,h,seed\n"));

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("verify-contraction_summary.json")).unwrap()).unwrap();
    for entry in summary.as_array().unwrap() {
        for key in ["quantity", "value", "stderr", "threshold", "pass"] {
            assert!(entry.get(key).is_some(), "{key}");
        }
    }

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("verify-contraction_manifest.json")).unwrap()).unwrap();
    let files: Vec<&str> = manifest["files"].as_array().unwrap().iter().map(|f| f.as_str().unwrap()).collect();
    assert_eq!(files.len(), 3);
    for f in files {
        assert!(Path::new(f).exists());
    }
    assert_eq!(manifest["seed"], 3);
}

#[test]
fn manifest_echo_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let out = dir.path().join("out");
    let o = plap(&[
        "verify-cauchy",
        cfg.to_str().unwrap(),
        "--seed",
        "9",
        "--paths",
        "3",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(matches!(o.status.code(), Some(0 | 1)), "{}", text(&o));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("verify-cauchy_manifest.json")).unwrap()).unwrap();
    let echo = ExperimentConfig::from_toml_str(manifest["config"].as_str().unwrap()).unwrap();
    assert!(echo.validate().is_empty());
    assert_eq!((echo.mc.seed, echo.mc.n_paths), (9, 3));

    let echoed = write(dir.path(), "echo.toml", manifest["config"].as_str().unwrap());
    let again = dir.path().join("again");
    plap(&["verify-cauchy", echoed.to_str().unwrap(), "--out-dir", again.to_str().unwrap()]);
    for f in ["verify-cauchy_p2.csv", "verify-cauchy_p3.csv"] {
        assert_eq!(std::fs::read(out.join(f)).unwrap(), std::fs::read(again.join(f)).unwrap());
    }
}

#[test]
fn exit_one_names_the_failing_quantity() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "strict.toml",
        &format!("{HEAT}\n[thresholds]\nheat_max_error = 1e-9\n"),
    );
    let o = plap(&["convergence-heat", cfg.to_str().unwrap(), "--out-dir", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("threshold failed: heat.error"), "{}", text(&o));
}

#[test]
fn exit_two_on_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");

    let bad_dt = write(dir.path(), "dt.toml", &HEAT.replace("dt = 0.005", "dt = 0.5"));
    let o = plap(&["verify-energy", bad_dt.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains("time.dt"), "{}", text(&o));

    let o = plap(&["convergence-heat", bad_dt.to_str().unwrap(), "--dt", "0.01", "--out-dir", out.to_str().unwrap()]);
    assert!(matches!(o.status.code(), Some(0 | 1)), "--dt override: {}", text(&o));

    let p1 = write(dir.path(), "p1.toml", &HEAT.replace("p = 2.0", "p = 1.0"));
    let o = plap(&["validate", p1.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains("p must exceed 1"));

    let o = plap(&["validate", write(dir.path(), "h.toml", HEAT).to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let o = plap(&["verify-energy", write(dir.path(), "h2.toml", HEAT).to_str().unwrap(), "--paths", "-4"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains("mc.n_paths"));

    let o = plap(&["validate", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = plap(&["validate", write(dir.path(), "junk.toml", "grid = [").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    // missing v0 for a coupled estimator
    let o = plap(&["verify-contraction", write(dir.path(), "h3.toml", HEAT).to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", text(&o));
}

#[test]
fn exit_three_on_solver_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "solver.toml",
        &format!("{SMALL}\n[solver]\nmax_iter = 1\ngrad_tol = 1e-14\n"),
    );
    let o = plap(&["simulate", cfg.to_str().unwrap(), "--out-dir", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", text(&o));
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let read = |tag: &str| {
        let out = dir.path().join(tag);
        let o = plap(&["simulate", cfg.to_str().unwrap(), "--seed", "7", "--out-dir", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", text(&o));
        std::fs::read(out.join("simulate_p3.csv")).unwrap()
    };
    let a = read("a");
    assert_eq!(a, read("b"));
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("t,node,value\n"));
    assert_eq!(text.lines().count(), 1 + 5 * 15);
}
