//! End-to-end checks of the `pnflow` binary: verbs, exit statuses, output
//! files and determinism.

use std::path::Path;
use std::process::{Command, Output};

fn pnflow(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pnflow"))
        .args(args)
        .env("PNFLOW_OUTPUT_ROOT", root)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn list_presets_names_every_preset() {
    let dir = tempfile::tempdir().unwrap();
    let o = pnflow(dir.path(), &["list-presets"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for name in [
        "operator-validation",
        "circle-law",
        "nested-independence",
        "abar-convergence",
        "corrector-study",
        "barrier-check",
        "interaction-drift",
    ] {
        assert!(text.contains(name), "{name} missing from\n{text}");
    }
    let o = pnflow(dir.path(), &["list-presets", "--keys"]);
    assert!(stdout(&o).contains("sim.eps"));
}

#[test]
fn invalid_configurations_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases: &[&[&str]] = &[
        &["validate-config", "--preset", "circle-law", "--set", "sim.epsilon=0.1"],
        &["validate-config", "--preset", "circle-law", "--set", "sim.eps=abc"],
        &["validate-config", "--preset", "no-such-preset"],
        &["validate-config"],
        &["run", "--preset", "circle-law", "--set", "sim.eps=-1"],
        &["run", "--preset", "operator-validation", "--set", "bad key=1"],
    ];
    for args in cases {
        let o = pnflow(dir.path(), args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0, "nothing is written");
}

#[test]
fn config_file_and_overrides_resolve() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# finer circle\npreset = circle-law\nsim.eps = 0.05\n").unwrap();
    let o = pnflow(dir.path(), &["validate-config", cfg.to_str().unwrap(), "--set", "sim.m=512"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("preset = circle-law"));
    assert!(text.contains("sim.eps = 0.05"));
    assert!(text.contains("sim.m = 512"));
}

#[test]
fn run_writes_outputs_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let o = pnflow(
            dir.path(),
            &["run", "--preset", "operator-validation", "--set", &format!("output.dir={name}")],
        );
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).contains("OVERALL PASS"));
        dir.path().join(name)
    };
    let a = run("a");
    let b = run("b");
    for f in ["eigenvalues.csv", "quadrature.csv", "summary.txt", "manifest.json"] {
        let x = std::fs::read(a.join(f)).unwrap_or_else(|_| panic!("{f} missing"));
        let y = std::fs::read(b.join(f)).unwrap();
        if f != "manifest.json" {
            assert_eq!(x, y, "{f} differs between runs");
        }
    }
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["preset"], "operator-validation");
    assert_eq!(m["pass"], true);
    assert_eq!(m["settings"]["output.dir"], "a");
    assert!(m["files"].as_array().unwrap().iter().any(|f| f == "eigenvalues.csv"));
    assert!(m["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true));
}
