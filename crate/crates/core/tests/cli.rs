// Copyright 2026 The qdrift Developers
// SPDX-License-Identifier: Apache-2.0

use std::path::Path;
use std::process::{Command, Output};

fn qdrift(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qdrift"))
        .args(args)
        .output()
        .expect("spawn qdrift")
}

fn run_ok(args: &[&str]) -> Output {
    let out = qdrift(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn header(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn presets_list_names_every_preset() {
    let out = run_ok(&["presets", "list"]);
    let text = String::from_utf8(out.stdout).unwrap();
    for (name, _) in qdrift::scenario::PRESETS {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name} missing");
    }
}

#[test]
fn oracle_tables_print_csv() {
    for (kind, _) in qdrift::scenario::ORACLE_KINDS {
        let out = run_ok(&["oracle", kind]);
        let text = String::from_utf8(out.stdout).unwrap();
        assert!(text.lines().count() > 2, "{kind}");
    }
}

#[test]
fn survival_run_reproduces_from_its_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    let third = dir.path().join("third");
    let f = first.to_str().unwrap();
    run_ok(&["run", "fig2b", "--out", f]);
    assert_eq!(header(&first.join("results.csv")), "time,p00_mean,p00_stderr,p00_oracle");
    assert!(first.join("oracle.csv").exists());

    run_ok(&["run", "fig2b", "--out", second.to_str().unwrap()]);
    let manifest = first.join("manifest.json");
    run_ok(&["run", manifest.to_str().unwrap(), "--workers", "3", "--out", third.to_str().unwrap()]);
    let a = std::fs::read(first.join("results.csv")).unwrap();
    assert_eq!(a, std::fs::read(second.join("results.csv")).unwrap());
    assert_eq!(a, std::fs::read(third.join("results.csv")).unwrap());

    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(&manifest).unwrap()).unwrap();
    assert_eq!(m["scenario"]["seed"], 2026);
    assert!(m["qdrift_version"].is_string());
}

#[test]
fn seed_override_changes_the_result() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run_ok(&["run", "fig2d", "--out", a.to_str().unwrap()]);
    run_ok(&["run", "fig2d", "--seed", "7", "--out", b.to_str().unwrap()]);
    assert_ne!(
        std::fs::read(a.join("results.csv")).unwrap(),
        std::fs::read(b.join("results.csv")).unwrap()
    );
}

#[test]
fn transmittance_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "small.toml",
        r#"
kind = "dbrtd"
seed = 3
n_realizations = 1

[dbrtd]
v_l = 0.15
v_r = 0.15
gamma_phi = 0.3
energy_min = -0.2
energy_max = 0.2
energy_points = 2
packet_width = 15.0
"#,
    );
    let out = dir.path().join("out");
    run_ok(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(
        header(&out.join("results.csv")),
        "energy,T_sim,T_stderr,T_coherent_oracle,T_total_oracle"
    );
}

#[test]
fn jump_unraveling_override() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("qj");
    run_ok(&["run", "fig2d", "--unraveling", "qj", "--out", out.to_str().unwrap()]);
    let m: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["scenario"]["unraveling"], "qj");
}

#[test]
fn failures_exit_with_a_category() {
    let dir = tempfile::tempdir().unwrap();
    let cases: Vec<(Vec<String>, i32, &str)> = vec![
        (vec!["run".into(), "no-such-scenario".into()], 4, "[io]"),
        (
            vec![
                "run".into(),
                write(dir.path(), "unknown.toml", "kind = \"tls_qdpt\"\nseed = 1\nn_realizations = 1\nbogus = 1\n"),
            ],
            2,
            "[config]",
        ),
        (
            vec!["run".into(), write(dir.path(), "empty.toml", "")],
            2,
            "n_realizations",
        ),
        (vec!["oracle".into(), "nope".into()], 2, "[invalid-argument]"),
        (
            vec![
                "run".into(),
                write(
                    dir.path(),
                    "coarse.toml",
                    "kind = \"tls_qdpt\"\nseed = 1\nn_realizations = 1\n[tls]\ngamma_phi = [1.0]\nt_max = 1.0\ndt = 0.5\nstride = 1\n",
                ),
                "--out".into(),
                dir.path().join("o").to_string_lossy().into_owned(),
            ],
            3,
            "[invalid-parameter]",
        ),
    ];
    for (args, code, needle) in cases {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let out = qdrift(&args);
        let err = String::from_utf8_lossy(&out.stderr);
        assert_eq!(out.status.code(), Some(code), "{args:?}: {err}");
        assert!(err.contains(needle), "{args:?}: {err}");
    }
}
