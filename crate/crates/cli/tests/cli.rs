//! End-to-end runs of the `metanet` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn metanet(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_metanet"))
        .args(args)
        .current_dir(cwd)
        .env_remove("METANET_OUT_DIR")
        .output()
        .unwrap()
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn fig4_run_writes_both_models() {
    let dir = tempfile::tempdir().unwrap();
    let out = metanet(
        &["run", "--builtin", "paper-fig4", "--model", "both", "--out", "results", "--stride", "500"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for model in ["metanet_s", "ctm_s"] {
        let d = dir.path().join("results").join(model);
        for q in ["q_m4", "q_m5", "q_m6", "rho_m4", "rho_m5", "rho_m6"] {
            assert_eq!(header(&d.join(format!("{q}.csv"))), format!("time_h,{q}"));
        }
        let rows = fs::read_to_string(d.join("q_m5.csv")).unwrap().lines().count();
        assert_eq!(rows, 1 + 60_000 / 500);
        assert!(d.join("trace.csv").exists());
        let summary = fs::read_to_string(d.join("summary.toml")).unwrap();
        assert!(summary.contains(&format!("model = \"{model}\"")), "{summary}");
    }
}

#[test]
fn fig3_run_writes_station_series() {
    let dir = tempfile::tempdir().unwrap();
    let out = metanet(&["run", "--builtin", "paper-fig3", "--out", "o", "--horizon", "3000"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let d = dir.path().join("o").join("metanet_s");
    for q in ["q_st", "qmax_st", "rho_s2", "q_s1", "l_st", "q_m1", "rho_s1", "q_m2", "rho_m2"] {
        assert!(d.join(format!("{q}.csv")).exists(), "{q}");
    }
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_metanet"))
        .args(["run", "--builtin", "paper-fig4", "--horizon", "100", "--plot="])
        .current_dir(dir.path())
        .env("METANET_OUT_DIR", "from_env")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("from_env/metanet_s/summary.toml").exists());
}

#[test]
fn scenario_file_round_trip_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let out = metanet(&["scenario", "--builtin", "paper-fig3", "--set", "station.dwell_steps=100"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("dwell_steps = 100"));
    fs::write(dir.path().join("s.toml"), &text).unwrap();
    let out = metanet(&["validate", "--scenario", "s.toml"], dir.path());
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "ok");
    let out = metanet(&["run", "--scenario", "s.toml", "--horizon", "200", "--out", "r"], dir.path());
    assert!(out.status.success());
    assert!(dir.path().join("r/metanet_s/trace.csv").exists());
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 5] = [
        &["run", "--builtin", "paper-fig4", "--bogus"],
        &["run"],
        &["run", "--builtin", "paper-fig4", "--set", "horizon=1", "--set", "horizon=2"],
        &["run", "--scenario", "missing.toml"],
        &["run", "--builtin", "paper-fig4", "--plot", "x_m5"],
    ];
    for args in cases {
        let out = metanet(args, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn invalid_scenario_lists_violations() {
    let dir = tempfile::tempdir().unwrap();
    let out = metanet(
        &["validate", "--builtin", "paper-fig4", "--set", "step=0.01", "--set", "freeway.m1.lanes=0"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("m1"), "{err}");
    assert!(err.contains("CFL"), "{err}");
}
