use std::path::Path;
use std::process::{Command, Output};

fn phasemix(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phasemix"))
        .args(args)
        .env("PHASEMIX_OUTPUT_DIR", out)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(p: impl AsRef<Path>) -> String {
    std::fs::read_to_string(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

#[test]
fn oracle_suites_pass() {
    let dir = tempfile::tempdir().unwrap();
    for suite in ["detailed-balance", "es-identity", "sw-stationarity", "all"] {
        let o = phasemix(dir.path(), &["oracle-check", "--suite", suite, "--experiment", suite]);
        assert!(o.status.success(), "{suite}: {}", stderr(&o));
        let csv = read(dir.path().join(suite).join("oracle.csv"));
        assert!(csv.lines().count() > 1);
        assert!(csv.lines().skip(1).all(|l| l.ends_with(",true")), "{csv}");
    }
}

#[test]
fn same_seed_gives_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let args = |exp: &'static str| {
        vec!["wsm-scan", "--seed", "11", "--side", "12", "--beta", "1.2", "--radii", "1,2", "--samples", "300", "--experiment", exp]
    };
    for exp in ["a", "b"] {
        let o = phasemix(dir.path(), &args(exp));
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let (a, b) = (read(dir.path().join("a/wsm.csv")), read(dir.path().join("b/wsm.csv")));
    assert_eq!(a, b);
    assert!(a.starts_with("param,value,estimate,half_width,n_samples\n"));

    let sim = |exp: &'static str, workers: &'static str| {
        let o = phasemix(
            dir.path(),
            &["simulate", "--seed", "3", "--side", "6", "--beta", "0.7", "--replicas", "3", "--init", "all-plus,strip",
              "--horizon-continuous-time", "2", "--workers", workers, "--experiment", exp],
        );
        assert!(o.status.success(), "{}", stderr(&o));
        read(dir.path().join(exp).join("trajectories.csv"))
    };
    assert_eq!(sim("s1", "1"), sim("s2", "2"));
}

#[test]
fn config_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(
        &cfg,
        "experiment = \"hits\"\nmaster_seed = 4\nside = 4\nbeta = 0.2\nmode = \"restricted-plus\"\n\
         t_cap_continuous_time = 5.0\nreplicas = 20\n",
    )
    .unwrap();
    let o = phasemix(dir.path(), &["hit-stats", "--config", cfg.to_str().unwrap(), "--replicas", "30"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = read(dir.path().join("hits/hit_stats.csv"));
    assert!(csv.lines().nth(1).unwrap().ends_with(",30"), "{csv}");
    let manifest: serde_json::Value = serde_json::from_str(&read(dir.path().join("hits/manifest.json"))).unwrap();
    assert_eq!(manifest["status"], "complete");
    assert_eq!(manifest["config"]["replicas"], 30);
    assert_eq!(manifest["config"]["master_seed"], 4);
    assert!(manifest["outputs"].as_array().unwrap().iter().any(|v| v == "hit_stats.csv"));
}

#[test]
fn diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let missing = phasemix(dir.path(), &["simulate", "--config", "/no/such/file.toml", "--seed", "1"]);
    assert!(!missing.status.success());
    assert!(stderr(&missing).contains("/no/such/file.toml"));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "beta = 0.5\nhorizon = 3.0\n").unwrap();
    let o = phasemix(dir.path(), &["simulate", "--config", bad.to_str().unwrap(), "--seed", "1"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("horizon"), "{}", stderr(&o));

    let o = phasemix(dir.path(), &["simulate", "--side", "4", "--beta", "0.5"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("--seed"));

    let o = phasemix(dir.path(), &["frobnicate"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("Usage"));

    let o = phasemix(dir.path(), &["simulate", "--seed", "1", "--side", "4"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("beta"));
    let m: serde_json::Value = serde_json::from_str(&read(dir.path().join("simulate/manifest.json"))).unwrap();
    assert_eq!(m["status"], "failed");
}

#[test]
fn rc_then_coarse() {
    let dir = tempfile::tempdir().unwrap();
    let o = phasemix(dir.path(), &["rc", "--seed", "2", "--side", "16", "--bond-probability", "0.9", "--samples", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let bonds = dir.path().join("rc/bonds.txt");
    let o = phasemix(dir.path(), &["coarse", "--side", "16", "--k", "4", "--input", bonds.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = read(dir.path().join("coarse/coarse.csv"));
    assert_eq!(csv.lines().count(), 5);
    for row in csv.lines().skip(1) {
        assert_eq!(row.split(',').nth(4), Some("0"), "single-giant violation in {row}");
    }
    assert_eq!(read(dir.path().join("coarse/fields.txt")).lines().filter(|l| l.contains(' ')).count(), 4);
}

#[test]
fn rrg_and_reveal() {
    let dir = tempfile::tempdir().unwrap();
    let o = phasemix(dir.path(), &["rrg-gen", "--graph-seed", "7", "--vertices", "16", "--degree", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(read(dir.path().join("rrg-gen/graph.txt")).starts_with("general 0 0 16"));
    assert!(read(dir.path().join("rrg-gen/rrg.csv")).contains(",7,"));

    let o = phasemix(
        dir.path(),
        &["reveal-couple", "--seed", "1", "--geometry", "box", "--side", "4", "--bond-probability", "0.9",
          "--inner-radius", "2", "--replicas", "6"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read(dir.path().join("reveal-couple/runs.csv")).lines().count(), 7);
}
