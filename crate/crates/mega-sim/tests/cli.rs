//! End-to-end contract tests for the command-line binary: exit codes,
//! deterministic reruns, and cache transparency.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mega-sim"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("process exited with a code")
}

const LDOS_L4: &str = r#"
    experiment = "ldos"

    [model]
    sites = 4
    u = 10.0

    [source]
    type = "gibbs"
    beta = 1.0
    mu = 5.0
    kind = "grand_canonical"
"#;

#[test]
fn validate_accepts_good_config_and_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_config(dir.path(), "good.toml", LDOS_L4);
    let out = bin().arg("validate").arg(&good).output().unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let bad = write_config(
        dir.path(),
        "bad.toml",
        &format!("{LDOS_L4}\nmystery_knob = 3\n"),
    );
    let out = bin().arg("validate").arg(&bad).output().unwrap();
    assert_eq!(code(&out), 2);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("mystery_knob"), "stderr: {stderr}");
}

#[test]
fn empty_window_exits_2_before_heavy_work() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "window.toml",
        r#"
        experiment = "ldos"

        [model]
        sites = 4
        u = 10.0

        [source]
        type = "window"
        e_min = 1.0e6
        e_max = 1.0e6
        total_n = 4
    "#,
    );
    let out = bin()
        .arg("run")
        .arg(&cfg)
        .arg("--output")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn oversize_sector_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "big.toml",
        &format!(
            "{LDOS_L4}
            [compute]
            dense_cap = 10
        "
        ),
    );
    let out = bin()
        .arg("run")
        .arg(&cfg)
        .arg("--output")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn reruns_and_cached_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "ldos.toml", LDOS_L4);
    let run = |out_name: &str, cache: Option<&Path>, threads: Option<&str>| {
        let out_dir = dir.path().join(out_name);
        let mut cmd = bin();
        cmd.arg("run").arg(&cfg).arg("--output").arg(&out_dir);
        if let Some(c) = cache {
            cmd.arg("--cache-dir").arg(c);
        }
        if let Some(t) = threads {
            cmd.arg("--threads").arg(t);
        }
        let out = cmd.output().unwrap();
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(out_dir.join("ldos.csv")).unwrap()
    };
    let cache_dir = dir.path().join("cache");
    let cold = run("cold", None, None);
    let rerun = run("rerun", None, None);
    let warm_fill = run("warm_fill", Some(&cache_dir), None);
    let warm = run("warm", Some(&cache_dir), None);
    let single_thread = run("single", None, Some("1"));
    assert_eq!(cold, rerun, "plain rerun differs");
    assert_eq!(cold, warm_fill, "cache-filling run differs from cold");
    assert_eq!(cold, warm, "cached run differs from cold");
    assert_eq!(cold, single_thread, "thread count changed the data");
    // the cache actually stored spectra
    assert!(std::fs::read_dir(&cache_dir).unwrap().count() > 0);
}

#[test]
fn nonconverged_mega_fit_still_exits_0() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "mega.toml",
        r#"
        experiment = "mega"

        [model]
        sites = 4
        u = 10.0

        [source]
        type = "ramp"
        tau = 5.0

        [fit]
        convergence_threshold = 1e-12
    "#,
    );
    let out_dir = dir.path().join("out");
    let out = bin()
        .arg("run")
        .arg(&cfg)
        .arg("--output")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["results"]["converged"], false);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("did not reach"), "stdout: {stdout}");
}
