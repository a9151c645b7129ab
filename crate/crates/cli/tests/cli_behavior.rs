//! End-to-end behavior of the `fshe` binary: artifact shapes, flag/config
//! precedence, strict config parsing, exit codes, and reproducibility of
//! reports from their own config echo.

use std::path::Path;
use std::process::{Command, Output};

fn fshe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fshe"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf8 stdout")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("utf8 stderr")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.display().to_string()
}

#[test]
fn eigens_emits_the_level_four_closed_forms() {
    let out = fshe(&["eigens", "--n", "4"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("j,lambda"));
    let want = [9.37258300203048, 32.0, 54.62741699796952];
    for (j, expect) in want.iter().enumerate() {
        let row = lines.next().unwrap();
        let (index, value) = row.split_once(',').unwrap();
        assert_eq!(index, (j + 1).to_string());
        let value: f64 = value.parse().unwrap();
        assert!(
            (value - expect).abs() <= 1e-12 * expect,
            "lambda_{} = {value}, want {expect}",
            j + 1
        );
    }
    assert_eq!(lines.next(), None);
}

#[test]
fn missing_subcommand_and_bad_flags_are_usage_errors() {
    assert_eq!(fshe(&[]).status.code(), Some(2));
    assert_eq!(fshe(&["eigens", "--no-such-flag"]).status.code(), Some(2));
    // Required value resolvable from neither flags nor config.
    let out = fshe(&["eigens"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--n"));
}

#[test]
fn unknown_config_key_is_rejected_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "typo.json", r#"{"alhpa": 1.5}"#);
    let out = fshe(&["--config", &config, "eigens", "--n", "4"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("alhpa"), "stderr: {}", stderr(&out));
    assert!(stdout(&out).is_empty(), "no partial artifact on failure");
}

#[test]
fn flags_override_config_values() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "base.json", r#"{"alpha": 2.0, "delta": 0.0}"#);
    // File value used when the flag is absent...
    let from_file = fshe(&["--config", &config, "gap", "--n", "8", "--t", "0.1"]);
    assert!(from_file.status.success());
    assert!(stdout(&from_file).contains("8,2,0,0.1,"));
    // ...and overridden when it is present.
    let overridden = fshe(&[
        "--config", &config, "gap", "--n", "8", "--t", "0.1", "--alpha", "1.5", "--delta", "0.5",
    ]);
    assert!(overridden.status.success());
    assert!(stdout(&overridden).contains("8,1.5,0.5,0.1,"));
}

#[test]
fn empty_config_with_full_flags_works() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "empty.json", "{}");
    let out = fshe(&[
        "--config", &config, "gap", "--n", "8", "--alpha", "1.5", "--delta", "0", "--t", "0.1",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert!(stdout(&out).starts_with("n,alpha,delta,t,sup_gap,hs_gap\n"));
}

#[test]
fn config_file_can_name_the_command() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "det.json",
        r#"{"command": "det-rate", "alpha": 1.5, "levels": [8, 16, 32]}"#,
    );
    let out = fshe(&["--config", &config]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["config"]["alpha"], 1.5);
    assert_eq!(report["theoretical"]["regime"], "deterministic");
}

#[test]
fn output_flag_redirects_the_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("eigens.csv");
    let out = fshe(&["eigens", "--n", "4", "--output", file.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(stdout(&out).is_empty());
    let written = std::fs::read_to_string(&file).unwrap();
    assert!(written.starts_with("j,lambda\n1,9.3725830020304"));
}

#[test]
fn green_kernel_is_symmetric_through_the_cli() {
    let a = fshe(&[
        "green", "--alpha", "1.5", "--t", "0.2", "--x", "0.3", "--y", "0.7",
    ]);
    let b = fshe(&[
        "green", "--alpha", "1.5", "--t", "0.2", "--x", "0.7", "--y", "0.3",
    ]);
    assert!(a.status.success() && b.status.success());
    let value = |out: &Output| -> f64 {
        stdout(out)
            .lines()
            .nth(1)
            .unwrap()
            .rsplit(',')
            .next()
            .unwrap()
            .parse()
            .unwrap()
    };
    assert_eq!(value(&a), value(&b));
}

#[test]
fn strong_rate_echoes_seed_and_flags_hypothesis_violations() {
    let out = fshe(&[
        "strong-rate",
        "--alpha",
        "1.5",
        "--levels",
        "4,8,16",
        "--ref-n",
        "32",
        "--samples",
        "2",
        "--steps",
        "8",
        "--seed",
        "99",
    ]);
    assert!(out.status.success(), "violations warn, they do not fail");
    let err = stderr(&out);
    assert!(err.contains("seed: 99"), "stderr: {err}");
    assert!(
        err.contains("warning"),
        "p = 2 deviation must be flagged: {err}"
    );
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["theoretical"]["hypotheses_met"], false);
}

#[test]
fn report_regenerates_bitwise_from_its_config_echo() {
    let dir = tempfile::tempdir().unwrap();
    let first = fshe(&[
        "strong-rate",
        "--alpha",
        "1.5",
        "--levels",
        "4,8,16",
        "--ref-n",
        "32",
        "--samples",
        "3",
        "--steps",
        "8",
        "--seed",
        "123",
    ]);
    assert!(first.status.success());
    let text = stdout(&first);
    let report: serde_json::Value = serde_json::from_str(&text).unwrap();
    let config = write_config(
        dir.path(),
        "echo.json",
        &serde_json::to_string(&report["config"]).unwrap(),
    );
    let second = fshe(&["--config", &config, "strong-rate"]);
    assert!(second.status.success());
    assert_eq!(
        stdout(&second),
        text,
        "echoed config must reproduce the report"
    );
}

#[test]
fn gruenwald_reports_first_order_convergence_on_the_identity() {
    let out = fshe(&["gruenwald", "--r", "0.5", "--levels", "64,256,1024"]);
    assert!(out.status.success());
    assert!(stderr(&out).contains("fitted order: 1.0"));
    let text = stdout(&out);
    let last = text.lines().last().unwrap();
    let value: f64 = last.split(',').nth(1).unwrap().parse().unwrap();
    assert!((value - 2.0 / std::f64::consts::PI.sqrt()).abs() < 2e-4);
}
