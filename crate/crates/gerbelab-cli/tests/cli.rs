//! Exit-code and output contract of the command-line driver.

use std::process::{Command, Output};

fn gerbelab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gerbelab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).to_string()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).to_string()
}

#[test]
fn verify_scalar_suite_passes_with_json_report() {
    let out = gerbelab(&["verify-thm52", "--n", "1", "--samples", "50"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["schema"], 1);
    assert_eq!(report["suite"], "thm52");
    assert_eq!(report["checks"].as_array().unwrap().len(), 4);
    for check in report["checks"].as_array().unwrap() {
        assert_eq!(check["pass"], true, "{check}");
    }
    // config reproduces the run
    for key in ["n", "samples", "seed", "tol_closed", "tol_fd", "contour_nodes", "fd_step"] {
        assert!(report["config"].get(key).is_some(), "missing config {key}");
    }
    // no wallclock without --timing
    assert!(report.get("wallclock_ms").is_none());
}

#[test]
fn verify_rejects_dimension_cap() {
    let out = gerbelab(&["verify-thm52", "--n", "7"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_reports_failures_under_absurd_tolerance() {
    let out = gerbelab(&["verify-thm52", "--n", "1", "--samples", "3", "--tol-fd", "1e-18"]);
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let failing: Vec<&str> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["pass"] == false)
        .map(|c| c["check_id"].as_str().unwrap())
        .collect();
    assert!(failing.contains(&"E2") && failing.contains(&"E4"), "{failing:?}");
}

#[test]
fn verify_timing_flag_embeds_wallclock() {
    let out = gerbelab(&["verify-thm52", "--n", "1", "--samples", "2", "--timing"]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(report.get("wallclock_ms").is_some());
}

#[test]
fn verify_reports_are_byte_identical() {
    let a = gerbelab(&["verify-thm52", "--n", "1", "--samples", "5", "--seed", "9"]);
    let b = gerbelab(&["verify-thm52", "--n", "1", "--samples", "5", "--seed", "9"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn cocycle_requires_dimension() {
    let out = gerbelab(&["cocycle"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cocycle_abelian_is_tight_and_reports_exact_zero_slots() {
    let out = gerbelab(&["cocycle", "--n", "1", "--probes", "10"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let checks = report["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 5);
    // conditions on absent components are exactly 0 with no samples
    assert_eq!(checks[0]["max_abs_residual"], 0.0);
    assert_eq!(checks[0]["samples"], 0);
    assert_eq!(checks[1]["max_abs_residual"], 0.0);
    for check in checks {
        assert!(check["max_abs_residual"].as_f64().unwrap() < 1e-8, "{check}");
    }
}

#[test]
fn integrate_targets_and_validation() {
    let out = gerbelab(&["integrate", "--target", "omega-u1", "--grid", "64"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let im = report["integral"]["im"].as_f64().unwrap();
    assert!((im + 2.0 * std::f64::consts::PI).abs() < 1e-6);
    assert!(report["note"].as_str().unwrap().contains("1/4π²"));

    let out = gerbelab(&["integrate", "--target", "bogus"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn xm_reduce_and_equal() {
    let out = gerbelab(&["xm", "reduce", "K(w0) * Kd(w0)"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).trim(), "{}");

    let out = gerbelab(&["xm", "reduce", "K(mul(w0, g1))"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("byte 10"), "{}", stderr(&out));

    let out = gerbelab(&["xm", "equal", "K(ad(g1,w1))", "K(w1)"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).trim(), "true");

    let out = gerbelab(&["xm", "equal", "K(w1)", "K(w2)"]);
    assert_eq!(stdout(&out).trim(), "false");
}

#[test]
fn xm_cs2_check_prints_both_chains() {
    let out = gerbelab(&["xm", "cs2-check"]);
    assert_eq!(out.status.code(), Some(0));
    let lines: Vec<String> = stdout(&out).lines().map(str::to_string).collect();
    assert_eq!(lines, vec!["{w0:+1, w3:-1}".to_string(), "{}".to_string()]);
}

#[test]
fn xm_nerve_check_verifies_fifteen_pairs() {
    let out = gerbelab(&["xm", "nerve-check"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 15);
    assert!(text.lines().all(|l| l.starts_with("ok ")));
}
