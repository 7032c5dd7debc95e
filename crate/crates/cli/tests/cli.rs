use std::fs;
use std::path::{Path, PathBuf};

use pebo_cli::config::parse;
use pebo_cli::main_with_args;
use pebo_cli::report::compare_table;
use pebo_cli::{execute, CliError};

fn bundled(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn write_cfg(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn pebo(args: &[&str]) -> i32 {
    main_with_args(std::iter::once("pebo").chain(args.iter().copied()))
}

const SHORT_MECH: &str = "kind = \"mech\"\nhorizon = 1.0\n[mech]\nexample = \"pendulum\"\npe_window = 0.5\n";

#[test]
fn run_writes_all_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "m.cfg", SHORT_MECH);
    let out = tmp.path().join("out");
    let code = pebo(&["run", "--quiet", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    for f in ["trajectory.csv", "estimator.csv", "pe_report.csv", "summary.txt"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("delta_min: "));
    assert!(summary.contains("check offset_invariance: PASS"));
    assert!(summary.lines().any(|l| l.starts_with("checks: ")));
    let header = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(header.starts_with("t,"));
}

#[test]
fn zero_horizon_is_config_invalid() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "bad.cfg", "kind = \"cuk-case1\"\nhorizon = 0.0\n");
    assert_eq!(pebo(&["check", "--config", cfg.to_str().unwrap()]), 2);
}

#[test]
fn unknown_key_is_config_invalid_with_key_path() {
    let e = parse("kind = \"pmsm\"\n[pmsm]\nbogus = 1\n").err().unwrap();
    assert!(matches!(e, CliError::Config(ref m) if m.contains("bogus")), "{e}");
}

#[test]
fn missing_config_is_io_failure() {
    assert_eq!(pebo(&["check", "--config", "/nonexistent/x.cfg"]), 4);
}

#[test]
fn unwritable_output_is_io_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "m.cfg", SHORT_MECH);
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let code = pebo(&["run", "--quiet", "--config", cfg.to_str().unwrap(), "--out", blocker.to_str().unwrap()]);
    assert_eq!(code, 4);
}

#[test]
fn blown_up_integration_is_diverged() {
    // a gain far beyond the stability limit of the filters at this step
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        tmp.path(),
        "div.cfg",
        "kind = \"mech\"\ndt = 0.5\nhorizon = 50.0\n[mech]\nexample = \"pendulum\"\npe_window = 1.0\n[observer]\nalpha = 1e3\n",
    );
    assert_eq!(pebo(&["check", "--config", cfg.to_str().unwrap()]), 3);
}

#[test]
fn lti_c1_headline() {
    let cfg = pebo_cli::config::load(&bundled("lti_c1.cfg")).unwrap();
    let out = execute(&cfg, 0, false).unwrap();
    assert_eq!(out.headline.as_deref(), Some("observable: true, cascade: infeasible"));
    assert_eq!(pebo(&["check", "--quiet", "--config", bundled("lti_c1.cfg").to_str().unwrap()]), 0);
}

#[test]
fn compare_requires_matching_grids() {
    let tmp = tempfile::tempdir().unwrap();
    let a = write_cfg(tmp.path(), "a.cfg", SHORT_MECH);
    let b = write_cfg(tmp.path(), "b.cfg", &SHORT_MECH.replace("horizon = 1.0", "horizon = 2.0"));
    let code = pebo(&["compare", "--quiet", "--config", a.to_str().unwrap(), "--config", b.to_str().unwrap()]);
    assert_eq!(code, 5);
}

#[test]
fn compare_rejects_runs_without_metrics() {
    let c1 = bundled("lti_c1.cfg");
    let code = pebo(&["compare", "--quiet", "--config", c1.to_str().unwrap(), "--config", c1.to_str().unwrap()]);
    assert_eq!(code, 5);
}

#[test]
fn compare_needs_two_configs() {
    let a = bundled("mech_pendulum.cfg");
    assert_eq!(pebo(&["compare", "--quiet", "--config", a.to_str().unwrap()]), 5);
}

#[test]
fn identical_configs_compare_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let a = write_cfg(tmp.path(), "a.cfg", SHORT_MECH);
    let cfg = pebo_cli::config::load(&a).unwrap();
    let x = execute(&cfg, 0, false).unwrap();
    let y = execute(&cfg, 0, false).unwrap();
    assert_eq!(x.segments, y.segments);
    let table = compare_table(&x, &y, ("a", "b")).unwrap();
    assert!(table.lines().last().unwrap().trim_end().ends_with('='));
    let out = tmp.path().join("cmp");
    let code = pebo(&[
        "compare",
        "--quiet",
        "--config",
        a.to_str().unwrap(),
        "--config",
        a.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(out.join("compare.txt").is_file());
}

#[test]
fn case2_high_gain_beats_low_gain() {
    let low = execute(&pebo_cli::config::load(&bundled("cuk_case2_low.cfg")).unwrap(), 1, false).unwrap();
    let high = execute(&pebo_cli::config::load(&bundled("cuk_case2_high.cfg")).unwrap(), 1, false).unwrap();
    assert_eq!(low.segments.len(), 5);
    for (l, h) in low.segments.iter().zip(&high.segments) {
        assert!(h.mean_error < l.mean_error, "segment at {}: {} vs {}", l.start, h.mean_error, l.mean_error);
    }
    let table = compare_table(&high, &low, ("high", "low")).unwrap();
    assert_eq!(table.lines().filter(|l| l.trim_end().ends_with(" A")).count(), 5);
}

#[test]
fn failing_check_exits_one() {
    // with a tiny gain the velocity estimate cannot settle within 0.2 s
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        tmp.path(),
        "slow.cfg",
        "kind = \"mech\"\nhorizon = 0.2\n[mech]\nexample = \"pendulum\"\npe_window = 0.1\n[observer]\ngamma = 1e-3\n",
    );
    assert_eq!(pebo(&["check", "--quiet", "--config", cfg.to_str().unwrap()]), 1);
}

#[test]
fn seed_flag_changes_only_randomized_checks() {
    let cfg = pebo_cli::config::load(&bundled("lti_sweep.cfg")).unwrap();
    let a = execute(&cfg, 1, true).unwrap();
    let b = execute(&cfg, 2, true).unwrap();
    let sweep = |o: &pebo_cli::Outcome| o.info.iter().find(|(k, _)| k == "sweep").unwrap().1.clone();
    assert_ne!(sweep(&a), sweep(&b));
    let traj = |o: &pebo_cli::Outcome| o.artifacts.iter().find(|x| x.name == "trajectory.csv").unwrap().bytes.clone();
    assert_eq!(traj(&a), traj(&b));
}
