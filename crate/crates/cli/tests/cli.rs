use std::path::Path;
use std::process::{Command, Output};

use cascade_cli::commands::{run_single, run_two_res};
use cascade_cli::output::{format_sig, read_time_series, time_series_csv, write_time_series};
use cascade_cli::SimulationConfig;
use cascade_core::dynamics::TimeSeries;

const SMALL: [&str; 4] = ["--set", "grid.n=40", "--set", "time.n_time=11"];

fn cascade(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cascade")).args(args).output().expect("binary runs")
}

fn small_config() -> SimulationConfig {
    let mut cfg = SimulationConfig::default();
    cfg.grid.n = 40;
    cfg.time.n_time = 11;
    cfg
}

fn printed(x: f64) -> f64 {
    format_sig(x, 12).parse().unwrap()
}

fn assert_round_trip(a: &TimeSeries, b: &TimeSeries) {
    assert_eq!(a.len(), b.len());
    let same = |x: &[f64], y: &[f64]| x.iter().zip(y).all(|(p, q)| printed(*p) == *q);
    assert!(same(&a.t, &b.t));
    assert!(same(&a.p2, &b.p2));
    assert_eq!(a.p1.is_some(), b.p1.is_some());
    if let (Some(x), Some(y)) = (&a.p1, &b.p1) {
        assert!(same(x, y));
    }
    if let (Some(x), Some(y)) = (&a.p0, &b.p0) {
        assert!(same(x, y));
    }
    assert_eq!(a.b2.is_some(), b.b2.is_some());
    if let (Some(x), Some(y)) = (&a.b2, &b.b2) {
        for (p, q) in x.iter().zip(y) {
            assert_eq!(printed(p.re), q.re);
            assert_eq!(printed(p.im), q.im);
        }
    }
}

#[test]
fn csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let series = run_single(&small_config()).unwrap();
    let path = dir.path().join("single.csv");
    write_time_series(&path, &series, 12).unwrap();
    assert_round_trip(&series, &read_time_series(&path).unwrap());

    let partial = TimeSeries::from_p2(vec![0.0, 0.5], vec![1.0, 0.25]);
    write_time_series(&path, &partial, 12).unwrap();
    assert_round_trip(&partial, &read_time_series(&path).unwrap());
}

#[test]
fn identical_config_gives_identical_csv() {
    let a = time_series_csv(&run_single(&small_config()).unwrap(), 12);
    let b = time_series_csv(&run_single(&small_config()).unwrap(), 12);
    assert_eq!(a, b);

    let dir = tempfile::tempdir().unwrap();
    let (p, q) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for path in [&p, &q] {
        let out = cascade(&[&["single", "--out", path.to_str().unwrap()], &SMALL[..]].concat());
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&q).unwrap());
}

#[test]
fn single_writes_csv_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("run.csv");
    let svg = dir.path().join("run.svg");
    let out = cascade(&[&["single", "--out", csv.to_str().unwrap(), "--plot", svg.to_str().unwrap()], &SMALL[..]].concat());
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("t,p2,p1,p0,b2_re,b2_im\n"));
    assert_eq!(text.lines().count(), 12);
    let series = read_time_series(&csv).unwrap();
    assert!((series.p2[0] - 1.0).abs() < 1e-6);
    assert!(std::fs::read_to_string(&svg).unwrap().contains("<polyline"));
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "reservoir.gamma = 2\ngrid.n = 70\n").unwrap();
    let out = cascade(&["single", "--config", cfg.to_str().unwrap(), "--set", "grid.n=80", "--show-config"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let parsed = SimulationConfig::parse(&text).unwrap();
    assert_eq!(parsed.reservoir.gamma, 2.0);
    assert_eq!(parsed.grid.n, 80);
}

#[test]
fn config_errors_exit_two() {
    for args in [
        vec!["single", "--set", "grid.n=abc"],
        vec!["single", "--set", "nothing.here=1"],
        vec!["single", "--set", "reservoir.gamma=-1"],
        vec!["single", "--config", "/nonexistent/run.cfg"],
        vec!["pseudomode", "--set", "atom.delta1=0.5"],
        vec!["bogus-subcommand"],
    ] {
        let out = cascade(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
    let out = cascade(&["single", "--set", "grid.n=abc"]);
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["code"], 2);
    assert_eq!(err["error"], "config");
}

#[test]
fn tolerance_failure_exits_one() {
    // far too coarse a grid for the default 1e-2 oracle tolerance
    let out = cascade(&["two-res", "--set", "grid.n=30", "--set", "time.n_time=11"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn numerical_failure_exits_three() {
    // real-node inversion cannot follow fast oscillations; P1 leaves [0, 1]
    let out = cascade(&["single", "--set", "grid.n=40", "--set", "time.n_time=3", "--set", "inversion.method=stehfest", "--set", "inversion.terms=8", "--set", "reservoir.omega_coupling=5"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn two_res_writes_both_series() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("two.csv");
    let out = cascade(&[&["two-res", "--out", csv.to_str().unwrap(), "--set", "check.tolerance=1"], &SMALL[..]].concat());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let analytic = read_time_series(&dir.path().join("two_analytic.csv")).unwrap();
    assert!(analytic.p1.is_none());
    assert_eq!(analytic.p2[0], 1.0);
    assert!(read_time_series(&csv).unwrap().p1.is_some());
}

#[test]
fn zero_coupling_keeps_upper_level() {
    let mut cfg = small_config();
    cfg.reservoir.omega_coupling = 0.0;
    let rep = run_two_res(&cfg).unwrap();
    assert!(rep.numeric.p2.iter().all(|p| (p - 1.0).abs() < 1e-6));
    assert!(rep.analytic.p2.iter().all(|p| (p - 1.0).abs() < 1e-12));
    assert!(rep.max_dp2 < 1e-6);
}

#[test]
fn invert_test_reports_stehfest_failure() {
    assert_eq!(cascade(&["invert-test", "--set", "time.n_time=21"]).status.code(), Some(0));
    let out = cascade(&["invert-test", "--set", "inversion.method=stehfest", "--set", "time.n_time=21"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("sin(t)"));
}

#[test]
fn eigen_and_convergence_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("spectrum.csv");
    let out = cascade(&["eigen", "--set", "grid.n=60", "--set", "reservoir.topology=two", "--out", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 61);
    assert_eq!(text.matches("separated").count(), 1);

    let out = cascade(&[
        "convergence",
        "--set",
        "reservoir.topology=two",
        "--set",
        "convergence.grids=20,40",
        "--set",
        "time.n_time=11",
        "--set",
        "check.tolerance=1",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn compare_writes_combined_table() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("cmp.csv");
    let out = cascade(&[&["compare", "--out", csv.to_str().unwrap(), "--set", "check.tolerance=1"], &SMALL[..]].concat());
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(Path::new(&csv)).unwrap();
    assert!(text.starts_with("t,p2_matrix,p1_matrix,p0_matrix,p2_pseudomode,"));
}
