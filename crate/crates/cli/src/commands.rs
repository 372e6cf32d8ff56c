//! Experiment drivers behind the subcommands.

use std::path::{Path, PathBuf};

use cascade_core::analytic::TwoResClosedForm;
use cascade_core::dynamics::{max_p2_deviation, TimeSeries};
use cascade_core::eigen::{biorthogonality_check, decompose, solve_by_expansion, BiorthogonalSystem, Pairing};
use cascade_core::inversion::{validate_method, ValidationReport};
use cascade_core::kernel::{build_kernel, LaplaceNode};
use cascade_core::pseudomode::{evolve_with, EvolveReport, IntegratorConfig};
use cascade_core::{solve_complex, Topology};
use num_complex::Complex64;

use crate::config::{method_name, topology_name, SimulationConfig};
use crate::error::{CliError, Result};
use crate::output::{format_sig, population_curves, write_table, write_time_series, Curve, Plot};

/// Largest tolerated trace drift of the pseudo-mode density matrix.
pub const TRACE_DRIFT_TOL: f64 = 1e-9;
/// `P2(0)` must equal one to this accuracy.
pub const INITIAL_STATE_TOL: f64 = 1e-6;
/// `|Im b2(s)|` on real `s` for the two-reservoir model.
pub const REAL_AXIS_IMAG_TOL: f64 = 1e-8;
/// Expansion solution vs direct solve, relative infinity norm.
pub const EXPANSION_TOL: f64 = 1e-6;
pub const BIORTHOGONALITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, limit, passed: value <= limit }
    }

    pub fn at_least(name: &str, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, limit, passed: value >= limit }
    }

    pub fn line(&self) -> String {
        format!(
            "check {}: {} (limit {}) {}",
            self.name,
            format_sig(self.value, 4),
            format_sig(self.limit, 4),
            if self.passed { "PASS" } else { "FAIL" }
        )
    }
}

/// Range and initial-state checks on a population series.
pub fn physical_checks(series: &TimeSeries, tol: f64) -> Vec<Check> {
    let mut checks = Vec::new();
    if series.t.first() == Some(&0.0) {
        checks.push(Check::at_most("p2(0) deviation", (series.p2[0] - 1.0).abs(), INITIAL_STATE_TOL));
    }
    let excursion = series
        .p2
        .iter()
        .map(|&p| (-p).max(p - 1.0).max(0.0))
        .fold(0.0, f64::max);
    checks.push(Check::at_most("p2 outside [0,1]", excursion, tol));
    if let Some(p0) = &series.p0 {
        let min = p0.iter().copied().fold(f64::INFINITY, f64::min);
        checks.push(Check::at_least("min p0", min, -tol));
    }
    checks
}

pub fn run_single(cfg: &SimulationConfig) -> Result<TimeSeries> {
    Ok(cfg.run_context(Topology::SingleReservoir)?.run()?)
}

pub fn run_matrix(cfg: &SimulationConfig, topology: Topology) -> Result<TimeSeries> {
    Ok(cfg.run_context(topology)?.run()?)
}

/// Closed-form two-reservoir series on the configured time grid.
pub fn analytic_series(cfg: &SimulationConfig) -> Result<TimeSeries> {
    if !cfg.is_resonant() {
        return Err(CliError::Config("the closed form needs a resonant atom (atom.delta1 = atom.delta2 = 0)".into()));
    }
    let r = &cfg.reservoir;
    let exact = TwoResClosedForm::centered(r.gamma, r.omega_coupling, r.omega0)?;
    let t = cfg.time_grid();
    let b2 = t.iter().map(|&x| exact.b2_exact(x)).collect();
    Ok(TimeSeries::from_b2(t, b2))
}

#[derive(Debug, Clone)]
pub struct TwoResReport {
    pub numeric: TimeSeries,
    pub analytic: TimeSeries,
    pub max_dp2: f64,
    /// Largest `|Im b2(s)|` over a few real nodes.
    pub max_imag_real_axis: f64,
}

pub const REAL_AXIS_NODES: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 5.0];

pub fn run_two_res(cfg: &SimulationConfig) -> Result<TwoResReport> {
    let ctx = cfg.run_context(Topology::TwoReservoirs)?;
    let analytic = analytic_series(cfg)?;
    let numeric = ctx.run()?;
    let max_dp2 = max_p2_deviation(&numeric, &analytic)?;
    let mut max_imag_real_axis = 0.0f64;
    for s in REAL_AXIS_NODES {
        let node = LaplaceNode::for_spec(&ctx.spec, Complex64::new(s, 0.0))?;
        let system = build_kernel(&ctx.spec, &ctx.atom, node, &ctx.grid)?;
        max_imag_real_axis = max_imag_real_axis.max(solve_complex(&system)?.b2bar.im.abs());
    }
    Ok(TwoResReport { numeric, analytic, max_dp2, max_imag_real_axis })
}

pub fn run_pseudomode(cfg: &SimulationConfig) -> Result<EvolveReport> {
    Ok(evolve_with(&cfg.pseudomode_params()?, &cfg.time_grid(), &IntegratorConfig::default())?)
}

#[derive(Debug, Clone)]
pub struct CompareReport {
    pub matrix: TimeSeries,
    pub pseudomode: EvolveReport,
    pub max_dp2: f64,
}

pub fn run_compare(cfg: &SimulationConfig) -> Result<CompareReport> {
    let pseudomode = run_pseudomode(cfg)?;
    let matrix = run_single(cfg)?;
    let max_dp2 = max_p2_deviation(&matrix, &pseudomode.series)?;
    Ok(CompareReport { matrix, pseudomode, max_dp2 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub halfwidth: f64,
    pub max_dp2: f64,
}

/// Oracle for the configured topology: pseudo-mode for one reservoir,
/// the closed form for two.
pub fn oracle_series(cfg: &SimulationConfig) -> Result<TimeSeries> {
    match cfg.reservoir.topology {
        Topology::SingleReservoir => Ok(run_pseudomode(cfg)?.series),
        Topology::TwoReservoirs => analytic_series(cfg),
    }
}

/// `max |P2(N) - P2(oracle)|` for each `(n, halfwidth)`.
pub fn run_convergence_on(cfg: &SimulationConfig, grids: &[(usize, f64)]) -> Result<Vec<ConvergenceRow>> {
    if grids.len() < 2 {
        return Err(CliError::Config("a convergence study needs at least two grids".into()));
    }
    let oracle = oracle_series(cfg)?;
    grids
        .iter()
        .map(|&(n, halfwidth)| {
            let series = cfg.run_context_with(cfg.reservoir.topology, n, halfwidth)?.run()?;
            Ok(ConvergenceRow { n, halfwidth, max_dp2: max_p2_deviation(&series, &oracle)? })
        })
        .collect()
}

pub fn run_convergence(cfg: &SimulationConfig) -> Result<Vec<ConvergenceRow>> {
    let grids: Vec<(usize, f64)> = cfg.convergence_grids.iter().map(|&n| (n, cfg.grid.halfwidth)).collect();
    run_convergence_on(cfg, &grids)
}

/// Errors must shrink strictly as the grid grows.
pub fn convergence_checks(rows: &[ConvergenceRow], tol: f64) -> Vec<Check> {
    let mut sorted = rows.to_vec();
    sorted.sort_by_key(|r| r.n);
    let worst_ratio = sorted
        .windows(2)
        .map(|w| w[1].max_dp2 / w[0].max_dp2)
        .fold(0.0, f64::max);
    let mut checks = vec![Check { passed: worst_ratio < 1.0, ..Check::at_most("error ratio finer/coarser", worst_ratio, 1.0) }];
    if let Some(last) = sorted.last() {
        checks.push(Check::at_most(&format!("max |dP2| at N={}", last.n), last.max_dp2, tol));
    }
    checks
}

#[derive(Debug, Clone)]
pub struct EigenReport {
    pub s: f64,
    pub topology: Topology,
    pub bio: BiorthogonalSystem,
    pub biorthogonality: f64,
    /// `max |f_expansion - f_direct| / max |f_direct|`.
    pub expansion_vs_direct: f64,
    pub max_eigen_residual: f64,
    pub kernel_norm: f64,
    pub nonzero: usize,
    pub trace: Complex64,
}

pub fn run_eigen(cfg: &SimulationConfig) -> Result<EigenReport> {
    let ctx = cfg.run_context(cfg.reservoir.topology)?;
    let node = LaplaceNode::for_spec(&ctx.spec, Complex64::new(cfg.eigen_s, 0.0))?;
    let system = build_kernel(&ctx.spec, &ctx.atom, node, &ctx.grid)?;
    let bio = decompose(&system)?;
    let expansion = solve_by_expansion(&system, &bio)?;
    let direct = solve_complex(&system)?;
    let scale = direct.f_vals.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let expansion_vs_direct = expansion
        .solution
        .f_vals
        .iter()
        .zip(&direct.f_vals)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max)
        / scale;
    Ok(EigenReport {
        s: cfg.eigen_s,
        topology: cfg.reservoir.topology,
        biorthogonality: biorthogonality_check(&bio),
        expansion_vs_direct,
        max_eigen_residual: bio.max_eigen_residual(),
        kernel_norm: bio.kernel_norm(),
        nonzero: bio.nonzero_count(1e-10),
        trace: system.k_matrix.trace(),
        bio,
    })
}

pub fn run_invert_test(cfg: &SimulationConfig) -> Result<ValidationReport> {
    let spec = cfg.spec(cfg.reservoir.topology)?;
    let inv = cfg.inversion_config(&spec);
    inv.validate(0.0)?;
    Ok(validate_method(&inv))
}

/// `dir/stem_tag.ext` next to `path`.
pub fn sibling(path: &Path, tag: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}_{tag}.{}", ext.to_string_lossy()),
        None => format!("{stem}_{tag}"),
    };
    path.with_file_name(name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Single,
    TwoRes,
    TwoResAnalytic,
    Pseudomode,
    Eigen,
    Compare,
    Convergence,
    InvertTest,
}

fn plot_populations(cfg: &SimulationConfig, title: &str, curves: Vec<Curve>) -> Result<()> {
    if let Some(path) = &cfg.output.plot {
        Plot { title: title.into(), x_label: "t (1/Gamma)".into(), y_label: "population".into(), curves }.write(path)?;
    }
    Ok(())
}

fn write_series(cfg: &SimulationConfig, series: &TimeSeries) -> Result<()> {
    if let Some(path) = &cfg.output.csv {
        write_time_series(path, series, cfg.output.precision)?;
    }
    Ok(())
}

/// Runs `command`, writes the requested files, prints a summary on
/// standard output and returns the checks it evaluated.
pub fn execute(command: Command, cfg: &SimulationConfig) -> Result<Vec<Check>> {
    cfg.validate()?;
    let digits = cfg.output.precision;
    let tol = cfg.check.population_tol;
    let r = &cfg.reservoir;
    let checks = match command {
        Command::Single => {
            let series = run_single(cfg)?;
            write_series(cfg, &series)?;
            plot_populations(cfg, &format!("single reservoir, Omega = {}", r.omega_coupling), population_curves(&series, ""))?;
            println!("single reservoir: N={} W={} Gamma={} Omega={}", cfg.grid.n, cfg.grid.halfwidth, r.gamma, r.omega_coupling);
            println!("p2(t_max) = {}", format_sig(*series.p2.last().unwrap_or(&f64::NAN), digits));
            physical_checks(&series, tol)
        }
        Command::TwoRes => {
            let rep = run_two_res(cfg)?;
            write_series(cfg, &rep.numeric)?;
            if let Some(path) = &cfg.output.csv {
                write_time_series(&sibling(path, "analytic"), &rep.analytic, digits)?;
            }
            let mut curves = population_curves(&rep.numeric, "matrix");
            curves.push(Curve { label: "closed form P2".into(), x: rep.analytic.t.clone(), y: rep.analytic.p2.clone() });
            plot_populations(cfg, &format!("two reservoirs, Omega = {}", r.omega_coupling), curves)?;
            println!("two reservoirs: N={} W={} Gamma={} Omega={}", cfg.grid.n, cfg.grid.halfwidth, r.gamma, r.omega_coupling);
            println!("max |dP2| vs closed form = {}", format_sig(rep.max_dp2, 6));
            let mut checks = physical_checks(&rep.numeric, tol);
            checks.push(Check::at_most("max |dP2| vs closed form", rep.max_dp2, cfg.check.tolerance));
            checks.push(Check::at_most("|Im b2(s)| on real s", rep.max_imag_real_axis, REAL_AXIS_IMAG_TOL));
            checks
        }
        Command::TwoResAnalytic => {
            let series = analytic_series(cfg)?;
            write_series(cfg, &series)?;
            plot_populations(cfg, &format!("two reservoirs (closed form), Omega = {}", r.omega_coupling), population_curves(&series, ""))?;
            println!("two reservoirs, closed form: Gamma={} Omega={}", r.gamma, r.omega_coupling);
            println!("p2(t_max) = {}", format_sig(*series.p2.last().unwrap_or(&f64::NAN), digits));
            physical_checks(&series, tol)
        }
        Command::Pseudomode => {
            let rep = run_pseudomode(cfg)?;
            write_series(cfg, &rep.series)?;
            plot_populations(cfg, &format!("pseudo-mode, Omega = {}", r.omega_coupling), population_curves(&rep.series, ""))?;
            println!("pseudo-mode: Gamma={} Omega={} fock_cutoff={}", r.gamma, r.omega_coupling, cfg.fock_cutoff);
            println!("steps = {} rejected = {}", rep.steps, rep.rejected);
            println!("max population above cutoff 2 = {}", format_sig(rep.max_high_fock, 4));
            let mut checks = physical_checks(&rep.series, tol);
            checks.push(Check::at_most("trace drift", rep.max_trace_drift, TRACE_DRIFT_TOL));
            checks
        }
        Command::Compare => {
            let rep = run_compare(cfg)?;
            if let Some(path) = &cfg.output.csv {
                let pm = &rep.pseudomode.series;
                let opt = |v: &Option<Vec<f64>>, k: usize| v.as_ref().map(|v| format_sig(v[k], digits)).unwrap_or_default();
                let rows: Vec<Vec<String>> = (0..rep.matrix.len())
                    .map(|k| {
                        vec![
                            format_sig(rep.matrix.t[k], digits),
                            format_sig(rep.matrix.p2[k], digits),
                            opt(&rep.matrix.p1, k),
                            opt(&rep.matrix.p0, k),
                            format_sig(pm.p2[k], digits),
                            opt(&pm.p1, k),
                            opt(&pm.p0, k),
                            format_sig(rep.matrix.p2[k] - pm.p2[k], digits),
                        ]
                    })
                    .collect();
                write_table(
                    path,
                    &["t", "p2_matrix", "p1_matrix", "p0_matrix", "p2_pseudomode", "p1_pseudomode", "p0_pseudomode", "dp2"],
                    &rows,
                )?;
            }
            plot_populations(
                cfg,
                &format!("matrix method vs pseudo-mode, Omega = {}", r.omega_coupling),
                vec![
                    Curve { label: "matrix P2".into(), x: rep.matrix.t.clone(), y: rep.matrix.p2.clone() },
                    Curve { label: "pseudo-mode P2".into(), x: rep.pseudomode.series.t.clone(), y: rep.pseudomode.series.p2.clone() },
                ],
            )?;
            println!("matrix method vs pseudo-mode: Gamma={} Omega={} N={}", r.gamma, r.omega_coupling, cfg.grid.n);
            println!("max |dP2| = {}", format_sig(rep.max_dp2, 6));
            let mut checks = physical_checks(&rep.matrix, tol);
            checks.push(Check::at_most("max |dP2| vs pseudo-mode", rep.max_dp2, cfg.check.tolerance));
            checks.push(Check::at_most("pseudo-mode trace drift", rep.pseudomode.max_trace_drift, TRACE_DRIFT_TOL));
            checks
        }
        Command::Convergence => {
            let rows = run_convergence(cfg)?;
            println!("convergence ({} reservoir), oracle = {}", topology_name(r.topology), match r.topology {
                Topology::SingleReservoir => "pseudo-mode",
                Topology::TwoReservoirs => "closed form",
            });
            for row in &rows {
                println!("N={:>6} W={:>8} max |dP2| = {}", row.n, row.halfwidth, format_sig(row.max_dp2, 6));
            }
            if let Some(path) = &cfg.output.csv {
                let table: Vec<Vec<String>> = rows
                    .iter()
                    .map(|row| vec![row.n.to_string(), format_sig(row.halfwidth, digits), format_sig(row.max_dp2, digits)])
                    .collect();
                write_table(path, &["n", "halfwidth", "max_dp2"], &table)?;
            }
            if let Some(path) = &cfg.output.plot {
                let curve = Curve {
                    label: "max |dP2|".into(),
                    x: rows.iter().map(|row| row.n as f64).collect(),
                    y: rows.iter().map(|row| row.max_dp2.log10()).collect(),
                };
                Plot { title: "grid convergence".into(), x_label: "N".into(), y_label: "log10 max |dP2|".into(), curves: vec![curve] }
                    .write(path)?;
            }
            convergence_checks(&rows, cfg.check.tolerance)
        }
        Command::Eigen => {
            let rep = run_eigen(cfg)?;
            println!(
                "eigen-expansion ({} reservoir) at s = {}: N={}",
                topology_name(rep.topology),
                rep.s,
                rep.bio.len()
            );
            println!("trace K = {} {:+}i", format_sig(rep.trace.re, digits), format_sig(rep.trace.im, digits));
            println!("eigenvalues above 1e-10 ||K|| = {}", rep.nonzero);
            let shown: Vec<usize> = {
                let mut idx: Vec<usize> = (0..rep.bio.len()).collect();
                idx.sort_by(|&a, &b| rep.bio.xi[b].norm().total_cmp(&rep.bio.xi[a].norm()).then(a.cmp(&b)));
                idx.truncate(5);
                idx
            };
            for n in shown {
                let xi = rep.bio.xi[n];
                println!("  xi[{n}] = {} {:+}i", format_sig(xi.re, 8), format_sig(xi.im, 8));
            }
            println!("expansion vs direct = {}", format_sig(rep.expansion_vs_direct, 4));
            if let Some(path) = &cfg.output.csv {
                let rows: Vec<Vec<String>> = (0..rep.bio.len())
                    .map(|n| {
                        let pairing = match rep.bio.pairing[n] {
                            Pairing::Separated => "separated",
                            Pairing::NullCluster => "null",
                            Pairing::Degenerate => "degenerate",
                        };
                        vec![
                            n.to_string(),
                            format_sig(rep.bio.xi[n].re, digits),
                            format_sig(rep.bio.xi[n].im, digits),
                            pairing.to_string(),
                        ]
                    })
                    .collect();
                write_table(path, &["index", "xi_re", "xi_im", "pairing"], &rows)?;
            }
            let mut checks = vec![
                Check::at_most("expansion vs direct", rep.expansion_vs_direct, EXPANSION_TOL),
                Check::at_most("biorthogonality", rep.biorthogonality, BIORTHOGONALITY_TOL),
                Check::at_most("eigen residual / ||K||", rep.max_eigen_residual / rep.kernel_norm.max(f64::MIN_POSITIVE), 1e-9),
            ];
            if rep.topology == Topology::TwoReservoirs {
                let count = rep.nonzero as f64;
                checks.push(Check { passed: rep.nonzero <= 1, ..Check::at_most("nonzero eigenvalues (rank 1)", count, 1.0) });
            }
            checks
        }
        Command::InvertTest => {
            let rep = run_invert_test(cfg)?;
            println!("inversion battery, method = {}", method_name(rep.method));
            for p in &rep.pairs {
                match &p.failure {
                    Some(msg) => println!("  {:<18} failed: {msg}", p.name),
                    None => println!("  {:<18} max error {}", p.name, format_sig(p.max_error, 3)),
                }
            }
            if let Some(path) = &cfg.output.csv {
                let rows: Vec<Vec<String>> = rep
                    .pairs
                    .iter()
                    .map(|p| {
                        vec![
                            p.name.to_string(),
                            format_sig(p.max_error, digits),
                            if p.failure.is_none() && p.max_error <= rep.tolerance { "pass" } else { "fail" }.into(),
                        ]
                    })
                    .collect();
                write_table(path, &["pair", "max_error", "status"], &rows)?;
            }
            rep.pairs.iter().map(|p| Check::at_most(&format!("inverse of {}", p.name), p.max_error, rep.tolerance)).collect()
        }
    };
    for c in &checks {
        println!("{}", c.line());
    }
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sibling_names() {
        assert_eq!(sibling(Path::new("out/run.csv"), "analytic"), PathBuf::from("out/run_analytic.csv"));
        assert_eq!(sibling(Path::new("run"), "x"), PathBuf::from("run_x"));
    }

    #[test]
    fn convergence_ordering() {
        let row = |n, e| ConvergenceRow { n, halfwidth: 30.0, max_dp2: e };
        let ok = convergence_checks(&[row(150, 1e-3), row(50, 0.2), row(100, 1e-2)], 1e-2);
        assert!(ok.iter().all(|c| c.passed));
        let bad = convergence_checks(&[row(50, 0.2), row(100, 0.3)], 1.0);
        assert!(!bad[0].passed);
    }

    #[test]
    fn physical_check_flags() {
        let s = TimeSeries::from_p2(vec![0.0, 1.0], vec![1.0, 1.01]);
        let c = physical_checks(&s, 1e-3);
        assert!(c[0].passed);
        assert!(!c[1].passed);
    }
}
