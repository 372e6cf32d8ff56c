//! Flat `section.key = value` configuration.
//!
//! ```text
//! # comment
//! reservoir.gamma = 1
//! reservoir.topology = two
//! grid.n = 150
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cascade_core::dynamics::RunContext;
use cascade_core::inversion::{InversionConfig, InversionMethod};
use cascade_core::pseudomode::PseudomodeParams;
use cascade_core::{AtomParams, FrequencyGrid, ReservoirSpec, Topology};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ReservoirSection {
    pub gamma: f64,
    pub omega_coupling: f64,
    pub omega0: f64,
    pub topology: Topology,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtomSection {
    /// Detuning of the 0 <-> 1 transition from the reservoir centre.
    pub delta1: f64,
    /// Detuning of the 1 <-> 2 transition.
    pub delta2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSection {
    pub n: usize,
    pub halfwidth: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InversionSection {
    pub method: InversionMethod,
    /// `None` picks `max(sigma_min, 2 / t_max)`.
    pub sigma: Option<f64>,
    pub terms: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSection {
    pub t_max: f64,
    pub n_time: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSection {
    pub csv: Option<PathBuf>,
    pub plot: Option<PathBuf>,
    pub precision: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckSection {
    /// Largest accepted `|dP2|` against an oracle.
    pub tolerance: f64,
    /// Slack of the population range checks.
    pub population_tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub reservoir: ReservoirSection,
    pub atom: AtomSection,
    pub grid: GridSection,
    pub inversion: InversionSection,
    pub time: TimeSection,
    pub fock_cutoff: usize,
    pub output: OutputSection,
    pub check: CheckSection,
    pub convergence_grids: Vec<usize>,
    /// Real Laplace node used by the `eigen` subcommand.
    pub eigen_s: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            reservoir: ReservoirSection {
                gamma: 1.0,
                omega_coupling: 1.0,
                omega0: 10.0,
                topology: Topology::SingleReservoir,
            },
            atom: AtomSection { delta1: 0.0, delta2: 0.0 },
            grid: GridSection { n: 150, halfwidth: 30.0 },
            inversion: InversionSection {
                method: InversionMethod::BromwichFourierSeries,
                sigma: None,
                terms: cascade_core::inversion::DEFAULT_TERMS,
            },
            time: TimeSection { t_max: 10.0, n_time: 200 },
            fock_cutoff: 2,
            output: OutputSection { csv: None, plot: None, precision: 12 },
            check: CheckSection { tolerance: 1e-2, population_tol: 1e-3 },
            convergence_grids: vec![50, 100, 150],
            eigen_s: 1.0,
        }
    }
}

pub const KEYS: &[&str] = &[
    "reservoir.gamma",
    "reservoir.omega_coupling",
    "reservoir.omega0",
    "reservoir.topology",
    "atom.delta1",
    "atom.delta2",
    "grid.n",
    "grid.halfwidth",
    "inversion.method",
    "inversion.sigma",
    "inversion.terms",
    "time.t_max",
    "time.n_time",
    "pseudomode.fock_cutoff",
    "output.csv",
    "output.plot",
    "output.precision",
    "check.tolerance",
    "check.population_tol",
    "convergence.grids",
    "eigen.s",
];

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| CliError::InvalidValue {
        key: key.into(),
        value: value.into(),
        reason: e.to_string(),
    })
}

fn parse_topology(key: &str, value: &str) -> Result<Topology> {
    match value.to_ascii_lowercase().as_str() {
        "single" | "single_reservoir" | "singlereservoir" => Ok(Topology::SingleReservoir),
        "two" | "two_reservoirs" | "tworeservoirs" | "two-res" => Ok(Topology::TwoReservoirs),
        _ => Err(CliError::InvalidValue {
            key: key.into(),
            value: value.into(),
            reason: "expected 'single' or 'two'".into(),
        }),
    }
}

pub fn topology_name(t: Topology) -> &'static str {
    match t {
        Topology::SingleReservoir => "single",
        Topology::TwoReservoirs => "two",
    }
}

pub fn method_name(m: InversionMethod) -> &'static str {
    match m {
        InversionMethod::BromwichFourierSeries => "euler",
        InversionMethod::GaverStehfest => "stehfest",
    }
}

impl SimulationConfig {
    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "reservoir.gamma" => self.reservoir.gamma = parse_num(key, v)?,
            "reservoir.omega_coupling" => self.reservoir.omega_coupling = parse_num(key, v)?,
            "reservoir.omega0" => self.reservoir.omega0 = parse_num(key, v)?,
            "reservoir.topology" => self.reservoir.topology = parse_topology(key, v)?,
            "atom.delta1" => self.atom.delta1 = parse_num(key, v)?,
            "atom.delta2" => self.atom.delta2 = parse_num(key, v)?,
            "grid.n" => self.grid.n = parse_num(key, v)?,
            "grid.halfwidth" => self.grid.halfwidth = parse_num(key, v)?,
            "inversion.method" => {
                self.inversion.method = v.parse().map_err(|e: cascade_core::Error| {
                    CliError::InvalidValue { key: key.into(), value: v.into(), reason: e.to_string() }
                })?
            }
            "inversion.sigma" => {
                self.inversion.sigma = if v.eq_ignore_ascii_case("auto") { None } else { Some(parse_num(key, v)?) }
            }
            "inversion.terms" => self.inversion.terms = parse_num(key, v)?,
            "time.t_max" => self.time.t_max = parse_num(key, v)?,
            "time.n_time" => self.time.n_time = parse_num(key, v)?,
            "pseudomode.fock_cutoff" => self.fock_cutoff = parse_num(key, v)?,
            "output.csv" => self.output.csv = (!v.is_empty()).then(|| PathBuf::from(v)),
            "output.plot" => self.output.plot = (!v.is_empty()).then(|| PathBuf::from(v)),
            "output.precision" => self.output.precision = parse_num(key, v)?,
            "check.tolerance" => self.check.tolerance = parse_num(key, v)?,
            "check.population_tol" => self.check.population_tol = parse_num(key, v)?,
            "convergence.grids" => {
                self.convergence_grids =
                    v.split(',').map(|x| parse_num(key, x.trim())).collect::<Result<_>>()?
            }
            "eigen.s" => self.eigen_s = parse_num(key, v)?,
            other => return Err(CliError::UnknownKey(other.into())),
        }
        Ok(())
    }

    /// `key=value` from the command line.
    pub fn set_assignment(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override '{assignment}' is not key=value")))?;
        self.set(k, v)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Parse { line: i + 1, message: format!("expected key = value, got '{line}'") })?;
            cfg.set(k, v).map_err(|e| match e {
                CliError::UnknownKey(_) | CliError::InvalidValue { .. } => {
                    CliError::Parse { line: i + 1, message: e.to_string() }
                }
                e => e,
            })?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })?;
        Self::parse(&text)
    }

    /// Range checks; called before any computation.
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, value: String, reason: &str| {
            Err(CliError::InvalidValue { key: key.into(), value, reason: reason.into() })
        };
        let r = &self.reservoir;
        if !(r.gamma > 0.0 && r.gamma.is_finite()) {
            return bad("reservoir.gamma", r.gamma.to_string(), "must be > 0");
        }
        if !(r.omega_coupling >= 0.0 && r.omega_coupling.is_finite()) {
            return bad("reservoir.omega_coupling", r.omega_coupling.to_string(), "must be >= 0");
        }
        if !(r.omega0 > 0.0 && r.omega0.is_finite()) {
            return bad("reservoir.omega0", r.omega0.to_string(), "must be > 0");
        }
        for (key, d) in [("atom.delta1", self.atom.delta1), ("atom.delta2", self.atom.delta2)] {
            if !(d.is_finite() && r.omega0 + d > 0.0) {
                return bad(key, d.to_string(), "transition frequency must stay positive");
            }
        }
        if !(2..=20_000).contains(&self.grid.n) {
            return bad("grid.n", self.grid.n.to_string(), "must be in 2..=20000");
        }
        if !(self.grid.halfwidth > 0.0 && self.grid.halfwidth.is_finite()) {
            return bad("grid.halfwidth", self.grid.halfwidth.to_string(), "must be > 0");
        }
        if let Some(s) = self.inversion.sigma {
            if !(s > 0.0 && s.is_finite()) {
                return bad("inversion.sigma", s.to_string(), "must be > 0");
            }
        }
        if !(8..=10_000).contains(&self.inversion.terms) {
            return bad("inversion.terms", self.inversion.terms.to_string(), "must be in 8..=10000");
        }
        if !(self.time.t_max > 0.0 && self.time.t_max.is_finite()) {
            return bad("time.t_max", self.time.t_max.to_string(), "must be > 0");
        }
        if !(1..=100_000).contains(&self.time.n_time) {
            return bad("time.n_time", self.time.n_time.to_string(), "must be in 1..=100000");
        }
        if !(2..=30).contains(&self.fock_cutoff) {
            return bad("pseudomode.fock_cutoff", self.fock_cutoff.to_string(), "must be in 2..=30");
        }
        if !(1..=17).contains(&self.output.precision) {
            return bad("output.precision", self.output.precision.to_string(), "must be in 1..=17");
        }
        if !(self.check.tolerance > 0.0) {
            return bad("check.tolerance", self.check.tolerance.to_string(), "must be > 0");
        }
        if !(self.check.population_tol > 0.0) {
            return bad("check.population_tol", self.check.population_tol.to_string(), "must be > 0");
        }
        if self.convergence_grids.iter().any(|&n| n < 2) {
            return bad("convergence.grids", format!("{:?}", self.convergence_grids), "sizes must be >= 2");
        }
        if !(self.eigen_s > 0.0 && self.eigen_s.is_finite()) {
            return bad("eigen.s", self.eigen_s.to_string(), "must be > 0");
        }
        Ok(())
    }

    pub fn is_resonant(&self) -> bool {
        self.atom.delta1 == 0.0 && self.atom.delta2 == 0.0
    }

    pub fn spec(&self, topology: Topology) -> Result<ReservoirSpec> {
        let r = &self.reservoir;
        Ok(ReservoirSpec::lorentzian(r.gamma, r.omega_coupling, r.omega0, topology)?)
    }

    pub fn atom_params(&self) -> Result<AtomParams> {
        Ok(AtomParams::detuned(self.reservoir.omega0, self.atom.delta1, self.atom.delta2)?)
    }

    pub fn frequency_grid(&self, n: usize, halfwidth: f64) -> Result<FrequencyGrid> {
        Ok(FrequencyGrid::trapezoid(self.reservoir.omega0, halfwidth, n)?)
    }

    pub fn inversion_config(&self, spec: &ReservoirSpec) -> InversionConfig {
        let mut inv = InversionConfig::with_horizon(self.time.t_max, self.time.n_time, spec.sigma_min());
        inv.method = self.inversion.method;
        inv.terms = self.inversion.terms;
        if let Some(s) = self.inversion.sigma {
            inv.sigma = s;
        }
        inv
    }

    pub fn time_grid(&self) -> Vec<f64> {
        InversionConfig { t_max: self.time.t_max, n_time: self.time.n_time, ..InversionConfig::default() }
            .time_grid()
    }

    /// Matrix-method context for `topology` on an `n`-point grid of half-width `halfwidth`.
    pub fn run_context_with(&self, topology: Topology, n: usize, halfwidth: f64) -> Result<RunContext> {
        let spec = self.spec(topology)?;
        let inv = self.inversion_config(&spec);
        let mut ctx = RunContext::new(spec, self.atom_params()?, self.frequency_grid(n, halfwidth)?, inv)?;
        ctx.population_tol = self.check.population_tol;
        Ok(ctx)
    }

    pub fn run_context(&self, topology: Topology) -> Result<RunContext> {
        self.run_context_with(topology, self.grid.n, self.grid.halfwidth)
    }

    pub fn pseudomode_params(&self) -> Result<PseudomodeParams> {
        if !self.is_resonant() {
            return Err(CliError::Config("the pseudo-mode model needs a resonant atom (atom.delta1 = atom.delta2 = 0)".into()));
        }
        Ok(PseudomodeParams::new(self.reservoir.omega_coupling, self.reservoir.gamma, self.fock_cutoff)?)
    }

    /// Canonical `key = value` listing, every key in [`KEYS`] order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let sigma = self.inversion.sigma.map_or_else(|| "auto".to_string(), |s| s.to_string());
        let grids: Vec<String> = self.convergence_grids.iter().map(|n| n.to_string()).collect();
        let values = [
            self.reservoir.gamma.to_string(),
            self.reservoir.omega_coupling.to_string(),
            self.reservoir.omega0.to_string(),
            topology_name(self.reservoir.topology).to_string(),
            self.atom.delta1.to_string(),
            self.atom.delta2.to_string(),
            self.grid.n.to_string(),
            self.grid.halfwidth.to_string(),
            method_name(self.inversion.method).to_string(),
            sigma,
            self.inversion.terms.to_string(),
            self.time.t_max.to_string(),
            self.time.n_time.to_string(),
            self.fock_cutoff.to_string(),
            path(&self.output.csv),
            path(&self.output.plot),
            self.output.precision.to_string(),
            self.check.tolerance.to_string(),
            self.check.population_tol.to_string(),
            grids.join(","),
            self.eigen_s.to_string(),
        ];
        for (k, v) in KEYS.iter().zip(values) {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = SimulationConfig::default();
        assert_eq!(c.grid.n, 150);
        assert_eq!(c.grid.halfwidth, 30.0);
        assert_eq!(c.time.n_time, 200);
        assert_eq!(c.time.t_max, 10.0);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn parse_with_comments() {
        let c = SimulationConfig::parse("# run\nreservoir.gamma = 2 # wide\n\ngrid.n=80\nreservoir.topology = two\n")
            .unwrap();
        assert_eq!(c.reservoir.gamma, 2.0);
        assert_eq!(c.grid.n, 80);
        assert_eq!(c.reservoir.topology, Topology::TwoReservoirs);
    }

    #[test]
    fn errors_carry_line_numbers() {
        match SimulationConfig::parse("grid.n = 10\ngrid.m = 3\n") {
            Err(CliError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(SimulationConfig::parse("grid.n 10"), Err(CliError::Parse { line: 1, .. })));
        assert!(SimulationConfig::parse("grid.n = ten").is_err());
    }

    #[test]
    fn text_round_trip() {
        let mut c = SimulationConfig::default();
        c.set_assignment("inversion.sigma=0.5").unwrap();
        c.set_assignment("convergence.grids=40,80").unwrap();
        c.set_assignment("output.csv=out.csv").unwrap();
        let back = SimulationConfig::parse(&c.to_text()).unwrap();
        assert_eq!(back, c);
        assert_eq!(KEYS.len(), c.to_text().lines().count());
    }

    #[test]
    fn validation_ranges() {
        for (k, v) in [
            ("reservoir.gamma", "0"),
            ("grid.n", "1"),
            ("inversion.terms", "4"),
            ("time.t_max", "-1"),
            ("pseudomode.fock_cutoff", "1"),
            ("output.precision", "0"),
            ("atom.delta2", "-20"),
        ] {
            let mut c = SimulationConfig::default();
            c.set(k, v).unwrap();
            assert!(c.validate().is_err(), "{k}={v}");
        }
    }

    #[test]
    fn pseudomode_needs_resonance() {
        let mut c = SimulationConfig::default();
        c.atom.delta2 = 0.5;
        assert!(matches!(c.pseudomode_params(), Err(CliError::Config(_))));
    }
}
