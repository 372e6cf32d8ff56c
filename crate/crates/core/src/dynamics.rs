//! Time-domain populations from the Laplace-domain solver.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::inversion::{invert_many_at, InversionConfig, VectorSeries};
use crate::kernel::{build_kernel, LaplaceNode};
use crate::quadrature::FrequencyGrid;
use crate::reservoir::{AtomParams, Profile, ReservoirSpec, Transition};
use crate::solver::{solve_complex, solve_real_block};

/// Default slack for the population sanity checks.
pub const POPULATION_TOL: f64 = 1e-3;

/// Populations and amplitude on a time grid. Fields a method cannot
/// produce are `None`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimeSeries {
    pub t: Vec<f64>,
    pub b2: Option<Vec<Complex64>>,
    pub p2: Vec<f64>,
    pub p1: Option<Vec<f64>>,
    pub p0: Option<Vec<f64>>,
}

impl TimeSeries {
    pub fn from_p2(t: Vec<f64>, p2: Vec<f64>) -> Self {
        Self { t, p2, ..Self::default() }
    }

    /// Real amplitude series, e.g. a closed form.
    pub fn from_b2(t: Vec<f64>, b2: Vec<f64>) -> Self {
        let p2 = b2.iter().map(|b| b * b).collect();
        let b2 = Some(b2.into_iter().map(|b| Complex64::new(b, 0.0)).collect());
        Self { t, b2, p2, ..Self::default() }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Everything needed to run the matrix method.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub spec: ReservoirSpec,
    pub atom: AtomParams,
    pub grid: FrequencyGrid,
    pub inversion: InversionConfig,
    pub population_tol: f64,
}

impl RunContext {
    pub fn new(
        spec: ReservoirSpec,
        atom: AtomParams,
        grid: FrequencyGrid,
        inversion: InversionConfig,
    ) -> Result<Self> {
        inversion.validate(spec.sigma_min())?;
        Ok(Self { spec, atom, grid, inversion, population_tol: POPULATION_TOL })
    }

    /// Frequency scale of the slow part of `b2(t)`, used as the inversion bandwidth.
    pub fn dynamic_bandwidth(&self) -> f64 {
        let coupling = |p: &Profile| match p {
            Profile::Lorentzian(l) => l.omega_big,
            Profile::MultiLorentzian(ls) => ls.iter().map(|l| l.omega_big).fold(0.0, f64::max),
            Profile::Custom(c) => c.scale,
        };
        let omega = coupling(&self.spec.r1).max(coupling(&self.spec.r2));
        let width = self.spec.r1.reference_width().max(self.spec.r2.reference_width());
        let detuning = (self.atom.omega1 - self.spec.r1.center())
            .abs()
            .max((self.atom.omega2 - self.spec.r2.center()).abs());
        2.0 * omega + width + detuning
    }

    /// `[b2(s), f(w_1, s), ..., f(w_N, s)]` at one node.
    pub fn sample(&self, s: Complex64) -> Result<Vec<Complex64>> {
        let node = LaplaceNode::for_spec(&self.spec, s)?;
        let system = build_kernel(&self.spec, &self.atom, node, &self.grid)?;
        let sol = if s.im == 0.0 { solve_real_block(&system)? } else { solve_complex(&system)? };
        let mut out = Vec::with_capacity(sol.f_vals.len() + 1);
        out.push(sol.b2bar);
        out.extend(sol.f_vals);
        Ok(out)
    }

    /// Inverts `b2` and every `f(w_l)` on `t_grid`.
    pub fn invert(&self, t_grid: &[f64]) -> Result<VectorSeries> {
        let mut cfg = self.inversion.clone();
        cfg.bandwidth = cfg.bandwidth.max(self.dynamic_bandwidth());
        invert_many_at(|s| self.sample(s), &cfg, t_grid)
    }

    pub fn run(&self) -> Result<TimeSeries> {
        let t = self.inversion.time_grid();
        let series = self.invert(&t)?;
        populations_at_time(self, &series)
    }
}

/// `P2 = |b2|^2`, `P1 = sum w R2 |f|^2`, `P0 = 1 - P2 - P1`.
///
/// `|b_{1l}(t)| = |f(w_l, t)|`, so the phase factor between them never
/// enters. Fails if `b2` itself did not converge, or if `P1` or `P0` leave
/// their physical range by more than the tolerance.
pub fn populations_at_time(ctx: &RunContext, series: &VectorSeries) -> Result<TimeSeries> {
    let n = ctx.grid.len();
    let r: Vec<f64> = ctx
        .grid
        .points
        .iter()
        .zip(&ctx.grid.weights)
        .map(|(&w, &h)| h * ctx.spec.profile(Transition::Upper).eval(w))
        .collect();
    let tol = ctx.population_tol;
    let mut out = TimeSeries { t: series.t.clone(), ..TimeSeries::default() };
    let (mut b2s, mut p1s, mut p0s) = (Vec::new(), Vec::new(), Vec::new());
    for ((&t, vals), res) in series.t.iter().zip(&series.values).zip(&series.residuals) {
        if vals.len() != n + 1 {
            return Err(Error::DimensionMismatch { expected: n + 1, actual: vals.len() });
        }
        let b2 = vals[0];
        if res[0] > tol {
            return Err(Error::AccelerationFailed { t, residual: res[0] });
        }
        let mut p1 = 0.0;
        let mut p1_err = 0.0;
        for ((f, &e), &rl) in vals[1..].iter().zip(&res[1..]).zip(&r) {
            p1 += rl * f.norm_sqr();
            p1_err += rl * e * (2.0 * f.norm() + e);
        }
        if p1_err > tol {
            return Err(Error::InversionAccuracy {
                t,
                detail: format!("P1 error estimate {p1_err:e} exceeds {tol:e}"),
            });
        }
        let p2 = b2.norm_sqr();
        let p0 = 1.0 - p2 - p1;
        if !(p1 >= -tol && p1 <= 1.0 + tol) {
            return Err(Error::InversionAccuracy { t, detail: format!("P1 = {p1} outside [0, 1]") });
        }
        if p0 < -tol {
            return Err(Error::InversionAccuracy { t, detail: format!("P0 = {p0} is negative") });
        }
        b2s.push(b2);
        out.p2.push(p2);
        p1s.push(p1);
        p0s.push(p0);
    }
    out.b2 = Some(b2s);
    out.p1 = Some(p1s);
    out.p0 = Some(p0s);
    Ok(out)
}

/// Largest pointwise `|a.p2 - b.p2|`; the series must share their time grid.
pub fn max_p2_deviation(a: &TimeSeries, b: &TimeSeries) -> Result<f64> {
    if a.t.len() != b.t.len() {
        return Err(Error::DimensionMismatch { expected: a.t.len(), actual: b.t.len() });
    }
    if a.t.iter().zip(&b.t).any(|(x, y)| (x - y).abs() > 1e-12 * x.abs().max(1.0)) {
        return Err(Error::InvalidParameter("time grids differ".into()));
    }
    Ok(a.p2.iter().zip(&b.p2).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

/// Times of strict interior local maxima, refined by a parabola through
/// the three samples around each peak.
pub fn peak_times(t: &[f64], y: &[f64]) -> Vec<f64> {
    peak_times_above(t, y, 0.0)
}

/// As [`peak_times`], ignoring maxima below `rel_floor * max(y)`. Near an
/// exact zero of the amplitude, inversion noise can otherwise produce
/// tiny spurious maxima.
pub fn peak_times_above(t: &[f64], y: &[f64], rel_floor: f64) -> Vec<f64> {
    let floor = rel_floor * y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut peaks = Vec::new();
    for k in 1..y.len().saturating_sub(1) {
        if y[k] > y[k - 1] && y[k] >= y[k + 1] && y[k] >= floor {
            let (y0, y1, y2) = (y[k - 1], y[k], y[k + 1]);
            let denom = y0 - 2.0 * y1 + y2;
            let h = t[k + 1] - t[k];
            let shift = if denom != 0.0 { 0.5 * (y0 - y2) / denom } else { 0.0 };
            peaks.push(t[k] + shift.clamp(-1.0, 1.0) * h);
        }
    }
    peaks
}
