//! Atom plus one damped pseudo-mode, the Markovian embedding of a
//! single Lorentzian reservoir.
//!
//! Basis index is `atom * (n_max + 1) + n` with atom level `0..3` and Fock
//! number `n`. The mode is a damped oscillator coupled to both transitions.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::dynamics::TimeSeries;
use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PseudomodeParams {
    pub omega_big: f64,
    pub gamma: f64,
    pub n_max: usize,
}

impl PseudomodeParams {
    pub fn new(omega_big: f64, gamma: f64, n_max: usize) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma must be >= 0, got {gamma}")));
        }
        if !omega_big.is_finite() {
            return Err(Error::InvalidParameter("coupling must be finite".into()));
        }
        if n_max < 2 {
            return Err(Error::InvalidParameter(format!("Fock cutoff must be >= 2, got {n_max}")));
        }
        Ok(Self { omega_big, gamma, n_max })
    }

    pub fn dim(&self) -> usize {
        3 * (self.n_max + 1)
    }

    pub fn index(&self, atom: usize, n: usize) -> usize {
        atom * (self.n_max + 1) + n
    }
}

/// Step-control and output settings of the integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_min: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-10, h_init: 1e-3, h_min: 1e-14 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudomodeState {
    pub rho: DMatrix<Complex64>,
    pub n_max: usize,
}

impl PseudomodeState {
    /// `|2> (x) |0>`: excited atom, empty mode.
    pub fn excited(params: &PseudomodeParams) -> Self {
        let d = params.dim();
        let mut rho = DMatrix::from_element(d, d, ZERO);
        let k = params.index(2, 0);
        rho[(k, k)] = ONE;
        Self { rho, n_max: params.n_max }
    }

    pub fn trace(&self) -> Complex64 {
        self.rho.trace()
    }

    /// Largest `|rho - rho^H|` entry.
    pub fn hermiticity_deviation(&self) -> f64 {
        let d = self.rho.nrows();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.rho[(i, j)] - self.rho[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// `<atom| Tr_mode rho |atom>`.
    pub fn atomic_population(&self, atom: usize) -> f64 {
        let m = self.n_max + 1;
        (0..m).map(|n| self.rho[(atom * m + n, atom * m + n)].re).sum()
    }

    /// Total population in Fock states above `n`.
    pub fn population_above(&self, n: usize) -> f64 {
        let m = self.n_max + 1;
        let mut p = 0.0;
        for atom in 0..3 {
            for k in n + 1..m {
                p += self.rho[(atom * m + k, atom * m + k)].re;
            }
        }
        p
    }

    fn symmetrize(&mut self) {
        let adj = self.rho.adjoint();
        self.rho = (&self.rho + adj) * Complex64::new(0.5, 0.0);
    }
}

/// Mode annihilation operator on the product space.
pub fn annihilation(params: &PseudomodeParams) -> DMatrix<Complex64> {
    let d = params.dim();
    let mut a = DMatrix::from_element(d, d, ZERO);
    for atom in 0..3 {
        for n in 1..=params.n_max {
            a[(params.index(atom, n - 1), params.index(atom, n))] = Complex64::new((n as f64).sqrt(), 0.0);
        }
    }
    a
}

/// `|to><from|` on the atom, identity on the mode.
fn atomic_transition(params: &PseudomodeParams, to: usize, from: usize) -> DMatrix<Complex64> {
    let d = params.dim();
    let mut m = DMatrix::from_element(d, d, ZERO);
    for n in 0..=params.n_max {
        m[(params.index(to, n), params.index(from, n))] = ONE;
    }
    m
}

/// `V = Omega (a^+ |0><1| + a |1><0| + a^+ |1><2| + a |2><1|)`.
pub fn interaction(params: &PseudomodeParams) -> DMatrix<Complex64> {
    let a = annihilation(params);
    let ad = a.adjoint();
    let lower = atomic_transition(params, 0, 1) + atomic_transition(params, 1, 2);
    let v = &ad * &lower + &a * lower.adjoint();
    v * Complex64::new(params.omega_big, 0.0)
}

/// `a^+ a + |1><1| + 2 |2><2|`.
pub fn excitation_number(params: &PseudomodeParams) -> DMatrix<Complex64> {
    let a = annihilation(params);
    let mut n = a.adjoint() * &a;
    for k in 0..=params.n_max {
        n[(params.index(1, k), params.index(1, k))] += ONE;
        n[(params.index(2, k), params.index(2, k))] += Complex64::new(2.0, 0.0);
    }
    n
}

/// Precomputed operators of the master equation.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    v: DMatrix<Complex64>,
    a: DMatrix<Complex64>,
    ad: DMatrix<Complex64>,
    num: DMatrix<Complex64>,
    half_gamma: f64,
}

impl Liouvillian {
    pub fn new(params: &PseudomodeParams) -> Self {
        let a = annihilation(params);
        let ad = a.adjoint();
        let num = &ad * &a;
        Self { v: interaction(params), a, ad, num, half_gamma: 0.5 * params.gamma }
    }

    pub fn apply(&self, rho: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
        if rho.shape() != self.v.shape() {
            return Err(Error::DimensionMismatch { expected: self.v.nrows(), actual: rho.nrows() });
        }
        let vr = &self.v * rho;
        let rv = rho * &self.v;
        let nr = &self.num * rho;
        let rn = rho * &self.num;
        let jump = &self.a * rho * &self.ad;
        let g = Complex64::new(self.half_gamma, 0.0);
        Ok((vr - rv) * (-I) - (nr + rn - jump * Complex64::new(2.0, 0.0)) * g)
    }
}

/// `-i[V, rho] - (Gamma/2)(a^+a rho + rho a^+a - 2 a rho a^+)`.
pub fn lindblad_rhs(rho: &DMatrix<Complex64>, params: &PseudomodeParams) -> Result<DMatrix<Complex64>> {
    Liouvillian::new(params).apply(rho)
}

/// Diagnostics collected during an evolution.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolveReport {
    pub series: TimeSeries,
    pub max_trace_drift: f64,
    /// Largest anti-Hermitian part seen before each symmetrisation.
    pub max_hermiticity_deviation: f64,
    /// Largest population in Fock states above 2.
    pub max_high_fock: f64,
    pub steps: usize,
    pub rejected: usize,
}

// Dormand-Prince 5(4) tableau
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn dp45_step(
    l: &Liouvillian,
    y: &DMatrix<Complex64>,
    h: f64,
    k1: &DMatrix<Complex64>,
) -> Result<(DMatrix<Complex64>, DMatrix<Complex64>, DMatrix<Complex64>)> {
    let mut k: Vec<DMatrix<Complex64>> = Vec::with_capacity(7);
    k.push(k1.clone());
    for stage in 1..7 {
        let mut arg = y.clone();
        for (j, kj) in k.iter().enumerate() {
            let a = A[stage][j];
            if a != 0.0 {
                arg += kj * Complex64::new(h * a, 0.0);
            }
        }
        k.push(l.apply(&arg)?);
    }
    let mut y5 = y.clone();
    let mut err = DMatrix::from_element(y.nrows(), y.ncols(), ZERO);
    for j in 0..7 {
        if B5[j] != 0.0 {
            y5 += &k[j] * Complex64::new(h * B5[j], 0.0);
        }
        let e = B5[j] - B4[j];
        if e != 0.0 {
            err += &k[j] * Complex64::new(h * e, 0.0);
        }
    }
    // FSAL: the last stage is the derivative at the new point
    let k7 = k.pop().unwrap();
    Ok((y5, err, k7))
}

/// Integrates from `|2,0>` and samples atomic populations on `t_grid`.
pub fn evolve_with(
    params: &PseudomodeParams,
    t_grid: &[f64],
    cfg: &IntegratorConfig,
) -> Result<EvolveReport> {
    if t_grid.windows(2).any(|w| !(w[1] >= w[0])) || t_grid.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::InvalidParameter("time grid must be ascending from 0".into()));
    }
    let l = Liouvillian::new(params);
    let mut state = PseudomodeState::excited(params);
    let mut t = 0.0;
    let mut h = cfg.h_init;
    let mut k1 = l.apply(&state.rho)?;
    let mut series = TimeSeries { t: t_grid.to_vec(), ..TimeSeries::default() };
    let (mut p1, mut p0) = (Vec::with_capacity(t_grid.len()), Vec::with_capacity(t_grid.len()));
    let mut report = EvolveReport {
        series: TimeSeries::default(),
        max_trace_drift: 0.0,
        max_hermiticity_deviation: 0.0,
        max_high_fock: 0.0,
        steps: 0,
        rejected: 0,
    };
    for &target in t_grid {
        while t < target {
            let last = target - t <= h;
            let step = if last { target - t } else { h };
            if step < cfg.h_min && !last {
                return Err(Error::StepSizeUnderflow { t });
            }
            let (y5, err, k7) = dp45_step(&l, &state.rho, step, &k1)?;
            let mut e = 0.0f64;
            for (ei, (yi, ni)) in err.iter().zip(state.rho.iter().zip(y5.iter())) {
                let scale = cfg.atol + cfg.rtol * yi.norm().max(ni.norm());
                e = e.max(ei.norm() / scale);
            }
            if !e.is_finite() {
                return Err(Error::StepSizeUnderflow { t });
            }
            if e <= 1.0 {
                t = if last { target } else { t + step };
                state.rho = y5;
                report.max_hermiticity_deviation =
                    report.max_hermiticity_deviation.max(state.hermiticity_deviation());
                state.symmetrize();
                k1 = k7;
                report.steps += 1;
                report.max_high_fock = report.max_high_fock.max(state.population_above(2));
            } else {
                report.rejected += 1;
            }
            let factor = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
            let proposal = step * factor;
            // a shortened final step says nothing about the natural step size
            h = if last && e <= 1.0 { h.max(proposal) } else { proposal };
            if h < cfg.h_min {
                return Err(Error::StepSizeUnderflow { t });
            }
        }
        report.max_trace_drift = report.max_trace_drift.max((state.trace() - ONE).norm());
        series.p2.push(state.atomic_population(2));
        p1.push(state.atomic_population(1));
        p0.push(state.atomic_population(0));
    }
    series.p1 = Some(p1);
    series.p0 = Some(p0);
    report.series = series;
    Ok(report)
}

/// `P2(t)` with the default tolerance `1e-10`.
pub fn evolve(params: &PseudomodeParams, t_grid: &[f64]) -> Result<TimeSeries> {
    evolve_with(params, t_grid, &IntegratorConfig::default()).map(|r| r.series)
}
