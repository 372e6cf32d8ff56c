//! Numerical inverse Laplace transforms.
//!
//! The default method is a Fourier-series (trapezoidal Bromwich) sum with
//! Euler binomial averaging of the alternating tail. Each time point gets
//! its own contour `Re(s) = A / (2t)`, so the aliasing error is `~e^{-A}`
//! uniformly in `t`. Samplers may return vectors: every component is
//! inverted with the same nodes, which lets one linear solve feed many
//! transforms at once.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Aliasing parameter; the discretisation error is roughly `e^{-A}`.
pub const EULER_A: f64 = 20.7;
/// Number of binomially averaged partial sums.
pub const EULER_M: usize = 12;
pub const DEFAULT_TERMS: usize = 24;
/// Gaver-Stehfest order is capped to bound cancellation.
pub const STEHFEST_MAX: usize = 16;
/// Large real node for the initial-value limit at `t = 0`.
const IVT_S: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InversionMethod {
    BromwichFourierSeries,
    GaverStehfest,
}

impl std::str::FromStr for InversionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "bromwich" | "bromwichfourierseries" | "euler" | "fourier" => {
                Ok(Self::BromwichFourierSeries)
            }
            "stehfest" | "gaverstehfest" | "gaver" => Ok(Self::GaverStehfest),
            _ => Err(Error::InvalidParameter(format!("unknown inversion method '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InversionConfig {
    pub method: InversionMethod,
    /// Lowest abscissa used for any node.
    pub sigma: f64,
    /// Series terms before averaging (Fourier) or order (Stehfest).
    pub terms: usize,
    pub t_max: f64,
    pub n_time: usize,
    /// Largest tolerated change when the series is cut two terms earlier,
    /// relative to `max(1, |f|)`.
    pub accel_tol: f64,
    /// Highest angular frequency expected in the inverse. The Fourier sum
    /// at time `t` uses at least `bandwidth * t / pi + 10` terms.
    pub bandwidth: f64,
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self {
            method: InversionMethod::BromwichFourierSeries,
            sigma: 0.2,
            terms: DEFAULT_TERMS,
            t_max: 10.0,
            n_time: 200,
            accel_tol: 1e-3,
            bandwidth: 0.0,
        }
    }
}

impl InversionConfig {
    /// Default configuration with `sigma = max(sigma_min, 2 / t_max)`.
    pub fn with_horizon(t_max: f64, n_time: usize, sigma_min: f64) -> Self {
        Self { sigma: sigma_min.max(2.0 / t_max), t_max, n_time, ..Self::default() }
    }

    pub fn validate(&self, sigma_min: f64) -> Result<()> {
        if !(self.sigma >= sigma_min && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "inversion sigma {} below floor {sigma_min}",
                self.sigma
            )));
        }
        if self.terms < 8 {
            return Err(Error::InvalidParameter(format!(
                "inversion needs at least 8 terms, got {}",
                self.terms
            )));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(Error::InvalidParameter(format!("t_max must be > 0, got {}", self.t_max)));
        }
        if self.n_time == 0 {
            return Err(Error::InvalidParameter("n_time must be >= 1".into()));
        }
        if !(self.accel_tol > 0.0) {
            return Err(Error::InvalidParameter("accel_tol must be > 0".into()));
        }
        if !(self.bandwidth >= 0.0 && self.bandwidth.is_finite()) {
            return Err(Error::InvalidParameter("bandwidth must be finite and >= 0".into()));
        }
        Ok(())
    }

    /// `n_time` equally spaced points on `[0, t_max]`.
    pub fn time_grid(&self) -> Vec<f64> {
        if self.n_time == 1 {
            return vec![self.t_max];
        }
        let dt = self.t_max / (self.n_time - 1) as f64;
        (0..self.n_time).map(|k| k as f64 * dt).collect()
    }
}

/// Complex-valued samples on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSeries {
    pub t: Vec<f64>,
    pub values: Vec<Complex64>,
}

/// Several transforms inverted on a shared grid; `values[i][c]` is component
/// `c` at time `t[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorSeries {
    pub t: Vec<f64>,
    pub values: Vec<Vec<Complex64>>,
    /// Change when the series is cut two terms earlier, per time and component.
    /// Zero for methods without an error estimate.
    pub residuals: Vec<Vec<f64>>,
}

impl VectorSeries {
    pub fn component(&self, c: usize) -> ComplexSeries {
        ComplexSeries { t: self.t.clone(), values: self.values.iter().map(|v| v[c]).collect() }
    }
}

/// Nodes and weights with `f(t) ~ sum_k weight_k F(node_k)`.
#[derive(Debug, Clone)]
struct NodePlan {
    nodes: Vec<Complex64>,
    weights: Vec<Complex64>,
    /// Weights of a shorter sum over a prefix of `nodes`, for the residual estimate.
    check_weights: Option<Vec<Complex64>>,
}

fn binomials(m: usize) -> Vec<f64> {
    let mut c = vec![1.0; m + 1];
    for j in 1..=m {
        c[j] = c[j - 1] * (m + 1 - j) as f64 / j as f64;
    }
    c
}

/// Weight of series index `k` in the Euler average of partial sums `S_n..S_{n+m}`.
fn euler_index_weights(n: usize, m: usize) -> Vec<f64> {
    let c = binomials(m);
    let scale = 0.5f64.powi(m as i32);
    // S_j = sum_{k<=j} a_k, so a_k enters every S_{n+j} with n + j >= k
    (0..=n + m)
        .map(|k| {
            let first = k.saturating_sub(n);
            c[first..].iter().sum::<f64>() * scale
        })
        .collect()
}

fn fourier_plan(t: f64, cfg: &InversionConfig) -> NodePlan {
    let a = EULER_A.max(2.0 * cfg.sigma * t);
    let sigma = a / (2.0 * t);
    let n = cfg.terms.max((cfg.bandwidth * t / PI).ceil() as usize + 10);
    let m = EULER_M;
    let prefactor = (0.5 * a).exp() / (2.0 * t);
    let build = |n: usize, m: usize| -> (Vec<Complex64>, Vec<Complex64>) {
        let idx = euler_index_weights(n, m);
        let mut nodes = Vec::with_capacity(2 * idx.len() - 1);
        let mut weights = Vec::with_capacity(2 * idx.len() - 1);
        for (k, &e) in idx.iter().enumerate() {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let w = Complex64::new(prefactor * sign * e, 0.0);
            let im = PI * k as f64 / t;
            nodes.push(Complex64::new(sigma, im));
            weights.push(w);
            if k > 0 {
                nodes.push(Complex64::new(sigma, -im));
                weights.push(w);
            }
        }
        (nodes, weights)
    };
    let (nodes, weights) = build(n, m);
    let (_, lower) = build(n - 2, m);
    let mut check = vec![Complex64::new(0.0, 0.0); nodes.len()];
    check[..lower.len()].copy_from_slice(&lower);
    NodePlan { nodes, weights, check_weights: Some(check) }
}

/// Stehfest coefficients `V_k`, `k = 1..=n` for even `n`.
pub fn stehfest_coefficients(n: usize) -> Vec<f64> {
    let half = n / 2;
    let fact = |k: usize| (1..=k).fold(1.0f64, |acc, j| acc * j as f64);
    (1..=n)
        .map(|k| {
            let mut v = 0.0;
            for j in k.div_ceil(2)..=k.min(half) {
                v += (j as f64).powi(half as i32) * fact(2 * j)
                    / (fact(half - j) * fact(j) * fact(j - 1) * fact(k - j) * fact(2 * j - k));
            }
            if (k + half) % 2 == 1 {
                -v
            } else {
                v
            }
        })
        .collect()
}

fn stehfest_order(terms: usize) -> usize {
    (terms.min(STEHFEST_MAX) / 2) * 2
}

fn stehfest_plan(t: f64, cfg: &InversionConfig) -> NodePlan {
    let n = stehfest_order(cfg.terms);
    let v = stehfest_coefficients(n);
    let scale = LN_2 / t;
    NodePlan {
        nodes: (1..=n).map(|k| Complex64::new(k as f64 * scale, 0.0)).collect(),
        weights: v.iter().map(|&vk| Complex64::new(vk * scale, 0.0)).collect(),
        check_weights: None,
    }
}

/// Initial-value limit `f(0) = lim s F(s)` with one Richardson step.
fn ivt_plan() -> NodePlan {
    NodePlan {
        nodes: vec![Complex64::new(IVT_S, 0.0), Complex64::new(2.0 * IVT_S, 0.0)],
        weights: vec![Complex64::new(-IVT_S, 0.0), Complex64::new(4.0 * IVT_S, 0.0)],
        check_weights: None,
    }
}

fn plan_for(t: f64, cfg: &InversionConfig) -> NodePlan {
    if t <= 0.0 {
        return ivt_plan();
    }
    match cfg.method {
        InversionMethod::BromwichFourierSeries => fourier_plan(t, cfg),
        InversionMethod::GaverStehfest => stehfest_plan(t, cfg),
    }
}

/// Inverts a vector-valued transform at the times of `t_grid`.
///
/// The sampler must return vectors of one fixed length. Calls for a given
/// time point run concurrently; sums are formed in node order. Acceleration
/// residuals are reported, not enforced; see [`invert_at`].
pub fn invert_many_at<F>(sampler: F, cfg: &InversionConfig, t_grid: &[f64]) -> Result<VectorSeries>
where
    F: Fn(Complex64) -> Result<Vec<Complex64>> + Sync,
{
    if t_grid.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(Error::InvalidParameter("time grid must be finite and >= 0".into()));
    }
    let mut values = Vec::with_capacity(t_grid.len());
    let mut residuals = Vec::with_capacity(t_grid.len());
    let mut width = None;
    for &t in t_grid {
        let plan = plan_for(t, cfg);
        let samples: Vec<Vec<Complex64>> = plan
            .nodes
            .par_iter()
            .map(|&s| {
                let v = sampler(s)?;
                if v.iter().any(|z| !z.is_finite()) {
                    return Err(Error::NonFiniteSample { s });
                }
                Ok(v)
            })
            .collect::<Result<_>>()?;
        let dim = *width.get_or_insert(samples[0].len());
        if samples.iter().any(|v| v.len() != dim) {
            let bad = samples.iter().find(|v| v.len() != dim).map_or(0, |v| v.len());
            return Err(Error::DimensionMismatch { expected: dim, actual: bad });
        }
        let combine = |w: &[Complex64]| -> Vec<Complex64> {
            let mut acc = vec![Complex64::new(0.0, 0.0); dim];
            for (wk, v) in w.iter().zip(&samples) {
                for (a, x) in acc.iter_mut().zip(v) {
                    *a += wk * x;
                }
            }
            acc
        };
        let f = combine(&plan.weights);
        let res = match &plan.check_weights {
            Some(check) => combine(check).iter().zip(&f).map(|(g, v)| (g - v).norm()).collect(),
            None => vec![0.0; dim],
        };
        values.push(f);
        residuals.push(res);
    }
    Ok(VectorSeries { t: t_grid.to_vec(), values, residuals })
}

/// Vector inversion on the configured time grid.
pub fn invert_many<F>(sampler: F, cfg: &InversionConfig) -> Result<VectorSeries>
where
    F: Fn(Complex64) -> Result<Vec<Complex64>> + Sync,
{
    cfg.validate(0.0)?;
    invert_many_at(sampler, cfg, &cfg.time_grid())
}

/// Fails if any acceleration residual exceeds `accel_tol * max(1, |f|)`.
pub fn check_residuals(series: &VectorSeries, accel_tol: f64) -> Result<()> {
    for ((t, vals), res) in series.t.iter().zip(&series.values).zip(&series.residuals) {
        for (v, &r) in vals.iter().zip(res) {
            let residual = r / v.norm().max(1.0);
            if !(residual <= accel_tol) {
                return Err(Error::AccelerationFailed { t: *t, residual });
            }
        }
    }
    Ok(())
}

/// Scalar inversion on the configured time grid.
pub fn invert<F>(sampler: F, cfg: &InversionConfig) -> Result<ComplexSeries>
where
    F: Fn(Complex64) -> Result<Complex64> + Sync,
{
    cfg.validate(0.0)?;
    invert_at(sampler, cfg, &cfg.time_grid())
}

/// Scalar inversion at explicit times.
pub fn invert_at<F>(sampler: F, cfg: &InversionConfig, t_grid: &[f64]) -> Result<ComplexSeries>
where
    F: Fn(Complex64) -> Result<Complex64> + Sync,
{
    let series = invert_many_at(|s| sampler(s).map(|v| vec![v]), cfg, t_grid)?;
    check_residuals(&series, cfg.accel_tol)?;
    Ok(series.component(0))
}

/// One entry of the transform-pair battery.
#[derive(Debug, Clone, PartialEq)]
pub struct PairResult {
    pub name: &'static str,
    pub max_error: f64,
    /// Set when the method could not produce a value at all.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub method: InversionMethod,
    pub tolerance: f64,
    pub pairs: Vec<PairResult>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.pairs.iter().all(|p| p.failure.is_none() && p.max_error <= self.tolerance)
    }

    pub fn worst(&self) -> f64 {
        self.pairs.iter().map(|p| p.max_error).fold(0.0, f64::max)
    }
}

pub const BATTERY_TOLERANCE: f64 = 1e-6;

type Pair = (&'static str, fn(Complex64) -> Complex64, fn(f64) -> f64);

/// Known transform pairs used to validate an inversion method.
pub fn battery() -> Vec<Pair> {
    vec![
        ("exp(-t)", |s| 1.0 / (s + 1.0), |t| (-t).exp()),
        ("sin(t)", |s| 1.0 / (s * s + 1.0), f64::sin),
        ("t*exp(-t)", |s| 1.0 / ((s + 1.0) * (s + 1.0)), |t| t * (-t).exp()),
        (
            "exp(-t/2)cos(2t)",
            |s| (s + 0.5) / ((s + 0.5) * (s + 0.5) + 4.0),
            |t| (-0.5 * t).exp() * (2.0 * t).cos(),
        ),
        ("step", |s| 1.0 / s, |_| 1.0),
    ]
}

/// Runs the battery on `cfg`'s time grid and reports the worst error per pair.
pub fn validate_method(cfg: &InversionConfig) -> ValidationReport {
    let pairs = battery()
        .into_iter()
        .map(|(name, transform, exact)| match invert(|s| Ok(transform(s)), cfg) {
            Ok(series) => {
                let max_error = series
                    .t
                    .iter()
                    .zip(&series.values)
                    .map(|(&t, v)| (v - exact(t)).norm())
                    .fold(0.0, f64::max);
                PairResult { name, max_error, failure: None }
            }
            Err(e) => PairResult { name, max_error: f64::INFINITY, failure: Some(e.to_string()) },
        })
        .collect();
    ValidationReport { method: cfg.method, tolerance: BATTERY_TOLERANCE, pairs }
}
