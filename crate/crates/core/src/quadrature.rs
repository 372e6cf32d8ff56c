//! Frequency grids and adaptive quadrature.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Discretised mode frequencies with trapezoidal weights.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub halfwidth: f64,
    pub center: f64,
}

impl FrequencyGrid {
    /// `n` uniformly spaced points spanning `[center - halfwidth, center + halfwidth]`,
    /// endpoints included with half weight. `n = 1` degenerates to the midpoint rule.
    pub fn trapezoid(center: f64, halfwidth: f64, n: usize) -> Result<Self> {
        if !(halfwidth > 0.0 && halfwidth.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "grid half-width must be > 0, got {halfwidth}"
            )));
        }
        if n == 0 {
            return Err(Error::InvalidParameter("grid needs at least one point".into()));
        }
        if n == 1 {
            return Ok(Self {
                points: vec![center],
                weights: vec![2.0 * halfwidth],
                halfwidth,
                center,
            });
        }
        let h = 2.0 * halfwidth / (n - 1) as f64;
        let points = (0..n)
            .map(|k| center - halfwidth + k as f64 * h)
            .collect::<Vec<_>>();
        let mut weights = vec![h; n];
        weights[0] *= 0.5;
        weights[n - 1] *= 0.5;
        Ok(Self { points, weights, halfwidth, center })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        if self.len() > 1 {
            self.points[1] - self.points[0]
        } else {
            2.0 * self.halfwidth
        }
    }
}

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let pair = f(c - dx) + f(c + dx);
        kronrod += pair * WGK[j];
        if j % 2 == 1 {
            gauss += pair * WG[j / 2];
        }
    }
    let k = kronrod * h;
    let g = gauss * h;
    (k, (k - g).norm())
}

/// Adaptive Gauss-Kronrod integration of a complex integrand over `[a, b]`.
pub fn integrate<F: Fn(f64) -> Complex64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<Complex64> {
    const MAX_INTERVALS: usize = 4000;
    let (total0, err0) = gk15(&f, a, b);
    let mut intervals = vec![(a, b, total0, err0)];
    let mut total = total0;
    let mut err = err0;
    while err > rel_tol * total.norm().max(f64::MIN_POSITIVE) {
        if intervals.len() >= MAX_INTERVALS || !err.is_finite() {
            return Err(Error::NonConvergentIntegral {
                achieved: err / total.norm().max(f64::MIN_POSITIVE),
            });
        }
        // bisect the interval with the largest error estimate
        let (idx, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .unwrap();
        let (lo, hi, val, e) = intervals.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        total += v1 + v2 - val;
        err += e1 + e2 - e;
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
    // re-sum to shed the drift of the incremental updates
    Ok(intervals.iter().map(|iv| iv.2).sum())
}

/// Integral over the whole real line through `omega = center + scale * tan(theta)`.
pub fn integrate_real_line<F: Fn(f64) -> Complex64>(
    f: F,
    center: f64,
    scale: f64,
    rel_tol: f64,
) -> Result<Complex64> {
    let mapped = |theta: f64| {
        let tan = theta.tan();
        let jac = scale * (1.0 + tan * tan);
        let v = f(center + scale * tan) * jac;
        if v.is_finite() {
            v
        } else {
            Complex64::new(0.0, 0.0)
        }
    };
    // split at the centre so the peak sits on an interval boundary
    let left = integrate(mapped, -FRAC_PI_2, 0.0, rel_tol)?;
    let right = integrate(mapped, 0.0, FRAC_PI_2, rel_tol)?;
    Ok(left + right)
}
