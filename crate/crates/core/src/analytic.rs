//! Closed-form solution for two separate Lorentzian reservoirs on resonance.

use num_complex::Complex64;

use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);
/// Denominators below this magnitude are treated as poles.
pub const POLE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `beta^2 > 0`: damped oscillations.
    Strong,
    /// `beta^2 < 0`: overdamped decay.
    Weak,
    Critical,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoResClosedForm {
    pub gamma: f64,
    pub omega_big: f64,
    /// Reservoir centre, resonant with both transitions.
    pub omega0: f64,
    /// `2 Omega^2 - (Gamma/2)^2`.
    pub beta2: f64,
    pub regime: Regime,
}

impl TwoResClosedForm {
    pub fn new(gamma: f64, omega_big: f64) -> Result<Self> {
        Self::centered(gamma, omega_big, 0.0)
    }

    pub fn centered(gamma: f64, omega_big: f64, omega0: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma must be > 0, got {gamma}")));
        }
        if !(omega_big >= 0.0 && omega_big.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "coupling strength must be >= 0, got {omega_big}"
            )));
        }
        let half = 0.5 * gamma;
        let beta2 = 2.0 * omega_big * omega_big - half * half;
        let regime = if beta2 > 0.0 {
            Regime::Strong
        } else if beta2 < 0.0 {
            Regime::Weak
        } else {
            Regime::Critical
        };
        Ok(Self { gamma, omega_big, omega0, beta2, regime })
    }

    /// `beta` in the strong regime.
    pub fn beta(&self) -> Option<f64> {
        (self.beta2 > 0.0).then(|| self.beta2.sqrt())
    }

    /// `gamma_w = sqrt((Gamma/2)^2 - 2 Omega^2)` in the weak regime.
    pub fn gamma_weak(&self) -> Option<f64> {
        (self.beta2 < 0.0).then(|| (-self.beta2).sqrt())
    }

    /// Phase with `cos(phi) = (Gamma/2) / (sqrt(2) Omega)`.
    pub fn phi(&self) -> Option<f64> {
        self.beta().map(|_| (0.5 * self.gamma / (2f64.sqrt() * self.omega_big)).acos())
    }

    /// `xi` with `cosh(xi) = (Gamma/2) / (sqrt(2) Omega)`; infinite when `Omega = 0`.
    pub fn xi(&self) -> Option<f64> {
        self.gamma_weak().map(|_| (0.5 * self.gamma / (2f64.sqrt() * self.omega_big)).acosh())
    }

    /// Laplace transform of the upper-level amplitude.
    pub fn b2bar_exact(&self, s: Complex64) -> Result<Complex64> {
        let g = self.gamma;
        let o2 = self.omega_big * self.omega_big;
        let shifted = s + 0.5 * g;
        let quad = s * (s + g) + 2.0 * o2;
        for denominator in [s, shifted, quad] {
            if denominator.norm() < POLE_EPS {
                return Err(Error::PoleProximity { s, denominator: denominator.norm() });
            }
        }
        Ok(1.0 / s - o2 * (s + g) / (s * shifted * quad))
    }

    /// Upper-level amplitude `b2(t)`. The formula is entire in `t`, so
    /// negative arguments return its analytic continuation.
    pub fn b2_exact(&self, t: f64) -> f64 {
        let half = 0.5 * self.gamma;
        let o2 = self.omega_big * self.omega_big;
        let (c, s, v) = beta_functions(self.beta2, t);
        (-half * t).exp() * (c + o2 * v + half * s)
    }

    /// `(2 Omega^2 / beta^2) sin^2(beta t / 2 + phi) e^{-Gamma t / 2}`.
    pub fn b2_strong(&self, t: f64) -> Result<f64> {
        let (beta, phi) = match (self.beta(), self.phi()) {
            (Some(b), Some(p)) => (b, p),
            _ => {
                return Err(Error::RegimeMismatch(format!(
                    "strong-coupling form needs beta^2 > 0, got {}",
                    self.beta2
                )))
            }
        };
        let o2 = self.omega_big * self.omega_big;
        let sin = (0.5 * beta * t + phi).sin();
        Ok(2.0 * o2 / self.beta2 * sin * sin * (-0.5 * self.gamma * t).exp())
    }

    /// `(2 Omega^2 / gamma_w^2) sinh^2(gamma_w t / 2 + xi) e^{-Gamma t / 2}`.
    pub fn b2_weak(&self, t: f64) -> Result<f64> {
        let (gw, xi) = match (self.gamma_weak(), self.xi()) {
            (Some(g), Some(x)) => (g, x),
            _ => {
                return Err(Error::RegimeMismatch(format!(
                    "weak-coupling form needs beta^2 < 0, got {}",
                    self.beta2
                )))
            }
        };
        if self.omega_big == 0.0 {
            // xi -> infinity while the prefactor -> 0
            return Ok(1.0);
        }
        let o2 = self.omega_big * self.omega_big;
        let sinh = (0.5 * gw * t + xi).sinh();
        Ok(2.0 * o2 / (gw * gw) * sinh * sinh * (-0.5 * self.gamma * t).exp())
    }

    /// The leading strong-coupling approximation `cos^2(Omega t / sqrt 2) e^{-Gamma t/2}`.
    pub fn b2_strong_limit(&self, t: f64) -> f64 {
        let c = (self.omega_big * t / 2f64.sqrt()).cos();
        c * c * (-0.5 * self.gamma * t).exp()
    }

    /// Golden-rule decay `exp(-2 Omega^2 t / Gamma)`.
    pub fn b2_golden_rule(&self, t: f64) -> f64 {
        (-2.0 * self.omega_big * self.omega_big * t / self.gamma).exp()
    }

    /// `(s + i x)(s + i x + Gamma/2) + Omega^2` with `x = omega - omega0`.
    pub fn q(&self, x: Complex64, s: Complex64) -> Complex64 {
        let y = s + I * x;
        y * (y + 0.5 * self.gamma) + self.omega_big * self.omega_big
    }

    /// Closed-form solution `f(omega, s)` of the separable integral equation.
    pub fn f_exact(&self, omega: f64, s: Complex64) -> Result<Complex64> {
        let g = self.gamma;
        let half = 0.5 * g;
        let o2 = self.omega_big * self.omega_big;
        let x = omega - self.omega0;
        let q = self.q(Complex64::new(x, 0.0), s);
        let shifted = s + half;
        let quad = s * (s + g) + 2.0 * o2;
        for denominator in [q, shifted, quad] {
            if denominator.norm() < POLE_EPS {
                return Err(Error::PoleProximity { s, denominator: denominator.norm() });
            }
        }
        Ok(-I * (shifted * (s + g) + o2) * (s + I * x + half) / (shifted * quad * q))
    }

    /// `int K(omega, omega) d omega`, the single nonzero eigenvalue of the rank-1 kernel.
    pub fn kernel_trace(&self, s: Complex64) -> Result<Complex64> {
        let g = self.gamma;
        let o2 = self.omega_big * self.omega_big;
        let denom = s * ((s + 0.5 * g) * (s + g) + o2);
        if denom.norm() < POLE_EPS {
            return Err(Error::PoleProximity { s, denominator: denom.norm() });
        }
        Ok(o2 * (s + g) / denom)
    }
}

/// `(cos(beta t), sin(beta t)/beta, (1 - cos(beta t))/beta^2)` as entire
/// functions of `beta^2`; hyperbolic for `beta^2 < 0`.
fn beta_functions(beta2: f64, t: f64) -> (f64, f64, f64) {
    let u = beta2 * t * t;
    if u.abs() <= 1.0 {
        // sum_k (-u)^k / (2k)!, (2k+1)!, (2k+2)!
        let (mut c, mut s, mut v) = (0.0, 0.0, 0.0);
        let mut term = 1.0;
        for k in 0..30 {
            let k2 = 2.0 * k as f64;
            c += term;
            s += term / (k2 + 1.0);
            v += term / ((k2 + 1.0) * (k2 + 2.0));
            term *= -u / ((k2 + 1.0) * (k2 + 2.0));
            if term.abs() < 1e-18 {
                break;
            }
        }
        (c, s * t, v * t * t)
    } else if beta2 > 0.0 {
        let b = beta2.sqrt();
        let (sin, cos) = (b * t).sin_cos();
        (cos, sin / b, (1.0 - cos) / beta2)
    } else {
        let g = (-beta2).sqrt();
        let (sinh, cosh) = ((g * t).sinh(), (g * t).cosh());
        (cosh, sinh / g, (cosh - 1.0) / (-beta2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, integrate_real_line};
    use crate::reservoir::LorentzianProfile;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn unit() -> TwoResClosedForm {
        TwoResClosedForm::new(1.0, 1.0).unwrap()
    }

    #[test]
    fn regimes() {
        assert_eq!(unit().regime, Regime::Strong);
        assert_eq!(TwoResClosedForm::new(1.0, 0.2).unwrap().regime, Regime::Weak);
        let crit = TwoResClosedForm::new(2.0, 0.5f64.sqrt()).unwrap();
        assert!(crit.beta2.abs() < 1e-15);
        assert!(TwoResClosedForm::new(0.0, 1.0).is_err());
    }

    #[test]
    fn b2bar_values() {
        let f = unit();
        assert!((f.b2bar_exact(c(1.0, 0.0)).unwrap() - 2.0 / 3.0).norm() < 1e-15);
        let free = TwoResClosedForm::new(1.0, 0.0).unwrap();
        let s = c(0.4, 2.0);
        assert!((free.b2bar_exact(s).unwrap() - 1.0 / s).norm() < 1e-15);
        let big = c(1e6, 0.0);
        assert!((f.b2bar_exact(big).unwrap() * big - 1.0).norm() < 1e-5);
        assert!(matches!(f.b2bar_exact(c(-0.5, 0.0)), Err(Error::PoleProximity { .. })));
        assert!(matches!(f.b2bar_exact(c(0.0, 0.0)), Err(Error::PoleProximity { .. })));
    }

    #[test]
    fn b2_at_zero_is_one() {
        for (g, o) in [(1.0, 1.0), (1.0, 0.2), (1.0, 0.0), (2.0, 0.5f64.sqrt()), (1.0, 100.0)] {
            let f = TwoResClosedForm::new(g, o).unwrap();
            assert!((f.b2_exact(0.0) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn b2_at_half_period() {
        let f = unit();
        let beta = 1.75f64.sqrt();
        let t = PI / beta;
        let hand = (-0.5 * t).exp() * (2.0 / 1.75 - 1.0);
        let b = f.b2_exact(t);
        assert!((b - hand).abs() < 1e-14);
        assert!((b - 0.043574).abs() < 5e-6);
        assert!((b * b - 1.899e-3).abs() < 1e-6);
    }

    #[test]
    fn no_coupling_no_decay() {
        let f = TwoResClosedForm::new(1.0, 0.0).unwrap();
        for t in [0.0, 1.0, 7.0, 30.0] {
            assert!((f.b2_exact(t) - 1.0).abs() < 1e-12);
            assert!((f.b2_weak(t).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn critical_case_matches_limit_form() {
        // beta = 0: e^{-Gt/2}(1 + G t / 2 + Omega^2 t^2 / 2)
        let g = 2.0;
        let f = TwoResClosedForm::new(g, 0.5f64.sqrt()).unwrap();
        for k in 0..=40 {
            let t = 0.5 * k as f64;
            let limit = (-0.5 * g * t).exp() * (1.0 + 0.5 * g * t + 0.25 * t * t);
            assert!((f.b2_exact(t) - limit).abs() < 1e-14);
        }
        // both sides of the boundary converge to the limit
        for sign in [1.0, -1.0] {
            let o = 0.5f64.sqrt() * (1.0 + sign * 1e-10);
            let near = TwoResClosedForm::new(g, o).unwrap();
            for t in [0.3, 2.0, 9.0] {
                assert!((near.b2_exact(t) - f.b2_exact(t)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn series_branch_matches_closed_forms() {
        for beta2 in [1.0f64, -1.0, 1e-3, -1e-3] {
            let b = beta2.abs().sqrt();
            for k in 1..=20 {
                // |beta^2 t^2| runs up to 1, the edge of the series branch
                let t = k as f64 / 20.0 / b;
                let (c, s, v) = beta_functions(beta2, t);
                let (cc, ss) = if beta2 > 0.0 {
                    ((b * t).cos(), (b * t).sin() / b)
                } else {
                    ((b * t).cosh(), (b * t).sinh() / b)
                };
                assert!((c - cc).abs() < 1e-14);
                assert!((s - ss).abs() < 1e-14 * t);
                assert!((v - (1.0 - cc) / beta2).abs() < 1e-8 * t * t);
            }
        }
    }

    #[test]
    fn strong_form_identity() {
        let f = unit();
        for k in 0..=20 {
            let t = 0.5 * k as f64;
            assert!((f.b2_strong(t).unwrap() - f.b2_exact(t)).abs() < 1e-12);
        }
        assert!((f.b2_strong(0.0).unwrap() - 1.0).abs() < 1e-14);
        let weak = TwoResClosedForm::new(1.0, 0.2).unwrap();
        assert!(matches!(weak.b2_strong(1.0), Err(Error::RegimeMismatch(_))));
    }

    #[test]
    fn weak_form_identity() {
        let f = TwoResClosedForm::new(1.0, 0.2).unwrap();
        for k in 0..=200 {
            let t = 0.1 * k as f64;
            assert!((f.b2_weak(t).unwrap() - f.b2_exact(t)).abs() < 1e-10);
        }
        assert!((f.b2_weak(0.0).unwrap() - 1.0).abs() < 1e-14);
        assert!(matches!(unit().b2_weak(1.0), Err(Error::RegimeMismatch(_))));
    }

    #[test]
    fn golden_rule_limit() {
        let f = TwoResClosedForm::new(1.0, 0.02).unwrap();
        let horizon = 1.0 / (2.0 * 0.02 * 0.02);
        for k in 0..=100 {
            let t = horizon * k as f64 / 100.0;
            let rel = (f.b2_exact(t) - f.b2_golden_rule(t)).abs() / f.b2_golden_rule(t);
            assert!(rel < 1e-2, "t={t} rel={rel}");
        }
    }

    #[test]
    fn strong_limit_error_is_first_order() {
        // the leading form drops a (Gamma / 2 beta) sin(beta t) term
        let worst = |o: f64| {
            let f = TwoResClosedForm::new(1.0, o).unwrap();
            (0..=2000)
                .map(|k| k as f64 / 2000.0)
                .map(|t| (f.b2_exact(t) - f.b2_strong_limit(t)).abs())
                .fold(0.0, f64::max)
        };
        let (e10, e100) = (worst(10.0), worst(100.0));
        assert!(e100 < e10 / 5.0);
        let beta = (2.0 * 1e4 - 0.25f64).sqrt();
        assert!((e100 - 0.5 / beta).abs() < 0.2 * 0.5 / beta);
    }

    #[test]
    fn laplace_transform_round_trip() {
        let f = unit();
        let v = integrate(|t| c((-t).exp() * f.b2_exact(t), 0.0), 0.0, 40.0, 1e-13).unwrap();
        assert!((v.re - f.b2bar_exact(c(1.0, 0.0)).unwrap().re).abs() < 1e-6);
        let g = TwoResClosedForm::new(1.0, 0.2).unwrap();
        let s = 0.7;
        let v = integrate(|t| c((-s * t).exp() * g.b2_exact(t), 0.0), 0.0, 80.0, 1e-13).unwrap();
        assert!((v.re - g.b2bar_exact(c(s, 0.0)).unwrap().re).abs() < 1e-6);
    }

    #[test]
    fn zero_initial_slope() {
        for (g, o) in [(1.0, 1.0), (1.0, 0.2), (1.0, 5.0)] {
            let f = TwoResClosedForm::new(g, o).unwrap();
            let p = |t: f64| f.b2_exact(t).powi(2);
            let h = 1e-4;
            let slope = (p(h) - p(-h)) / (2.0 * h);
            assert!(slope.abs() < 1e-6);
        }
    }

    #[test]
    fn f_exact_reproduces_b2bar() {
        let f = TwoResClosedForm::centered(1.0, 1.0, 3.0).unwrap();
        let r = LorentzianProfile::new(1.0, 1.0, 3.0).unwrap();
        for s in [c(1.0, 0.0), c(0.3, 1.7), c(2.0, -4.0)] {
            let integral = integrate_real_line(
                |w| r.eval(w) * f.f_exact(w, s).unwrap(),
                3.0,
                0.5,
                1e-12,
            )
            .unwrap();
            let b2 = 1.0 / s - I / s * integral;
            assert!((b2 - f.b2bar_exact(s).unwrap()).norm() < 1e-6);
        }
    }

    #[test]
    fn f_exact_without_coupling() {
        let f = TwoResClosedForm::new(1.0, 0.0).unwrap();
        let s = c(0.8, 0.3);
        for w in [-2.0, 0.0, 1.5] {
            let d = -I / (s * (s + I * w));
            assert!((f.f_exact(w, s).unwrap() - d).norm() < 1e-14);
        }
    }

    fn winding(f: &TwoResClosedForm, s: Complex64, lower: bool) -> f64 {
        // closed contour: real segment [-R, R] and a half circle of radius R
        let r = 200.0;
        let n = 200_000;
        let mut path: Vec<Complex64> = (0..=n)
            .map(|k| c(-r + 2.0 * r * k as f64 / n as f64, 0.0))
            .collect();
        let dir = if lower { -1.0 } else { 1.0 };
        path.extend((1..=n).map(|k| {
            let th = PI * k as f64 / n as f64;
            c(r * th.cos(), dir * r * th.sin())
        }));
        let mut total = 0.0;
        for pair in path.windows(2) {
            let a = f.q(pair[0], s);
            let b = f.q(pair[1], s);
            total += (b / a).arg();
        }
        total / (2.0 * PI)
    }

    #[test]
    fn no_poles_in_lower_half_plane() {
        for (g, o) in [(1.0, 1.0), (1.0, 5.0), (1.0, 0.2)] {
            let f = TwoResClosedForm::new(g, o).unwrap();
            for s in [c(1.0, 0.0), c(0.05, 3.0), c(0.2, -8.0)] {
                let lower = winding(&f, s, true);
                let upper = winding(&f, s, false);
                assert!(lower.abs() < 1e-6, "lower winding {lower}");
                // both zeros of the quadratic sit in the upper half plane
                assert!((upper.abs() - 2.0).abs() < 1e-6, "upper winding {upper}");
            }
        }
    }

    #[test]
    fn kernel_trace_value() {
        let f = unit();
        assert!((f.kernel_trace(c(1.0, 0.0)).unwrap() - 0.5).norm() < 1e-15);
        let r = LorentzianProfile::new(1.0, 1.0, 0.0).unwrap();
        let s = c(0.6, 1.1);
        // int R(w) / (s A(w)) with A = Q / (s + i w + G/2)
        let integral = integrate_real_line(
            |w| {
                let x = c(w, 0.0);
                r.eval(w) * (s + I * x + 0.5) / (s * f.q(x, s))
            },
            0.0,
            0.5,
            1e-12,
        )
        .unwrap();
        assert!((integral - f.kernel_trace(s).unwrap()).norm() < 1e-8);
    }
}
