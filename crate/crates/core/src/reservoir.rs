//! Reservoir structure functions and atom parameters.
//!
//! Only the products `R(omega) = rho(omega) g(omega)^2` ever enter the
//! dynamics, so a reservoir is described entirely by its two structure
//! functions (one per atomic transition) plus the frequency-independent
//! coupling ratio `alpha`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Floor on `Re(s)` for every Laplace node, in units of the reference width.
pub const SIGMA_MIN_FACTOR: f64 = 1e-3;

/// Transition frequencies of the cascade atom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomParams {
    /// 0 <-> 1 transition.
    pub omega1: f64,
    /// 1 <-> 2 transition.
    pub omega2: f64,
}

impl AtomParams {
    pub fn new(omega1: f64, omega2: f64) -> Result<Self> {
        if !(omega1 > 0.0 && omega1.is_finite()) || !(omega2 > 0.0 && omega2.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "atom frequencies must be positive, got omega1={omega1}, omega2={omega2}"
            )));
        }
        Ok(Self { omega1, omega2 })
    }

    /// Both transitions at `omega0`.
    pub fn resonant(omega0: f64) -> Result<Self> {
        Self::new(omega0, omega0)
    }

    /// Atom detuned from a reservoir centred at `omega0`.
    pub fn detuned(omega0: f64, delta1: f64, delta2: f64) -> Result<Self> {
        Self::new(omega0 + delta1, omega0 + delta2)
    }
}

/// Lorentzian structure function `Gamma Omega^2 / (2 pi) / ((w - w0)^2 + (Gamma/2)^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzianProfile {
    pub gamma: f64,
    pub omega_big: f64,
    pub omega0: f64,
}

/// A simple pole of a structure function in the lower half plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pole {
    pub location: Complex64,
    pub residue: Complex64,
}

impl LorentzianProfile {
    pub fn new(gamma: f64, omega_big: f64, omega0: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma must be > 0, got {gamma}")));
        }
        if !(omega_big >= 0.0 && omega_big.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "coupling strength must be >= 0, got {omega_big}"
            )));
        }
        if !omega0.is_finite() {
            return Err(Error::InvalidParameter("omega0 must be finite".into()));
        }
        Ok(Self { gamma, omega_big, omega0 })
    }

    pub fn eval(&self, omega: f64) -> f64 {
        let half = 0.5 * self.gamma;
        let dw = omega - self.omega0;
        self.gamma * self.omega_big * self.omega_big / (2.0 * PI) / (dw * dw + half * half)
    }

    /// Lower-half-plane pole `w0 - i Gamma/2` and the residue of `R` there.
    pub fn pole(&self) -> Pole {
        let location = Complex64::new(self.omega0, -0.5 * self.gamma);
        // R = c / ((w - p)(w - conj p)), residue at p is c / (p - conj p) = c / (-i Gamma)
        let c = self.gamma * self.omega_big * self.omega_big / (2.0 * PI);
        let residue = Complex64::new(c, 0.0) / Complex64::new(0.0, -self.gamma);
        Pole { location, residue }
    }
}

/// Structure function supplied as a closure, integrated numerically.
#[derive(Clone)]
pub struct CustomProfile {
    pub name: String,
    pub func: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    /// Where most of the spectral weight sits.
    pub center: f64,
    /// Characteristic width, used to map the real line for quadrature.
    pub scale: f64,
}

impl fmt::Debug for CustomProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomProfile")
            .field("name", &self.name)
            .field("center", &self.center)
            .field("scale", &self.scale)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum Profile {
    Lorentzian(LorentzianProfile),
    /// Sum of Lorentzians; still a pure pole sum.
    MultiLorentzian(Vec<LorentzianProfile>),
    Custom(CustomProfile),
}

impl Profile {
    pub fn eval(&self, omega: f64) -> f64 {
        match self {
            Profile::Lorentzian(p) => p.eval(omega),
            Profile::MultiLorentzian(ps) => ps.iter().map(|p| p.eval(omega)).sum(),
            Profile::Custom(c) => (c.func)(omega),
        }
    }

    /// Lower-half-plane poles, if the profile is a finite pole sum.
    pub fn poles(&self) -> Option<Vec<Pole>> {
        match self {
            Profile::Lorentzian(p) => Some(vec![p.pole()]),
            Profile::MultiLorentzian(ps) => Some(ps.iter().map(|p| p.pole()).collect()),
            Profile::Custom(_) => None,
        }
    }

    /// Width used as the unit of frequency for tolerances.
    pub fn reference_width(&self) -> f64 {
        match self {
            Profile::Lorentzian(p) => p.gamma,
            Profile::MultiLorentzian(ps) => {
                ps.iter().map(|p| p.gamma).fold(f64::INFINITY, f64::min)
            }
            Profile::Custom(c) => c.scale,
        }
    }

    pub fn center(&self) -> f64 {
        match self {
            Profile::Lorentzian(p) => p.omega0,
            Profile::MultiLorentzian(ps) => {
                ps.iter().map(|p| p.omega0).sum::<f64>() / ps.len().max(1) as f64
            }
            Profile::Custom(c) => c.center,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    /// Both transitions share one reservoir; photons may be emitted in either order.
    SingleReservoir,
    /// Upper and lower transitions each couple to their own reservoir.
    TwoReservoirs,
}

/// Selects `R1` (0 <-> 1) or `R2` (1 <-> 2).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transition {
    Lower,
    Upper,
}

#[derive(Debug, Clone)]
pub struct ReservoirSpec {
    pub r1: Profile,
    pub r2: Profile,
    pub alpha: f64,
    pub topology: Topology,
}

impl ReservoirSpec {
    pub fn new(r1: Profile, r2: Profile, alpha: f64, topology: Topology) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(Error::InvalidParameter("alpha must be finite".into()));
        }
        if let Profile::MultiLorentzian(ps) = &r1 {
            if ps.is_empty() {
                return Err(Error::InvalidParameter("empty multi-Lorentzian profile".into()));
            }
        }
        if let Profile::MultiLorentzian(ps) = &r2 {
            if ps.is_empty() {
                return Err(Error::InvalidParameter("empty multi-Lorentzian profile".into()));
            }
        }
        Ok(Self { r1, r2, alpha, topology })
    }

    /// Identical Lorentzian structure functions on both transitions, `alpha = 1`.
    pub fn lorentzian(gamma: f64, omega_big: f64, omega0: f64, topology: Topology) -> Result<Self> {
        let p = Profile::Lorentzian(LorentzianProfile::new(gamma, omega_big, omega0)?);
        Self::new(p.clone(), p, 1.0, topology)
    }

    pub fn profile(&self, which: Transition) -> &Profile {
        match which {
            Transition::Lower => &self.r1,
            Transition::Upper => &self.r2,
        }
    }

    /// Smallest admissible `Re(s)`.
    pub fn sigma_min(&self) -> f64 {
        SIGMA_MIN_FACTOR * self.r1.reference_width().min(self.r2.reference_width())
    }
}

pub fn eval_r(spec: &ReservoirSpec, which: Transition, omega: f64) -> f64 {
    spec.profile(which).eval(omega)
}

pub fn lorentzian_pole(profile: &LorentzianProfile) -> Pole {
    profile.pole()
}
