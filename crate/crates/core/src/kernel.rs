//! Laplace-domain kernel assembly.
//!
//! For each Laplace node `s` the amplitude `f(w) = b1(s + i(w - w2))` obeys
//! `A(w) f(w) + int B(w, w') f(w') dw' = C`, i.e. `f + K f = d` with
//! `K = B / A` and `d = C / A`. The matrix stored here is the Nystrom
//! discretisation `K[l][m] = w_m K(w_l, w_m)` on a trapezoidal grid.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quadrature::{integrate_real_line, FrequencyGrid};
use crate::reservoir::{AtomParams, LorentzianProfile, Profile, ReservoirSpec, Topology};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Relative tolerance for the numerical fallback of the `A` integral.
pub const A_INTEGRAL_REL_TOL: f64 = 1e-8;

/// A Laplace variable with `Re(s)` above the admissible floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceNode(Complex64);

impl LaplaceNode {
    pub fn new(s: Complex64, sigma_min: f64) -> Result<Self> {
        if !s.is_finite() || s.re < sigma_min {
            return Err(Error::NodeBelowAbscissa { s, sigma_min });
        }
        Ok(Self(s))
    }

    pub fn for_spec(spec: &ReservoirSpec, s: Complex64) -> Result<Self> {
        Self::new(s, spec.sigma_min())
    }

    pub fn real(s: f64, spec: &ReservoirSpec) -> Result<Self> {
        Self::for_spec(spec, Complex64::new(s, 0.0))
    }

    pub fn value(&self) -> Complex64 {
        self.0
    }
}

/// Nystrom system `(K + I) f = d` at one Laplace node.
#[derive(Debug, Clone)]
pub struct KernelSystem {
    pub s: LaplaceNode,
    pub grid: FrequencyGrid,
    pub a_vals: Vec<Complex64>,
    pub d_vals: Vec<Complex64>,
    pub k_matrix: DMatrix<Complex64>,
    /// `w_l R2(w_l)`, the weights of the scalar product giving `b2(s)`.
    pub r_weights: Vec<f64>,
    pub topology: Topology,
}

impl KernelSystem {
    pub fn dim(&self) -> usize {
        self.d_vals.len()
    }

    /// `K + I`.
    pub fn system_matrix(&self) -> DMatrix<Complex64> {
        let mut m = self.k_matrix.clone();
        for j in 0..m.nrows() {
            m[(j, j)] += Complex64::new(1.0, 0.0);
        }
        m
    }
}

/// `int R(eta) / (s + i(eta - c)) d eta` over the real line.
///
/// Pole sums close the contour in the lower half plane, where the
/// denominator is analytic for `Re(s) > 0`.
pub fn cauchy_transform(profile: &Profile, s: Complex64, c: f64) -> Result<Complex64> {
    match profile.poles() {
        Some(poles) => Ok(poles
            .iter()
            .map(|p| Complex64::new(0.0, -2.0 * PI) * p.residue / (s + I * (p.location - c)))
            .sum()),
        None => cauchy_transform_quadrature(profile, s, c, A_INTEGRAL_REL_TOL),
    }
}

/// Same integral evaluated by adaptive quadrature regardless of profile type.
pub fn cauchy_transform_quadrature(
    profile: &Profile,
    s: Complex64,
    c: f64,
    rel_tol: f64,
) -> Result<Complex64> {
    let center = profile.center();
    let scale = profile.reference_width().max(f64::MIN_POSITIVE);
    integrate_real_line(
        |eta| profile.eval(eta) / (s + I * (eta - c)),
        center,
        scale,
        rel_tol,
    )
}

fn check_a(a: Complex64, omega: f64, s: Complex64, scale: f64) -> Result<Complex64> {
    if !a.is_finite() || a.norm() <= 64.0 * f64::EPSILON * scale {
        return Err(Error::SingularA { omega, s });
    }
    Ok(a)
}

/// `A(w) = s + i(w - w2) + int R1(eta) / (s + i(w + eta - w1 - w2)) d eta`.
pub fn build_a(spec: &ReservoirSpec, atom: &AtomParams, s: LaplaceNode, omega: f64) -> Result<Complex64> {
    let s = s.value();
    let c = atom.omega1 + atom.omega2 - omega;
    let free = s + I * (omega - atom.omega2);
    let a = free + cauchy_transform(&spec.r1, s, c)?;
    check_a(a, omega, s, 1.0 + free.norm())
}

fn a_values(
    spec: &ReservoirSpec,
    atom: &AtomParams,
    s: LaplaceNode,
    grid: &FrequencyGrid,
) -> Result<Vec<Complex64>> {
    grid.points.iter().map(|&w| build_a(spec, atom, s, w)).collect()
}

/// `d(w) = (-i/s) / A(w)` on the grid.
pub fn build_rhs(
    spec: &ReservoirSpec,
    atom: &AtomParams,
    s: LaplaceNode,
    grid: &FrequencyGrid,
) -> Result<Vec<Complex64>> {
    let a = a_values(spec, atom, s, grid)?;
    Ok(rhs_from_a(s, &a))
}

fn rhs_from_a(s: LaplaceNode, a: &[Complex64]) -> Vec<Complex64> {
    let c = -I / s.value();
    a.iter().map(|&a| c / a).collect()
}

fn r2_weights(spec: &ReservoirSpec, grid: &FrequencyGrid) -> Vec<f64> {
    grid.points
        .iter()
        .zip(&grid.weights)
        .map(|(&w, &wt)| wt * spec.r2.eval(w))
        .collect()
}

/// Single shared reservoir: `B(w, w') = alpha R1(w') / (s + i(w + w' - w1 - w2)) + R2(w') / s`.
pub fn build_kernel_single(
    spec: &ReservoirSpec,
    atom: &AtomParams,
    s: LaplaceNode,
    grid: &FrequencyGrid,
) -> Result<KernelSystem> {
    if spec.topology != Topology::SingleReservoir {
        return Err(Error::InvalidParameter(
            "single-reservoir kernel requested for a two-reservoir spec".into(),
        ));
    }
    let sv = s.value();
    let n = grid.len();
    let a_vals = a_values(spec, atom, s, grid)?;
    let d_vals = rhs_from_a(s, &a_vals);
    let r_weights = r2_weights(spec, grid);
    let r1w: Vec<f64> = grid
        .points
        .iter()
        .zip(&grid.weights)
        .map(|(&w, &wt)| wt * spec.alpha * spec.r1.eval(w))
        .collect();
    let inv_s = 1.0 / sv;
    let shift = atom.omega1 + atom.omega2;
    let mut k = DMatrix::<Complex64>::zeros(n, n);
    for l in 0..n {
        let wl = grid.points[l];
        let inv_a = 1.0 / a_vals[l];
        for m in 0..n {
            let denom = sv + I * (wl + grid.points[m] - shift);
            k[(l, m)] = (r1w[m] / denom + r_weights[m] * inv_s) * inv_a;
        }
    }
    Ok(KernelSystem {
        s,
        grid: grid.clone(),
        a_vals,
        d_vals,
        k_matrix: k,
        r_weights,
        topology: Topology::SingleReservoir,
    })
}

/// Separate reservoirs: `B(w') = R2(w') / s`, so `K` is rank one.
pub fn build_kernel_two(
    spec: &ReservoirSpec,
    atom: &AtomParams,
    s: LaplaceNode,
    grid: &FrequencyGrid,
) -> Result<KernelSystem> {
    if spec.topology != Topology::TwoReservoirs {
        return Err(Error::InvalidParameter(
            "two-reservoir kernel requested for a single-reservoir spec".into(),
        ));
    }
    let sv = s.value();
    let n = grid.len();
    let a_vals = a_values(spec, atom, s, grid)?;
    let d_vals = rhs_from_a(s, &a_vals);
    let r_weights = r2_weights(spec, grid);
    let mut k = DMatrix::<Complex64>::zeros(n, n);
    for l in 0..n {
        let row = 1.0 / (sv * a_vals[l]);
        for m in 0..n {
            k[(l, m)] = row * r_weights[m];
        }
    }
    Ok(KernelSystem {
        s,
        grid: grid.clone(),
        a_vals,
        d_vals,
        k_matrix: k,
        r_weights,
        topology: Topology::TwoReservoirs,
    })
}

pub fn build_kernel(
    spec: &ReservoirSpec,
    atom: &AtomParams,
    s: LaplaceNode,
    grid: &FrequencyGrid,
) -> Result<KernelSystem> {
    match spec.topology {
        Topology::SingleReservoir => build_kernel_single(spec, atom, s, grid),
        Topology::TwoReservoirs => build_kernel_two(spec, atom, s, grid),
    }
}

/// `Q(x) = (s + i x)(s + i x + Gamma/2) + Omega^2`.
pub fn q_polynomial(profile: &LorentzianProfile, s: Complex64, x: f64) -> Complex64 {
    let u = s + I * x;
    u * (u + 0.5 * profile.gamma) + profile.omega_big * profile.omega_big
}

/// Closed-form single-reservoir kernel for the resonant, equal-coupling Lorentzian.
pub fn resonant_kernel_single(
    profile: &LorentzianProfile,
    s: Complex64,
    omega_l: f64,
    omega_m: f64,
) -> Complex64 {
    let x = omega_l - profile.omega0;
    let y = omega_m - profile.omega0;
    let half = 0.5 * profile.gamma;
    let pref = profile.gamma * profile.omega_big * profile.omega_big / (2.0 * PI);
    let num = (s + I * x + half) * (2.0 * s + I * (x + y));
    let den = s * (y * y + half * half) * (s + I * (x + y)) * q_polynomial(profile, s, x);
    pref * num / den
}

/// Closed-form separable kernel for two identical resonant Lorentzian reservoirs.
pub fn resonant_kernel_two(
    profile: &LorentzianProfile,
    s: Complex64,
    omega_l: f64,
    omega_m: f64,
) -> Complex64 {
    let x = omega_l - profile.omega0;
    let y = omega_m - profile.omega0;
    let half = 0.5 * profile.gamma;
    let pref = profile.gamma * profile.omega_big * profile.omega_big / (2.0 * PI);
    pref * (s + I * x + half) / (s * (y * y + half * half) * q_polynomial(profile, s, x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reservoir::{CustomProfile, Transition};
    use std::sync::Arc;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn spec(gamma: f64, omega: f64, topology: Topology) -> ReservoirSpec {
        ReservoirSpec::lorentzian(gamma, omega, 10.0, topology).unwrap()
    }

    fn atom() -> AtomParams {
        AtomParams::resonant(10.0).unwrap()
    }

    fn node(sp: &ReservoirSpec, s: Complex64) -> LaplaceNode {
        LaplaceNode::for_spec(sp, s).unwrap()
    }

    #[test]
    fn a_at_resonance() {
        let sp = spec(1.0, 1.0, Topology::SingleReservoir);
        let a = build_a(&sp, &atom(), node(&sp, c(1.0, 0.0)), 10.0).unwrap();
        assert!((a - c(5.0 / 3.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn a_off_resonance() {
        let sp = spec(1.0, 1.0, Topology::SingleReservoir);
        let a = build_a(&sp, &atom(), node(&sp, c(1.0, 0.0)), 11.0).unwrap();
        // oracle: 1 + i + 1/(1.5 + i)
        let oracle = c(1.0, 1.0) + 1.0 / c(1.5, 1.0);
        assert!((a - oracle).norm() < 1e-14);
        assert!((a.re - 1.46154).abs() < 1e-5 && (a.im - 0.69231).abs() < 1e-5);
    }

    #[test]
    fn a_without_coupling_is_free() {
        let sp = spec(1.0, 0.0, Topology::SingleReservoir);
        for w in [8.0, 10.0, 13.5] {
            let s = c(0.7, 2.0);
            let a = build_a(&sp, &atom(), node(&sp, s), w).unwrap();
            assert!((a - (s + I * (w - 10.0))).norm() < 1e-15);
        }
    }

    #[test]
    fn a_matches_quadrature() {
        let sp = spec(1.0, 1.3, Topology::SingleReservoir);
        let at = AtomParams::new(9.6, 10.3).unwrap();
        for (s, w) in [(c(1.0, 0.0), 10.0), (c(0.3, 4.0), 7.5), (c(2.0, -3.0), 12.0)] {
            let closed = build_a(&sp, &at, node(&sp, s), w).unwrap();
            let cc = at.omega1 + at.omega2 - w;
            let numeric = s + I * (w - at.omega2)
                + cauchy_transform_quadrature(&sp.r1, s, cc, 1e-10).unwrap();
            assert!((closed - numeric).norm() <= 1e-6 * closed.norm());
        }
    }

    #[test]
    fn custom_profile_falls_back_to_quadrature() {
        let lor = LorentzianProfile::new(1.0, 1.0, 10.0).unwrap();
        let custom = Profile::Custom(CustomProfile {
            name: "lorentzian-closure".into(),
            func: Arc::new(move |w| lor.eval(w)),
            center: 10.0,
            scale: 1.0,
        });
        let sp = ReservoirSpec::new(custom.clone(), custom, 1.0, Topology::SingleReservoir).unwrap();
        let a = build_a(&sp, &atom(), node(&sp, c(1.0, 0.0)), 10.0).unwrap();
        assert!((a - c(5.0 / 3.0, 0.0)).norm() < 1e-7);
    }

    #[test]
    fn kernel_entry_at_centre() {
        let prof = LorentzianProfile::new(1.0, 1.0, 10.0).unwrap();
        let k = resonant_kernel_single(&prof, c(1.0, 0.0), 10.0, 10.0);
        assert!((k - c(4.8 / (2.0 * PI), 0.0)).norm() < 1e-14);
        assert!((k.re - 0.763944).abs() < 1e-6);
    }

    #[test]
    fn kernel_matches_closed_form() {
        let sp = spec(1.0, 1.0, Topology::SingleReservoir);
        let prof = LorentzianProfile::new(1.0, 1.0, 10.0).unwrap();
        let grid = FrequencyGrid::trapezoid(10.0, 30.0, 41).unwrap();
        for s in [c(1.0, 0.0), c(0.2, 3.0), c(5.0, -7.0)] {
            let sys = build_kernel_single(&sp, &atom(), node(&sp, s), &grid).unwrap();
            for l in 0..grid.len() {
                for m in 0..grid.len() {
                    let closed =
                        grid.weights[m] * resonant_kernel_single(&prof, s, grid.points[l], grid.points[m]);
                    let got = sys.k_matrix[(l, m)];
                    assert!((got - closed).norm() <= 1e-12 * closed.norm().max(1e-300));
                }
            }
        }
    }

    #[test]
    fn two_reservoir_kernel_matches_closed_form() {
        let sp = spec(1.0, 1.0, Topology::TwoReservoirs);
        let prof = LorentzianProfile::new(1.0, 1.0, 10.0).unwrap();
        let grid = FrequencyGrid::trapezoid(10.0, 30.0, 31).unwrap();
        let s = c(0.8, 1.7);
        let sys = build_kernel_two(&sp, &atom(), node(&sp, s), &grid).unwrap();
        for l in 0..grid.len() {
            for m in 0..grid.len() {
                let closed = grid.weights[m] * resonant_kernel_two(&prof, s, grid.points[l], grid.points[m]);
                assert!((sys.k_matrix[(l, m)] - closed).norm() <= 1e-12 * closed.norm());
            }
        }
    }

    #[test]
    fn a_times_pole_factor_is_q() {
        let prof = LorentzianProfile::new(1.0, 1.0, 10.0).unwrap();
        let sp = spec(1.0, 1.0, Topology::SingleReservoir);
        let draws = [
            (c(0.3, 0.0), 9.1),
            (c(1.7, 2.2), 10.0),
            (c(0.05, -4.0), 14.3),
            (c(3.0, 1.0), 5.5),
            (c(0.9, 9.0), 10.4),
            (c(2.5, -0.5), 12.2),
            (c(0.01, 0.3), 9.99),
            (c(7.0, 7.0), 3.0),
            (c(0.4, -2.0), 18.0),
            (c(1.1, 0.1), 10.7),
        ];
        for (s, w) in draws {
            let x = w - 10.0;
            let a = build_a(&sp, &atom(), node(&sp, s), w).unwrap();
            let lhs = a * (s + I * x + 0.5);
            let rhs = q_polynomial(&prof, s, x);
            assert!((lhs - rhs).norm() <= 1e-12 * rhs.norm());
        }
    }

    #[test]
    fn zero_coupling_zero_kernel() {
        for top in [Topology::SingleReservoir, Topology::TwoReservoirs] {
            let sp = spec(1.0, 0.0, top);
            let grid = FrequencyGrid::trapezoid(10.0, 5.0, 11).unwrap();
            let sys = build_kernel(&sp, &atom(), node(&sp, c(1.0, 0.5)), &grid).unwrap();
            assert!(sys.k_matrix.iter().all(|z| *z == c(0.0, 0.0)));
        }
    }

    #[test]
    fn two_reservoir_columns_are_proportional() {
        let sp = spec(1.0, 1.0, Topology::TwoReservoirs);
        let grid = FrequencyGrid::trapezoid(10.0, 30.0, 25).unwrap();
        let sys = build_kernel_two(&sp, &atom(), node(&sp, c(1.0, 0.0)), &grid).unwrap();
        let s = c(1.0, 0.0);
        for m in 0..grid.len() {
            let col_scale = sys.r_weights[m] / s;
            for l in 0..grid.len() {
                let expected = col_scale / sys.a_vals[l];
                assert!((sys.k_matrix[(l, m)] - expected).norm() <= 1e-14 * expected.norm());
            }
        }
    }

    #[test]
    fn rhs_examples() {
        let sp = spec(1.0, 1.0, Topology::SingleReservoir);
        let grid = FrequencyGrid::trapezoid(10.0, 1.0, 3).unwrap();
        let d = build_rhs(&sp, &atom(), node(&sp, c(1.0, 0.0)), &grid).unwrap();
        assert!((d[1] - c(0.0, -0.6)).norm() < 1e-14);

        let sp0 = spec(1.0, 0.0, Topology::SingleReservoir);
        for s in [0.5, 2.0, 7.0] {
            let d = build_rhs(&sp0, &atom(), node(&sp0, c(s, 0.0)), &grid).unwrap();
            assert!((d[1] - c(0.0, -1.0 / (s * s))).norm() < 1e-15);
        }

        // large s: d ~ -i/s^2
        let s = 1e4;
        let d = build_rhs(&sp, &atom(), node(&sp, c(s, 0.0)), &grid).unwrap();
        assert!((d[1] * s * s - c(0.0, -1.0)).norm() < 1e-3);
    }

    #[test]
    fn rhs_decays_like_inverse_frequency() {
        let sp = spec(1.0, 1.0, Topology::SingleReservoir);
        let grid = FrequencyGrid::trapezoid(10.0, 1000.0, 5).unwrap();
        let d = build_rhs(&sp, &atom(), node(&sp, c(1.0, 0.0)), &grid).unwrap();
        // points at detuning -1000, -500, 0, 500, 1000
        let ratio = d[4].norm() / d[3].norm();
        assert!((ratio - 0.5).abs() < 1e-3);
        assert!((d[4].norm() * 1000.0 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn node_below_floor_rejected() {
        let sp = spec(1.0, 1.0, Topology::SingleReservoir);
        assert!(LaplaceNode::for_spec(&sp, c(1e-4, 3.0)).is_err());
        assert!(LaplaceNode::for_spec(&sp, c(1e-3, 3.0)).is_ok());
    }

    #[test]
    fn wrong_topology_rejected() {
        let sp = spec(1.0, 1.0, Topology::SingleReservoir);
        let grid = FrequencyGrid::trapezoid(10.0, 5.0, 5).unwrap();
        assert!(build_kernel_two(&sp, &atom(), node(&sp, c(1.0, 0.0)), &grid).is_err());
    }

    #[test]
    fn eval_r_positive_for_nonzero_coupling() {
        let sp = spec(1.0, 0.3, Topology::SingleReservoir);
        for w in [-1e6, -3.0, 10.0, 1e6] {
            assert!(crate::reservoir::eval_r(&sp, Transition::Upper, w) > 0.0);
        }
    }
}
