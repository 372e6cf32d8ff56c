//! Per-node solution of the discretised integral equation and `b2(s)`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kernel::{KernelSystem, LaplaceNode};
use crate::lu::{LuError, LuFactor};

/// Systems with a larger estimated condition number are rejected.
pub const MAX_CONDITION: f64 = 1e12;
/// Required `||(K + I) f - d||_inf / ||d||_inf`.
pub const RESIDUAL_TOL: f64 = 1e-10;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone)]
pub struct AmplitudeSolution {
    pub s: LaplaceNode,
    pub f_vals: Vec<Complex64>,
    pub b2bar: Complex64,
}

fn lu_error(err: LuError, s: Complex64) -> Error {
    match err {
        LuError::Singular { pivot } => Error::SingularMatrix { s, pivot },
        LuError::Shape { rows, cols } => Error::DimensionMismatch { expected: rows, actual: cols },
        LuError::Rhs { expected, actual } => Error::DimensionMismatch { expected, actual },
    }
}

fn inf_norm<T: nalgebra::ComplexField<RealField = f64> + Copy>(v: &[T]) -> f64 {
    v.iter().map(|z| z.modulus()).fold(0.0, f64::max)
}

fn residual<T: nalgebra::ComplexField<RealField = f64> + Copy>(
    m: &DMatrix<T>,
    x: &[T],
    b: &[T],
) -> Vec<T> {
    (0..b.len())
        .map(|i| {
            let mut acc = b[i];
            for j in 0..x.len() {
                acc -= m[(i, j)] * x[j];
            }
            acc
        })
        .collect()
}

/// LU solve with a condition check and at most one refinement step.
fn checked_solve<T: nalgebra::ComplexField<RealField = f64> + Copy>(
    m: &DMatrix<T>,
    b: &[T],
    s: Complex64,
) -> Result<Vec<T>> {
    let lu = LuFactor::new(m).map_err(|e| lu_error(e, s))?;
    let condition = lu.condition_estimate();
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned { s, condition });
    }
    let mut x = lu.solve(b).map_err(|e| lu_error(e, s))?;
    let scale = inf_norm(b);
    let mut r = residual(m, &x, b);
    if inf_norm(&r) > RESIDUAL_TOL * scale {
        let dx = lu.solve(&r).map_err(|e| lu_error(e, s))?;
        for (xi, di) in x.iter_mut().zip(dx) {
            *xi += di;
        }
        r = residual(m, &x, b);
        if inf_norm(&r) > RESIDUAL_TOL * scale {
            return Err(Error::IllConditioned { s, condition });
        }
    }
    if x.iter().any(|z| !z.is_finite()) {
        return Err(Error::IllConditioned { s, condition });
    }
    Ok(x)
}

/// Solves `(K + I) f = d` by dense LU in complex arithmetic.
pub fn solve_complex(system: &KernelSystem) -> Result<AmplitudeSolution> {
    let s = system.s.value();
    let f_vals = checked_solve(&system.system_matrix(), &system.d_vals, s)?;
    let b2bar = b2bar_from_f(system, &f_vals)?;
    Ok(AmplitudeSolution { s: system.s, f_vals, b2bar })
}

/// Solves the real `2N x 2N` block form, valid for real `s` only.
pub fn solve_real_block(system: &KernelSystem) -> Result<AmplitudeSolution> {
    let s = system.s.value();
    if s.im.abs() > 1e-14 * s.re.abs() {
        return Err(Error::ComplexNode { s });
    }
    let n = system.dim();
    let k = &system.k_matrix;
    let block = DMatrix::<f64>::from_fn(2 * n, 2 * n, |i, j| {
        let (bi, ii) = (i / n, i % n);
        let (bj, jj) = (j / n, j % n);
        let z = k[(ii, jj)];
        let diag = if ii == jj { 1.0 } else { 0.0 };
        match (bi, bj) {
            (0, 0) | (1, 1) => z.re + diag,
            (0, 1) => -z.im,
            _ => z.im,
        }
    });
    let rhs: Vec<f64> = system
        .d_vals
        .iter()
        .map(|z| z.re)
        .chain(system.d_vals.iter().map(|z| z.im))
        .collect();
    let x = checked_solve(&block, &rhs, s)?;
    let (fr, fi) = x.split_at(n);
    let f_vals: Vec<Complex64> = fr.iter().zip(fi).map(|(&r, &i)| Complex64::new(r, i)).collect();
    let (re, im) = b2bar_split(system, fr, fi)?;
    Ok(AmplitudeSolution { s: system.s, f_vals, b2bar: Complex64::new(re, im) })
}

/// `b2(s) = 1/s - (i/s) sum_l w_l R2(w_l) f(w_l)`.
pub fn b2bar_from_f(system: &KernelSystem, f_vals: &[Complex64]) -> Result<Complex64> {
    if f_vals.len() != system.r_weights.len() {
        return Err(Error::DimensionMismatch {
            expected: system.r_weights.len(),
            actual: f_vals.len(),
        });
    }
    let s = system.s.value();
    let dot: Complex64 = system.r_weights.iter().zip(f_vals).map(|(&r, &f)| r * f).sum();
    Ok((1.0 - I * dot) / s)
}

/// Real-axis split of `b2bar_from_f`: `Re = (1 + r.f_i)/s`, `Im = -(r.f_r)/s`.
pub fn b2bar_split(system: &KernelSystem, f_re: &[f64], f_im: &[f64]) -> Result<(f64, f64)> {
    let n = system.r_weights.len();
    if f_re.len() != n || f_im.len() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: f_re.len().min(f_im.len()) });
    }
    let s = system.s.value();
    if s.im.abs() > 1e-14 * s.re.abs() {
        return Err(Error::ComplexNode { s });
    }
    let r_dot_fi: f64 = system.r_weights.iter().zip(f_im).map(|(r, f)| r * f).sum();
    let r_dot_fr: f64 = system.r_weights.iter().zip(f_re).map(|(r, f)| r * f).sum();
    Ok(((1.0 + r_dot_fi) / s.re, -r_dot_fr / s.re))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{build_kernel, LaplaceNode};
    use crate::quadrature::FrequencyGrid;
    use crate::reservoir::{AtomParams, ReservoirSpec, Topology};
    use crate::reservoir::Transition;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn system(omega: f64, top: Topology, s: Complex64, n: usize, w: f64) -> KernelSystem {
        let spec = ReservoirSpec::lorentzian(1.0, omega, 0.5, top).unwrap();
        let atom = AtomParams::resonant(0.5).unwrap();
        let grid = FrequencyGrid::trapezoid(0.5, w, n).unwrap();
        build_kernel(&spec, &atom, LaplaceNode::for_spec(&spec, s).unwrap(), &grid).unwrap()
    }

    #[test]
    fn zero_coupling_identity() {
        for top in [Topology::SingleReservoir, Topology::TwoReservoirs] {
            let sys = system(0.0, top, c(0.8, 1.5), 21, 10.0);
            let sol = solve_complex(&sys).unwrap();
            for (f, d) in sol.f_vals.iter().zip(&sys.d_vals) {
                assert!((f - d).norm() < 1e-15);
            }
            assert!((sol.b2bar - 1.0 / c(0.8, 1.5)).norm() < 1e-15);
        }
    }

    #[test]
    fn residual_within_tolerance() {
        let sys = system(1.0, Topology::SingleReservoir, c(0.3, 2.0), 60, 30.0);
        let sol = solve_complex(&sys).unwrap();
        let r = residual(&sys.system_matrix(), &sol.f_vals, &sys.d_vals);
        assert!(inf_norm(&r) <= RESIDUAL_TOL * inf_norm(&sys.d_vals));
    }

    #[test]
    fn sherman_morrison_agrees_on_rank_one() {
        // K = u v^T with u_l = 1/(s A_l), v_m = r_m; (I + u v^T)^-1 d = d - u (v.d)/(1 + v.u)
        let s = c(1.0, 0.0);
        let sys = system(1.0, Topology::TwoReservoirs, s, 80, 30.0);
        let u: Vec<Complex64> = sys.a_vals.iter().map(|a| 1.0 / (s * a)).collect();
        let v = &sys.r_weights;
        let vd: Complex64 = v.iter().zip(&sys.d_vals).map(|(a, b)| *a * b).sum();
        let vu: Complex64 = v.iter().zip(&u).map(|(a, b)| *a * b).sum();
        let oracle: Vec<Complex64> = sys
            .d_vals
            .iter()
            .zip(&u)
            .map(|(d, ui)| d - ui * vd / (1.0 + vu))
            .collect();
        let sol = solve_complex(&sys).unwrap();
        for (a, b) in sol.f_vals.iter().zip(&oracle) {
            assert!((a - b).norm() <= 1e-10 * b.norm().max(1e-300));
        }
    }

    #[test]
    fn real_block_matches_complex() {
        for top in [Topology::SingleReservoir, Topology::TwoReservoirs] {
            for s in [0.05, 0.7, 3.0] {
                let sys = system(1.3, top, c(s, 0.0), 40, 20.0);
                let a = solve_complex(&sys).unwrap();
                let b = solve_real_block(&sys).unwrap();
                let scale = inf_norm(&a.f_vals);
                let diff = a.f_vals.iter().zip(&b.f_vals).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
                assert!(diff <= 1e-10 * scale);
                assert!((a.b2bar - b.b2bar).norm() <= 1e-10 * a.b2bar.norm());
            }
        }
    }

    #[test]
    fn real_block_rejects_complex_node() {
        let sys = system(1.0, Topology::SingleReservoir, c(1.0, 0.5), 10, 5.0);
        assert!(matches!(solve_real_block(&sys), Err(Error::ComplexNode { .. })));
    }

    #[test]
    fn real_block_zero_coupling_is_imaginary() {
        // at w = w2 the free A equals s, so f = d = -i/s^2
        let sys = system(0.0, Topology::SingleReservoir, c(2.0, 0.0), 11, 5.0);
        let sol = solve_real_block(&sys).unwrap();
        let mid = sol.f_vals[5];
        assert!(mid.re.abs() < 1e-16);
        assert!((mid.im + 0.25).abs() < 1e-15);
    }

    #[test]
    fn scalar_system() {
        let spec = ReservoirSpec::lorentzian(1.0, 1.0, 0.5, Topology::SingleReservoir).unwrap();
        let atom = AtomParams::resonant(0.5).unwrap();
        let grid = FrequencyGrid::trapezoid(0.5, 2.0, 1).unwrap();
        let node = LaplaceNode::real(1.5, &spec).unwrap();
        let sys = build_kernel(&spec, &atom, node, &grid).unwrap();
        let expected = sys.d_vals[0] / (1.0 + sys.k_matrix[(0, 0)]);
        let a = solve_complex(&sys).unwrap();
        let b = solve_real_block(&sys).unwrap();
        assert!((a.f_vals[0] - expected).norm() < 1e-15);
        assert!((b.f_vals[0] - expected).norm() < 1e-15);
    }

    #[test]
    fn b2bar_two_reservoir_converges_to_two_thirds() {
        let sys = system(1.0, Topology::TwoReservoirs, c(1.0, 0.0), 1601, 200.0);
        let sol = solve_complex(&sys).unwrap();
        assert!((sol.b2bar - c(2.0 / 3.0, 0.0)).norm() < 1e-3);
        assert!(sol.b2bar.im.abs() < 1e-8);
    }

    #[test]
    fn split_form_matches_complex_form() {
        let sys = system(1.0, Topology::SingleReservoir, c(0.9, 0.0), 30, 15.0);
        let sol = solve_complex(&sys).unwrap();
        let fr: Vec<f64> = sol.f_vals.iter().map(|z| z.re).collect();
        let fi: Vec<f64> = sol.f_vals.iter().map(|z| z.im).collect();
        let (re, im) = b2bar_split(&sys, &fr, &fi).unwrap();
        assert!((re - sol.b2bar.re).abs() < 1e-14 && (im - sol.b2bar.im).abs() < 1e-14);
    }

    #[test]
    fn initial_value_theorem() {
        for top in [Topology::SingleReservoir, Topology::TwoReservoirs] {
            let near = solve_complex(&system(1.0, top, c(100.0, 0.0), 150, 30.0)).unwrap();
            let far = solve_complex(&system(1.0, top, c(1000.0, 0.0), 150, 30.0)).unwrap();
            let e_near = (near.b2bar * 100.0 - 1.0).norm();
            let e_far = (far.b2bar * 1000.0 - 1.0).norm();
            assert!(e_far < e_near, "approach must be monotone");
            assert!((0.99..=1.01).contains(&(far.b2bar.re * 1000.0)));
        }
    }

    #[test]
    fn final_value_theorem() {
        let spec = ReservoirSpec::lorentzian(1.0, 1.0, 0.5, Topology::TwoReservoirs).unwrap();
        let sigma = spec.sigma_min();
        let sys = system(1.0, Topology::TwoReservoirs, c(sigma, 0.0), 600, 60.0);
        let sol = solve_complex(&sys).unwrap();
        assert!((sol.b2bar * sigma).norm() < 1e-2);
        let _ = Transition::Upper;
    }
}
