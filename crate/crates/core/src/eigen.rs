//! Biorthogonal eigen-expansion of the discretised kernel.
//!
//! `K phi_n = xi_n phi_n` on the grid, left eigenvectors `theta_n` come from
//! the adjoint `W^-1 K^H W` (adjoint in the weighted inner product
//! `<a, b> = sum_l w_l conj(a_l) b_l`), and the solution of `(I + K) f = d`
//! is `f = sum_n phi_n <theta_n, d> / (1 + xi_n)`.
//!
//! Eigenvalues that cannot be separated from their neighbours by more than
//! `CLUSTER_GAP * rho` are grouped. The group linked to zero (the numerical
//! null space, e.g. `N - 1` eigenvalues of a rank-1 kernel) is handled
//! through its spectral projector; any other group makes the expansion
//! ill-defined and is refused.

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kernel::KernelSystem;
use crate::solver::{b2bar_from_f, AmplitudeSolution};

/// Relative eigenvalue gap below which eigenvalues are treated as one cluster.
pub const CLUSTER_GAP: f64 = 1e-8;
/// `|1 + xi|` below this is a resonance.
pub const RESONANCE_TOL: f64 = 1e-8;
/// Largest tolerated relative residual of the expansion solution.
pub const COMPLETENESS_TOL: f64 = 1e-6;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// How eigenpair `n` entered the expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pairing {
    /// Isolated eigenvalue with `<theta_n, phi_n> = 1`.
    Separated,
    /// Member of the cluster around zero, treated by projection.
    NullCluster,
    /// Member of a degenerate cluster away from zero.
    Degenerate,
}

#[derive(Debug, Clone)]
pub struct BiorthogonalSystem {
    /// Eigenvalues ordered by real part, then imaginary part.
    pub xi: Vec<Complex64>,
    /// Right eigenvectors as columns, unit weighted norm.
    pub right_fns: DMatrix<Complex64>,
    /// Left eigenvectors as columns, scaled so `<theta_n, phi_n> = 1` for separated pairs.
    pub left_fns: DMatrix<Complex64>,
    pub pairing: Vec<Pairing>,
    /// Eigenvalues of the adjoint, in the order matched to `xi`.
    pub adjoint_xi: Vec<Complex64>,
    pub weights: Vec<f64>,
    pub spectral_radius: f64,
    kernel: DMatrix<Complex64>,
}

impl BiorthogonalSystem {
    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    /// Weighted inner product `sum_l w_l conj(a_l) b_l`.
    pub fn inner(&self, a: &[Complex64], b: &[Complex64]) -> Complex64 {
        weighted_inner(&self.weights, a, b)
    }

    pub fn phi(&self, n: usize) -> Vec<Complex64> {
        self.right_fns.column(n).iter().copied().collect()
    }

    pub fn theta(&self, n: usize) -> Vec<Complex64> {
        self.left_fns.column(n).iter().copied().collect()
    }

    /// Indices of separated pairs.
    pub fn separated(&self) -> Vec<usize> {
        (0..self.len()).filter(|&n| self.pairing[n] == Pairing::Separated).collect()
    }

    /// Eigenvalues grouped into degenerate clusters (other than the null cluster).
    pub fn degenerate_clusters(&self) -> Vec<Vec<Complex64>> {
        let deg: Vec<Complex64> = (0..self.len())
            .filter(|&n| self.pairing[n] == Pairing::Degenerate)
            .map(|n| self.xi[n])
            .collect();
        let gap = CLUSTER_GAP * self.spectral_radius;
        let labels = single_linkage(&deg, gap, false);
        let groups = labels.iter().copied().max().map_or(0, |m| m + 1);
        (0..groups)
            .map(|g| deg.iter().zip(&labels).filter(|(_, &l)| l == g).map(|(x, _)| *x).collect())
            .collect()
    }

    /// Number of eigenvalues with `|xi| > tol * ||K||_inf`.
    pub fn nonzero_count(&self, tol: f64) -> usize {
        let scale = inf_norm(&self.kernel);
        self.xi.iter().filter(|x| x.norm() > tol * scale).count()
    }

    /// Largest `||K phi_n - xi_n phi_n||_inf` over all pairs.
    pub fn max_eigen_residual(&self) -> f64 {
        let kphi = &self.kernel * &self.right_fns;
        let mut worst = 0.0f64;
        for n in 0..self.len() {
            for l in 0..self.len() {
                worst = worst.max((kphi[(l, n)] - self.xi[n] * self.right_fns[(l, n)]).norm());
            }
        }
        worst
    }

    pub fn kernel_norm(&self) -> f64 {
        inf_norm(&self.kernel)
    }
}

fn weighted_inner(w: &[f64], a: &[Complex64], b: &[Complex64]) -> Complex64 {
    w.iter().zip(a).zip(b).map(|((w, a), b)| a.conj() * b * *w).sum()
}

fn inf_norm(m: &DMatrix<Complex64>) -> f64 {
    (0..m.nrows()).map(|i| m.row(i).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// Cluster labels under single linkage with threshold `gap`. With
/// `with_origin`, label 0 is reserved for the component containing zero.
fn single_linkage(vals: &[Complex64], gap: f64, with_origin: bool) -> Vec<usize> {
    let n = vals.len();
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    let flood = |seeds: Vec<usize>, id: usize, label: &mut Vec<usize>| {
        let mut stack = seeds;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                if label[j] == usize::MAX && (vals[i] - vals[j]).norm() < gap {
                    label[j] = id;
                    stack.push(j);
                }
            }
        }
    };
    if with_origin {
        let seeds: Vec<usize> = (0..n).filter(|&i| vals[i].norm() < gap).collect();
        for &i in &seeds {
            label[i] = 0;
        }
        flood(seeds, 0, &mut label);
        next = 1;
    }
    for i in 0..n {
        if label[i] == usize::MAX {
            label[i] = next;
            flood(vec![i], next, &mut label);
            next += 1;
        }
    }
    label
}

/// Eigenvalues and right eigenvectors of a complex matrix via Schur form.
fn eigenpairs(m: &DMatrix<Complex64>) -> Result<(Vec<Complex64>, DMatrix<Complex64>)> {
    let n = m.nrows();
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 1000 * n.max(1))
        .ok_or_else(|| Error::Eigen("Schur iteration did not converge".into()))?;
    let (q, t) = schur.unpack();
    let lambda: Vec<Complex64> = (0..n).map(|k| t[(k, k)]).collect();
    let tnorm = inf_norm(&t).max(f64::MIN_POSITIVE);
    let small = f64::EPSILON * tnorm;
    let mut y = DMatrix::from_element(n, n, ZERO);
    for k in 0..n {
        let mut col = vec![ZERO; n];
        col[k] = ONE;
        for j in (0..k).rev() {
            let mut acc = ZERO;
            for i in j + 1..=k {
                acc += t[(j, i)] * col[i];
            }
            let mut diag = t[(j, j)] - lambda[k];
            if diag.norm() < small {
                // perturbed pivot for (near-)repeated eigenvalues
                diag = Complex64::new(small, 0.0);
            }
            col[j] = -acc / diag;
            let big = col.iter().map(|z| z.norm()).fold(0.0, f64::max);
            if big > 1e100 {
                for z in col.iter_mut() {
                    *z /= big;
                }
            }
        }
        for j in 0..n {
            y[(j, k)] = col[j];
        }
    }
    Ok((lambda, q * y))
}

/// Right and left eigen-systems of the Nystrom matrix with biorthogonal pairing.
pub fn decompose(system: &KernelSystem) -> Result<BiorthogonalSystem> {
    decompose_matrix(&system.k_matrix, &system.grid.weights)
}

/// As [`decompose`], for an arbitrary square matrix and positive weights.
pub fn decompose_matrix(k: &DMatrix<Complex64>, weights: &[f64]) -> Result<BiorthogonalSystem> {
    let n = k.nrows();
    if k.ncols() != n || weights.len() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: weights.len() });
    }
    if n == 0 {
        return Err(Error::InvalidParameter("empty kernel matrix".into()));
    }
    if k.iter().any(|z| !z.is_finite()) {
        return Err(Error::Eigen("kernel matrix has non-finite entries".into()));
    }
    if weights.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::InvalidParameter("weights must be positive".into()));
    }

    let (lambda, vecs) = eigenpairs(k)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| lambda[a].re.total_cmp(&lambda[b].re).then(lambda[a].im.total_cmp(&lambda[b].im)));
    let xi: Vec<Complex64> = order.iter().map(|&i| lambda[i]).collect();
    let mut right = DMatrix::from_element(n, n, ZERO);
    for (c, &i) in order.iter().enumerate() {
        let col: Vec<Complex64> = vecs.column(i).iter().copied().collect();
        let norm = weighted_inner(weights, &col, &col).re.sqrt();
        for l in 0..n {
            right[(l, c)] = col[l] / norm;
        }
    }

    // adjoint in the weighted inner product: W^-1 K^H W
    let adj = DMatrix::from_fn(n, n, |i, j| k[(j, i)].conj() * weights[j] / weights[i]);
    let (mu, adj_vecs) = eigenpairs(&adj)?;

    let rho = xi.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let gap = CLUSTER_GAP * rho;
    let labels = single_linkage(&xi, gap, true);
    let mut pairing = vec![Pairing::Separated; n];
    for c in 0..n {
        let members = labels.iter().filter(|&&l| l == labels[c]).count();
        let null = labels[c] == 0 && (rho == 0.0 || xi.iter().any(|x| x.norm() < gap));
        pairing[c] = if rho == 0.0 || null {
            Pairing::NullCluster
        } else if members > 1 {
            Pairing::Degenerate
        } else {
            Pairing::Separated
        };
    }

    let mut left = DMatrix::from_element(n, n, ZERO);
    let mut adjoint_xi = vec![ZERO; n];
    let mut used = vec![false; n];
    // separated pairs first so clustered ones cannot steal their partners
    let mut visit: Vec<usize> = (0..n).filter(|&c| pairing[c] == Pairing::Separated).collect();
    visit.extend((0..n).filter(|&c| pairing[c] != Pairing::Separated));
    for c in visit {
        let target = xi[c].conj();
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if used[j] {
                continue;
            }
            let d = (mu[j] - target).norm();
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        let (j, dist) = best.ok_or_else(|| Error::PairingAmbiguity { cluster: vec![xi[c]] })?;
        if pairing[c] == Pairing::Separated {
            let rivals = (0..n).filter(|&i| !used[i] && i != j && (mu[i] - target).norm() < gap.max(dist)).count();
            if rivals > 0 || dist > 1e-6 * rho.max(f64::MIN_POSITIVE) {
                return Err(Error::PairingAmbiguity { cluster: vec![xi[c]] });
            }
        }
        used[j] = true;
        adjoint_xi[c] = mu[j];
        let theta: Vec<Complex64> = adj_vecs.column(j).iter().copied().collect();
        let phi: Vec<Complex64> = right.column(c).iter().copied().collect();
        let overlap = weighted_inner(weights, &theta, &phi);
        let scale = if pairing[c] == Pairing::Separated {
            let tn = weighted_inner(weights, &theta, &theta).re.sqrt();
            if overlap.norm() < 1e-14 * tn {
                return Err(Error::PairingAmbiguity { cluster: vec![xi[c]] });
            }
            // <theta/conj(overlap), phi> = 1
            ONE / overlap.conj()
        } else {
            let tn = weighted_inner(weights, &theta, &theta).re.sqrt();
            Complex64::new(1.0 / tn, 0.0)
        };
        for l in 0..n {
            left[(l, c)] = theta[l] * scale;
        }
    }

    Ok(BiorthogonalSystem {
        xi,
        right_fns: right,
        left_fns: left,
        pairing,
        adjoint_xi,
        weights: weights.to_vec(),
        spectral_radius: rho,
        kernel: k.clone(),
    })
}

/// Largest `|<theta_n, phi_m>|`, `n != m`, over separated pairs.
pub fn biorthogonality_check(bio: &BiorthogonalSystem) -> f64 {
    let sep = bio.separated();
    let thetas: Vec<Vec<Complex64>> = sep.iter().map(|&n| bio.theta(n)).collect();
    let phis: Vec<Vec<Complex64>> = sep.iter().map(|&n| bio.phi(n)).collect();
    let mut worst = 0.0f64;
    for (a, th) in thetas.iter().enumerate() {
        for (b, ph) in phis.iter().enumerate() {
            if a != b {
                worst = worst.max(bio.inner(th, ph).norm());
            }
        }
    }
    worst
}

/// Result of the expansion with diagnostics.
#[derive(Debug, Clone)]
pub struct ExpansionSolution {
    pub solution: AmplitudeSolution,
    /// Coefficients `<theta_n, d>` of the separated pairs, indexed like `xi`.
    pub coefficients: Vec<Option<Complex64>>,
    /// `||(I + K) f - d||_inf / ||d||_inf`.
    pub residual: f64,
    /// Norm of the part of `d` carried by the null cluster.
    pub null_component: f64,
}

/// `f = sum_n phi_n d_n / (1 + xi_n)` plus the null-cluster remainder.
pub fn solve_by_expansion(system: &KernelSystem, bio: &BiorthogonalSystem) -> Result<ExpansionSolution> {
    let n = system.dim();
    if bio.len() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: bio.len() });
    }
    let clusters = bio.degenerate_clusters();
    if let Some(cluster) = clusters.into_iter().next() {
        return Err(Error::DegenerateCluster { cluster });
    }
    let d = &system.d_vals;
    let sep = bio.separated();
    for &m in &sep {
        if (ONE + bio.xi[m]).norm() < RESONANCE_TOL {
            return Err(Error::Resonance { xi: bio.xi[m] });
        }
    }
    let project_out = |x: &[Complex64]| -> Vec<Complex64> {
        let mut r = x.to_vec();
        for &m in &sep {
            let c = bio.inner(&bio.theta(m), x);
            for (rl, pl) in r.iter_mut().zip(bio.right_fns.column(m).iter()) {
                *rl -= c * pl;
            }
        }
        r
    };

    let mut coefficients = vec![None; n];
    let mut f = vec![ZERO; n];
    for &m in &sep {
        let dm = bio.inner(&bio.theta(m), d);
        coefficients[m] = Some(dm);
        let c = dm / (ONE + bio.xi[m]);
        for (fl, pl) in f.iter_mut().zip(bio.right_fns.column(m).iter()) {
            *fl += c * pl;
        }
    }

    // null cluster: (I + K) f_c = r on its invariant subspace, where K is tiny
    let r = project_out(d);
    let r_norm = r.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut fc = r.clone();
    if r_norm > 0.0 {
        let k = &system.k_matrix;
        let mut converged = false;
        for _ in 0..200 {
            let kf: Vec<Complex64> = (0..n).map(|i| (0..n).map(|j| k[(i, j)] * fc[j]).sum()).collect();
            let kf = project_out(&kf);
            let next: Vec<Complex64> = r.iter().zip(&kf).map(|(a, b)| a - b).collect();
            let change = next.iter().zip(&fc).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            fc = next;
            if change <= 1e-15 * r_norm {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::IncompleteBasis { residual: r_norm });
        }
    }
    for (fl, cl) in f.iter_mut().zip(&fc) {
        *fl += cl;
    }

    let m = system.system_matrix();
    let d_norm = d.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let residual = (0..n)
        .map(|i| {
            let row: Complex64 = (0..n).map(|j| m[(i, j)] * f[j]).sum();
            (row - d[i]).norm()
        })
        .fold(0.0, f64::max)
        / d_norm;
    if !(residual <= COMPLETENESS_TOL) {
        return Err(Error::IncompleteBasis { residual });
    }
    let b2bar = b2bar_from_f(system, &f)?;
    Ok(ExpansionSolution {
        solution: AmplitudeSolution { s: system.s, f_vals: f, b2bar },
        coefficients,
        residual,
        null_component: r_norm,
    })
}
