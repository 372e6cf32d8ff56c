//! Dense LU factorisation with partial pivoting.

use nalgebra::{ComplexField, DMatrix};

/// Relative pivot magnitude below which the matrix is treated as singular.
const SINGULAR_PIVOT: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum LuError {
    #[error("matrix must be square and non-empty, got {rows}x{cols}")]
    Shape { rows: usize, cols: usize },
    #[error("zero pivot at column {pivot}")]
    Singular { pivot: usize },
    #[error("right-hand side length mismatch: expected {expected}, got {actual}")]
    Rhs { expected: usize, actual: usize },
}

/// Row-major packed `L\U` factors of `P A`.
#[derive(Debug, Clone)]
pub struct LuFactor<T> {
    n: usize,
    lu: Vec<T>,
    perm: Vec<usize>,
    norm1: f64,
}

impl<T> LuFactor<T>
where
    T: ComplexField<RealField = f64> + Copy,
{
    pub fn new(a: &DMatrix<T>) -> Result<Self, LuError> {
        let (rows, cols) = a.shape();
        if rows != cols || rows == 0 {
            return Err(LuError::Shape { rows, cols });
        }
        let n = rows;
        let mut lu = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                lu.push(a[(i, j)]);
            }
        }
        let norm1 = (0..n)
            .map(|j| (0..n).map(|i| a[(i, j)].modulus()).sum::<f64>())
            .fold(0.0, f64::max);
        let mut perm: Vec<usize> = (0..n).collect();

        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[i * n + k].modulus()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if !(pmax > SINGULAR_PIVOT * norm1.max(f64::MIN_POSITIVE)) {
                return Err(LuError::Singular { pivot: k });
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let (head, tail) = lu.split_at_mut((k + 1) * n);
            let pivot_row = &head[k * n..(k + 1) * n];
            let inv_pivot = T::one() / pivot_row[k];
            for row in tail.chunks_exact_mut(n) {
                let factor = row[k] * inv_pivot;
                row[k] = factor;
                if factor == T::zero() {
                    continue;
                }
                for (x, &u) in row[k + 1..].iter_mut().zip(&pivot_row[k + 1..]) {
                    *x -= factor * u;
                }
            }
        }
        Ok(Self { n, lu, perm, norm1 })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// 1-norm of the factored matrix.
    pub fn norm1(&self) -> f64 {
        self.norm1
    }

    pub fn solve(&self, b: &[T]) -> Result<Vec<T>, LuError> {
        let n = self.n;
        if b.len() != n {
            return Err(LuError::Rhs { expected: n, actual: b.len() });
        }
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            let mut acc = x[i];
            for (l, xj) in row.iter().zip(&x[..i]) {
                acc -= *l * *xj;
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n..(i + 1) * n];
            let mut acc = x[i];
            for j in i + 1..n {
                acc -= row[j] * x[j];
            }
            x[i] = acc / row[i];
        }
        Ok(x)
    }

    /// Solves `A^H x = b`.
    pub fn solve_adjoint(&self, b: &[T]) -> Result<Vec<T>, LuError> {
        let n = self.n;
        if b.len() != n {
            return Err(LuError::Rhs { expected: n, actual: b.len() });
        }
        // A = P^T L U, so A^H = U^H L^H P
        let mut y = b.to_vec();
        for i in 0..n {
            let mut acc = y[i];
            for j in 0..i {
                acc -= self.lu[j * n + i].conjugate() * y[j];
            }
            y[i] = acc / self.lu[i * n + i].conjugate();
        }
        for i in (0..n).rev() {
            let mut acc = y[i];
            for j in i + 1..n {
                acc -= self.lu[j * n + i].conjugate() * y[j];
            }
            y[i] = acc;
        }
        let mut x = vec![T::zero(); n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = y[k];
        }
        Ok(x)
    }

    /// Hager-Higham estimate of `||A^{-1}||_1`.
    pub fn inverse_norm1_estimate(&self) -> f64 {
        let n = self.n;
        let norm1 = |v: &[T]| v.iter().map(|z| z.modulus()).sum::<f64>();
        let mut x = vec![T::from_real(1.0 / n as f64); n];
        let mut est = 0.0;
        let mut last_j = usize::MAX;
        for _ in 0..5 {
            let y = match self.solve(&x) {
                Ok(y) => y,
                Err(_) => return f64::INFINITY,
            };
            est = norm1(&y);
            let sign: Vec<T> = y
                .iter()
                .map(|z| {
                    let m = z.modulus();
                    if m > 0.0 {
                        z.unscale(m)
                    } else {
                        T::one()
                    }
                })
                .collect();
            let z = match self.solve_adjoint(&sign) {
                Ok(z) => z,
                Err(_) => return f64::INFINITY,
            };
            let (j, zmax) = z
                .iter()
                .enumerate()
                .map(|(i, v)| (i, v.modulus()))
                .fold((0, -1.0), |acc, v| if v.1 > acc.1 { v } else { acc });
            let ztx: f64 = z.iter().zip(&x).map(|(a, b)| (a.conjugate() * *b).real()).sum();
            if zmax <= ztx || j == last_j {
                break;
            }
            last_j = j;
            x = vec![T::zero(); n];
            x[j] = T::one();
        }
        // Higham's alternating test vector guards against underestimates
        let alt: Vec<T> = (0..n)
            .map(|i| {
                let sgn = if i % 2 == 0 { 1.0 } else { -1.0 };
                T::from_real(sgn * (1.0 + i as f64 / (n as f64 - 1.0).max(1.0)))
            })
            .collect();
        if let Ok(y) = self.solve(&alt) {
            let alt_est = 2.0 * norm1(&y) / (3.0 * n as f64);
            est = est.max(alt_est);
        }
        est
    }

    /// Estimated 1-norm condition number.
    pub fn condition_estimate(&self) -> f64 {
        self.norm1 * self.inverse_norm1_estimate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn test_matrix(n: usize) -> DMatrix<Complex64> {
        DMatrix::from_fn(n, n, |i, j| {
            let x = (i * 7 + j * 13) as f64;
            c((x * 0.37).sin(), (x * 0.11).cos()) + if i == j { c(3.0, 0.5) } else { c(0.0, 0.0) }
        })
    }

    #[test]
    fn solves_complex_system() {
        let a = test_matrix(12);
        let x_true: Vec<Complex64> = (0..12).map(|k| c(k as f64, 1.0 - k as f64)).collect();
        let b = &a * nalgebra::DVector::from_vec(x_true.clone());
        let lu = LuFactor::new(&a).unwrap();
        let x = lu.solve(b.as_slice()).unwrap();
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).norm() < 1e-12);
        }
    }

    #[test]
    fn adjoint_solve() {
        let a = test_matrix(9);
        let b: Vec<Complex64> = (0..9).map(|k| c(1.0, k as f64 * 0.3)).collect();
        let lu = LuFactor::new(&a).unwrap();
        let x = lu.solve_adjoint(&b).unwrap();
        let back = a.adjoint() * nalgebra::DVector::from_vec(x);
        for (u, v) in back.iter().zip(&b) {
            assert!((u - v).norm() < 1e-12);
        }
    }

    #[test]
    fn condition_of_diagonal() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0, 0.0), c(1e-6, 0.0), c(2.0, 0.0)]));
        let lu = LuFactor::new(&a).unwrap();
        let k = lu.condition_estimate();
        assert!((k - 2e6).abs() / 2e6 < 1e-12, "k={k}");
    }

    #[test]
    fn condition_estimate_vs_explicit_inverse() {
        let a = test_matrix(20);
        let lu = LuFactor::new(&a).unwrap();
        let inv = a.clone().try_inverse().unwrap();
        let exact = (0..20)
            .map(|j| (0..20).map(|i| inv[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max);
        let est = lu.inverse_norm1_estimate();
        assert!(est <= exact * (1.0 + 1e-12));
        assert!(est >= exact / 3.0);
    }

    #[test]
    fn singular_detected() {
        let a = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(4.0, 0.0)]);
        assert!(matches!(LuFactor::new(&a), Err(LuError::Singular { pivot: 1 })));
    }

    #[test]
    fn real_scalar_type() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 3.0, 1.0]);
        let lu = LuFactor::new(&a).unwrap();
        let x = lu.solve(&[4.0, 5.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
    }
}
