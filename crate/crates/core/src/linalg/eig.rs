use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Largest dimension handled by the cyclic Jacobi solver; larger inputs go
/// through Householder tridiagonalization + implicit QL (nalgebra).
pub const JACOBI_MAX_DIM: usize = 64;
/// Sweep budget of the cyclic Jacobi iteration.
pub const JACOBI_MAX_SWEEPS: usize = 30;
/// Absolute asymmetry tolerance (scaled by `max(1, max|s|)`).
pub const SYMMETRY_TOL: f64 = 1e-10;

/// `S = U diag(lambda) U^T` with ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub u: Mat,
    pub lambda: Vec<f64>,
}

impl SymEig {
    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    /// `U diag(f(lambda)) U^T`
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> Mat {
        let n = self.dim();
        let fl: Vec<f64> = self.lambda.iter().map(|&l| f(l)).collect();
        let mut scaled = self.u.clone();
        for i in 0..n {
            for j in 0..n {
                scaled[(i, j)] *= fl[j];
            }
        }
        scaled.matmul(&self.u.transpose())
    }

    pub fn reconstruct(&self) -> Mat {
        self.reconstruct_with(|l| l)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.lambda[0]
    }
}

pub fn check_symmetric(s: &Mat) -> Result<()> {
    if !s.is_square() {
        return Err(Error::ShapeMismatch(format!("expected square matrix, got {:?}", s.shape())));
    }
    let asym = s.asymmetry();
    if asym > SYMMETRY_TOL * s.max_abs().max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

/// Symmetric eigendecomposition.
pub fn sym_eig(s: &Mat) -> Result<SymEig> {
    check_symmetric(s)?;
    let n = s.rows();
    if n == 0 {
        return Err(Error::InvalidDimension("empty matrix".into()));
    }
    if !s.is_finite() {
        return Err(Error::NotSymmetric(f64::NAN));
    }
    let a = s.symmetrize();
    if n <= JACOBI_MAX_DIM {
        jacobi(a)
    } else {
        tridiagonal_ql(a)
    }
}

fn jacobi(mut a: Mat) -> Result<SymEig> {
    let n = a.rows();
    let mut v = Mat::identity(n);
    let total: f64 = a.dot(&a);
    let tol = (1e-15_f64).powi(2) * total;
    let off = |a: &Mat| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..i {
                s += 2.0 * a[(i, j)] * a[(i, j)];
            }
        }
        s
    };
    let mut converged = off(&a) <= tol;
    let mut sweeps = 0;
    while !converged && sweeps < JACOBI_MAX_SWEEPS {
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                // skip entries below rounding relative to their diagonal pair
                if apq.abs() < 1e-18 * (app.abs() + aqq.abs()) {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        converged = off(&a) <= tol;
    }
    if !converged {
        let residual = off(&a).sqrt();
        // the last sweep may stall at rounding level; accept that
        if residual > 1e-12 * total.sqrt().max(f64::MIN_POSITIVE) {
            return Err(Error::NoConvergence { iterations: sweeps, residual });
        }
    }
    let lambda: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    Ok(sorted(v, lambda))
}

fn tridiagonal_ql(a: Mat) -> Result<SymEig> {
    let n = a.rows();
    let na = nalgebra::DMatrix::from_row_slice(n, n, a.data());
    let eig = na
        .try_symmetric_eigen(f64::EPSILON, 0)
        .ok_or(Error::NoConvergence { iterations: 0, residual: f64::NAN })?;
    let u = Mat::from_fn(n, n, |i, j| eig.eigenvectors[(i, j)]);
    Ok(sorted(u, eig.eigenvalues.iter().copied().collect()))
}

fn sorted(u: Mat, lambda: Vec<f64>) -> SymEig {
    let n = lambda.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| lambda[i].total_cmp(&lambda[j]));
    let u = Mat::from_fn(n, n, |i, j| u[(i, order[j])]);
    let lambda = order.iter().map(|&k| lambda[k]).collect();
    SymEig { u, lambda }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::testutil::random_symmetric;

    #[test]
    fn identity_and_diagonal() {
        let e = sym_eig(&Mat::identity(3)).unwrap();
        assert_eq!(e.lambda, vec![1.0, 1.0, 1.0]);
        assert_eq!(e.u, Mat::identity(3));

        let e = sym_eig(&Mat::from_rows(&[&[3.0, 0.0], &[0.0, 1.0]])).unwrap();
        assert_eq!(e.lambda, vec![1.0, 3.0]);
        assert_eq!(e.u.map(f64::abs), Mat::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]));
    }

    #[test]
    fn reconstructs_random_inputs() {
        for (seed, n) in [(1u64, 5usize), (2, 16), (3, 64), (4, 80)] {
            let s = random_symmetric(n, seed);
            let e = sym_eig(&s).unwrap();
            let rel = (&e.reconstruct() - &s).norm() / s.norm();
            assert!(rel < 1e-9, "n={n} rel={rel}");
            let orth = (&e.u.tmatmul(&e.u) - &Mat::identity(n)).max_abs();
            assert!(orth < 1e-10, "n={n} orth={orth}");
            assert!(e.lambda.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn rejects_asymmetric() {
        let m = Mat::from_rows(&[&[1.0, 2.0], &[0.0, 1.0]]);
        assert!(matches!(sym_eig(&m), Err(Error::NotSymmetric(_))));
    }
}
