//! Dense matrix primitives: eigendecomposition, symmetric matrix functions,
//! Cholesky and unit-triangular log/exp, each with its differential.

pub mod chol;
pub mod eig;
mod mat;
pub mod matfun;
pub mod tri;

pub use chol::{chol, chol_backward, chol_diff, chol_diff_at, chol_diff_inv};
pub use eig::{sym_eig, SymEig};
pub use mat::*;
pub use matfun::{sym_fun, sym_fun_diff, LoewnerMatrix, MatFn, SymFunAt, EPS_PD};
pub use tri::{tri_exp, tri_exp_backward, tri_exp_diff, tri_log, tri_log_backward, tri_log_diff};

#[cfg(test)]
pub(crate) mod testutil {
    use super::Mat;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    pub fn random_mat(n: usize, seed: u64) -> Mat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Mat::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng))
    }

    pub fn random_symmetric(n: usize, seed: u64) -> Mat {
        random_mat(n, seed).symmetrize()
    }

    pub fn random_spd(n: usize, seed: u64) -> Mat {
        let a = random_mat(n, seed);
        &a.matmul(&a.transpose()) + &Mat::identity(n)
    }

    pub fn random_unit_lower(n: usize, seed: u64) -> Mat {
        let mut k = super::strict_lower(&random_mat(n, seed)).scale(0.5);
        for i in 0..n {
            k[(i, i)] = 1.0;
        }
        k
    }
}
