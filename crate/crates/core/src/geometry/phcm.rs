//! Poly-hyperbolic-Cholesky distance. Row `i` of `chol(C)` is a point of the
//! open hemisphere `HSⁱ`; the distance is the product of hyperbolic distances.

use crate::correlation::CorrelationMatrix;
use crate::error::{Error, Result};
use crate::linalg::{chol, Mat};

/// Arguments this far below 1 are clamped to 1.
pub const ACOSH_CLAMP: f64 = 1e-12;

/// `−⟨ψ(x), ψ(y)⟩_L` for unit vectors with positive last coordinate, where
/// `ψ(x) = (x₁, …, x_k, 1)/x_{k+1}` lands on the hyperboloid. Evaluated as
/// `1 + ‖x − y‖² / (2 x_{k+1} y_{k+1})`, which equals
/// `(1 − Σ_{j≤k} x_j y_j) / (x_{k+1} y_{k+1})` for unit rows and keeps full
/// accuracy near the diagonal.
pub fn hemisphere_lorentz_arg(x: &[f64], y: &[f64]) -> f64 {
    let last = x.len() - 1;
    let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    1.0 + sq / (2.0 * x[last] * y[last])
}

/// `arccosh` with arguments slightly below 1 treated as 1.
pub fn clamped_acosh(a: f64) -> f64 {
    if a < 1.0 {
        if a < 1.0 - ACOSH_CLAMP {
            log::warn!("arccosh argument {a} below the clamp band");
        }
        return 0.0;
    }
    // acosh(1 + δ) = log1p(δ + √(δ(2 + δ)))
    let d = a - 1.0;
    (d + (d * (2.0 + d)).sqrt()).ln_1p()
}

fn rows_dist2(l: &Mat, l2: &Mat) -> f64 {
    let n = l.rows();
    (1..n)
        .map(|i| {
            let a = hemisphere_lorentz_arg(&l.row(i)[..=i], &l2.row(i)[..=i]);
            clamped_acosh(a).powi(2)
        })
        .sum()
}

pub fn phcm_dist(c: &CorrelationMatrix, c2: &CorrelationMatrix) -> Result<f64> {
    if c.n() != c2.n() {
        return Err(Error::DimensionMismatch(format!("{} vs {}", c.n(), c2.n())));
    }
    let l = chol(c.as_mat())?;
    let l2 = chol(c2.as_mat())?;
    Ok(rows_dist2(&l, &l2).sqrt())
}
