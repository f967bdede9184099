use crate::error::{Error, Result};
use crate::linalg::eig::check_symmetric;
use crate::linalg::matfun::EPS_PD;
use crate::linalg::{half_lower, Mat};

/// Lower Cholesky factor `L` with `L L^T = p`.
pub fn chol(p: &Mat) -> Result<Mat> {
    check_symmetric(p)?;
    let n = p.rows();
    let mut l = Mat::zeros(n, n);
    for j in 0..n {
        let mut d = p[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > EPS_PD) {
            return Err(Error::NotPositiveDefinite(d));
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let mut s = p[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

pub(crate) fn check_factor(l: &Mat) -> Result<()> {
    for i in 0..l.rows() {
        if !(l[(i, i)] > EPS_PD) {
            return Err(Error::SingularFactor(l[(i, i)]));
        }
    }
    Ok(())
}

/// `L⁻¹ V L⁻ᵀ`
pub(crate) fn congruence_inv(l: &Mat, v: &Mat) -> Mat {
    let x = l.solve_lower(v);
    l.solve_lower(&x.transpose())
}

/// Differential of `chol` at `L L^T`: `L (L⁻¹ V L⁻ᵀ)_½`.
pub fn chol_diff_at(l: &Mat, v: &Mat) -> Mat {
    l.matmul(&half_lower(&congruence_inv(l, v)))
}

pub fn chol_diff(p: &Mat, v: &Mat) -> Result<Mat> {
    let l = chol(p)?;
    Ok(chol_diff_at(&l, v))
}

/// Inverse of `chol_diff_at`: `Z ↦ L Zᵀ + Z Lᵀ`.
pub fn chol_diff_inv(l: &Mat, z: &Mat) -> Mat {
    let lz = l.matmul(&z.transpose());
    &lz + &lz.transpose()
}

/// Symmetric adjoint w.r.t. `p = L Lᵀ` given the adjoint of `L`.
pub fn chol_backward(l: &Mat, grad_l: &Mat) -> Result<Mat> {
    check_factor(l)?;
    let inner = half_lower(&l.tmatmul(grad_l)).symmetrize();
    let x = l.solve_lower_transpose(&inner);
    Ok(l.solve_lower_transpose(&x.transpose()).symmetrize())
}
