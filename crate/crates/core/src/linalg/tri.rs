//! Log and exp on unit lower-triangular matrices. Products of `n` strictly
//! lower matrices vanish, so both series terminate after `n - 1` terms.

use crate::error::{Error, Result};
use crate::linalg::{strict_lower, Mat};

const DIAG_TOL: f64 = 1e-12;

/// Product of two strictly lower matrices whose nonzeros sit at least
/// `ga` and `gb` below the diagonal. The result has gap `ga + gb`.
fn banded_lower_mul(a: &Mat, ga: usize, b: &Mat, gb: usize) -> Mat {
    let n = a.rows();
    let mut out = Mat::zeros(n, n);
    let g = ga + gb;
    let (ad, bd) = (a.data(), b.data());
    let od = out.data_mut();
    for i in g..n {
        let row = &mut od[i * n..i * n + i - g + 1];
        for k in gb..=i - ga {
            let aik = ad[i * n + k];
            if aik == 0.0 {
                continue;
            }
            for (o, &bkj) in row.iter_mut().zip(&bd[k * n..k * n + k - gb + 1]) {
                *o += aik * bkj;
            }
        }
    }
    out
}

fn nilpotent_series(x: &Mat, coeff: impl Fn(usize) -> f64) -> Mat {
    let n = x.rows();
    let mut out = Mat::zeros(n, n);
    let mut power = x.clone();
    for k in 1..n {
        if k > 1 {
            power = banded_lower_mul(&power, k - 1, x, 1);
        }
        let c = coeff(k);
        for (o, p) in out.data_mut().iter_mut().zip(power.data()) {
            *o += c * p;
        }
    }
    out
}

fn log_coeff(k: usize) -> f64 {
    let s = if k % 2 == 1 { 1.0 } else { -1.0 };
    s / k as f64
}

fn exp_coeff(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc / i as f64)
}

pub fn check_unit_lower(k: &Mat) -> Result<()> {
    if !k.is_square() {
        return Err(Error::ShapeMismatch(format!("expected square matrix, got {:?}", k.shape())));
    }
    for i in 0..k.rows() {
        if (k[(i, i)] - 1.0).abs() > DIAG_TOL {
            return Err(Error::BadDiagonal(k[(i, i)]));
        }
    }
    Ok(())
}

fn nilpotent_part(k: &Mat) -> Mat {
    strict_lower(k)
}

/// Matrix logarithm of a unit lower-triangular matrix.
pub fn tri_log(k: &Mat) -> Result<Mat> {
    check_unit_lower(k)?;
    Ok(nilpotent_series(&nilpotent_part(k), log_coeff))
}

/// Matrix exponential of a strictly lower-triangular matrix.
pub fn tri_exp(x: &Mat) -> Result<Mat> {
    if !x.is_square() {
        return Err(Error::ShapeMismatch(format!("expected square matrix, got {:?}", x.shape())));
    }
    let x = strict_lower(x);
    let mut out = nilpotent_series(&x, exp_coeff);
    for i in 0..x.rows() {
        out[(i, i)] = 1.0;
    }
    Ok(out)
}

/// `Σ_k c_k Σ_{a+b=k-1} N^a V N^b`, built with the recurrence
/// `S_1 = V`, `S_{k+1} = N S_k + V N^k`.
fn series_diff(nil: &Mat, v: &Mat, coeff: impl Fn(usize) -> f64) -> Mat {
    let n = nil.rows();
    let mut out = v.scale(coeff(1));
    let mut s = v.clone();
    let mut power = nil.clone();
    for k in 2..n {
        s = &nil.matmul(&s) + &v.matmul(&power);
        out += &s.scale(coeff(k));
        power = power.matmul(nil);
    }
    out
}

/// Differential of `tri_log` at `k` applied to a strictly lower `v`.
pub fn tri_log_diff(k: &Mat, v: &Mat) -> Result<Mat> {
    check_unit_lower(k)?;
    Ok(series_diff(&nilpotent_part(k), v, log_coeff))
}

/// Differential of `tri_exp` at `x` applied to a strictly lower `v`.
pub fn tri_exp_diff(x: &Mat, v: &Mat) -> Mat {
    series_diff(&strict_lower(x), v, exp_coeff)
}

/// Adjoint of `tri_log_diff` restricted to strictly lower inputs.
pub fn tri_log_backward(k: &Mat, g: &Mat) -> Result<Mat> {
    check_unit_lower(k)?;
    Ok(strict_lower(&series_diff(&nilpotent_part(k).transpose(), g, log_coeff)))
}

/// Adjoint of `tri_exp_diff` restricted to strictly lower inputs.
pub fn tri_exp_backward(x: &Mat, g: &Mat) -> Mat {
    strict_lower(&series_diff(&strict_lower(x).transpose(), g, exp_coeff))
}
