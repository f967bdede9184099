//! Symmetric matrix functions `U f(Λ) U^T` and their Daleckii–Krein
//! differentials.

use crate::error::{Error, Result};
use crate::linalg::{sym_eig, Mat, SymEig};

/// Eigenvalue floor for functions that require positivity.
pub const EPS_PD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MatFn {
    Exp,
    Log,
    Power(f64),
}

impl MatFn {
    pub fn needs_positive(self) -> bool {
        match self {
            MatFn::Exp => false,
            MatFn::Log => true,
            MatFn::Power(p) => p.fract() != 0.0 || p < 0.0,
        }
    }

    pub fn eval(self, x: f64) -> f64 {
        match self {
            MatFn::Exp => x.exp(),
            MatFn::Log => x.ln(),
            MatFn::Power(p) => x.powf(p),
        }
    }

    pub fn deriv(self, x: f64) -> f64 {
        match self {
            MatFn::Exp => x.exp(),
            MatFn::Log => 1.0 / x,
            MatFn::Power(p) => p * x.powf(p - 1.0),
        }
    }
}

/// Divided differences of `f` over the eigenvalues.
#[derive(Debug, Clone)]
pub struct LoewnerMatrix {
    pub l: Mat,
}

impl LoewnerMatrix {
    pub fn new(f: MatFn, lambda: &[f64]) -> Self {
        let n = lambda.len();
        let fl: Vec<f64> = lambda.iter().map(|&x| f.eval(x)).collect();
        let mut l = Mat::zeros(n, n);
        for i in 0..n {
            l[(i, i)] = f.deriv(lambda[i]);
            for j in 0..i {
                let (li, lj) = (lambda[i], lambda[j]);
                let gap = 1e-10 * (li.abs() + lj.abs()).max(1.0);
                let v = if (li - lj).abs() > gap {
                    divided_difference(f, li, lj, fl[i], fl[j])
                } else {
                    f.deriv(0.5 * (li + lj))
                };
                l[(i, j)] = v;
                l[(j, i)] = v;
            }
        }
        LoewnerMatrix { l }
    }
}

fn divided_difference(f: MatFn, a: f64, b: f64, fa: f64, fb: f64) -> f64 {
    match f {
        // (e^a - e^b)/(a-b) = e^b * expm1(a-b)/(a-b), stable for close a, b
        MatFn::Exp => {
            let d = a - b;
            b.exp() * d.exp_m1() / d
        }
        // (ln a - ln b)/(a-b) = ln1p((a-b)/b)/(a-b)
        MatFn::Log => {
            let d = a - b;
            (d / b).ln_1p() / d
        }
        MatFn::Power(_) => (fa - fb) / (a - b),
    }
}

/// A matrix function evaluated at a fixed symmetric argument, keeping the
/// eigendecomposition for repeated differentials.
#[derive(Debug, Clone)]
pub struct SymFunAt {
    pub kind: MatFn,
    pub eig: SymEig,
    pub value: Mat,
    pub loewner: LoewnerMatrix,
}

impl SymFunAt {
    pub fn new(kind: MatFn, s: &Mat) -> Result<Self> {
        let eig = sym_eig(s)?;
        Self::from_eig(kind, eig)
    }

    pub fn from_eig(kind: MatFn, eig: SymEig) -> Result<Self> {
        if kind.needs_positive() && eig.min_eigenvalue() <= EPS_PD {
            return Err(Error::NotPositiveDefinite(eig.min_eigenvalue()));
        }
        let value = eig.reconstruct_with(|x| kind.eval(x)).symmetrize();
        let loewner = LoewnerMatrix::new(kind, &eig.lambda);
        Ok(SymFunAt { kind, eig, value, loewner })
    }

    /// `U (L ⊙ (U^T V U)) U^T`. Self-adjoint under the Frobenius product, so
    /// it also serves as the backward map.
    pub fn diff(&self, v: &Mat) -> Mat {
        let u = &self.eig.u;
        let inner = u.tmatmul(&v.matmul(u));
        let inner = inner.hadamard(&self.loewner.l);
        u.matmul(&inner).matmul(&u.transpose())
    }
}

pub fn sym_fun(kind: MatFn, s: &Mat) -> Result<Mat> {
    Ok(SymFunAt::new(kind, s)?.value)
}

pub fn sym_fun_diff(kind: MatFn, s: &Mat, v: &Mat) -> Result<Mat> {
    Ok(SymFunAt::new(kind, s)?.diff(v))
}
