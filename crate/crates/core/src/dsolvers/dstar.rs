//! `D★(C)`: the positive diagonal `diag(x)` with `x ⊙ (C x) = 1`, i.e. the
//! zero of `f(x) = C x − 1/x`, found by damped Newton.

use crate::error::{Error, Result};
use crate::linalg::{diag_from_vec, Mat};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 50;
/// Step lengths tried are `2^-k` for `k = 0..=MAX_HALVINGS`.
pub const MAX_HALVINGS: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DstarMode {
    /// Iterate to `tol`.
    Full,
    /// A single damped Newton step from `x = 1`.
    Newton1,
}

impl std::str::FromStr for DstarMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(DstarMode::Full),
            "newton1" => Ok(DstarMode::Newton1),
            _ => Err(Error::Config(format!("unknown dstar mode '{s}'"))),
        }
    }
}

impl std::fmt::Display for DstarMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DstarMode::Full => "full",
            DstarMode::Newton1 => "newton1",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DstarConfig {
    pub mode: DstarMode,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for DstarConfig {
    fn default() -> Self {
        DstarConfig { mode: DstarMode::Full, tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER }
    }
}

/// One accepted update `x ← x + α Δx`.
#[derive(Debug, Clone)]
pub struct NewtonStep {
    pub x: Vec<f64>,
    pub dx: Vec<f64>,
    pub alpha: f64,
    /// `J = C + diag(1/x²)` at `x`.
    pub jacobian: Mat,
}

#[derive(Debug, Clone)]
pub struct DstarResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `‖C x − 1/x‖∞` at the returned `x`.
    pub residual: f64,
    pub steps: Vec<NewtonStep>,
}

impl DstarResult {
    pub fn d_mat(&self) -> Mat {
        diag_from_vec(&self.x)
    }

    /// `D★ C D★`
    pub fn scaled(&self, c: &Mat) -> Mat {
        let x = &self.x;
        Mat::from_fn(c.rows(), c.cols(), |i, j| x[i] * c[(i, j)] * x[j])
    }
}

fn f_of(c: &Mat, x: &[f64]) -> Vec<f64> {
    let cx = c.matmul(&Mat::col(x));
    x.iter().enumerate().map(|(i, &xi)| cx[(i, 0)] - 1.0 / xi).collect()
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, b| a.max(b.abs()))
}

pub fn dstar(c: &Mat, cfg: &DstarConfig) -> Result<DstarResult> {
    dstar_from(c, &vec![1.0; c.rows()], cfg)
}

pub fn dstar_from(c: &Mat, x0: &[f64], cfg: &DstarConfig) -> Result<DstarResult> {
    let n = c.rows();
    if x0.len() != n || x0.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::DimensionMismatch("starting point must be a positive vector of length n".into()));
    }
    let mut x = x0.to_vec();
    let mut f = f_of(c, &x);
    let mut steps = Vec::new();
    let budget = match cfg.mode {
        DstarMode::Full => cfg.max_iter,
        DstarMode::Newton1 => 1,
    };
    // Full mode takes one polishing step after meeting the tolerance; with
    // quadratic convergence it brings the residual to rounding level.
    let mut polishing = false;
    loop {
        let res = norm_inf(&f);
        let done = match cfg.mode {
            DstarMode::Full if res <= cfg.tol && !polishing && res > 0.0 => {
                polishing = true;
                false
            }
            DstarMode::Full => res <= cfg.tol,
            DstarMode::Newton1 => !steps.is_empty() || res == 0.0,
        };
        if done {
            return Ok(DstarResult { x, iterations: steps.len(), residual: res, steps });
        }
        if steps.len() >= budget && !polishing {
            return Err(Error::NoConvergence { iterations: steps.len(), residual: res });
        }
        let mut jac = c.clone();
        for i in 0..n {
            jac[(i, i)] += 1.0 / (x[i] * x[i]);
        }
        let neg_f: Vec<f64> = f.iter().map(|v| -v).collect();
        let dx = jac.solve(&Mat::col(&neg_f))?.into_vec();
        let fnorm = norm2(&f);
        let mut accepted = None;
        for k in 0..=MAX_HALVINGS {
            let alpha = 0.5f64.powi(k as i32);
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + alpha * d).collect();
            if trial.iter().any(|&v| !(v > 0.0)) {
                continue;
            }
            let ft = f_of(c, &trial);
            if norm2(&ft) < fnorm {
                accepted = Some((alpha, trial, ft));
                break;
            }
        }
        let (alpha, trial, ft) = match accepted {
            Some(a) => a,
            None if polishing => return Ok(DstarResult { x, iterations: steps.len(), residual: res, steps }),
            None => return Err(Error::DampingFailure),
        };
        steps.push(NewtonStep { x: x.clone(), dx, alpha, jacobian: jac });
        x = trial;
        f = ft;
    }
}

/// Exact adjoint w.r.t. `C` of `Σ = D★ C D★` at a converged solution:
/// `Δ (G − sym((I+Σ)⁻¹ ṽ 1ᵀ)) Δ` with `ṽ = diagvec(ΣG + GΣ)`, `Δ = diag(x)`.
pub fn dstar_backward(c: &Mat, res: &DstarResult, grad_sigma: &Mat) -> Result<Mat> {
    let n = c.rows();
    let g = grad_sigma.symmetrize();
    let sigma = res.scaled(c);
    let sg = sigma.matmul(&g);
    let v: Vec<f64> = (0..n).map(|i| 2.0 * sg[(i, i)]).collect();
    let a = &Mat::identity(n) + &sigma;
    let s = a.solve(&Mat::col(&v))?;
    let x = &res.x;
    Ok(Mat::from_fn(n, n, |i, j| x[i] * (g[(i, j)] - 0.5 * (s[(i, 0)] + s[(j, 0)])) * x[j]))
}

/// Adjoint w.r.t. `C` of the Newton iterates, given the adjoint `grad_x` of
/// the returned `x`. Step lengths are held fixed.
pub fn dstar_unrolled_backward(c: &Mat, res: &DstarResult, grad_x: &[f64]) -> Result<Mat> {
    let n = c.rows();
    let mut gc = Mat::zeros(n, n);
    let mut g = grad_x.to_vec();
    for step in res.steps.iter().rev() {
        let w = step.jacobian.solve(&Mat::col(&g))?.into_vec();
        let a = step.alpha;
        let next: Vec<f64> = step.x.iter().zip(&step.dx).map(|(x, d)| x + d).collect();
        for i in 0..n {
            for j in 0..n {
                gc[(i, j)] -= 0.5 * a * (w[i] * next[j] + w[j] * next[i]);
            }
        }
        for i in 0..n {
            let xi = step.x[i];
            g[i] = g[i] * (1.0 - a) + a * 2.0 * step.dx[i] / (xi * xi * xi) * w[i];
        }
    }
    Ok(gc)
}

/// Adjoint of `Σ = diag(x) C diag(x)` split into `(∂/∂C, ∂/∂x)` with `x` held
/// as an independent input.
pub fn scaling_backward(c: &Mat, x: &[f64], grad_sigma: &Mat) -> (Mat, Vec<f64>) {
    let n = c.rows();
    let g = grad_sigma.symmetrize();
    let gc = Mat::from_fn(n, n, |i, j| x[i] * g[(i, j)] * x[j]);
    let gcx = g.hadamard(c).matmul(&Mat::col(x));
    let gx = (0..n).map(|i| 2.0 * gcx[(i, 0)]).collect();
    (gc, gx)
}
