//! `D⁺(H)`: the diagonal matrix making `exp(D + H)` unit-diagonal, found by
//! the fixed point `D ← D − log 𝔻(exp(D + H))`.
//!
//! For large `H` the fixed point contracts slowly. Once an iteration reduces
//! the residual by less than `SLOW_RATIO`, untraced runs try a Newton step on
//! `d ↦ log diag(exp(D + H))` with Jacobian `diag(exp Y)⁻¹ H⁰` and keep it
//! only if it lowers the residual.

use crate::error::{Error, Result};
use crate::linalg::{diag_from_vec, diagvec, offmat, sym_eig, MatFn, Mat, SymFunAt};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 100;
/// Largest accepted condition number of `H⁰`.
pub const H0_COND_LIMIT: f64 = 1e12;
/// Residual ratio above which the fixed point counts as stalled.
pub const SLOW_RATIO: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DplusConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for DplusConfig {
    fn default() -> Self {
        DplusConfig { tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER }
    }
}

#[derive(Debug, Clone)]
pub struct DplusResult {
    pub d: Vec<f64>,
    pub iterations: usize,
    /// `max |diag(exp(D + H)) − 1|` at the returned `D`.
    pub residual: f64,
    /// Residual after every evaluation, in order.
    pub history: Vec<f64>,
    /// `exp` evaluated at `Y = D + H`; its value is `Exp°(H)`.
    pub exp_at_y: SymFunAt,
    /// `exp` at each iterate that was followed by an update.
    pub trace: Vec<SymFunAt>,
}

impl DplusResult {
    /// The result for `H = off(Y)` when `Y` with `diag(exp Y) = 1` is known,
    /// e.g. `Y = log C`.
    pub fn at_log(y: &Mat) -> Result<Self> {
        let exp_at_y = SymFunAt::new(MatFn::Exp, y)?;
        let residual = residual(&exp_at_y.value);
        Ok(DplusResult { d: diagvec(y), iterations: 0, residual, history: vec![residual], exp_at_y, trace: Vec::new() })
    }

    pub fn d_mat(&self) -> Mat {
        diag_from_vec(&self.d)
    }

    /// `exp(D⁺(H) + H)` with its diagonal set to exactly one.
    pub fn correlation(&self) -> Mat {
        let mut c = self.exp_at_y.value.clone();
        for i in 0..c.rows() {
            c[(i, i)] = 1.0;
        }
        c
    }
}

fn residual(e: &Mat) -> f64 {
    (0..e.rows()).fold(0.0f64, |a, i| a.max((e[(i, i)] - 1.0).abs()))
}

pub fn dplus(h: &Mat, cfg: &DplusConfig) -> Result<DplusResult> {
    run(h, cfg, false)
}

/// As `dplus`, also keeping every iterate for the unrolled backward pass.
pub fn dplus_traced(h: &Mat, cfg: &DplusConfig) -> Result<DplusResult> {
    run(h, cfg, true)
}

fn exp_at(h: &Mat, d: &[f64]) -> Result<SymFunAt> {
    let mut y = h.clone();
    for (i, &di) in d.iter().enumerate() {
        y[(i, i)] = di;
    }
    SymFunAt::new(MatFn::Exp, &y)
}

/// Newton update at `at`, or `None` if the step is unusable.
fn newton_step(at: &SymFunAt, d: &[f64]) -> Option<Vec<f64>> {
    let e = diagvec(&at.value);
    if e.iter().any(|&x| !(x > 0.0)) {
        return None;
    }
    // H⁰ δ = −diag(e) log e
    let rhs: Vec<f64> = e.iter().map(|&x| -x * x.ln()).collect();
    let delta = solve_h0(at, &rhs).ok()?;
    let next: Vec<f64> = d.iter().zip(&delta).map(|(a, b)| a + b).collect();
    next.iter().all(|x| x.is_finite()).then_some(next)
}

fn run(h: &Mat, cfg: &DplusConfig, keep_trace: bool) -> Result<DplusResult> {
    let n = h.rows();
    let h = offmat(&h.symmetrize());
    let mut d = vec![0.0; n];
    let mut history: Vec<f64> = Vec::new();
    let mut trace = Vec::new();
    let mut at = exp_at(&h, &d)?;
    for it in 1..=cfg.max_iter.max(1) {
        let r = residual(&at.value);
        let stalled = history.last().is_some_and(|&prev| r > SLOW_RATIO * prev);
        history.push(r);
        if !r.is_finite() {
            return Err(Error::NoConvergence { iterations: it, residual: r });
        }
        if r <= cfg.tol {
            return Ok(DplusResult { d, iterations: it, residual: r, history, exp_at_y: at, trace });
        }
        if it == cfg.max_iter {
            return Err(Error::NoConvergence { iterations: it, residual: r });
        }
        if stalled && !keep_trace {
            if let Some(next) = newton_step(&at, &d) {
                if let Ok(trial) = exp_at(&h, &next) {
                    if residual(&trial.value) < r {
                        d = next;
                        at = trial;
                        continue;
                    }
                }
            }
        }
        for i in 0..n {
            d[i] -= at.value[(i, i)].ln();
        }
        let next = exp_at(&h, &d)?;
        if keep_trace {
            trace.push(std::mem::replace(&mut at, next));
        } else {
            at = next;
        }
    }
    unreachable!()
}

/// `H⁰_il = Σ_jk U_ij U_ik U_lj U_lk L_jk`, the matrix of
/// `δ ↦ diagvec(exp★,Y(diag δ))`.
pub fn h0_matrix(at: &SymFunAt) -> Mat {
    let u = &at.eig.u;
    let l = &at.loewner.l;
    let n = u.rows();
    let mut h0 = Mat::zeros(n, n);
    let mut w = vec![0.0; n];
    let mut lw = vec![0.0; n];
    for i in 0..n {
        for k in 0..=i {
            for j in 0..n {
                w[j] = u[(i, j)] * u[(k, j)];
            }
            for j in 0..n {
                lw[j] = (0..n).map(|m| l[(j, m)] * w[m]).sum();
            }
            let v: f64 = w.iter().zip(&lw).map(|(a, b)| a * b).sum();
            h0[(i, k)] = v;
            h0[(k, i)] = v;
        }
    }
    h0
}

fn solve_h0(at: &SymFunAt, rhs: &[f64]) -> Result<Vec<f64>> {
    let h0 = h0_matrix(at);
    let e = sym_eig(&h0)?;
    let max = e.lambda.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let min = e.lambda.iter().fold(f64::INFINITY, |a, x| a.min(x.abs()));
    let cond = max / min;
    if !(cond <= H0_COND_LIMIT) {
        return Err(Error::SingularH0(cond));
    }
    let sol = h0.solve(&Mat::col(rhs))?;
    Ok(sol.into_vec())
}

/// Gradient w.r.t. `H` given the adjoint `grad_y` of `Y = D⁺(H) + H`:
/// `off(G − exp★,Y(diag(H⁰⁻¹ diagvec G)))`.
pub fn dplus_backward(res: &DplusResult, grad_y: &Mat) -> Result<Mat> {
    let g = grad_y.symmetrize();
    let q = solve_h0(&res.exp_at_y, &diagvec(&g))?;
    let corr = res.exp_at_y.diff(&diag_from_vec(&q));
    Ok(offmat(&(&g - &corr)))
}

/// Differential of `H ↦ exp(D⁺(H) + H)` at the result, applied to a hollow
/// `W`: `exp★,Y(W + D⁺★(W))` with `D⁺★(W) = −diag(H⁰⁻¹ diagvec(exp★,Y(W)))`.
pub fn dplus_exp_diff(res: &DplusResult, w: &Mat) -> Result<Mat> {
    let ew = res.exp_at_y.diff(w);
    let q = solve_h0(&res.exp_at_y, &diagvec(&ew))?;
    let dd = diag_from_vec(&q.iter().map(|x| -x).collect::<Vec<_>>());
    Ok(res.exp_at_y.diff(&(w + &dd)))
}

/// Backward pass through the unrolled fixed-point iteration.
pub fn dplus_unrolled_backward(res: &DplusResult, grad_y: &Mat) -> Result<Mat> {
    if res.trace.len() + 1 != res.iterations {
        return Err(Error::Unsupported("unrolled backward needs a traced D⁺ run".into()));
    }
    let g = grad_y.symmetrize();
    let mut grad_h = offmat(&g);
    let mut gd = diagvec(&g);
    for at in res.trace.iter().rev() {
        let e = diagvec(&at.value);
        let q: Vec<f64> = gd.iter().zip(&e).map(|(a, b)| a / b).collect();
        let back = at.diff(&diag_from_vec(&q));
        grad_h -= &offmat(&back);
        let bd = diagvec(&back);
        for i in 0..gd.len() {
            gd[i] -= bd[i];
        }
    }
    Ok(grad_h)
}
