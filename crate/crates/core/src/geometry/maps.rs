//! The diffeomorphisms `φ` onto the prototype spaces and their inverses, with
//! cached forward state for differentials and reverse-mode adjoints.

use crate::correlation::{cor_backward, cor_mat, project_rowzero, theta_of_chol};
use crate::dsolvers::dplus::{self, dplus_exp_diff, DplusResult};
use crate::dsolvers::dstar::{self, scaling_backward, DstarMode, DstarResult};
use crate::error::{Error, Result};
use crate::geometry::{MetricKind, SolverConfig};
use crate::linalg::chol::congruence_inv;
use crate::linalg::{
    chol, chol_backward, diag_from_vec, diagvec, dmat, half_lower, lower, offmat, strict_lower, tri_exp,
    tri_exp_backward, tri_exp_diff, tri_log, tri_log_backward, tri_log_diff, MatFn, Mat, SymFunAt,
};

/// `Θ★,C(V) = Θ (A)_½ − ½ 𝔻(A) Θ` with `A = L⁻¹ V L⁻ᵀ`.
fn theta_diff(l: &Mat, k: &Mat, v: &Mat) -> Mat {
    let a = congruence_inv(l, v);
    let t = &k.matmul(&half_lower(&a)) - &dmat(&a).scale(0.5).matmul(k);
    strict_lower(&t)
}

/// `(Θ★,C)⁻¹(ξ) = (Lξᵀ − C𝔻(Lξᵀ))𝔻(L) + 𝔻(L)(ξLᵀ − 𝔻(Lξᵀ)C)`.
fn theta_diff_inv(l: &Mat, xi: &Mat) -> Mat {
    let c = l.matmul(&l.transpose());
    let d = dmat(l);
    let lx = l.matmul(&xi.transpose());
    let dlx = dmat(&lx);
    let left = (&lx - &c.matmul(&dlx)).matmul(&d);
    let v = &left + &left.transpose();
    offmat(&v.symmetrize())
}

/// Adjoint of `L ↦ 𝔻(L)⁻¹ L` restricted to lower-triangular `L`.
fn theta_backward(l: &Mat, k: &Mat, g: &Mat) -> Mat {
    let n = l.rows();
    let gk = g.matmul(&k.transpose());
    lower(&Mat::from_fn(n, n, |i, j| {
        let base = g[(i, j)] / l[(i, i)];
        if i == j {
            base - gk[(i, i)] / l[(i, i)]
        } else {
            base
        }
    }))
}

/// State saved by `phi_forward`.
#[derive(Debug, Clone)]
pub enum PhiCache {
    Ecm { l: Mat, k: Mat },
    Lecm { l: Mat, k: Mat },
    Olm { log_at: SymFunAt },
    Lsm { c: Mat, res: DstarResult, log_at: SymFunAt, cfg: SolverConfig },
}

pub fn phi_forward(metric: MetricKind, c: &Mat, cfg: &SolverConfig) -> Result<(Mat, PhiCache)> {
    match metric {
        MetricKind::Ecm | MetricKind::Lecm => {
            let l = chol(c)?;
            let k = theta_of_chol(&l);
            if metric == MetricKind::Ecm {
                Ok((strict_lower(&k), PhiCache::Ecm { l, k }))
            } else {
                Ok((tri_log(&k)?, PhiCache::Lecm { l, k }))
            }
        }
        MetricKind::Olm => {
            let log_at = SymFunAt::new(MatFn::Log, c)?;
            Ok((offmat(&log_at.value), PhiCache::Olm { log_at }))
        }
        MetricKind::Lsm => {
            let res = dstar::dstar(c, &cfg.dstar)?;
            let sigma = res.scaled(c).symmetrize();
            let log_at = SymFunAt::new(MatFn::Log, &sigma)?;
            let mut r = log_at.value.clone();
            if cfg.dstar.mode == DstarMode::Newton1 {
                r = project_rowzero(&r);
            }
            Ok((r, PhiCache::Lsm { c: c.clone(), res, log_at, cfg: *cfg }))
        }
        MetricKind::Phcm => Err(Error::Unsupported("PHCM has no Log-Euclidean map".into())),
    }
}

impl PhiCache {
    pub fn metric(&self) -> MetricKind {
        match self {
            PhiCache::Ecm { .. } => MetricKind::Ecm,
            PhiCache::Lecm { .. } => MetricKind::Lecm,
            PhiCache::Olm { .. } => MetricKind::Olm,
            PhiCache::Lsm { .. } => MetricKind::Lsm,
        }
    }

    /// Adjoint w.r.t. the input correlation matrix given the adjoint of `φ(C)`.
    pub fn backward(&self, g: &Mat) -> Result<Mat> {
        match self {
            PhiCache::Ecm { l, k } => {
                let gl = theta_backward(l, k, &strict_lower(g));
                chol_backward(l, &gl)
            }
            PhiCache::Lecm { l, k } => {
                let gk = tri_log_backward(k, g)?;
                let gl = theta_backward(l, k, &gk);
                chol_backward(l, &gl)
            }
            PhiCache::Olm { log_at } => Ok(log_at.diff(&offmat(&g.symmetrize()))),
            PhiCache::Lsm { c, res, log_at, cfg } => {
                let mut gr = g.symmetrize();
                if cfg.dstar.mode == DstarMode::Newton1 {
                    gr = project_rowzero(&gr);
                }
                let gs = log_at.diff(&gr);
                if cfg.dstar.mode == DstarMode::Full && !cfg.dstar_unrolled {
                    dstar::dstar_backward(c, res, &gs)
                } else {
                    let (gc, gx) = scaling_backward(c, &res.x, &gs);
                    Ok(&gc + &dstar::dstar_unrolled_backward(c, res, &gx)?)
                }
            }
        }
    }

    /// Differential of `φ` at the cached point.
    pub fn pushforward(&self, v: &Mat) -> Result<Mat> {
        match self {
            PhiCache::Ecm { l, k } => Ok(theta_diff(l, k, v)),
            PhiCache::Lecm { l, k } => tri_log_diff(k, &theta_diff(l, k, v)),
            PhiCache::Olm { log_at } => Ok(offmat(&log_at.diff(v))),
            PhiCache::Lsm { c, res, log_at, .. } => {
                // Log★★(V) = log★,Σ(ΔVΔ + ½(V⁰Σ + ΣV⁰)), V⁰ = −2 diag((I+Σ)⁻¹ΔVΔ1)
                let n = c.rows();
                let x = &res.x;
                let sigma = res.scaled(c);
                let dvd = Mat::from_fn(n, n, |i, j| x[i] * v[(i, j)] * x[j]);
                let rs = crate::linalg::row_sums(&dvd);
                let u = (&Mat::identity(n) + &sigma).solve(&Mat::col(&rs))?;
                let v0 = diag_from_vec(&u.data().iter().map(|a| -2.0 * a).collect::<Vec<_>>());
                let ds = &dvd + &(&v0.matmul(&sigma) + &sigma.matmul(&v0)).scale(0.5);
                Ok(log_at.diff(&ds.symmetrize()))
            }
        }
    }

    /// Inverse of `pushforward`, returning a hollow symmetric tangent vector.
    pub fn pushforward_inv(&self, w: &Mat) -> Result<Mat> {
        match self {
            PhiCache::Ecm { l, .. } => Ok(theta_diff_inv(l, &strict_lower(w))),
            PhiCache::Lecm { l, k } => {
                let x = tri_log(k)?;
                Ok(theta_diff_inv(l, &tri_exp_diff(&x, &strict_lower(w))))
            }
            PhiCache::Olm { log_at } => {
                let res = dplus::DplusResult::at_log(&log_at.value)?;
                Ok(offmat(&dplus_exp_diff(&res, &offmat(&w.symmetrize()))?))
            }
            PhiCache::Lsm { log_at, .. } => {
                let exp_at = SymFunAt::new(MatFn::Exp, &log_at.value)?;
                let sigma = &exp_at.value;
                let e = exp_at.diff(&w.symmetrize());
                Ok(offmat(&cor_diff(sigma, &e)))
            }
        }
    }
}

/// Differential of `Σ ↦ Cor(Σ)`:
/// `A dΣ A − ½(𝔻(dΣ)𝔻(Σ)⁻¹C + C𝔻(Σ)⁻¹𝔻(dΣ))`, `A = 𝔻(Σ)^{-½}`.
fn cor_diff(sigma: &Mat, ds: &Mat) -> Mat {
    let n = sigma.rows();
    let d: Vec<f64> = diagvec(sigma);
    Mat::from_fn(n, n, |i, j| {
        let a = ds[(i, j)] / (d[i] * d[j]).sqrt();
        let c = sigma[(i, j)] / (d[i] * d[j]).sqrt();
        a - 0.5 * c * (ds[(i, i)] / d[i] + ds[(j, j)] / d[j])
    })
}

/// State saved by `phi_inv_forward`.
#[derive(Debug, Clone)]
pub enum PhiInvCache {
    Ecm { k: Mat, s: Mat, c: Mat },
    Lecm { x: Mat, k: Mat, s: Mat, c: Mat },
    Olm { res: DplusResult, unrolled: bool },
    Lsm { exp_at: SymFunAt, c: Mat },
}

pub fn phi_inv_forward(metric: MetricKind, v: &Mat, cfg: &SolverConfig) -> Result<(Mat, PhiInvCache)> {
    match metric {
        MetricKind::Ecm => {
            let mut k = strict_lower(v);
            for i in 0..k.rows() {
                k[(i, i)] = 1.0;
            }
            let s = k.matmul(&k.transpose());
            let c = cor_mat(&s)?;
            Ok((c.clone(), PhiInvCache::Ecm { k, s, c }))
        }
        MetricKind::Lecm => {
            let x = strict_lower(v);
            let k = tri_exp(&x)?;
            let s = k.matmul(&k.transpose());
            let c = cor_mat(&s)?;
            Ok((c.clone(), PhiInvCache::Lecm { x, k, s, c }))
        }
        MetricKind::Olm => {
            let h = offmat(&v.symmetrize());
            let res = if cfg.dplus_unrolled { dplus::dplus_traced(&h, &cfg.dplus)? } else { dplus::dplus(&h, &cfg.dplus)? };
            Ok((res.correlation(), PhiInvCache::Olm { res, unrolled: cfg.dplus_unrolled }))
        }
        MetricKind::Lsm => {
            let exp_at = SymFunAt::new(MatFn::Exp, &v.symmetrize())?;
            let c = cor_mat(&exp_at.value)?;
            Ok((c.clone(), PhiInvCache::Lsm { exp_at, c }))
        }
        MetricKind::Phcm => Err(Error::Unsupported("PHCM has no Log-Euclidean map".into())),
    }
}

impl PhiInvCache {
    /// Adjoint w.r.t. the prototype vector given the adjoint of the output.
    pub fn backward(&self, g: &Mat) -> Result<Mat> {
        match self {
            PhiInvCache::Ecm { k, s, c } => {
                let gs = cor_backward(s, c, g);
                Ok(strict_lower(&gs.matmul(k).scale(2.0)))
            }
            PhiInvCache::Lecm { x, k, s, c } => {
                let gs = cor_backward(s, c, g);
                let gk = gs.matmul(k).scale(2.0);
                Ok(tri_exp_backward(x, &gk))
            }
            PhiInvCache::Olm { res, unrolled } => {
                let gy = res.exp_at_y.diff(&g.symmetrize());
                if *unrolled {
                    dplus::dplus_unrolled_backward(res, &gy)
                } else {
                    dplus::dplus_backward(res, &gy)
                }
            }
            PhiInvCache::Lsm { exp_at, c } => {
                let gs = cor_backward(&exp_at.value, c, g);
                Ok(exp_at.diff(&gs))
            }
        }
    }
}

/// `φ★,I`: `⌊V⌋` for ECM/LECM, `V` for OLM, `V − Diag(V1)` for LSM.
pub fn pushforward_identity(metric: MetricKind, v: &Mat) -> Result<Mat> {
    match metric {
        MetricKind::Ecm | MetricKind::Lecm => Ok(strict_lower(v)),
        MetricKind::Olm => Ok(v.clone()),
        MetricKind::Lsm => Ok(v - &diag_from_vec(&crate::linalg::row_sums(v))),
        MetricKind::Phcm => Err(Error::Unsupported("PHCM has no Log-Euclidean map".into())),
    }
}

/// Inverse of `pushforward_identity` on the prototype space.
pub fn pushforward_identity_inv(metric: MetricKind, w: &Mat) -> Result<Mat> {
    match metric {
        MetricKind::Ecm | MetricKind::Lecm => {
            let s = strict_lower(w);
            Ok(&s + &s.transpose())
        }
        MetricKind::Olm | MetricKind::Lsm => Ok(offmat(w)),
        MetricKind::Phcm => Err(Error::Unsupported("PHCM has no Log-Euclidean map".into())),
    }
}

/// Values-only `φ` with solver defaults for geometry.
pub fn phi_mat(metric: MetricKind, c: &Mat, cfg: &SolverConfig) -> Result<Mat> {
    Ok(phi_forward(metric, c, cfg)?.0)
}

pub fn phi_inv_mat(metric: MetricKind, v: &Mat, cfg: &SolverConfig) -> Result<Mat> {
    Ok(phi_inv_forward(metric, v, cfg)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlation::random_correlation;
    use crate::linalg::testutil::random_symmetric;

    fn hollow(n: usize, seed: u64) -> Mat {
        offmat(&random_symmetric(n, seed))
    }

    #[test]
    fn theta_diff_inverse_closed_form() {
        let c = random_correlation(6, 0.6, 2).unwrap();
        let l = chol(c.as_mat()).unwrap();
        let k = theta_of_chol(&l);
        let v = hollow(6, 3);
        let xi = theta_diff(&l, &k, &v);
        assert!(theta_diff_inv(&l, &xi).max_abs_diff(&v) < 1e-10);
    }

    #[test]
    fn backward_is_adjoint_of_pushforward() {
        let cfg = SolverConfig::geometry();
        for metric in MetricKind::LOG_EUCLIDEAN {
            let c = random_correlation(5, 0.5, 7).unwrap();
            let (_, cache) = phi_forward(metric, c.as_mat(), &cfg).unwrap();
            let v = hollow(5, 8);
            let g = random_symmetric(5, 9);
            let lhs = cache.pushforward(&v).unwrap().dot(&g);
            let rhs = cache.backward(&g).unwrap().dot(&v);
            assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0), "{metric}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn phi_inv_backward_matches_finite_differences() {
        let cfg = SolverConfig::geometry();
        let eps = 1e-6;
        for metric in MetricKind::LOG_EUCLIDEAN {
            let c = random_correlation(5, 0.5, 10).unwrap();
            let v = phi_mat(metric, c.as_mat(), &cfg).unwrap();
            let dir = phi_mat(metric, random_correlation(5, 0.5, 11).unwrap().as_mat(), &cfg).unwrap();
            let w = random_symmetric(5, 12);
            let (_, cache) = phi_inv_forward(metric, &v, &cfg).unwrap();
            let an = cache.backward(&w).unwrap().dot(&dir);
            let f = |t: f64| phi_inv_mat(metric, &(&v + &dir.scale(t)), &cfg).unwrap().dot(&w);
            let fd = (f(eps) - f(-eps)) / (2.0 * eps);
            assert!((fd - an).abs() / an.abs().max(1e-8) < 1e-6, "{metric}: fd={fd} an={an}");
        }
    }

    #[test]
    fn identity_differentials_agree_with_general_form() {
        let cfg = SolverConfig::geometry();
        let v = hollow(5, 13);
        for metric in MetricKind::LOG_EUCLIDEAN {
            let (_, cache) = phi_forward(metric, &Mat::identity(5), &cfg).unwrap();
            let general = cache.pushforward(&v).unwrap();
            let at_i = pushforward_identity(metric, &v).unwrap();
            assert!(general.max_abs_diff(&at_i) < 1e-12, "{metric}");
            let back = pushforward_identity_inv(metric, &at_i).unwrap();
            assert!(back.max_abs_diff(&v) < 1e-14, "{metric}");
        }
    }
}
