//! Riemannian operators of the four Log-Euclidean metrics. Each is the
//! pullback of the Frobenius inner product on a prototype space through `φ`.

use crate::correlation::{CorrelationMatrix, HollowSymmetric};
use crate::error::{Error, Result};
use crate::geometry::maps::{phi_forward, phi_inv_forward, PhiCache};
use crate::geometry::{MetricKind, SolverConfig};
use crate::linalg::{offmat, strict_lower, Mat};

/// A point of the prototype space of `metric`: strictly lower triangular for
/// ECM/LECM, hollow symmetric for OLM, zero-row-sum symmetric for LSM.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeVector {
    pub metric: MetricKind,
    pub m: Mat,
}

impl PrototypeVector {
    pub fn new(metric: MetricKind, m: Mat) -> Result<Self> {
        let ok = match metric {
            MetricKind::Ecm | MetricKind::Lecm => strict_lower(&m) == m,
            MetricKind::Olm => m.asymmetry() <= 1e-10 && (0..m.rows()).all(|i| m[(i, i)] == 0.0),
            MetricKind::Lsm => {
                m.asymmetry() <= 1e-10 && crate::linalg::row_sums(&m).iter().all(|s| s.abs() <= 1e-10 * m.max_abs().max(1.0))
            }
            MetricKind::Phcm => return Err(Error::Unsupported(metric.to_string())),
        };
        if !ok {
            return Err(Error::ShapeMismatch(format!("matrix is not in the {metric} prototype space")));
        }
        Ok(PrototypeVector { metric, m })
    }

    pub fn zeros(metric: MetricKind, n: usize) -> Self {
        PrototypeVector { metric, m: Mat::zeros(n, n) }
    }
}

/// Log-Euclidean geometry with explicit solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    pub metric: MetricKind,
    pub solvers: SolverConfig,
}

impl Geometry {
    pub fn new(metric: MetricKind) -> Result<Self> {
        if !metric.is_log_euclidean() {
            return Err(Error::Unsupported(format!("{metric} Riemannian operators")));
        }
        Ok(Geometry { metric, solvers: SolverConfig::geometry() })
    }

    fn cache(&self, c: &CorrelationMatrix) -> Result<(Mat, PhiCache)> {
        phi_forward(self.metric, c.as_mat(), &self.solvers)
    }

    pub fn phi(&self, c: &CorrelationMatrix) -> Result<PrototypeVector> {
        Ok(PrototypeVector { metric: self.metric, m: self.cache(c)?.0 })
    }

    pub fn phi_inv(&self, v: &PrototypeVector) -> Result<CorrelationMatrix> {
        self.check(v)?;
        let (c, _) = phi_inv_forward(self.metric, &v.m, &self.solvers)?;
        Ok(CorrelationMatrix::from_trusted(c))
    }

    pub fn pushforward(&self, c: &CorrelationMatrix, v: &HollowSymmetric) -> Result<PrototypeVector> {
        let (_, cache) = self.cache(c)?;
        Ok(PrototypeVector { metric: self.metric, m: cache.pushforward(v.as_mat())? })
    }

    pub fn pushforward_inv(&self, c: &CorrelationMatrix, w: &PrototypeVector) -> Result<HollowSymmetric> {
        self.check(w)?;
        let (_, cache) = self.cache(c)?;
        hollow(cache.pushforward_inv(&w.m)?)
    }

    pub fn inner(&self, c: &CorrelationMatrix, v: &HollowSymmetric, w: &HollowSymmetric) -> Result<f64> {
        let (_, cache) = self.cache(c)?;
        Ok(cache.pushforward(v.as_mat())?.dot(&cache.pushforward(w.as_mat())?))
    }

    pub fn exp(&self, c: &CorrelationMatrix, v: &HollowSymmetric) -> Result<CorrelationMatrix> {
        let (p, cache) = self.cache(c)?;
        let target = &p + &cache.pushforward(v.as_mat())?;
        Ok(CorrelationMatrix::from_trusted(phi_inv_forward(self.metric, &target, &self.solvers)?.0))
    }

    pub fn log(&self, c: &CorrelationMatrix, c2: &CorrelationMatrix) -> Result<HollowSymmetric> {
        let (p, cache) = self.cache(c)?;
        let (p2, _) = self.cache(c2)?;
        hollow(cache.pushforward_inv(&(&p2 - &p))?)
    }

    pub fn geodesic(&self, c: &CorrelationMatrix, c2: &CorrelationMatrix, t: f64) -> Result<CorrelationMatrix> {
        let (p, _) = self.cache(c)?;
        let (p2, _) = self.cache(c2)?;
        let target = &p.scale(1.0 - t) + &p2.scale(t);
        Ok(CorrelationMatrix::from_trusted(phi_inv_forward(self.metric, &target, &self.solvers)?.0))
    }

    pub fn dist(&self, c: &CorrelationMatrix, c2: &CorrelationMatrix) -> Result<f64> {
        let (p, _) = self.cache(c)?;
        let (p2, _) = self.cache(c2)?;
        Ok((&p - &p2).norm())
    }

    pub fn parallel_transport(&self, c: &CorrelationMatrix, c2: &CorrelationMatrix, v: &HollowSymmetric) -> Result<HollowSymmetric> {
        let (_, cache) = self.cache(c)?;
        let (_, cache2) = self.cache(c2)?;
        hollow(cache2.pushforward_inv(&cache.pushforward(v.as_mat())?)?)
    }

    pub fn frechet_mean(&self, points: &[CorrelationMatrix]) -> Result<CorrelationMatrix> {
        let first = points.first().ok_or_else(|| Error::InvalidDimension("empty point set".into()))?;
        let n = first.n();
        let mut acc = Mat::zeros(n, n);
        for c in points {
            if c.n() != n {
                return Err(Error::DimensionMismatch(format!("{} vs {}", c.n(), n)));
            }
            acc += &self.cache(c)?.0;
        }
        let mean = acc.scale(1.0 / points.len() as f64);
        Ok(CorrelationMatrix::from_trusted(phi_inv_forward(self.metric, &mean, &self.solvers)?.0))
    }

    fn check(&self, v: &PrototypeVector) -> Result<()> {
        if v.metric != self.metric {
            return Err(Error::ShapeMismatch(format!("{} vector used with {}", v.metric, self.metric)));
        }
        Ok(())
    }
}

fn hollow(m: Mat) -> Result<HollowSymmetric> {
    HollowSymmetric::new(offmat(&m.symmetrize()))
}

fn geom(metric: MetricKind) -> Result<Geometry> {
    Geometry::new(metric)
}

pub fn phi(metric: MetricKind, c: &CorrelationMatrix) -> Result<PrototypeVector> {
    geom(metric)?.phi(c)
}

pub fn phi_inv(metric: MetricKind, v: &PrototypeVector) -> Result<CorrelationMatrix> {
    geom(metric)?.phi_inv(v)
}

pub fn pushforward(metric: MetricKind, c: &CorrelationMatrix, v: &HollowSymmetric) -> Result<PrototypeVector> {
    geom(metric)?.pushforward(c, v)
}

pub fn pushforward_inv(metric: MetricKind, c: &CorrelationMatrix, w: &PrototypeVector) -> Result<HollowSymmetric> {
    geom(metric)?.pushforward_inv(c, w)
}

pub fn riem_inner(metric: MetricKind, c: &CorrelationMatrix, v: &HollowSymmetric, w: &HollowSymmetric) -> Result<f64> {
    geom(metric)?.inner(c, v, w)
}

pub fn riem_exp(metric: MetricKind, c: &CorrelationMatrix, v: &HollowSymmetric) -> Result<CorrelationMatrix> {
    geom(metric)?.exp(c, v)
}

pub fn riem_log(metric: MetricKind, c: &CorrelationMatrix, c2: &CorrelationMatrix) -> Result<HollowSymmetric> {
    geom(metric)?.log(c, c2)
}

pub fn geodesic(metric: MetricKind, c: &CorrelationMatrix, c2: &CorrelationMatrix, t: f64) -> Result<CorrelationMatrix> {
    geom(metric)?.geodesic(c, c2, t)
}

/// Geodesic distance; PHCM is routed to `phcm_dist`.
pub fn riem_dist(metric: MetricKind, c: &CorrelationMatrix, c2: &CorrelationMatrix) -> Result<f64> {
    if metric == MetricKind::Phcm {
        return crate::geometry::phcm::phcm_dist(c, c2);
    }
    geom(metric)?.dist(c, c2)
}

pub fn parallel_transport(
    metric: MetricKind,
    c: &CorrelationMatrix,
    c2: &CorrelationMatrix,
    v: &HollowSymmetric,
) -> Result<HollowSymmetric> {
    geom(metric)?.parallel_transport(c, c2, v)
}

pub fn frechet_mean(metric: MetricKind, points: &[CorrelationMatrix]) -> Result<CorrelationMatrix> {
    geom(metric)?.frechet_mean(points)
}
