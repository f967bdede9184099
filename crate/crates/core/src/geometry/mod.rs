//! Riemannian geometries on the correlation manifold.

pub mod logeuclid;
pub mod maps;
pub mod phcm;

use std::fmt;
use std::str::FromStr;

use crate::dsolvers::{DplusConfig, DstarConfig, DstarMode};
use crate::error::{Error, Result};

pub use logeuclid::{
    frechet_mean, geodesic, parallel_transport, phi, phi_inv, pushforward, pushforward_inv, riem_dist, riem_exp,
    riem_inner, riem_log, Geometry, PrototypeVector,
};
pub use phcm::phcm_dist;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MetricKind {
    Ecm,
    Lecm,
    Olm,
    Lsm,
    Phcm,
}

impl MetricKind {
    pub const ALL: [MetricKind; 5] = [MetricKind::Ecm, MetricKind::Lecm, MetricKind::Olm, MetricKind::Lsm, MetricKind::Phcm];
    pub const LOG_EUCLIDEAN: [MetricKind; 4] = [MetricKind::Ecm, MetricKind::Lecm, MetricKind::Olm, MetricKind::Lsm];

    pub fn is_log_euclidean(self) -> bool {
        self != MetricKind::Phcm
    }

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Ecm => "ECM",
            MetricKind::Lecm => "LECM",
            MetricKind::Olm => "OLM",
            MetricKind::Lsm => "LSM",
            MetricKind::Phcm => "PHCM",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "ECM" => Ok(MetricKind::Ecm),
            "LECM" => Ok(MetricKind::Lecm),
            "OLM" => Ok(MetricKind::Olm),
            "LSM" => Ok(MetricKind::Lsm),
            "PHCM" => Ok(MetricKind::Phcm),
            _ => Err(Error::Config(format!("unknown metric '{s}'"))),
        }
    }
}

/// Solver settings shared by the maps that need D⁺ or D★.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub dplus: DplusConfig,
    pub dstar: DstarConfig,
    /// Differentiate through the D⁺ iterations instead of the implicit formula.
    pub dplus_unrolled: bool,
    /// Differentiate through the Newton iterations even in full mode.
    pub dstar_unrolled: bool,
}

impl SolverConfig {
    /// Fully converged solvers with implicit gradients.
    pub fn geometry() -> Self {
        SolverConfig { dplus: DplusConfig::default(), dstar: DstarConfig::default(), dplus_unrolled: false, dstar_unrolled: false }
    }

    /// Layer defaults: exact D⁺ and a single Newton step for D★.
    pub fn layers() -> Self {
        SolverConfig {
            dstar: DstarConfig { mode: DstarMode::Newton1, ..DstarConfig::default() },
            ..Self::geometry()
        }
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self::geometry()
    }
}
