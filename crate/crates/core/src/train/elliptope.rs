//! Sampling an MLR logit over the 3×3 elliptope, embedded as
//! `C ↦ (C₂₁, C₃₁, C₃₂)`.

use std::path::Path;

use crate::correlation::{CorrelationMatrix, validate};
use crate::error::{Error, Result};
use crate::geometry::{MetricKind, SolverConfig};
use crate::io::TensorFile;
use crate::layers::{cor_mlr_logits, MlrParams};
use crate::linalg::Mat;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub r21: f64,
    pub r31: f64,
    pub r32: f64,
    pub v: f64,
}

/// Cell midpoints `−1 + (2i + 1)/k`; odd `k` includes 0.
pub fn axis(k: usize) -> Vec<f64> {
    (0..k).map(|i| -1.0 + (2 * i + 1) as f64 / k as f64).collect()
}

pub fn cor3(r21: f64, r31: f64, r32: f64) -> Mat {
    Mat::from_rows(&[&[1.0, r21, r31], &[r21, 1.0, r32], &[r31, r32, 1.0]])
}

/// Reads the hyperplane parameter: three entries `(z₂₁, z₃₁, z₃₂)` (a Poincaré
/// vector for PHCM), stored flat or, for Log-Euclidean metrics, as a 3×3
/// hollow symmetric matrix.
pub fn read_z(path: &Path, metric: MetricKind) -> Result<Vec<f64>> {
    let t = TensorFile::read(path)?;
    match t.shape[..] {
        [3] | [1, 3] | [3, 1] => Ok(t.data),
        [3, 3] if metric.is_log_euclidean() => {
            let m = Mat::from_vec(3, 3, t.data);
            Ok(vec![m[(1, 0)], m[(2, 0)], m[(2, 1)]])
        }
        [n, n2] if n == n2 && metric.is_log_euclidean() => {
            Err(Error::InvalidDimension(format!("hyperplane sampling needs n = 3, got {n}")))
        }
        _ => Err(Error::InvalidDimension(format!("hyperplane parameter must have 3 entries, got shape {:?}", t.shape))),
    }
}

/// Logit of a single-class, single-channel MLR over the valid points of a k³ grid.
pub fn hyperplane_grid(metric: MetricKind, n: usize, z: &[f64], gamma: f64, k: usize) -> Result<Vec<GridPoint>> {
    if n != 3 || z.len() != 3 {
        return Err(Error::InvalidDimension(format!("hyperplane sampling needs n = 3 and 3 entries, got n = {n}, {} entries", z.len())));
    }
    if k == 0 {
        return Err(Error::Config("grid size must be positive".into()));
    }
    let params = MlrParams { metric, n: 3, channels: 1, z: Mat::from_vec(1, 3, z.to_vec()), gamma: Mat::scalar(gamma) };
    let cfg = SolverConfig::geometry();
    let ax = axis(k);
    let mut out = Vec::new();
    for &r21 in &ax {
        for &r31 in &ax {
            for &r32 in &ax {
                let c = cor3(r21, r31, r32);
                if validate(&c).is_err() {
                    continue;
                }
                let v = cor_mlr_logits(&[CorrelationMatrix::from_trusted(c)], &params, &cfg)?[0];
                out.push(GridPoint { r21, r31, r32, v });
            }
        }
    }
    Ok(out)
}

pub fn write_csv(path: &Path, points: &[GridPoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(["r21", "r31", "r32", "v"]).map_err(io)?;
    for p in points {
        w.write_record([p.r21, p.r31, p.r32, p.v].map(|x| format!("{x:?}"))).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_lies_on_the_hyperplane() {
        for metric in MetricKind::ALL {
            let pts = hyperplane_grid(metric, 3, &[0.3, -0.2, 0.5], 0.0, 5).unwrap();
            let origin = pts.iter().find(|p| p.r21 == 0.0 && p.r31 == 0.0 && p.r32 == 0.0).unwrap();
            assert!(origin.v.abs() < 1e-12, "{metric}: {}", origin.v);
        }
    }

    #[test]
    fn invalid_points_are_omitted() {
        let k = 6;
        let pts = hyperplane_grid(MetricKind::Ecm, 3, &[1.0, 0.0, 0.0], 0.1, k).unwrap();
        let valid = axis(k)
            .iter()
            .flat_map(|&a| axis(k).into_iter().flat_map(move |b| axis(k).into_iter().map(move |c| (a, b, c))))
            .filter(|&(a, b, c)| 1.0 - a * a - b * b - c * c + 2.0 * a * b * c > 0.0)
            .count();
        assert_eq!(pts.len(), valid);
        assert!(pts.len() < k * k * k);
    }

    #[test]
    fn sign_flips_along_a_grid_line() {
        for metric in MetricKind::ALL {
            let pts = hyperplane_grid(metric, 3, &[0.8, 0.1, -0.1], 0.05, 9).unwrap();
            let line: Vec<f64> = pts.iter().filter(|p| p.r31 == 0.0 && p.r32 == 0.0).map(|p| p.v).collect();
            assert!(line.first().unwrap() * line.last().unwrap() < 0.0, "{metric}: {line:?}");
        }
    }

    #[test]
    fn other_dimensions_are_rejected() {
        assert!(matches!(hyperplane_grid(MetricKind::Olm, 4, &[0.0; 6], 0.0, 3), Err(Error::InvalidDimension(_))));
    }
}
