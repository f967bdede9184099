//! Log-Euclidean hyperplane margins `⟨φ(X), W⟩ − γ‖W‖` with `W = φ★,I(Z)`,
//! and the coordinate charts of the prototype spaces used by the FC layer.

use crate::correlation::{dim_lower, hol_coords, hol_from_coords, lower_pairs, rowzero_coords, rowzero_from_coords, rowzero_pairs};
use crate::error::{Error, Result};
use crate::geometry::maps::pushforward_identity;
use crate::geometry::MetricKind;
use crate::layers::tape::{Tape, Var};
use crate::linalg::Mat;

fn hollow_from_lower(n: usize, v: &[f64]) -> Mat {
    let mut z = Mat::zeros(n, n);
    for (k, (i, j)) in lower_pairs(n).enumerate() {
        z[(i, j)] = v[k];
        z[(j, i)] = v[k];
    }
    z
}

/// `φ★,I` applied to the hollow matrix with the given lower entries.
pub fn slot_weight(metric: MetricKind, n: usize, entries: &[f64]) -> Result<Mat> {
    pushforward_identity(metric, &hollow_from_lower(n, entries))
}

/// Length of the compact form of a prototype vector of size `n`.
pub fn compact_len(metric: MetricKind, n: usize) -> usize {
    match metric {
        MetricKind::Lsm => dim_lower(n) + n,
        _ => dim_lower(n),
    }
}

/// Compact coordinates whose Euclidean inner product is the Frobenius inner
/// product of prototype vectors: strictly lower entries (ECM/LECM), `√2` times
/// the lower entries (OLM), and for LSM additionally the diagonal.
pub fn compact_prototype(metric: MetricKind, p: &Mat) -> Vec<f64> {
    let n = p.rows();
    let s = match metric {
        MetricKind::Ecm | MetricKind::Lecm => 1.0,
        _ => std::f64::consts::SQRT_2,
    };
    let mut out: Vec<f64> = lower_pairs(n).map(|(i, j)| s * p[(i, j)]).collect();
    if metric == MetricKind::Lsm {
        out.extend((0..n).map(|i| p[(i, i)]));
    }
    out
}

fn compact_prototype_adjoint(metric: MetricKind, n: usize, g: &[f64]) -> Mat {
    let mut out = Mat::zeros(n, n);
    match metric {
        MetricKind::Ecm | MetricKind::Lecm => {
            for (k, (i, j)) in lower_pairs(n).enumerate() {
                out[(i, j)] = g[k];
            }
        }
        _ => {
            let h = std::f64::consts::FRAC_1_SQRT_2;
            for (k, (i, j)) in lower_pairs(n).enumerate() {
                out[(i, j)] = h * g[k];
                out[(j, i)] = h * g[k];
            }
            if metric == MetricKind::Lsm {
                let p = dim_lower(n);
                for i in 0..n {
                    out[(i, i)] = g[p + i];
                }
            }
        }
    }
    out
}

/// Tape node for `compact_prototype`.
pub(crate) fn compact(t: &mut Tape, metric: MetricKind, p: Var) -> Var {
    let n = t.value(p).rows();
    let v = compact_prototype(metric, t.value(p));
    t.push(
        Mat::from_vec(1, v.len(), v),
        vec![p],
        Box::new(move |g| Ok(vec![compact_prototype_adjoint(metric, n, g.data())])),
    )
}

/// `compact_prototype(φ★,I(Z))` straight from the lower entries of `Z`.
pub fn compact_weight(metric: MetricKind, n: usize, z: &[f64], out: &mut [f64]) {
    match metric {
        MetricKind::Ecm | MetricKind::Lecm => out.copy_from_slice(z),
        MetricKind::Olm => {
            for (o, v) in out.iter_mut().zip(z) {
                *o = std::f64::consts::SQRT_2 * v;
            }
        }
        MetricKind::Lsm => {
            let p = dim_lower(n);
            out[p..].iter_mut().for_each(|o| *o = 0.0);
            for (k, (i, j)) in lower_pairs(n).enumerate() {
                out[k] = std::f64::consts::SQRT_2 * z[k];
                out[p + i] -= z[k];
                out[p + j] -= z[k];
            }
        }
        MetricKind::Phcm => unreachable!("PHCM has no prototype weights"),
    }
}

fn compact_weight_adjoint(metric: MetricKind, n: usize, g: &[f64], out: &mut [f64]) {
    match metric {
        MetricKind::Ecm | MetricKind::Lecm => out.copy_from_slice(g),
        MetricKind::Olm => {
            for (o, v) in out.iter_mut().zip(g) {
                *o = std::f64::consts::SQRT_2 * v;
            }
        }
        MetricKind::Lsm => {
            let p = dim_lower(n);
            for (k, (i, j)) in lower_pairs(n).enumerate() {
                out[k] = std::f64::consts::SQRT_2 * g[k] - g[p + i] - g[p + j];
            }
        }
        MetricKind::Phcm => unreachable!("PHCM has no prototype weights"),
    }
}

/// Compact prototype normals of every slot, channel blocks side by side.
pub(crate) fn le_weights(t: &mut Tape, metric: MetricKind, n: usize, channels: usize, z: Var) -> Var {
    if matches!(metric, MetricKind::Ecm | MetricKind::Lecm) {
        return z;
    }
    let zm = t.value(z);
    let (slots, cols) = zm.shape();
    let p = dim_lower(n);
    let q = compact_len(metric, n);
    let mut w = Mat::zeros(slots, channels * q);
    for s in 0..slots {
        for ch in 0..channels {
            let zs = &zm.row(s)[ch * p..(ch + 1) * p];
            compact_weight(metric, n, zs, &mut w.data_mut()[s * channels * q + ch * q..][..q]);
        }
    }
    t.push(
        w,
        vec![z],
        Box::new(move |g| {
            let mut gz = Mat::zeros(slots, cols);
            for s in 0..slots {
                for ch in 0..channels {
                    let gs = &g.row(s)[ch * q..(ch + 1) * q];
                    compact_weight_adjoint(metric, n, gs, &mut gz.data_mut()[s * cols + ch * p..][..p]);
                }
            }
            Ok(vec![gz])
        }),
    )
}

/// `v_s = ⟨f, W_s⟩ − γ_s ‖W_s‖` for a feature row `f` and weight rows `W_s`.
pub(crate) fn le_logits(t: &mut Tape, f: Var, w: Var, gamma: Var) -> Result<Var> {
    let fv = t.shared(f);
    let wm = t.shared(w);
    let gm = t.shared(gamma);
    if fv.cols() != wm.cols() || gm.rows() != wm.rows() {
        return Err(Error::ShapeMismatch(format!(
            "features of length {} against weights {:?}",
            fv.cols(),
            wm.shape()
        )));
    }
    let slots = wm.rows();
    let mut norms = Vec::with_capacity(slots);
    let mut v = Vec::with_capacity(slots);
    for s in 0..slots {
        let (mut ip, mut sq) = (0.0, 0.0);
        for (a, b) in fv.data().iter().zip(wm.row(s)) {
            ip += a * b;
            sq += b * b;
        }
        norms.push(sq.sqrt());
        v.push(ip - gm[(s, 0)] * norms[s]);
    }
    Ok(t.push(
        Mat::from_vec(slots, 1, v),
        vec![f, w, gamma],
        Box::new(move |g| {
            let len = fv.cols();
            let mut gf = Mat::zeros(1, len);
            let mut gw = Mat::zeros(slots, len);
            let mut gg = Mat::zeros(slots, 1);
            for s in 0..slots {
                let a = g[(s, 0)];
                if a == 0.0 {
                    continue;
                }
                let ws = wm.row(s);
                let scale = if norms[s] > 0.0 { gm[(s, 0)] / norms[s] } else { 0.0 };
                for (o, w) in gf.data_mut().iter_mut().zip(ws) {
                    *o += a * w;
                }
                for ((o, w), f) in gw.data_mut()[s * len..(s + 1) * len].iter_mut().zip(ws).zip(fv.data()) {
                    *o = a * (f - scale * w);
                }
                gg[(s, 0)] = -a * norms[s];
            }
            Ok(vec![gf, gw, gg])
        }),
    ))
}

/// Coordinates of a prototype vector in the orthonormal chart of its space:
/// strictly lower entries (ECM/LECM), `√2 H_ij` (OLM), or the scaled leading
/// block over `j ≤ i < m−1` (LSM). Ordered row by row.
pub fn prototype_coords(metric: MetricKind, p: &Mat) -> Result<Vec<f64>> {
    match metric {
        MetricKind::Ecm | MetricKind::Lecm => Ok(lower_pairs(p.rows()).map(|(i, j)| p[(i, j)]).collect()),
        MetricKind::Olm => Ok(hol_coords(p)),
        MetricKind::Lsm => Ok(rowzero_coords(p)),
        MetricKind::Phcm => Err(Error::Unsupported("PHCM has no prototype chart".into())),
    }
}

/// Inverse of `prototype_coords`.
pub fn assemble_prototype(metric: MetricKind, m: usize, v: &[f64]) -> Result<Mat> {
    if v.len() != dim_lower(m) {
        return Err(Error::DimensionMismatch(format!("{} coordinates for size {m}", v.len())));
    }
    match metric {
        MetricKind::Ecm | MetricKind::Lecm => {
            let mut out = Mat::zeros(m, m);
            for (k, (i, j)) in lower_pairs(m).enumerate() {
                out[(i, j)] = v[k];
            }
            Ok(out)
        }
        MetricKind::Olm => Ok(hol_from_coords(m, v)),
        MetricKind::Lsm => Ok(rowzero_from_coords(m, v)),
        MetricKind::Phcm => Err(Error::Unsupported("PHCM has no prototype chart".into())),
    }
}

/// Adjoint of `assemble_prototype` w.r.t. the coordinates.
fn assemble_adjoint(metric: MetricKind, g: &Mat) -> Vec<f64> {
    let m = g.rows();
    match metric {
        MetricKind::Ecm | MetricKind::Lecm => lower_pairs(m).map(|(i, j)| g[(i, j)]).collect(),
        MetricKind::Olm => lower_pairs(m).map(|(i, j)| (g[(i, j)] + g[(j, i)]) / std::f64::consts::SQRT_2).collect(),
        MetricKind::Lsm => {
            let l = m - 1;
            let (s3, s6) = (3f64.sqrt(), 6f64.sqrt());
            rowzero_pairs(m)
                .map(|(i, j)| {
                    if i == j {
                        (g[(i, i)] - g[(i, l)] - g[(l, i)] + g[(l, l)]) / s3
                    } else {
                        (g[(i, j)] + g[(j, i)] - g[(i, l)] - g[(l, i)] - g[(j, l)] - g[(l, j)] + 2.0 * g[(l, l)]) / s6
                    }
                })
                .collect()
        }
        MetricKind::Phcm => Vec::new(),
    }
}

/// Adjoint of `prototype_coords` w.r.t. the prototype matrix.
fn coords_adjoint(metric: MetricKind, m: usize, g: &[f64]) -> Mat {
    let mut out = Mat::zeros(m, m);
    match metric {
        MetricKind::Ecm | MetricKind::Lecm => {
            for (k, (i, j)) in lower_pairs(m).enumerate() {
                out[(i, j)] = g[k];
            }
        }
        MetricKind::Olm => {
            for (k, (i, j)) in lower_pairs(m).enumerate() {
                out[(i, j)] = std::f64::consts::SQRT_2 * g[k];
            }
        }
        MetricKind::Lsm => {
            let (s3, s6) = (3f64.sqrt(), 6f64.sqrt());
            for (k, (i, j)) in rowzero_pairs(m).enumerate() {
                out[(i, j)] = if i == j { s3 * g[k] } else { s6 * g[k] };
            }
        }
        MetricKind::Phcm => {}
    }
    out
}

/// Tape node for `assemble_prototype`; `v` is any shape holding `m(m−1)/2` entries.
pub(crate) fn assemble(t: &mut Tape, metric: MetricKind, m: usize, v: Var) -> Result<Var> {
    let (r, c) = t.value(v).shape();
    let out = assemble_prototype(metric, m, t.value(v).data())?;
    Ok(t.push(out, vec![v], Box::new(move |g| Ok(vec![Mat::from_vec(r, c, assemble_adjoint(metric, g))]))))
}

/// Tape node for `prototype_coords`, returning a row vector.
pub(crate) fn coords(t: &mut Tape, metric: MetricKind, p: Var) -> Result<Var> {
    let m = t.value(p).rows();
    let v = prototype_coords(metric, t.value(p))?;
    Ok(t.push(
        Mat::from_vec(1, v.len(), v),
        vec![p],
        Box::new(move |g| Ok(vec![coords_adjoint(metric, m, g.data())])),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::ops::testing::{check_leaf_gradient, weighted};
    use crate::linalg::testutil::random_mat;
    use crate::linalg::{offmat, row_sums};

    #[test]
    fn chart_round_trips() {
        let v: Vec<f64> = (0..10).map(|k| (k as f64 * 0.37).sin()).collect();
        for metric in MetricKind::LOG_EUCLIDEAN {
            let p = assemble_prototype(metric, 5, &v).unwrap();
            let back = prototype_coords(metric, &p).unwrap();
            assert!(back.iter().zip(&v).all(|(a, b)| (a - b).abs() < 1e-14), "{metric}");
        }
        let lsm = assemble_prototype(MetricKind::Lsm, 4, &[0.0; 6]).unwrap();
        assert_eq!(lsm, Mat::zeros(4, 4));
    }

    #[test]
    fn lsm_assembly_example() {
        // single nonzero leading diagonal coordinate √3 at m = 3
        let p = assemble_prototype(MetricKind::Lsm, 3, &[3f64.sqrt(), 0.0, 0.0]).unwrap();
        let want = Mat::from_rows(&[&[1.0, 0.0, -1.0], &[0.0, 0.0, 0.0], &[-1.0, 0.0, 1.0]]);
        assert!(p.max_abs_diff(&want) < 1e-15);
        assert!(row_sums(&p).iter().all(|s| s.abs() < 1e-15));
    }

    #[test]
    fn adjoints_are_exact() {
        let m = 5;
        let v: Vec<f64> = (0..10).map(|k| (k as f64 * 0.71).cos()).collect();
        let g = random_mat(m, 1);
        for metric in MetricKind::LOG_EUCLIDEAN {
            let lhs = assemble_prototype(metric, m, &v).unwrap().dot(&g);
            let rhs: f64 = assemble_adjoint(metric, &g).iter().zip(&v).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-12, "{metric}");
            let p = random_mat(m, 2);
            let lhs: f64 = prototype_coords(metric, &p).unwrap().iter().zip(&v).map(|(a, b)| a * b).sum();
            let rhs = coords_adjoint(metric, m, &v).dot(&p);
            assert!((lhs - rhs).abs() < 1e-12, "{metric}");
            let q = compact_len(metric, m);
            let gq: Vec<f64> = (0..q).map(|k| (k as f64 * 1.3).sin()).collect();
            let mut w = vec![0.0; q];
            compact_weight(metric, m, &v, &mut w);
            let full = slot_weight(metric, m, &v).unwrap();
            assert_eq!(w, compact_prototype(metric, &full), "{metric}");
            let lhs: f64 = w.iter().zip(&gq).map(|(a, b)| a * b).sum();
            let mut adj = vec![0.0; v.len()];
            compact_weight_adjoint(metric, m, &gq, &mut adj);
            let rhs: f64 = adj.iter().zip(&v).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-12, "{metric}");
            let sym = &p + &p.transpose();
            let lhs: f64 = compact_prototype(metric, &sym).iter().zip(&gq).map(|(a, b)| a * b).sum();
            let rhs = compact_prototype_adjoint(metric, m, &gq).dot(&sym);
            assert!((lhs - rhs).abs() < 1e-12, "{metric}");
            let a = random_mat(m, 3);
            let a = &a + &a.transpose();
            let a = if matches!(metric, MetricKind::Ecm | MetricKind::Lecm) { crate::linalg::strict_lower(&a) } else { a };
            let ip: f64 = compact_prototype(metric, &a).iter().zip(compact_prototype(metric, &full)).map(|(x, y)| x * y).sum();
            let want = if metric == MetricKind::Olm { offmat(&a).dot(&full) } else { a.dot(&full) };
            assert!((ip - want).abs() < 1e-12, "{metric}");
        }
    }

    #[test]
    fn logits_gradient() {
        let f0 = Mat::from_fn(1, 8, |_, j| (j as f64).sin());
        let w0 = random_mat(8, 3);
        let w0 = Mat::from_fn(3, 8, |i, j| w0[(j, i)]);
        let gamma0 = Mat::from_vec(3, 1, vec![0.5, -1.0, 0.0]);
        let coef = Mat::from_vec(3, 1, vec![1.0, -2.0, 0.5]);
        let (w, g) = (w0.clone(), gamma0.clone());
        check_leaf_gradient(
            &f0,
            |t, f| {
                let w = t.leaf(w.clone());
                let g = t.leaf(g.clone());
                let v = le_logits(t, f, w, g)?;
                Ok(weighted(t, v, coef.clone()))
            },
            &Mat::from_fn(1, 8, |_, j| j as f64 * 0.1),
            1e-7,
        );
        check_leaf_gradient(
            &w0,
            |t, w| {
                let f = t.leaf(f0.clone());
                let g = t.leaf(gamma0.clone());
                let v = le_logits(t, f, w, g)?;
                Ok(weighted(t, v, coef.clone()))
            },
            &Mat::from_fn(3, 8, |i, j| ((i + 2 * j) % 3) as f64 - 1.0),
            1e-7,
        );
    }

    #[test]
    fn ecm_hand_example() {
        // r = 0.6 gives the ECM coordinate 0.75; Z with z₂₁ = 2 and γ = 1.
        let c = Mat::from_rows(&[&[1.0, 0.6], &[0.6, 1.0]]);
        let mut t = Tape::new();
        let x = t.leaf(c);
        let f = crate::layers::ops::phi(&mut t, MetricKind::Ecm, x, &crate::geometry::SolverConfig::layers()).unwrap();
        let f = compact(&mut t, MetricKind::Ecm, f);
        let z = t.leaf(Mat::from_vec(1, 1, vec![2.0]));
        let w = le_weights(&mut t, MetricKind::Ecm, 2, 1, z);
        let g = t.leaf(Mat::from_vec(1, 1, vec![1.0]));
        let v = le_logits(&mut t, f, w, g).unwrap();
        assert!((t.value(v).as_scalar() + 0.5).abs() < 1e-14);
    }
}
