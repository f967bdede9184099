//! Tape nodes for the PHCM pipeline: correlation ↔ poly-Poincaré, β-concat
//! and β-split, Poincaré MLR logits and the Poincaré FC output map.

use crate::correlation::cor_mat;
use crate::error::{Error, Result};
use crate::hyperbolic::{
    beta_concat_flat, beta_concat_vjp, beta_split_flat, beta_split_vjp, chol_rows_to_ppb, cor_to_ppb_vjp,
    pb_from_logits, pb_from_logits_vjp, pb_mlr_logit, pb_mlr_logit_grad, ppb_to_cor_vjp, ppb_to_factor,
};
use crate::layers::tape::{Tape, Var};
use crate::linalg::{chol, Mat};

/// Part dimensions `1, …, n−1` of one correlation matrix.
pub fn part_dims(n: usize) -> Vec<usize> {
    (1..n).collect()
}

fn split_parts(flat: &[f64], n: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(n - 1);
    let mut off = 0;
    for d in 1..n {
        out.push(flat[off..off + d].to_vec());
        off += d;
    }
    out
}

/// `C ↦ (ψ(L₂), …, ψ(L_n))` as a row vector of length `n(n−1)/2`.
pub fn cor_to_ppb(t: &mut Tape, c: Var) -> Result<Var> {
    let l = chol(t.value(c))?;
    let flat: Vec<f64> = chol_rows_to_ppb(&l).into_iter().flatten().collect();
    let n = l.rows();
    Ok(t.push(
        Mat::from_vec(1, flat.len(), flat),
        vec![c],
        Box::new(move |g| Ok(vec![cor_to_ppb_vjp(&l, &split_parts(g.data(), n))?])),
    ))
}

/// Inverse of `cor_to_ppb` for an `m × m` output.
pub fn ppb_to_cor(t: &mut Tape, x: Var, m: usize) -> Result<Var> {
    let parts = split_parts(t.value(x).data(), m);
    let (_, s) = ppb_to_factor(&parts);
    let c = cor_mat(&s)?;
    Ok(t.push(
        c,
        vec![x],
        Box::new(move |g| {
            let flat: Vec<f64> = ppb_to_cor_vjp(&parts, g)?.into_iter().flatten().collect();
            Ok(vec![Mat::from_vec(1, flat.len(), flat)])
        }),
    ))
}

pub fn beta_concat(t: &mut Tape, x: Var, dims: Vec<usize>) -> Result<Var> {
    let xv = t.value(x).data().to_vec();
    let y = beta_concat_flat(&xv, &dims)?;
    Ok(t.push(
        Mat::from_vec(1, y.len(), y),
        vec![x],
        Box::new(move |g| Ok(vec![Mat::from_vec(1, xv.len(), beta_concat_vjp(&xv, &dims, g.data()))])),
    ))
}

pub fn beta_split(t: &mut Tape, y: Var, dims: Vec<usize>) -> Result<Var> {
    let yv = t.value(y).data().to_vec();
    let x = beta_split_flat(&yv, &dims)?;
    Ok(t.push(
        Mat::from_vec(1, x.len(), x),
        vec![y],
        Box::new(move |g| Ok(vec![Mat::from_vec(1, yv.len(), beta_split_vjp(&yv, &dims, g.data()))])),
    ))
}

/// Poincaré MLR logits of the point `x` (row vector) against the rows of
/// `z`, one `γ` per row; returns a column vector.
pub fn pb_logits(t: &mut Tape, x: Var, z: Var, gamma: Var) -> Result<Var> {
    let xv = t.value(x).data().to_vec();
    let zm = t.shared(z);
    let gm = t.shared(gamma);
    if zm.cols() != xv.len() || gm.rows() != zm.rows() {
        return Err(Error::ShapeMismatch(format!(
            "Poincaré weights {:?} and gamma {:?} for a point of dimension {}",
            zm.shape(),
            gm.shape(),
            xv.len()
        )));
    }
    let slots = zm.rows();
    let v: Vec<f64> = (0..slots).map(|s| pb_mlr_logit(&xv, zm.row(s), gm[(s, 0)])).collect();
    Ok(t.push(
        Mat::from_vec(slots, 1, v),
        vec![x, z, gamma],
        Box::new(move |g| {
            let mut gx = vec![0.0; xv.len()];
            let mut gz = Mat::zeros(zm.rows(), zm.cols());
            let mut gg = Mat::zeros(slots, 1);
            for s in 0..slots {
                let a = g[(s, 0)];
                if a == 0.0 {
                    continue;
                }
                let (dx, dz, dg) = pb_mlr_logit_grad(&xv, zm.row(s), gm[(s, 0)]);
                for (o, d) in gx.iter_mut().zip(dx) {
                    *o += a * d;
                }
                for (j, d) in dz.into_iter().enumerate() {
                    gz[(s, j)] = a * d;
                }
                gg[(s, 0)] = a * dg;
            }
            Ok(vec![Mat::from_vec(1, gx.len(), gx), gz, gg])
        }),
    ))
}

/// Poincaré FC output map on a column of logits; returns a row vector.
pub fn pb_fc_output(t: &mut Tape, v: Var) -> Var {
    let vv = t.value(v).data().to_vec();
    let y = pb_from_logits(&vv);
    let (r, c) = t.value(v).shape();
    t.push(
        Mat::from_vec(1, y.len(), y),
        vec![v],
        Box::new(move |g| Ok(vec![Mat::from_vec(r, c, pb_from_logits_vjp(&vv, g.data()))])),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlation::random_correlation;
    use crate::layers::ops::testing::{check_leaf_gradient, weighted};
    use crate::linalg::offmat;
    use crate::linalg::testutil::{random_mat, random_symmetric};

    #[test]
    fn round_trip_node_gradients() {
        let c = random_correlation(4, 0.5, 1).unwrap();
        let dir = offmat(&random_symmetric(4, 2)).scale(0.3);
        let w = random_symmetric(4, 3);
        check_leaf_gradient(
            c.as_mat(),
            |t, x| {
                let p = cor_to_ppb(t, x)?;
                let b = beta_concat(t, p, part_dims(4))?;
                let s = beta_split(t, b, part_dims(4))?;
                let y = ppb_to_cor(t, s, 4)?;
                Ok(weighted(t, y, w.clone()))
            },
            &dir,
            1e-6,
        );
    }

    #[test]
    fn logits_and_fc_gradients() {
        let c = random_correlation(4, 0.5, 4).unwrap();
        let z0 = random_mat(6, 5).scale(0.5);
        let z = Mat::from_fn(3, 6, |i, j| z0[(i, j)]);
        let w = Mat::from_fn(1, 3, |_, j| j as f64 - 0.7);
        let build = |t: &mut Tape, x: Var, zv: Var| -> Result<Var> {
            let p = cor_to_ppb(t, x)?;
            let b = beta_concat(t, p, part_dims(4))?;
            let gamma = t.leaf(Mat::from_vec(3, 1, vec![0.1, -0.2, 0.3]));
            let v = pb_logits(t, b, zv, gamma)?;
            let y = pb_fc_output(t, v);
            Ok(weighted(t, y, w.clone()))
        };
        let zc = z.clone();
        check_leaf_gradient(
            c.as_mat(),
            |t, x| {
                let zv = t.leaf(zc.clone());
                build(t, x, zv)
            },
            &offmat(&random_symmetric(4, 6)).scale(0.3),
            1e-6,
        );
        let cm = c.as_mat().clone();
        check_leaf_gradient(
            &z,
            |t, zv| {
                let x = t.leaf(cm.clone());
                build(t, x, zv)
            },
            &Mat::from_fn(3, 6, |i, j| ((i * 7 + j) % 5) as f64 - 2.0),
            1e-6,
        );
    }

    #[test]
    fn identity_maps_to_origin() {
        let mut t = Tape::new();
        let x = t.leaf(Mat::identity(5));
        let p = cor_to_ppb(&mut t, x).unwrap();
        assert!(t.value(p).data().iter().all(|&v| v == 0.0));
        let y = ppb_to_cor(&mut t, p, 5).unwrap();
        assert_eq!(t.value(y), &Mat::identity(5));
    }
}
