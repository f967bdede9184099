//! Tape nodes shared by the layers. Each node stores what its backward pass
//! needs and nothing else.

use crate::correlation::{cor_backward, cor_mat};
use crate::error::{Error, Result};
use crate::geometry::maps::{phi_forward, phi_inv_forward};
use crate::geometry::{MetricKind, SolverConfig};
use crate::layers::tape::{Tape, Var};
use crate::linalg::{MatFn, Mat, SymFunAt};

/// Flattens the values of `parts` into one row vector.
pub fn concat(t: &mut Tape, parts: &[Var]) -> Var {
    let shapes: Vec<(usize, usize)> = parts.iter().map(|&p| t.value(p).shape()).collect();
    let data: Vec<f64> = parts.iter().flat_map(|&p| t.value(p).data().iter().copied()).collect();
    let len = data.len();
    t.push(
        Mat::from_vec(1, len, data),
        parts.to_vec(),
        Box::new(move |g| {
            let mut off = 0;
            Ok(shapes
                .iter()
                .map(|&(r, c)| {
                    let piece = Mat::from_vec(r, c, g.data()[off..off + r * c].to_vec());
                    off += r * c;
                    piece
                })
                .collect())
        }),
    )
}

/// Entries `start..start + len` of the row-major data of `v`, as a row vector.
pub fn slice(t: &mut Tape, v: Var, start: usize, len: usize) -> Var {
    let (r, c) = t.value(v).shape();
    let data = t.value(v).data()[start..start + len].to_vec();
    t.push(
        Mat::from_vec(1, len, data),
        vec![v],
        Box::new(move |g| {
            let mut out = Mat::zeros(r, c);
            out.data_mut()[start..start + len].copy_from_slice(g.data());
            Ok(vec![out])
        }),
    )
}

/// Same data with a new shape.
pub fn reshape(t: &mut Tape, v: Var, rows: usize, cols: usize) -> Var {
    let (r, c) = t.value(v).shape();
    let data = t.value(v).data().to_vec();
    t.push(
        Mat::from_vec(rows, cols, data),
        vec![v],
        Box::new(move |g| Ok(vec![Mat::from_vec(r, c, g.data().to_vec())])),
    )
}

/// Mean of same-shaped nodes.
pub fn mean(t: &mut Tape, vars: &[Var]) -> Result<Var> {
    let Some(&first) = vars.first() else {
        return Err(Error::ShapeMismatch("mean of an empty list".into()));
    };
    let k = vars.len() as f64;
    let mut acc = t.value(first).clone();
    for &v in &vars[1..] {
        acc += t.value(v);
    }
    let count = vars.len();
    Ok(t.push(acc.scale(1.0 / k), vars.to_vec(), Box::new(move |g| Ok(vec![g.scale(1.0 / k); count]))))
}

/// `φ(X)` for a Log-Euclidean metric.
pub fn phi(t: &mut Tape, metric: MetricKind, x: Var, cfg: &SolverConfig) -> Result<Var> {
    let (value, cache) = phi_forward(metric, t.value(x), cfg)?;
    Ok(t.push(value, vec![x], Box::new(move |g| Ok(vec![cache.backward(g)?]))))
}

/// `φ⁻¹(V)` for a Log-Euclidean metric.
pub fn phi_inv(t: &mut Tape, metric: MetricKind, v: Var, cfg: &SolverConfig) -> Result<Var> {
    let (value, cache) = phi_inv_forward(metric, t.value(v), cfg)?;
    Ok(t.push(value, vec![v], Box::new(move |g| Ok(vec![cache.backward(g)?]))))
}

/// `Σ ↦ Σᵖ` on SPD matrices.
pub fn matrix_power(t: &mut Tape, sigma: Var, p: f64) -> Result<Var> {
    let at = SymFunAt::new(MatFn::Power(p), t.value(sigma))?;
    let value = at.value.clone();
    Ok(t.push(value, vec![sigma], Box::new(move |g| Ok(vec![at.diff(&g.symmetrize())]))))
}

/// `Σ ↦ Cor(Σ)`.
pub fn cor(t: &mut Tape, sigma: Var) -> Result<Var> {
    let s = t.value(sigma).clone();
    let c = cor_mat(&s)?;
    let cc = c.clone();
    Ok(t.push(c, vec![sigma], Box::new(move |g| Ok(vec![cor_backward(&s, &cc, g)]))))
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;

    /// Central-difference check of the gradient of `loss` w.r.t. one leaf.
    pub fn check_leaf_gradient(
        x0: &Mat,
        build: impl Fn(&mut Tape, Var) -> Result<Var>,
        dir: &Mat,
        tol: f64,
    ) {
        let mut t = Tape::new();
        let x = t.leaf(x0.clone());
        let out = build(&mut t, x).unwrap();
        let g = t.backward(out).unwrap();
        let an = g.get_or_zeros(&t, x).dot(dir);
        let eval = |s: f64| {
            let mut t = Tape::new();
            let x = t.leaf(x0 + &dir.scale(s));
            let out = build(&mut t, x).unwrap();
            t.value(out).as_scalar()
        };
        let h = 1e-6;
        let fd = (eval(h) - eval(-h)) / (2.0 * h);
        assert!((fd - an).abs() <= tol * fd.abs().max(1.0), "fd={fd} an={an}");
    }

    /// Scalar `⟨W, out⟩` for a fixed weight matrix.
    pub fn weighted(t: &mut Tape, v: Var, w: Mat) -> Var {
        let val = t.value(v).dot(&w);
        t.push(Mat::scalar(val), vec![v], Box::new(move |g| Ok(vec![w.scale(g.as_scalar())])))
    }
}
