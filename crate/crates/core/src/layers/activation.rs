//! Activations: a matrix power on SPD inputs, and ReLU applied to prototype
//! coordinates at the identity (`Exp_I ∘ ReLU ∘ Log_I`).

use std::fmt;
use std::str::FromStr;

use crate::correlation::CorrelationMatrix;
use crate::error::{Error, Result};
use crate::geometry::{MetricKind, SolverConfig};
use crate::hyperbolic::{pb_exp0, pb_exp0_vjp, pb_log0, pb_log0_vjp};
use crate::layers::hyperplane::{assemble, coords};
use crate::layers::ops::{matrix_power, phi, phi_inv};
use crate::layers::poincare::{cor_to_ppb, ppb_to_cor};
use crate::layers::tape::{Tape, Var};
use crate::linalg::{MatFn, Mat, sym_fun};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    None,
    TangentRelu,
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::None => "none",
            Activation::TangentRelu => "tangent_relu",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Activation::None),
            "tangent_relu" => Ok(Activation::TangentRelu),
            _ => Err(Error::Config(format!("unknown activation '{s}'"))),
        }
    }
}

fn relu(t: &mut Tape, v: Var) -> Var {
    let x = t.value(v).clone();
    let y = x.map(|a| a.max(0.0));
    t.push(y, vec![v], Box::new(move |g| Ok(vec![Mat::from_fn(g.rows(), g.cols(), |i, j| if x[(i, j)] > 0.0 { g[(i, j)] } else { 0.0 })])))
}

/// `Exp₀ ∘ ReLU ∘ Log₀` on every Poincaré part. ReLU commutes with the
/// positive β scalings, so this equals the map on the β-concatenated tangent.
fn ppb_relu(t: &mut Tape, x: Var, n: usize) -> Var {
    let xv = t.value(x).data().to_vec();
    let mut out = Vec::with_capacity(xv.len());
    let mut off = 0;
    for d in 1..n {
        let u: Vec<f64> = pb_log0(&xv[off..off + d]).into_iter().map(|a| a.max(0.0)).collect();
        out.extend(pb_exp0(&u));
        off += d;
    }
    t.push(
        Mat::from_vec(1, out.len(), out),
        vec![x],
        Box::new(move |g| {
            let mut gx = Vec::with_capacity(xv.len());
            let mut off = 0;
            for d in 1..n {
                let part = &xv[off..off + d];
                let u = pb_log0(part);
                let up: Vec<f64> = u.iter().map(|a| a.max(0.0)).collect();
                let gu: Vec<f64> = pb_exp0_vjp(&up, &g.data()[off..off + d])
                    .into_iter()
                    .zip(&u)
                    .map(|(a, &ui)| if ui > 0.0 { a } else { 0.0 })
                    .collect();
                gx.extend(pb_log0_vjp(part, &gu));
                off += d;
            }
            Ok(vec![Mat::from_vec(1, gx.len(), gx)])
        }),
    )
}

pub fn tangent_relu_node(t: &mut Tape, metric: MetricKind, x: Var, cfg: &SolverConfig) -> Result<Var> {
    let n = t.value(x).rows();
    if metric == MetricKind::Phcm {
        let p = cor_to_ppb(t, x)?;
        let r = ppb_relu(t, p, n);
        ppb_to_cor(t, r, n)
    } else {
        let p = phi(t, metric, x, cfg)?;
        let v = coords(t, metric, p)?;
        let r = relu(t, v);
        let q = assemble(t, metric, n, r)?;
        phi_inv(t, metric, q, cfg)
    }
}

/// Activation applied to one channel on the tape.
pub fn activation_node(t: &mut Tape, act: Activation, metric: MetricKind, x: Var, cfg: &SolverConfig) -> Result<Var> {
    match act {
        Activation::None => Ok(x),
        Activation::TangentRelu => tangent_relu_node(t, metric, x, cfg),
    }
}

pub fn tangent_relu(c: &CorrelationMatrix, metric: MetricKind, cfg: &SolverConfig) -> Result<CorrelationMatrix> {
    let mut t = Tape::new();
    let x = t.leaf(c.as_mat().clone());
    let y = tangent_relu_node(&mut t, metric, x, cfg)?;
    Ok(CorrelationMatrix::from_trusted(t.value(y).clone()))
}

/// `Σᵖ` of an SPD matrix.
pub fn power_activation(sigma: &Mat, p: f64) -> Result<Mat> {
    if p == 1.0 {
        return Ok(sigma.clone());
    }
    sym_fun(MatFn::Power(p), sigma)
}

/// `Cor(Xᵖ)` on the tape; the identity when `p = 1`.
pub fn power_node(t: &mut Tape, x: Var, p: f64) -> Result<Var> {
    if p == 1.0 {
        return Ok(x);
    }
    let s = matrix_power(t, x, p)?;
    crate::layers::ops::cor(t, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlation::{random_correlation, validate};
    use crate::geometry::maps::{phi_inv_mat, phi_mat};
    use crate::layers::hyperplane::{assemble_prototype, prototype_coords};
    use crate::layers::ops::testing::{check_leaf_gradient, weighted};
    use crate::linalg::offmat;
    use crate::linalg::testutil::random_symmetric;

    #[test]
    fn identity_cases() {
        let cfg = SolverConfig::layers();
        for metric in MetricKind::ALL {
            let y = tangent_relu(&CorrelationMatrix::identity(4), metric, &cfg).unwrap();
            assert!(y.as_mat().max_abs_diff(&Mat::identity(4)) < 1e-14, "{metric}");
        }
        let geo = SolverConfig::geometry();
        for metric in MetricKind::LOG_EUCLIDEAN {
            let v: Vec<f64> = (0..6).map(|k| 0.1 + 0.05 * k as f64).collect();
            let c = CorrelationMatrix::new(phi_inv_mat(metric, &assemble_prototype(metric, 4, &v).unwrap(), &geo).unwrap()).unwrap();
            let y = tangent_relu(&c, metric, &geo).unwrap();
            assert!(y.as_mat().max_abs_diff(c.as_mat()) < 1e-10, "{metric}");
        }
        let s = Mat::from_rows(&[&[2.0, 0.3], &[0.3, 1.0]]);
        assert_eq!(power_activation(&s, 1.0).unwrap(), s);
        assert!(power_activation(&s, -1.0).unwrap().max_abs_diff(&s.inverse().unwrap()) < 1e-10);
    }

    #[test]
    fn output_is_valid_and_nonnegative_in_coordinates() {
        let geo = SolverConfig::geometry();
        for metric in MetricKind::ALL {
            for seed in 0..5 {
                let c = random_correlation(5, 0.7, seed).unwrap();
                let y = tangent_relu(&c, metric, &geo).unwrap();
                validate(y.as_mat()).unwrap();
                if metric.is_log_euclidean() {
                    let v = prototype_coords(metric, &phi_mat(metric, y.as_mat(), &geo).unwrap()).unwrap();
                    assert!(v.iter().all(|&a| a >= -1e-9), "{metric}: {v:?}");
                }
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let cfg = SolverConfig::layers();
        let c = random_correlation(4, 0.6, 9).unwrap();
        let dir = offmat(&random_symmetric(4, 10)).scale(0.2);
        let w = random_symmetric(4, 11);
        for metric in MetricKind::ALL {
            check_leaf_gradient(
                c.as_mat(),
                |t, x| {
                    let y = tangent_relu_node(t, metric, x, &cfg)?;
                    Ok(weighted(t, y, w.clone()))
                },
                &dir,
                1e-6,
            );
        }
    }
}
