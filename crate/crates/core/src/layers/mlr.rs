//! Correlation MLR: one signed hyperplane margin per class. Log-Euclidean
//! metrics sum the margins of the channels in their prototype spaces; PHCM
//! β-concatenates every Cholesky row of every channel into one Poincaré point.

use crate::correlation::CorrelationMatrix;
use crate::error::{Error, Result};
use crate::geometry::{MetricKind, SolverConfig};
use crate::layers::hyperplane::{compact, le_logits};
use crate::layers::ops::{concat, phi};
use crate::layers::params::{MlrParams, ParamVars};
use crate::layers::poincare::{beta_concat, cor_to_ppb, part_dims, pb_logits};
use crate::layers::tape::{Tape, Var};

pub(crate) fn check_inputs(t: &Tape, inputs: &[Var], channels: usize, n: usize) -> Result<()> {
    if inputs.len() != channels {
        return Err(Error::ShapeMismatch(format!("expected {channels} channels, got {}", inputs.len())));
    }
    for &x in inputs {
        if t.value(x).shape() != (n, n) {
            return Err(Error::ShapeMismatch(format!("expected {n}×{n} inputs, got {:?}", t.value(x).shape())));
        }
    }
    Ok(())
}

/// Compact `φ` of every channel, side by side.
pub(crate) fn le_features(t: &mut Tape, metric: MetricKind, inputs: &[Var], cfg: &SolverConfig) -> Result<Var> {
    let feats = inputs
        .iter()
        .map(|&x| {
            let p = phi(t, metric, x, cfg)?;
            Ok(compact(t, metric, p))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(concat(t, &feats))
}

/// Single β-concatenation over channels and Cholesky rows, channel-major.
pub(crate) fn phcm_point(t: &mut Tape, inputs: &[Var], n: usize) -> Result<Var> {
    let parts = inputs.iter().map(|&x| cor_to_ppb(t, x)).collect::<Result<Vec<_>>>()?;
    let x = concat(t, &parts);
    let dims: Vec<usize> = (0..inputs.len()).flat_map(|_| part_dims(n)).collect();
    beta_concat(t, x, dims)
}

/// Margins of one input against every slot of `pv`, as a column vector.
pub(crate) fn slot_logits(
    t: &mut Tape,
    metric: MetricKind,
    n: usize,
    pv: &ParamVars,
    inputs: &[Var],
    cfg: &SolverConfig,
) -> Result<Var> {
    if metric == MetricKind::Phcm {
        let x = phcm_point(t, inputs, n)?;
        pb_logits(t, x, pv.z, pv.gamma)
    } else {
        let f = le_features(t, metric, inputs, cfg)?;
        let w = pv.w.ok_or_else(|| Error::Unsupported("parameters bound without prototype weights".into()))?;
        le_logits(t, f, w, pv.gamma)
    }
}

/// Class logits on the tape (column vector of length `classes`).
pub fn mlr_forward(t: &mut Tape, p: &MlrParams, pv: &ParamVars, inputs: &[Var], cfg: &SolverConfig) -> Result<Var> {
    check_inputs(t, inputs, p.channels, p.n)?;
    slot_logits(t, p.metric, p.n, pv, inputs, cfg)
}

/// Class logits of a multi-channel correlation input.
pub fn cor_mlr_logits(channels: &[CorrelationMatrix], p: &MlrParams, cfg: &SolverConfig) -> Result<Vec<f64>> {
    p.validate()?;
    let mut t = Tape::new();
    let pv = p.bind(&mut t);
    let inputs: Vec<Var> = channels.iter().map(|c| t.leaf(c.as_mat().clone())).collect();
    let v = mlr_forward(&mut t, p, &pv, &inputs, cfg)?;
    Ok(t.value(v).data().to_vec())
}

/// PHCM MLR; the same as `cor_mlr_logits` with a PHCM parameter set.
pub fn phcm_mlr(channels: &[CorrelationMatrix], p: &MlrParams) -> Result<Vec<f64>> {
    if p.metric != MetricKind::Phcm {
        return Err(Error::Config(format!("phcm_mlr called with {} parameters", p.metric)));
    }
    cor_mlr_logits(channels, p, &SolverConfig::layers())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlation::random_correlation;
    use crate::linalg::Mat;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_input_leaves_only_the_offset() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = SolverConfig::layers();
        for metric in MetricKind::ALL {
            let mut p = MlrParams::init(metric, 4, 2, 3, &mut rng).unwrap();
            p.gamma = Mat::from_vec(3, 1, vec![0.3, -0.7, 0.0]);
            let eye = vec![CorrelationMatrix::identity(4); 2];
            let v = cor_mlr_logits(&eye, &p, &cfg).unwrap();
            for k in 0..3 {
                let want = if metric == MetricKind::Phcm {
                    let zn = p.z.row(k).iter().map(|x| x * x).sum::<f64>().sqrt();
                    -4.0 * p.gamma[(k, 0)] * zn
                } else {
                    let mut sq = 0.0;
                    for ch in 0..2 {
                        let w = crate::layers::hyperplane::slot_weight(metric, 4, p.z_entries(k, ch)).unwrap();
                        sq += w.dot(&w);
                    }
                    -p.gamma[(k, 0)] * sq.sqrt()
                };
                assert!((v[k] - want).abs() < 1e-12, "{metric} class {k}: {} vs {want}", v[k]);
            }
        }
    }

    #[test]
    fn zero_normals_give_zero_logits() {
        let c = vec![random_correlation(5, 0.5, 3).unwrap()];
        for metric in MetricKind::ALL {
            let mut p = MlrParams::zeros(metric, 5, 1, 2).unwrap();
            p.gamma = Mat::from_vec(2, 1, vec![1.0, -2.0]);
            let v = cor_mlr_logits(&c, &p, &SolverConfig::layers()).unwrap();
            assert!(v.iter().all(|&x| x == 0.0), "{metric}: {v:?}");
        }
    }

    #[test]
    fn channel_count_is_checked() {
        let p = MlrParams::zeros(MetricKind::Ecm, 3, 2, 2).unwrap();
        let one = vec![CorrelationMatrix::identity(3)];
        assert!(matches!(cor_mlr_logits(&one, &p, &SolverConfig::layers()), Err(Error::ShapeMismatch(_))));
        assert!(phcm_mlr(&one, &p).is_err());
    }
}
