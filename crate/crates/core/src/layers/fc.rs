//! Correlation FC and convolution. The FC computes one margin per coordinate
//! slot of the output prototype space, assembles the prototype vector from
//! them and maps it back through `φ⁻¹`. PHCM replaces the margins by a
//! Poincaré FC over the β-concatenated input and β-splits the result.

use crate::correlation::{dim_lower, CorrelationMatrix};
use crate::error::{Error, Result};
use crate::geometry::{MetricKind, SolverConfig};
use crate::layers::hyperplane::assemble;
use crate::layers::mlr::{check_inputs, slot_logits};
use crate::layers::ops::{phi_inv, slice};
use crate::layers::params::{ConvParams, FcParams, ParamVars};
use crate::layers::poincare::{beta_split, part_dims, pb_fc_output, ppb_to_cor};
use crate::layers::tape::{Tape, Var};

/// One `m × m` output per kernel.
pub fn fc_forward(t: &mut Tape, p: &FcParams, pv: &ParamVars, inputs: &[Var], cfg: &SolverConfig) -> Result<Vec<Var>> {
    check_inputs(t, inputs, p.channels, p.n)?;
    let v = slot_logits(t, p.metric, p.n, pv, inputs, cfg)?;
    let per = p.slots_per_kernel();
    if p.metric == MetricKind::Phcm {
        let y = pb_fc_output(t, v);
        let dims: Vec<usize> = (0..p.kernels).flat_map(|_| part_dims(p.m)).collect();
        let parts = beta_split(t, y, dims)?;
        (0..p.kernels)
            .map(|k| {
                let s = slice(t, parts, k * per, per);
                ppb_to_cor(t, s, p.m)
            })
            .collect()
    } else {
        (0..p.kernels)
            .map(|k| {
                let s = slice(t, v, k * per, per);
                let proto = assemble(t, p.metric, p.m, s)?;
                phi_inv(t, p.metric, proto, cfg)
            })
            .collect()
    }
}

/// Shared FC kernels over every receptive field; outputs are ordered by
/// field, then kernel.
pub fn conv_forward(
    t: &mut Tape,
    p: &ConvParams,
    pv: &ParamVars,
    inputs: &[Var],
    cfg: &SolverConfig,
) -> Result<Vec<Var>> {
    let fields = p.fields(inputs.len())?;
    let mut out = Vec::with_capacity(fields * p.kernels());
    for f in 0..fields {
        let start = f * p.stride;
        out.extend(fc_forward(t, &p.fc, pv, &inputs[start..start + p.field_size], cfg)?);
    }
    Ok(out)
}

fn run<F>(channels: &[CorrelationMatrix], bind: impl FnOnce(&mut Tape) -> ParamVars, f: F) -> Result<Vec<CorrelationMatrix>>
where
    F: FnOnce(&mut Tape, &ParamVars, &[Var]) -> Result<Vec<Var>>,
{
    let mut t = Tape::new();
    let pv = bind(&mut t);
    let inputs: Vec<Var> = channels.iter().map(|c| t.leaf(c.as_mat().clone())).collect();
    let outs = f(&mut t, &pv, &inputs)?;
    Ok(outs.into_iter().map(|o| CorrelationMatrix::from_trusted(t.value(o).clone())).collect())
}

/// FC outputs for every kernel.
pub fn fc_outputs(channels: &[CorrelationMatrix], p: &FcParams, cfg: &SolverConfig) -> Result<Vec<CorrelationMatrix>> {
    p.validate()?;
    run(channels, |t| p.bind(t), |t, pv, x| fc_forward(t, p, pv, x, cfg))
}

/// Single-kernel correlation FC.
pub fn cor_fc(channels: &[CorrelationMatrix], p: &FcParams, cfg: &SolverConfig) -> Result<CorrelationMatrix> {
    if p.kernels != 1 {
        return Err(Error::Config(format!("cor_fc needs one kernel, got {}", p.kernels)));
    }
    Ok(fc_outputs(channels, p, cfg)?.remove(0))
}

/// PHCM FC with `p.kernels` outputs.
pub fn phcm_fc(channels: &[CorrelationMatrix], p: &FcParams) -> Result<Vec<CorrelationMatrix>> {
    if p.metric != MetricKind::Phcm {
        return Err(Error::Config(format!("phcm_fc called with {} parameters", p.metric)));
    }
    fc_outputs(channels, p, &SolverConfig::layers())
}

pub fn cor_conv(channels: &[CorrelationMatrix], p: &ConvParams, cfg: &SolverConfig) -> Result<Vec<CorrelationMatrix>> {
    p.fc.validate()?;
    run(channels, |t| p.fc.bind(t), |t, pv, x| conv_forward(t, p, pv, x, cfg))
}

/// The FC margins `v_k(X)`, kernel after kernel.
pub fn fc_logits(channels: &[CorrelationMatrix], p: &FcParams, cfg: &SolverConfig) -> Result<Vec<f64>> {
    p.validate()?;
    let mut t = Tape::new();
    let pv = p.bind(&mut t);
    let inputs: Vec<Var> = channels.iter().map(|c| t.leaf(c.as_mat().clone())).collect();
    check_inputs(&t, &inputs, p.channels, p.n)?;
    let v = slot_logits(&mut t, p.metric, p.n, &pv, &inputs, cfg)?;
    debug_assert_eq!(t.value(v).rows(), p.kernels * dim_lower(p.m));
    Ok(t.value(v).data().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlation::{random_correlation, validate};
    use crate::geometry::maps::phi_mat;
    use crate::layers::hyperplane::prototype_coords;
    use crate::linalg::Mat;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_parameters_give_identity() {
        let x = vec![random_correlation(4, 0.6, 1).unwrap(), random_correlation(4, 0.6, 2).unwrap()];
        for metric in MetricKind::ALL {
            let p = FcParams::zeros(metric, 4, 3, 2, 2).unwrap();
            for y in fc_outputs(&x, &p, &SolverConfig::layers()).unwrap() {
                assert!(y.as_mat().max_abs_diff(&Mat::identity(3)) < 1e-14, "{metric}");
            }
        }
    }

    #[test]
    fn outputs_are_correlations_and_satisfy_the_defining_equation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let geo = SolverConfig::geometry();
        for metric in MetricKind::ALL {
            for seed in 0..5 {
                let p = FcParams::init(metric, 5, 4, 2, 1, &mut rng).unwrap();
                let x = vec![random_correlation(5, 0.6, seed).unwrap(), random_correlation(5, 0.6, seed + 50).unwrap()];
                let y = cor_fc(&x, &p, &geo).unwrap();
                validate(y.as_mat()).unwrap();
                if metric.is_log_euclidean() {
                    let v = fc_logits(&x, &p, &geo).unwrap();
                    let back = prototype_coords(metric, &phi_mat(metric, y.as_mat(), &geo).unwrap()).unwrap();
                    let err = v.iter().zip(&back).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                    assert!(err < 1e-8, "{metric}: {err}");
                }
            }
        }
    }

    #[test]
    fn conv_with_global_field_is_the_fc() {
        let x: Vec<_> = (0..3).map(|s| random_correlation(4, 0.5, s).unwrap()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cfg = SolverConfig::layers();
        for metric in [MetricKind::Olm, MetricKind::Phcm] {
            let fc = FcParams::init(metric, 4, 3, 3, 2, &mut rng).unwrap();
            let direct = fc_outputs(&x, &fc, &cfg).unwrap();
            let conv = ConvParams::new(fc, 1).unwrap();
            let out = cor_conv(&x, &conv, &cfg).unwrap();
            assert_eq!(out, direct);
        }
        let fc = FcParams::init(MetricKind::Ecm, 4, 3, 2, 2, &mut rng).unwrap();
        let conv = ConvParams::new(fc.clone(), 1).unwrap();
        let out = cor_conv(&x, &conv, &cfg).unwrap();
        assert_eq!(out.len(), 4);
        assert_eq!(out[2..], fc_outputs(&x[1..], &fc, &cfg).unwrap()[..]);
    }
}
