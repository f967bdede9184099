//! Central finite-difference check of the model gradient, block by block.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::correlation::random_correlation_with;
use crate::error::Result;
use crate::layers::{Example, Model, BLOCK_NAMES};
use crate::linalg::Mat;
use crate::train::config::RunConfig;

pub const FD_STEP: f64 = 1e-6;
pub const FD_TOLERANCE: f64 = 1e-4;

/// Samples in the probe batch.
const PROBE_SIZE: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct BlockError {
    pub name: &'static str,
    pub params: usize,
    /// `max|analytic − numeric| / max(max|numeric|, 1e−8)`.
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub loss: f64,
    pub blocks: Vec<BlockError>,
}

impl GradcheckReport {
    pub fn max_error(&self) -> f64 {
        self.blocks.iter().map(|b| b.rel_error).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.blocks.iter().all(|b| b.rel_error <= FD_TOLERANCE)
    }
}

pub fn relative_error(analytic: &Mat, numeric: &Mat) -> f64 {
    analytic.max_abs_diff(numeric) / numeric.max_abs().max(1e-8)
}

/// Checks `model` on `batch` with central differences of step `h`.
pub fn gradcheck_model(model: &Model, batch: &[Example], h: f64) -> Result<GradcheckReport> {
    let (loss, grads) = model.forward_backward(batch)?;
    let mut blocks = Vec::with_capacity(grads.len());
    let mut probe = model.clone();
    for (b, grad) in grads.iter().enumerate() {
        let mut numeric = Mat::zeros(grad.rows(), grad.cols());
        for k in 0..numeric.data().len() {
            let orig = model.blocks()[b].data()[k];
            probe.blocks_mut()[b].data_mut()[k] = orig + h;
            let up = probe.loss(batch)?;
            probe.blocks_mut()[b].data_mut()[k] = orig - h;
            let down = probe.loss(batch)?;
            probe.blocks_mut()[b].data_mut()[k] = orig;
            numeric.data_mut()[k] = (up - down) / (2.0 * h);
        }
        blocks.push(BlockError { name: BLOCK_NAMES[b], params: numeric.data().len(), rel_error: relative_error(grad, &numeric) });
    }
    Ok(GradcheckReport { loss, blocks })
}

/// Builds the model of `cfg` from `seed`, gives every γ a small random value
/// so the offset path is exercised, and checks it on a random probe batch.
pub fn gradcheck(cfg: &RunConfig, seed: u64) -> Result<GradcheckReport> {
    cfg.validate()?;
    let mut model = Model::init(cfg.architecture(), cfg.solvers(), seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    for g in model.conv.fc.gamma.data_mut().iter_mut().chain(model.mlr.gamma.data_mut()) {
        *g = rng.random_range(-0.2..0.2);
    }
    let samples = (0..PROBE_SIZE)
        .map(|_| {
            (0..cfg.channels)
                .map(|_| Ok(random_correlation_with(cfg.n_in, 0.5, &mut rng)?.into_mat()))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let batch: Vec<Example> = samples.iter().enumerate().map(|(i, x)| (x.as_slice(), i % cfg.classes)).collect();
    gradcheck_model(&model, &batch, FD_STEP)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsolvers::DstarMode;
    use crate::geometry::MetricKind;
    use crate::layers::softmax;

    fn small(conv: MetricKind, mlr: MetricKind) -> RunConfig {
        RunConfig { conv_metric: conv, mlr_metric: mlr, n_in: 5, kernels: 1, ..RunConfig::default() }
    }

    #[test]
    fn lsm_full_mode_passes() {
        let cfg = RunConfig { dstar_mode: DstarMode::Full, ..small(MetricKind::Lsm, MetricKind::Lsm) };
        let report = gradcheck(&cfg, 1).unwrap();
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn mixed_pair_passes() {
        let report = gradcheck(&small(MetricKind::Phcm, MetricKind::Ecm), 2).unwrap();
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn zero_model_gamma_gradient_matches_hand_chain_rule() {
        // At z = 0 every logit is −γ_k‖w_k‖ = 0 with ‖w_k‖ = 0, so the γ
        // gradient is the softmax residual times −‖w_k‖ = 0.
        let cfg = small(MetricKind::Olm, MetricKind::Olm);
        let model = Model::zeros(cfg.architecture(), cfg.solvers()).unwrap();
        let x: Vec<Mat> = (0..2).map(|c| crate::correlation::random_correlation(5, 0.5, c).unwrap().into_mat()).collect();
        let (_, grads) = model.forward_backward(&[(&x, 1)]).unwrap();
        let residual = softmax(&model.logits(&x).unwrap());
        assert!(residual.iter().all(|&p| (p - 1.0 / 3.0).abs() < 1e-15));
        assert_eq!(grads[3].max_abs(), 0.0);
    }
}
