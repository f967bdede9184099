//! Forward-pass timing of an `FC(n → 20)` layer followed by a 10-class MLR.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::correlation::{random_correlation_with, CorrelationMatrix};
use crate::error::{Error, Result};
use crate::geometry::{MetricKind, SolverConfig};
use crate::layers::{cor_mlr_logits, fc_outputs, FcParams, MlrParams};

pub const BENCH_HIDDEN: usize = 20;
pub const BENCH_CLASSES: usize = 10;

/// Inputs are `Cor(exp(s·S/√n))`, whose spectrum stays within about
/// `e^{±2s}` at every `n`.
pub const INPUT_SPREAD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub metric: MetricKind,
    pub n: usize,
    pub repeats: usize,
    pub mean_seconds: f64,
    pub std_seconds: f64,
}

/// One timed network: parameters and inputs are drawn once from `seed`.
pub struct BenchCase {
    fc: FcParams,
    mlr: MlrParams,
    inputs: Vec<CorrelationMatrix>,
    solvers: SolverConfig,
}

impl BenchCase {
    pub fn new(metric: MetricKind, n: usize, repeats: usize, seed: u64) -> Result<Self> {
        if n < 4 {
            return Err(Error::InvalidDimension(format!("bench dimension must be at least 4, got {n}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fc = FcParams::init(metric, n, BENCH_HIDDEN, 1, 1, &mut rng)?;
        let mlr = MlrParams::init(metric, BENCH_HIDDEN, 1, BENCH_CLASSES, &mut rng)?;
        let inputs = (0..repeats.max(1)).map(|_| random_correlation_with(n, INPUT_SPREAD / (n as f64).sqrt(), &mut rng)).collect::<Result<_>>()?;
        Ok(BenchCase { fc, mlr, inputs, solvers: SolverConfig::layers() })
    }

    pub fn forward(&self, i: usize) -> Result<Vec<f64>> {
        let hidden = fc_outputs(&self.inputs[i % self.inputs.len()..][..1], &self.fc, &self.solvers)?;
        cor_mlr_logits(&hidden, &self.mlr, &self.solvers)
    }
}

pub fn bench_metric(metric: MetricKind, n: usize, repeats: usize, seed: u64) -> Result<BenchResult> {
    if repeats == 0 {
        return Err(Error::Config("repeats must be positive".into()));
    }
    let case = BenchCase::new(metric, n, repeats, seed)?;
    case.forward(0)?;
    let mut times = Vec::with_capacity(repeats);
    for i in 0..repeats {
        let start = Instant::now();
        std::hint::black_box(case.forward(i)?);
        times.push(start.elapsed().as_secs_f64());
    }
    let mean = times.iter().sum::<f64>() / repeats as f64;
    let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / repeats as f64;
    Ok(BenchResult { metric, n, repeats, mean_seconds: mean, std_seconds: var.sqrt() })
}

/// Runs every metric at every dimension, interleaving metrics per dimension.
pub fn bench(dims: &[usize], metrics: &[MetricKind], repeats: usize, seed: u64) -> Result<Vec<BenchResult>> {
    let mut out = Vec::with_capacity(dims.len() * metrics.len());
    for &n in dims {
        for &m in metrics {
            out.push(bench_metric(m, n, repeats, seed)?);
        }
    }
    Ok(out)
}
