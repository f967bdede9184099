//! Mini-batch training and evaluation.

use std::time::Instant;

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::layers::{softmax_xent, Example, Model};
use crate::train::config::RunConfig;
use crate::train::data::Dataset;
use crate::train::optim::Optimizer;

const SHUFFLE_STREAM: u64 = 2;

/// One row of the metrics log. Epoch 0 describes the initialization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub acc: f64,
    /// Wall time since training started.
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

fn check_data(model: &Model, data: &Dataset) -> Result<()> {
    let arch = &model.arch;
    if data.n != arch.n_in || data.channels != arch.channels {
        return Err(Error::Config(format!(
            "data has {} channels of size {}, model expects {} of size {}",
            data.channels, data.n, arch.channels, arch.n_in
        )));
    }
    if let Some(&y) = data.labels.iter().find(|&&y| y >= arch.classes) {
        return Err(Error::Config(format!("label {y} out of range for {} classes", arch.classes)));
    }
    if data.is_empty() {
        return Err(Error::Config("dataset is empty".into()));
    }
    Ok(())
}

pub fn evaluate(model: &Model, data: &Dataset) -> Result<Evaluation> {
    check_data(model, data)?;
    let classes = model.arch.classes;
    let mut confusion = vec![vec![0usize; classes]; classes];
    let mut loss = 0.0;
    let mut correct = 0usize;
    for (x, &y) in data.samples.iter().zip(&data.labels) {
        let v = model.logits(x)?;
        loss += softmax_xent(&v, y)?.0;
        let pred = v.iter().enumerate().fold(0, |best, (i, &a)| if a > v[best] { i } else { best });
        confusion[y][pred] += 1;
        correct += usize::from(pred == y);
    }
    let count = data.len() as f64;
    Ok(Evaluation { loss: loss / count, accuracy: correct as f64 / count, confusion })
}

/// Trains a freshly initialized model, calling `on_epoch` after the
/// initialization and after every epoch with metrics measured on `data`.
pub fn train(
    cfg: &RunConfig,
    data: &Dataset,
    mut on_epoch: impl FnMut(&EpochLog) -> Result<()>,
) -> Result<(Model, Vec<EpochLog>)> {
    cfg.validate()?;
    let mut model = Model::init(cfg.architecture(), cfg.solvers(), cfg.seed)?;
    check_data(&model, data)?;
    let examples = data.examples();
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(SHUFFLE_STREAM);
    let mut opt = Optimizer::new(cfg.optimizer, cfg.lr, cfg.weight_decay);
    let start = Instant::now();
    let mut logs = Vec::with_capacity(cfg.epochs + 1);

    let wrap = |epoch: usize, batch: usize| move |e: Error| Error::Training { epoch, batch, source: Box::new(e) };
    let mut record = |epoch: usize, model: &Model, logs: &mut Vec<EpochLog>| -> Result<()> {
        let ev = evaluate(model, data).map_err(wrap(epoch, 0))?;
        let row = EpochLog { epoch, loss: ev.loss, acc: ev.accuracy, seconds: start.elapsed().as_secs_f64() };
        info!("epoch {epoch}: loss {:.6} acc {:.4}", row.loss, row.acc);
        on_epoch(&row)?;
        logs.push(row);
        Ok(())
    };

    record(0, &model, &mut logs)?;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<Example> = chunk.iter().map(|&i| examples[i]).collect();
            let (_, grads) = model.forward_backward(&batch).map_err(wrap(epoch, b + 1))?;
            if grads.iter().any(|g| !g.is_finite()) {
                return Err(wrap(epoch, b + 1)(Error::NonFinite("gradient".into())));
            }
            opt.step(&mut model.blocks_mut(), &grads);
        }
        record(epoch, &model, &mut logs)?;
    }
    Ok((model, logs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::MetricKind;
    use crate::train::data::{generate, DatagenConfig};

    fn setup(metric: MetricKind, epochs: usize) -> (RunConfig, Dataset) {
        let data = generate(&DatagenConfig { per_class: 10, dim: 5, ..DatagenConfig::default() }).unwrap();
        let cfg = RunConfig {
            conv_metric: metric,
            mlr_metric: metric,
            n_in: 5,
            m_hidden: 3,
            kernels: 1,
            epochs,
            batch_size: 10,
            lr: 0.05,
            ..RunConfig::default()
        };
        (cfg, data)
    }

    #[test]
    fn training_is_deterministic_and_logged() {
        let (cfg, data) = setup(MetricKind::Ecm, 3);
        let mut seen = Vec::new();
        let (a, logs) = train(&cfg, &data, |r| {
            seen.push(r.epoch);
            Ok(())
        })
        .unwrap();
        let (b, _) = train(&cfg, &data, |_| Ok(())).unwrap();
        assert_eq!(a, b);
        assert_eq!(seen, [0, 1, 2, 3]);
        let ev = evaluate(&a, &data).unwrap();
        assert_eq!(ev.accuracy, logs[3].acc);
        assert_eq!(ev.confusion.iter().flatten().sum::<usize>(), 30);
        assert!(logs[3].loss < logs[0].loss);
    }

    #[test]
    fn mismatched_data_is_a_config_error() {
        let (mut cfg, data) = setup(MetricKind::Olm, 1);
        cfg.n_in = 6;
        assert!(matches!(train(&cfg, &data, |_| Ok(())), Err(Error::Config(_))));
    }
}
