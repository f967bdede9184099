//! First-order optimizers over the four parameter blocks of a model.

use crate::linalg::Mat;
use crate::train::config::OptimizerKind;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone)]
pub enum Optimizer {
    Sgd { lr: f64, weight_decay: f64 },
    Adam { lr: f64, weight_decay: f64, step: i32, m: Vec<Mat>, v: Vec<Mat> },
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, weight_decay: f64) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd { lr, weight_decay },
            OptimizerKind::Adam => Optimizer::Adam { lr, weight_decay, step: 0, m: Vec::new(), v: Vec::new() },
        }
    }

    /// Applies one update. Weight decay adds `λ·θ` to each gradient.
    pub fn step(&mut self, params: &mut [&mut Mat], grads: &[Mat]) {
        assert_eq!(params.len(), grads.len());
        match self {
            Optimizer::Sgd { lr, weight_decay } => {
                for (p, g) in params.iter_mut().zip(grads) {
                    for (x, &d) in p.data_mut().iter_mut().zip(g.data()) {
                        *x -= *lr * (d + *weight_decay * *x);
                    }
                }
            }
            Optimizer::Adam { lr, weight_decay, step, m, v } => {
                if m.is_empty() {
                    *m = grads.iter().map(|g| Mat::zeros(g.rows(), g.cols())).collect();
                    *v = m.clone();
                }
                *step += 1;
                let c1 = 1.0 - ADAM_BETA1.powi(*step);
                let c2 = 1.0 - ADAM_BETA2.powi(*step);
                for (b, (p, g)) in params.iter_mut().zip(grads).enumerate() {
                    let (mb, vb) = (m[b].data_mut(), v[b].data_mut());
                    for (k, (x, &d)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                        let d = d + *weight_decay * *x;
                        mb[k] = ADAM_BETA1 * mb[k] + (1.0 - ADAM_BETA1) * d;
                        vb[k] = ADAM_BETA2 * vb[k] + (1.0 - ADAM_BETA2) * d * d;
                        *x -= *lr * (mb[k] / c1) / ((vb[k] / c2).sqrt() + ADAM_EPS);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_step() {
        let mut p = Mat::col(&[1.0, -2.0]);
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.1, 0.5);
        opt.step(&mut [&mut p], &[Mat::col(&[1.0, 1.0])]);
        assert!((p.data()[0] - (1.0 - 0.1 * 1.5)).abs() < 1e-15);
        assert!((p.data()[1] - (-2.0 - 0.1 * 0.0)).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut p = Mat::col(&[0.0, 3.0]);
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.01, 0.0);
        opt.step(&mut [&mut p], &[Mat::col(&[2.0, -0.5])]);
        assert!((p.data()[0] + 0.01).abs() < 1e-9);
        assert!((p.data()[1] - 3.01).abs() < 1e-9);
    }

    #[test]
    fn adam_minimizes_quadratic() {
        let mut p = Mat::col(&[5.0, -3.0]);
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.1, 0.0);
        for _ in 0..500 {
            let g = p.scale(2.0);
            opt.step(&mut [&mut p], &[g]);
        }
        assert!(p.max_abs() < 1e-2, "{:?}", p.data());
    }
}
