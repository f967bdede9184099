//! Correlation network: optional matrix power on the inputs, one correlation
//! convolution, an optional tangent activation, and a correlation MLR.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{MetricKind, SolverConfig};
use crate::layers::activation::{activation_node, power_node, Activation};
use crate::layers::fc::conv_forward;
use crate::layers::loss::{softmax_xent_node};
use crate::layers::mlr::mlr_forward;
use crate::layers::ops::mean;
use crate::layers::params::{ConvParams, FcParams, MlrParams, ParamVars};
use crate::layers::tape::{Tape, Var};
use crate::linalg::Mat;

/// Names of the parameter blocks, in the order used by `blocks`.
pub const BLOCK_NAMES: [&str; 4] = ["conv.z", "conv.gamma", "mlr.z", "mlr.gamma"];

#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    pub conv_metric: MetricKind,
    pub mlr_metric: MetricKind,
    pub n_in: usize,
    pub channels: usize,
    pub field_size: usize,
    pub stride: usize,
    pub kernels: usize,
    pub m_hidden: usize,
    pub classes: usize,
    pub power: f64,
    pub activation: Activation,
}

impl Architecture {
    /// Channels entering the MLR.
    pub fn hidden_channels(&self) -> Result<usize> {
        self.validate()?;
        Ok(((self.channels - self.field_size) / self.stride + 1) * self.kernels)
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_in", self.n_in, 2),
            ("channels", self.channels, 1),
            ("field_size", self.field_size, 1),
            ("stride", self.stride, 1),
            ("kernels", self.kernels, 1),
            ("m_hidden", self.m_hidden, 2),
            ("classes", self.classes, 2),
        ];
        for (name, v, min) in counts {
            if v < min {
                return Err(Error::Config(format!("{name} = {v}, need at least {min}")));
            }
        }
        if self.field_size > self.channels || (self.channels - self.field_size) % self.stride != 0 {
            return Err(Error::Config(format!(
                "{} channels cannot be tiled by fields of {} with stride {}",
                self.channels, self.field_size, self.stride
            )));
        }
        if !self.power.is_finite() || self.power == 0.0 {
            return Err(Error::Config(format!("power must be finite and nonzero, got {}", self.power)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub arch: Architecture,
    pub conv: ConvParams,
    pub mlr: MlrParams,
    pub solvers: SolverConfig,
}

/// Tape handles of the model parameters.
#[derive(Debug, Clone, Copy)]
pub struct ModelVars {
    pub conv: ParamVars,
    pub mlr: ParamVars,
}

/// One labelled multi-channel input.
pub type Example<'a> = (&'a [Mat], usize);

impl Model {
    pub fn zeros(arch: Architecture, solvers: SolverConfig) -> Result<Self> {
        let hidden = arch.hidden_channels()?;
        let fc = FcParams::zeros(arch.conv_metric, arch.n_in, arch.m_hidden, arch.field_size, arch.kernels)?;
        let conv = ConvParams::new(fc, arch.stride)?;
        let mlr = MlrParams::zeros(arch.mlr_metric, arch.m_hidden, hidden, arch.classes)?;
        Ok(Model { arch, conv, mlr, solvers })
    }

    pub fn init(arch: Architecture, solvers: SolverConfig, seed: u64) -> Result<Self> {
        let hidden = arch.hidden_channels()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fc = FcParams::init(arch.conv_metric, arch.n_in, arch.m_hidden, arch.field_size, arch.kernels, &mut rng)?;
        let conv = ConvParams::new(fc, arch.stride)?;
        let mlr = MlrParams::init(arch.mlr_metric, arch.m_hidden, hidden, arch.classes, &mut rng)?;
        Ok(Model { arch, conv, mlr, solvers })
    }

    pub fn blocks(&self) -> [&Mat; 4] {
        [&self.conv.fc.z, &self.conv.fc.gamma, &self.mlr.z, &self.mlr.gamma]
    }

    pub fn blocks_mut(&mut self) -> [&mut Mat; 4] {
        [&mut self.conv.fc.z, &mut self.conv.fc.gamma, &mut self.mlr.z, &mut self.mlr.gamma]
    }

    pub fn param_count(&self) -> usize {
        self.conv.fc.param_count() + self.mlr.param_count()
    }

    pub fn bind(&self, t: &mut Tape) -> ModelVars {
        ModelVars { conv: self.conv.fc.bind(t), mlr: self.mlr.bind(t) }
    }

    /// Logits of one example, as a column vector on the tape.
    pub fn forward(&self, t: &mut Tape, vars: &ModelVars, sample: &[Mat]) -> Result<Var> {
        if sample.len() != self.arch.channels {
            return Err(Error::ShapeMismatch(format!("expected {} channels, got {}", self.arch.channels, sample.len())));
        }
        let mut inputs = Vec::with_capacity(sample.len());
        for x in sample {
            let leaf = t.leaf(x.clone());
            inputs.push(power_node(t, leaf, self.arch.power)?);
        }
        let hidden = conv_forward(t, &self.conv, &vars.conv, &inputs, &self.solvers)?;
        let hidden = hidden
            .into_iter()
            .map(|h| activation_node(t, self.arch.activation, self.arch.conv_metric, h, &self.solvers))
            .collect::<Result<Vec<_>>>()?;
        mlr_forward(t, &self.mlr, &vars.mlr, &hidden, &self.solvers)
    }

    pub fn logits(&self, sample: &[Mat]) -> Result<Vec<f64>> {
        let mut t = Tape::new();
        let vars = self.bind(&mut t);
        let v = self.forward(&mut t, &vars, sample)?;
        Ok(t.value(v).data().to_vec())
    }

    /// Index of the largest logit (first one on ties).
    pub fn predict(&self, sample: &[Mat]) -> Result<usize> {
        let v = self.logits(sample)?;
        Ok(v.iter().enumerate().fold(0, |best, (i, &x)| if x > v[best] { i } else { best }))
    }

    fn batch_loss(&self, t: &mut Tape, vars: &ModelVars, batch: &[Example]) -> Result<Var> {
        let losses = batch
            .iter()
            .map(|&(x, y)| {
                let v = self.forward(t, vars, x)?;
                softmax_xent_node(t, v, y)
            })
            .collect::<Result<Vec<_>>>()?;
        mean(t, &losses)
    }

    /// Mean cross-entropy over `batch`.
    pub fn loss(&self, batch: &[Example]) -> Result<f64> {
        let mut t = Tape::new();
        let vars = self.bind(&mut t);
        let l = self.batch_loss(&mut t, &vars, batch)?;
        Ok(t.value(l).as_scalar())
    }

    /// Mean cross-entropy and its gradient for every block of `blocks`.
    pub fn forward_backward(&self, batch: &[Example]) -> Result<(f64, [Mat; 4])> {
        let mut t = Tape::new();
        let vars = self.bind(&mut t);
        let l = self.batch_loss(&mut t, &vars, batch)?;
        let g = t.backward(l)?;
        let grads = [
            g.get_or_zeros(&t, vars.conv.z),
            g.get_or_zeros(&t, vars.conv.gamma),
            g.get_or_zeros(&t, vars.mlr.z),
            g.get_or_zeros(&t, vars.mlr.gamma),
        ];
        Ok((t.value(l).as_scalar(), grads))
    }
}
