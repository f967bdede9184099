//! Flat `key = value` run configuration. Blank lines and `#` comments are
//! ignored; unknown keys are rejected.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::dsolvers::{DplusConfig, DstarConfig, DstarMode};
use crate::error::{Error, Result};
use crate::geometry::{MetricKind, SolverConfig};
use crate::layers::{Activation, Architecture};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl FromStr for OptimizerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            _ => Err(Error::Config(format!("unknown optimizer '{s}'"))),
        }
    }
}

impl std::fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
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
    pub optimizer: OptimizerKind,
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub dplus_tol: f64,
    pub dplus_max_iter: usize,
    pub dplus_unrolled: bool,
    pub dstar_mode: DstarMode,
    pub dstar_tol: f64,
    pub dstar_max_iter: usize,
    pub dstar_unrolled: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let dplus = DplusConfig::default();
        let dstar = DstarConfig::default();
        RunConfig {
            conv_metric: MetricKind::Olm,
            mlr_metric: MetricKind::Olm,
            n_in: 8,
            channels: 2,
            field_size: 2,
            stride: 1,
            kernels: 2,
            m_hidden: 4,
            classes: 3,
            power: 1.0,
            activation: Activation::None,
            optimizer: OptimizerKind::Adam,
            lr: 0.005,
            weight_decay: 0.0,
            epochs: 100,
            batch_size: 30,
            seed: 0,
            dplus_tol: dplus.tol,
            dplus_max_iter: dplus.max_iter,
            dplus_unrolled: false,
            dstar_mode: DstarMode::Newton1,
            dstar_tol: dstar.tol,
            dstar_max_iter: dstar.max_iter,
            dstar_unrolled: false,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("invalid value '{value}' for {key}")))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", lineno + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "conv_metric" => self.conv_metric = value.parse()?,
            "mlr_metric" => self.mlr_metric = value.parse()?,
            "n_in" => self.n_in = parse(key, value)?,
            "channels" => self.channels = parse(key, value)?,
            "field_size" => self.field_size = parse(key, value)?,
            "stride" => self.stride = parse(key, value)?,
            "kernels" => self.kernels = parse(key, value)?,
            "m_hidden" => self.m_hidden = parse(key, value)?,
            "classes" => self.classes = parse(key, value)?,
            "power" => self.power = parse(key, value)?,
            "activation" => self.activation = value.parse()?,
            "optimizer" => self.optimizer = value.parse()?,
            "lr" => self.lr = parse(key, value)?,
            "weight_decay" => self.weight_decay = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "dplus_tol" => self.dplus_tol = parse(key, value)?,
            "dplus_max_iter" => self.dplus_max_iter = parse(key, value)?,
            "dplus_unrolled" => self.dplus_unrolled = parse(key, value)?,
            "dstar_mode" => self.dstar_mode = value.parse()?,
            "dstar_tol" => self.dstar_tol = parse(key, value)?,
            "dstar_max_iter" => self.dstar_max_iter = parse(key, value)?,
            "dstar_unrolled" => self.dstar_unrolled = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.architecture().validate()?;
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Config(format!("weight_decay must be non-negative, got {}", self.weight_decay)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(self.dplus_tol > 0.0) || !(self.dstar_tol > 0.0) || self.dplus_max_iter == 0 || self.dstar_max_iter == 0 {
            return Err(Error::Config("solver tolerances and iteration limits must be positive".into()));
        }
        Ok(())
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            conv_metric: self.conv_metric,
            mlr_metric: self.mlr_metric,
            n_in: self.n_in,
            channels: self.channels,
            field_size: self.field_size,
            stride: self.stride,
            kernels: self.kernels,
            m_hidden: self.m_hidden,
            classes: self.classes,
            power: self.power,
            activation: self.activation,
        }
    }

    pub fn solvers(&self) -> SolverConfig {
        SolverConfig {
            dplus: DplusConfig { tol: self.dplus_tol, max_iter: self.dplus_max_iter },
            dstar: DstarConfig { mode: self.dstar_mode, tol: self.dstar_tol, max_iter: self.dstar_max_iter },
            dplus_unrolled: self.dplus_unrolled,
            dstar_unrolled: self.dstar_unrolled,
        }
    }

    /// Text form accepted by `parse`; floats use the shortest exact representation.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("conv_metric", self.conv_metric.to_string());
        kv("mlr_metric", self.mlr_metric.to_string());
        kv("n_in", self.n_in.to_string());
        kv("channels", self.channels.to_string());
        kv("field_size", self.field_size.to_string());
        kv("stride", self.stride.to_string());
        kv("kernels", self.kernels.to_string());
        kv("m_hidden", self.m_hidden.to_string());
        kv("classes", self.classes.to_string());
        kv("power", format!("{:?}", self.power));
        kv("activation", self.activation.to_string());
        kv("optimizer", self.optimizer.to_string());
        kv("lr", format!("{:?}", self.lr));
        kv("weight_decay", format!("{:?}", self.weight_decay));
        kv("epochs", self.epochs.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("seed", self.seed.to_string());
        kv("dplus_tol", format!("{:?}", self.dplus_tol));
        kv("dplus_max_iter", self.dplus_max_iter.to_string());
        kv("dplus_unrolled", self.dplus_unrolled.to_string());
        kv("dstar_mode", self.dstar_mode.to_string());
        kv("dstar_tol", format!("{:?}", self.dstar_tol));
        kv("dstar_max_iter", self.dstar_max_iter.to_string());
        kv("dstar_unrolled", self.dstar_unrolled.to_string());
        s
    }
}
