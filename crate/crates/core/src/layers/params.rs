//! Parameter containers. Every layer stores one row of `z` per slot and one
//! `γ` per slot. A row holds, channel after channel, the `n(n−1)/2` strictly
//! lower entries of a hollow symmetric matrix (Log-Euclidean metrics) or the
//! coordinates of a Poincaré normal vector (PHCM).

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::correlation::dim_lower;
use crate::error::{Error, Result};
use crate::geometry::MetricKind;
use crate::layers::hyperplane::le_weights;
use crate::layers::tape::{Tape, Var};
use crate::linalg::Mat;

/// Tape handles for one layer's parameters. `w` holds the prototype-space
/// normals `φ★,I(Z)` for Log-Euclidean metrics, computed once per tape.
#[derive(Debug, Clone, Copy)]
pub struct ParamVars {
    pub z: Var,
    pub gamma: Var,
    pub(crate) w: Option<Var>,
}

fn bind(t: &mut Tape, metric: MetricKind, n: usize, channels: usize, z: &Mat, gamma: &Mat) -> ParamVars {
    let zv = t.leaf(z.clone());
    let gv = t.leaf(gamma.clone());
    let w = metric.is_log_euclidean().then(|| le_weights(t, metric, n, channels, zv));
    ParamVars { z: zv, gamma: gv, w }
}

/// FC weights start at this fraction of the MLR scale. Large initial logits
/// make the LSM output `Cor(exp(V))` numerically singular, since its chart
/// accumulates every logit into the last row and corner of `V`.
pub const FC_INIT_GAIN: f64 = 0.1;

fn init_z(slots: usize, n: usize, channels: usize, rng: &mut impl Rng) -> Mat {
    let std = (2.0 / (n * (n - 1)) as f64).sqrt();
    let normal = Normal::new(0.0, std).expect("finite std");
    let cols = channels * dim_lower(n);
    Mat::from_fn(slots, cols, |_, _| normal.sample(rng))
}

fn check_block(name: &str, z: &Mat, gamma: &Mat, slots: usize, cols: usize) -> Result<()> {
    if z.shape() != (slots, cols) || gamma.shape() != (slots, 1) {
        return Err(Error::ShapeMismatch(format!(
            "{name}: z {:?} and gamma {:?}, expected ({slots}, {cols}) and ({slots}, 1)",
            z.shape(),
            gamma.shape()
        )));
    }
    if !z.is_finite() || !gamma.is_finite() {
        return Err(Error::ShapeMismatch(format!("{name}: non-finite parameters")));
    }
    Ok(())
}

fn check_dim(what: &str, v: usize, min: usize) -> Result<()> {
    if v < min {
        return Err(Error::InvalidDimension(format!("{what} = {v}, need at least {min}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlrParams {
    pub metric: MetricKind,
    pub n: usize,
    pub channels: usize,
    /// `classes × channels·n(n−1)/2`
    pub z: Mat,
    /// `classes × 1`
    pub gamma: Mat,
}

impl MlrParams {
    pub fn zeros(metric: MetricKind, n: usize, channels: usize, classes: usize) -> Result<Self> {
        check_dim("n", n, 2)?;
        check_dim("channels", channels, 1)?;
        check_dim("classes", classes, 1)?;
        Ok(MlrParams {
            metric,
            n,
            channels,
            z: Mat::zeros(classes, channels * dim_lower(n)),
            gamma: Mat::zeros(classes, 1),
        })
    }

    /// `z ~ N(0, σ²)` with `σ = (2/(n(n−1)))^½`, `γ = 0`.
    pub fn init(metric: MetricKind, n: usize, channels: usize, classes: usize, rng: &mut impl Rng) -> Result<Self> {
        let mut p = Self::zeros(metric, n, channels, classes)?;
        p.z = init_z(classes, n, channels, rng);
        Ok(p)
    }

    pub fn classes(&self) -> usize {
        self.z.rows()
    }

    /// Hollow matrix `Z_k` of one class and channel.
    pub fn z_entries(&self, class: usize, channel: usize) -> &[f64] {
        let p = dim_lower(self.n);
        &self.z.row(class)[channel * p..(channel + 1) * p]
    }

    pub fn validate(&self) -> Result<()> {
        check_block("MLR", &self.z, &self.gamma, self.z.rows(), self.channels * dim_lower(self.n))
    }

    pub fn param_count(&self) -> usize {
        self.z.rows() * (self.z.cols() + 1)
    }

    pub fn bind(&self, t: &mut Tape) -> ParamVars {
        bind(t, self.metric, self.n, self.channels, &self.z, &self.gamma)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FcParams {
    pub metric: MetricKind,
    pub n: usize,
    pub m: usize,
    pub channels: usize,
    /// Independent outputs sharing the input.
    pub kernels: usize,
    /// `kernels·m(m−1)/2 × channels·n(n−1)/2`
    pub z: Mat,
    pub gamma: Mat,
}

impl FcParams {
    pub fn zeros(metric: MetricKind, n: usize, m: usize, channels: usize, kernels: usize) -> Result<Self> {
        check_dim("n", n, 2)?;
        check_dim("m", m, 2)?;
        check_dim("channels", channels, 1)?;
        check_dim("kernels", kernels, 1)?;
        let slots = kernels * dim_lower(m);
        Ok(FcParams {
            metric,
            n,
            m,
            channels,
            kernels,
            z: Mat::zeros(slots, channels * dim_lower(n)),
            gamma: Mat::zeros(slots, 1),
        })
    }

    /// `z ~ N(0, σ²)` with `σ = FC_INIT_GAIN·(2/(n(n−1)))^½`, `γ = 0`.
    pub fn init(
        metric: MetricKind,
        n: usize,
        m: usize,
        channels: usize,
        kernels: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let mut p = Self::zeros(metric, n, m, channels, kernels)?;
        p.z = init_z(p.slots(), n, channels, rng).scale(FC_INIT_GAIN);
        Ok(p)
    }

    /// Coordinate slots per kernel: `m(m−1)/2` for every metric (the LSM
    /// index set `1 ≤ j ≤ i ≤ m−1` has the same size).
    pub fn slots_per_kernel(&self) -> usize {
        dim_lower(self.m)
    }

    pub fn slots(&self) -> usize {
        self.kernels * self.slots_per_kernel()
    }

    pub fn validate(&self) -> Result<()> {
        check_block("FC", &self.z, &self.gamma, self.slots(), self.channels * dim_lower(self.n))
    }

    pub fn param_count(&self) -> usize {
        self.slots() * (self.channels * dim_lower(self.n) + 1)
    }

    pub fn bind(&self, t: &mut Tape) -> ParamVars {
        bind(t, self.metric, self.n, self.channels, &self.z, &self.gamma)
    }
}

/// FC kernels applied to sliding groups of input channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    pub fc: FcParams,
    pub field_size: usize,
    pub stride: usize,
}

impl ConvParams {
    pub fn new(fc: FcParams, stride: usize) -> Result<Self> {
        check_dim("stride", stride, 1)?;
        let field_size = fc.channels;
        Ok(ConvParams { fc, field_size, stride })
    }

    pub fn kernels(&self) -> usize {
        self.fc.kernels
    }

    /// Number of receptive fields over `in_channels` inputs.
    pub fn fields(&self, in_channels: usize) -> Result<usize> {
        if in_channels < self.field_size || (in_channels - self.field_size) % self.stride != 0 {
            return Err(Error::ShapeMismatch(format!(
                "{in_channels} channels cannot be tiled by fields of {} with stride {}",
                self.field_size, self.stride
            )));
        }
        Ok((in_channels - self.field_size) / self.stride + 1)
    }

    pub fn out_channels(&self, in_channels: usize) -> Result<usize> {
        Ok(self.fields(in_channels)? * self.kernels())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn shapes_and_counts() {
        let fc = FcParams::zeros(MetricKind::Lsm, 5, 4, 2, 1).unwrap();
        assert_eq!(fc.slots(), 6);
        assert_eq!(fc.z.shape(), (6, 20));
        assert_eq!(fc.param_count(), 6 * (2 * 10 + 1));
        let fc = FcParams::zeros(MetricKind::Phcm, 5, 4, 2, 3).unwrap();
        assert_eq!(fc.slots(), 18);
        let mlr = MlrParams::zeros(MetricKind::Olm, 4, 4, 3).unwrap();
        assert_eq!(mlr.param_count(), 3 * (4 * 6 + 1));
        assert!(FcParams::zeros(MetricKind::Ecm, 1, 3, 1, 1).is_err());
    }

    #[test]
    fn conv_field_arithmetic() {
        let conv = ConvParams::new(FcParams::zeros(MetricKind::Ecm, 4, 3, 2, 2).unwrap(), 1).unwrap();
        assert_eq!(conv.fields(3).unwrap(), 2);
        assert_eq!(conv.out_channels(3).unwrap(), 4);
        assert_eq!(conv.out_channels(2).unwrap(), 2);
        assert!(conv.fields(1).is_err());
        let strided = ConvParams::new(FcParams::zeros(MetricKind::Ecm, 4, 3, 2, 1).unwrap(), 2).unwrap();
        assert!(strided.fields(5).is_err());
    }

    #[test]
    fn init_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = MlrParams::init(MetricKind::Ecm, 6, 2, 400, &mut rng).unwrap();
        let d = p.z.data();
        let var = d.iter().map(|v| v * v).sum::<f64>() / d.len() as f64;
        assert!((var - 2.0 / 30.0).abs() < 0.01, "{var}");
        assert_eq!(p.gamma, Mat::zeros(400, 1));
        p.validate().unwrap();
    }
}
