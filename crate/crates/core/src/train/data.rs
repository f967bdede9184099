//! Labelled multi-channel correlation datasets and the synthetic generator.
//!
//! Samples are drawn around one anchor per class and channel in the OLM
//! chart: `C = Exp°(H_anchor + s·N)` with `N` a standard normal hollow matrix
//! in orthonormal coordinates.

use std::path::Path;

use log::debug;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::correlation::{dim_lower, hol_from_coords};
use crate::error::{Error, Result};
use crate::geometry::maps::phi_inv_mat;
use crate::geometry::{MetricKind, SolverConfig};
use crate::io::{read_labels, write_labels, TensorFile};
use crate::layers::Example;
use crate::linalg::Mat;

pub const SAMPLES_FILE: &str = "samples.cort";
pub const LABELS_FILE: &str = "labels.corl";

/// Anchor draws tried before giving up on the requested separation.
pub const MAX_ANCHOR_ATTEMPTS: usize = 1000;

const ANCHOR_STREAM: u64 = 0;
const SAMPLE_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub n: usize,
    pub channels: usize,
    pub samples: Vec<Vec<Mat>>,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn new(n: usize, channels: usize, samples: Vec<Vec<Mat>>, labels: Vec<usize>) -> Result<Self> {
        if samples.len() != labels.len() {
            return Err(Error::ShapeMismatch(format!("{} samples but {} labels", samples.len(), labels.len())));
        }
        for s in &samples {
            if s.len() != channels || s.iter().any(|m| m.shape() != (n, n)) {
                return Err(Error::ShapeMismatch(format!("every sample must hold {channels} matrices of size {n}x{n}")));
            }
        }
        Ok(Dataset { n, channels, samples, labels })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |&m| m + 1)
    }

    pub fn examples(&self) -> Vec<Example<'_>> {
        self.samples.iter().zip(&self.labels).map(|(x, &y)| (x.as_slice(), y)).collect()
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        let mut data = Vec::with_capacity(self.len() * self.channels * self.n * self.n);
        for s in &self.samples {
            for m in s {
                data.extend_from_slice(m.data());
            }
        }
        TensorFile::new(vec![self.len(), self.channels, self.n, self.n], data)?.write(&dir.join(SAMPLES_FILE))?;
        let labels: Vec<u32> = self.labels.iter().map(|&y| y as u32).collect();
        write_labels(&dir.join(LABELS_FILE), &labels)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let t = TensorFile::read(&dir.join(SAMPLES_FILE))?;
        let labels = read_labels(&dir.join(LABELS_FILE))?;
        let [count, channels, n, n2] = t.shape[..] else {
            return Err(Error::Format(format!("sample tensor must be 4-dimensional, got shape {:?}", t.shape)));
        };
        if n != n2 {
            return Err(Error::Format(format!("sample matrices must be square, got {n}x{n2}")));
        }
        if labels.len() != count {
            return Err(Error::Format(format!("{count} samples but {} labels", labels.len())));
        }
        let block = n * n;
        let samples = (0..count)
            .map(|i| {
                (0..channels)
                    .map(|c| {
                        let off = (i * channels + c) * block;
                        Mat::from_vec(n, n, t.data[off..off + block].to_vec())
                    })
                    .collect()
            })
            .collect();
        Dataset::new(n, channels, samples, labels.into_iter().map(|y| y as usize).collect())
            .map_err(|e| Error::Format(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatagenConfig {
    pub classes: usize,
    pub per_class: usize,
    pub dim: usize,
    pub channels: usize,
    pub spread: f64,
    pub sep: f64,
    /// Seeds the anchors, and the sample noise unless `sample_seed` is set.
    pub seed: u64,
    /// Fresh noise around the same anchors, for held-out draws.
    pub sample_seed: Option<u64>,
}

impl Default for DatagenConfig {
    fn default() -> Self {
        DatagenConfig { classes: 3, per_class: 100, dim: 8, channels: 2, spread: 0.3, sep: 2.0, seed: 0, sample_seed: None }
    }
}

impl DatagenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 1 || self.per_class < 1 || self.channels < 1 {
            return Err(Error::Config("classes, per-class and channels must be positive".into()));
        }
        if self.dim < 2 {
            return Err(Error::InvalidDimension(format!("dim must be at least 2, got {}", self.dim)));
        }
        if !(self.spread >= 0.0 && self.spread.is_finite()) || !(self.sep >= 0.0 && self.sep.is_finite()) {
            return Err(Error::Config(format!("spread and sep must be finite and non-negative, got {} and {}", self.spread, self.sep)));
        }
        Ok(())
    }
}

fn normals(rng: &mut ChaCha8Rng, count: usize, scale: f64) -> Vec<f64> {
    (0..count)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        })
        .collect()
}

fn product_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)))
        .sum::<f64>()
        .sqrt()
}

/// Anchor coordinates `[class][channel][pair]`, pairwise OLM product distance at least `sep`.
pub fn draw_anchors(cfg: &DatagenConfig) -> Result<Vec<Vec<Vec<f64>>>> {
    cfg.validate()?;
    let p = dim_lower(cfg.dim);
    // Expected pairwise distance is 1.5·sep.
    let scale = 1.5 * cfg.sep / (2.0 * (p * cfg.channels) as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(ANCHOR_STREAM);
    for attempt in 1..=MAX_ANCHOR_ATTEMPTS {
        let anchors: Vec<Vec<Vec<f64>>> =
            (0..cfg.classes).map(|_| (0..cfg.channels).map(|_| normals(&mut rng, p, scale)).collect()).collect();
        let ok = (0..cfg.classes)
            .all(|i| (0..i).all(|j| product_distance(&anchors[i], &anchors[j]) >= cfg.sep));
        if ok {
            debug!("anchors accepted after {attempt} attempt(s)");
            return Ok(anchors);
        }
    }
    Err(Error::InfeasibleSeparation(cfg.sep))
}

/// Generates `classes·per_class` samples, class-major.
pub fn generate(cfg: &DatagenConfig) -> Result<Dataset> {
    let anchors = draw_anchors(cfg)?;
    let (n, p) = (cfg.dim, dim_lower(cfg.dim));
    let solvers = SolverConfig::geometry();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.sample_seed.unwrap_or(cfg.seed));
    rng.set_stream(SAMPLE_STREAM);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let mut samples = Vec::with_capacity(cfg.classes * cfg.per_class);
    let mut labels = Vec::with_capacity(cfg.classes * cfg.per_class);
    for (class, anchor) in anchors.iter().enumerate() {
        for _ in 0..cfg.per_class {
            let sample = anchor
                .iter()
                .map(|a| {
                    let coords: Vec<f64> = a.iter().map(|&x| x + cfg.spread * noise.sample(&mut rng)).collect();
                    phi_inv_mat(MetricKind::Olm, &hol_from_coords(n, &coords[..p]), &solvers)
                })
                .collect::<Result<Vec<_>>>()?;
            samples.push(sample);
            labels.push(class);
        }
    }
    Dataset::new(n, cfg.channels, samples, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlation::{hol_coords, validate};
    use crate::geometry::maps::phi_mat;

    fn small() -> DatagenConfig {
        DatagenConfig { classes: 3, per_class: 4, dim: 5, channels: 2, ..DatagenConfig::default() }
    }

    #[test]
    fn samples_are_valid_and_deterministic() {
        let a = generate(&small()).unwrap();
        assert_eq!(a, generate(&small()).unwrap());
        assert_eq!(a.len(), 12);
        assert_eq!(a.labels[..4], [0, 0, 0, 0]);
        for s in &a.samples {
            for m in s {
                validate(m).unwrap();
            }
        }
    }

    #[test]
    fn anchors_respect_separation() {
        let cfg = DatagenConfig { sep: 3.0, ..small() };
        let anchors = draw_anchors(&cfg).unwrap();
        for i in 0..3 {
            for j in 0..i {
                assert!(product_distance(&anchors[i], &anchors[j]) >= 3.0);
            }
        }
    }

    #[test]
    fn zero_spread_reproduces_anchors() {
        let cfg = DatagenConfig { spread: 0.0, ..small() };
        let anchors = draw_anchors(&cfg).unwrap();
        let data = generate(&cfg).unwrap();
        let solvers = SolverConfig::geometry();
        for (s, &y) in data.samples.iter().zip(&data.labels) {
            for (c, m) in s.iter().enumerate() {
                assert_eq!(m, &data.samples[y * 4][c]);
                let coords = hol_coords(&phi_mat(MetricKind::Olm, m, &solvers).unwrap());
                let err = coords.iter().zip(&anchors[y][c]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                assert!(err < 1e-9, "{err}");
            }
        }
    }

    #[test]
    fn held_out_draw_shares_anchors() {
        let train = generate(&small()).unwrap();
        let test = generate(&DatagenConfig { sample_seed: Some(99), ..small() }).unwrap();
        assert_ne!(train.samples, test.samples);
        assert_eq!(draw_anchors(&small()).unwrap(), draw_anchors(&DatagenConfig { sample_seed: Some(99), ..small() }).unwrap());
    }

    #[test]
    fn impossible_separation_is_reported() {
        let cfg = DatagenConfig { classes: 40, dim: 2, channels: 1, sep: 5.0, ..small() };
        assert!(matches!(generate(&cfg), Err(Error::InfeasibleSeparation(_))));
    }

    #[test]
    fn save_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let data = generate(&small()).unwrap();
        data.save(dir.path()).unwrap();
        assert_eq!(Dataset::load(dir.path()).unwrap(), data);
    }
}
