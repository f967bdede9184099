//! Checkpoint directories: a text manifest holding the run configuration and
//! the tensor list, plus one tensor file per parameter block.
//!
//! ```text
//! [config]
//! conv_metric = OLM
//! ...
//! [tensors]
//! conv.z = conv.z.cort 3x12
//! ```

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::TensorFile;
use crate::layers::{Model, BLOCK_NAMES};
use crate::linalg::Mat;
use crate::train::config::RunConfig;

pub const MANIFEST_FILE: &str = "manifest.txt";

fn tensor_file(name: &str) -> String {
    format!("{name}.cort")
}

pub fn save_checkpoint(dir: &Path, cfg: &RunConfig, model: &Model) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let mut manifest = String::from("[config]\n");
    manifest.push_str(&cfg.to_text());
    manifest.push_str("[tensors]\n");
    for (name, block) in BLOCK_NAMES.iter().zip(model.blocks()) {
        let file = tensor_file(name);
        let _ = writeln!(manifest, "{name} = {file} {}x{}", block.rows(), block.cols());
        TensorFile::new(vec![block.rows(), block.cols()], block.data().to_vec())?.write(&dir.join(&file))?;
    }
    let path = dir.join(MANIFEST_FILE);
    std::fs::write(&path, manifest).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn parse_tensor_line(line: &str) -> Result<(String, String, usize, usize)> {
    let bad = || Error::Format(format!("bad tensor entry '{line}'"));
    let (name, rest) = line.split_once('=').ok_or_else(bad)?;
    let mut parts = rest.split_whitespace();
    let file = parts.next().ok_or_else(bad)?;
    let (r, c) = parts.next().and_then(|s| s.split_once('x')).ok_or_else(bad)?;
    if parts.next().is_some() {
        return Err(bad());
    }
    Ok((name.trim().to_string(), file.to_string(), r.parse().map_err(|_| bad())?, c.parse().map_err(|_| bad())?))
}

pub fn load_checkpoint(dir: &Path) -> Result<(RunConfig, Model)> {
    let path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let (mut config, mut tensors) = (String::new(), Vec::new());
    let mut section = "";
    for line in text.lines() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        match trimmed {
            "[config]" | "[tensors]" => section = trimmed,
            _ if section == "[config]" => {
                config.push_str(trimmed);
                config.push('\n');
            }
            _ if section == "[tensors]" => tensors.push(parse_tensor_line(trimmed)?),
            _ => return Err(Error::Format(format!("manifest line outside a section: '{trimmed}'"))),
        }
    }
    let cfg = RunConfig::parse(&config).map_err(|e| Error::Format(format!("manifest config: {e}")))?;
    let mut model = Model::zeros(cfg.architecture(), cfg.solvers())?;
    if tensors.len() != BLOCK_NAMES.len() {
        return Err(Error::Format(format!("expected {} tensors, manifest lists {}", BLOCK_NAMES.len(), tensors.len())));
    }
    for (b, block) in model.blocks_mut().into_iter().enumerate() {
        let (name, file, r, c) = &tensors[b];
        if name != BLOCK_NAMES[b] || (*r, *c) != block.shape() {
            return Err(Error::Format(format!(
                "tensor {b}: manifest has {name} {r}x{c}, model expects {} {}x{}",
                BLOCK_NAMES[b],
                block.rows(),
                block.cols()
            )));
        }
        let t = TensorFile::read(&dir.join(file))?;
        if t.shape != [*r, *c] {
            return Err(Error::Format(format!("{file}: shape {:?} does not match manifest {r}x{c}", t.shape)));
        }
        *block = Mat::from_vec(*r, *c, t.data);
    }
    Ok((cfg, model))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::MetricKind;

    #[test]
    fn roundtrip_is_bitwise() {
        let cfg = RunConfig { conv_metric: MetricKind::Lsm, mlr_metric: MetricKind::Phcm, lr: 0.1 / 3.0, ..RunConfig::default() };
        let model = Model::init(cfg.architecture(), cfg.solvers(), 11).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_checkpoint(dir.path(), &cfg, &model).unwrap();
        let (cfg2, model2) = load_checkpoint(dir.path()).unwrap();
        assert_eq!(cfg2, cfg);
        assert_eq!(model2, model);
    }

    #[test]
    fn shape_mismatch_is_a_format_error() {
        let cfg = RunConfig::default();
        let model = Model::init(cfg.architecture(), cfg.solvers(), 0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_checkpoint(dir.path(), &cfg, &model).unwrap();
        TensorFile::new(vec![1, 1], vec![0.0]).unwrap().write(&dir.path().join("mlr.z.cort")).unwrap();
        assert!(matches!(load_checkpoint(dir.path()), Err(Error::Format(_))));
        assert!(matches!(load_checkpoint(&dir.path().join("missing")), Err(Error::Io(_))));
    }
}
