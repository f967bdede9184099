//! `CORT` tensors: magic, version 1, dtype 0 (f64 LE), two reserved bytes,
//! `u32` rank, `u32` extents, row-major payload. `CORL` labels: magic, `u32`
//! count, `u32` labels. All integers little-endian.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const TENSOR_MAGIC: [u8; 4] = *b"CORT";
pub const LABEL_MAGIC: [u8; 4] = *b"CORL";
pub const VERSION: u8 = 1;
pub const DTYPE_F64: u8 = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct TensorFile {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format(format!("truncated file at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Format(format!("{} trailing bytes", self.bytes.len() - self.pos)));
        }
        Ok(())
    }
}

impl TensorFile {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let count: usize = shape.iter().product();
        if count != data.len() {
            return Err(Error::Format(format!("shape {shape:?} holds {count} values, got {}", data.len())));
        }
        if shape.iter().any(|&d| d > u32::MAX as usize) {
            return Err(Error::Format(format!("extent in {shape:?} exceeds u32")));
        }
        Ok(TensorFile { shape, data })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 4 * self.shape.len() + 8 * self.data.len());
        out.extend_from_slice(&TENSOR_MAGIC);
        out.extend_from_slice(&[VERSION, DTYPE_F64, 0, 0]);
        out.extend_from_slice(&(self.shape.len() as u32).to_le_bytes());
        for &d in &self.shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != TENSOR_MAGIC {
            return Err(Error::Format("bad tensor magic".into()));
        }
        let head = r.take(4)?;
        if head[0] != VERSION {
            return Err(Error::Format(format!("unsupported tensor version {}", head[0])));
        }
        if head[1] != DTYPE_F64 {
            return Err(Error::Format(format!("unsupported dtype {}", head[1])));
        }
        let ndim = r.u32()? as usize;
        let shape = (0..ndim).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let count = shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
        let count = count.ok_or_else(|| Error::Format("tensor size overflows".into()))?;
        let payload = r.take(count.checked_mul(8).ok_or_else(|| Error::Format("tensor size overflows".into()))?)?;
        r.finish()?;
        let data = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        Ok(TensorFile { shape, data })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }
}

pub fn labels_to_bytes(labels: &[u32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 4 * labels.len());
    out.extend_from_slice(&LABEL_MAGIC);
    out.extend_from_slice(&(labels.len() as u32).to_le_bytes());
    for l in labels {
        out.extend_from_slice(&l.to_le_bytes());
    }
    out
}

pub fn labels_from_bytes(bytes: &[u8]) -> Result<Vec<u32>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != LABEL_MAGIC {
        return Err(Error::Format("bad label magic".into()));
    }
    let count = r.u32()? as usize;
    let labels = (0..count).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    r.finish()?;
    Ok(labels)
}

pub fn write_labels(path: &Path, labels: &[u32]) -> Result<()> {
    fs::write(path, labels_to_bytes(labels)).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn read_labels(path: &Path) -> Result<Vec<u32>> {
    let bytes = fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    labels_from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let t = TensorFile::new(vec![2, 1], vec![1.0, -0.5]).unwrap();
        let b = t.to_bytes();
        assert_eq!(&b[..12], &[b'C', b'O', b'R', b'T', 1, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(&b[12..20], &[2, 0, 0, 0, 1, 0, 0, 0]);
        assert_eq!(b.len(), 20 + 16);
        assert_eq!(labels_to_bytes(&[7]), vec![b'C', b'O', b'R', b'L', 1, 0, 0, 0, 7, 0, 0, 0]);
    }

    #[test]
    fn malformed_input_is_rejected() {
        let mut b = TensorFile::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap().to_bytes();
        assert!(TensorFile::from_bytes(&b[..b.len() - 1]).is_err());
        b.push(0);
        assert!(TensorFile::from_bytes(&b).is_err());
        let mut bad = TensorFile::new(vec![1], vec![0.0]).unwrap().to_bytes();
        bad[5] = 1;
        assert!(matches!(TensorFile::from_bytes(&bad), Err(Error::Format(_))));
        assert!(labels_from_bytes(b"CORT\0\0\0\0").is_err());
        assert!(TensorFile::new(vec![2, 2], vec![0.0; 3]).is_err());
    }

    #[test]
    fn files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let t = TensorFile::new(vec![2, 2, 2], (0..8).map(|i| i as f64 / 3.0).collect()).unwrap();
        let p = dir.path().join("x.cort");
        t.write(&p).unwrap();
        assert_eq!(TensorFile::read(&p).unwrap(), t);
        let l = dir.path().join("y.corl");
        write_labels(&l, &[0, 2, 1]).unwrap();
        assert_eq!(read_labels(&l).unwrap(), vec![0, 2, 1]);
        assert!(matches!(TensorFile::read(&dir.path().join("missing")), Err(Error::Io(_))));
    }

    proptest! {
        #[test]
        fn bytes_round_trip(shape in proptest::collection::vec(0usize..4, 0..4), seed in any::<u64>()) {
            let count: usize = shape.iter().product();
            let data: Vec<f64> = (0..count).map(|i| f64::from_bits(seed.wrapping_mul(i as u64 + 1) >> 2)).collect();
            let t = TensorFile::new(shape, data).unwrap();
            let bytes = t.to_bytes();
            let back = TensorFile::from_bytes(&bytes).unwrap();
            prop_assert_eq!(back.to_bytes(), bytes);
        }

        #[test]
        fn labels_round_trip(labels in proptest::collection::vec(any::<u32>(), 0..50)) {
            prop_assert_eq!(labels_from_bytes(&labels_to_bytes(&labels)).unwrap(), labels);
        }
    }
}
