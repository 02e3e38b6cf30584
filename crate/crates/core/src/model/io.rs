//! Binary parameter files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "ENNW" | version u16 | count u32
//! count × (name_len u16 | name utf-8 | rank u8 | rank × dim u32)
//! for each buffer in manifest order: product(dims) × f64
//! ```

use std::fs;
use std::path::Path;

use super::Trainable;
use crate::error::{EnnError, Result};

pub const MAGIC: &[u8; 4] = b"ENNW";
pub const FORMAT_VERSION: u16 = 1;

/// A parameter buffer read back from a file.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

pub fn encode_params<P: Trainable>(params: &P) -> Result<Vec<u8>> {
    let tensors = params.tensors();
    let mut out = Vec::with_capacity(16 + params.param_count() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for t in &tensors {
        let name = t.name.as_bytes();
        let dims = t.dims();
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name);
        out.push(dims.len() as u8);
        for d in dims {
            let d = u32::try_from(d).map_err(|_| EnnError::contract(format!("{}: dimension {d} exceeds u32", t.name)))?;
            out.extend_from_slice(&d.to_le_bytes());
        }
    }
    for t in &tensors {
        for v in t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            EnnError::format(
                self.pos as u64,
                format!("truncated {what}: need {n} bytes, {} remain", self.bytes.len() - self.pos),
            )
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn decode_params(bytes: &[u8]) -> Result<Vec<NamedTensor>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(EnnError::format(0, "bad magic, not an ENNW parameter file"));
    }
    let version = r.u16("version")?;
    if version != FORMAT_VERSION {
        return Err(EnnError::format(4, format!("unsupported format version {version}, expected {FORMAT_VERSION}")));
    }
    let count = r.u32("buffer count")? as usize;
    let mut manifest = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let at = r.pos;
        let len = r.u16("name length")? as usize;
        let name = std::str::from_utf8(r.take(len, "name")?)
            .map_err(|_| EnnError::format(at as u64 + 2, "buffer name is not valid UTF-8"))?
            .to_string();
        let rank = r.u8("rank")? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(r.u32("dimension")? as usize);
        }
        manifest.push((name, dims));
    }
    let mut out = Vec::with_capacity(manifest.len());
    for (name, dims) in manifest {
        let at = r.pos;
        let n = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
        let raw = n
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| EnnError::format(at as u64, format!("{name}: dimensions {dims:?} overflow")))
            .and_then(|bytes| r.take(bytes, &format!("data for {name}")))?;
        let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
        out.push(NamedTensor { name, dims, data });
    }
    if r.pos != bytes.len() {
        return Err(EnnError::format(r.pos as u64, format!("{} trailing bytes after the last buffer", bytes.len() - r.pos)));
    }
    Ok(out)
}

pub fn save_params<P: Trainable>(params: &P, path: &Path) -> Result<()> {
    fs::write(path, encode_params(params)?).map_err(|e| EnnError::io(path, e))
}

pub fn load_tensors(path: &Path) -> Result<Vec<NamedTensor>> {
    let bytes = fs::read(path).map_err(|e| EnnError::io(path, e))?;
    decode_params(&bytes)
}

/// Loads a file into `params`, which fixes the expected buffer names and shapes.
pub fn load_params<P: Trainable>(params: &mut P, path: &Path) -> Result<()> {
    params.assign(&load_tensors(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::CellConfig;
    use crate::model::{ClassifierParams, RnnParams};
    use crate::rng::{substream, Stream};

    fn params() -> ClassifierParams {
        let cfg = CellConfig { input_dim: 3, hidden_dim: 4, memory_size: 5, ..CellConfig::default() };
        ClassifierParams::init(&cfg, 3, &mut substream(1, Stream::Init))
    }

    #[test]
    fn round_trip_is_bitwise() {
        let mut p = params();
        p.b_out[0] = -0.0;
        p.b_out[1] = f64::MIN_POSITIVE / 4.0;
        let bytes = encode_params(&p).unwrap();
        let mut q = p.zeros_like();
        q.assign(&decode_params(&bytes).unwrap()).unwrap();
        for (a, b) in p.tensors().iter().zip(q.tensors()) {
            let a: Vec<u64> = a.data.iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = b.data.iter().map(|v| v.to_bits()).collect();
            assert_eq!(a, b);
        }
        assert_eq!(encode_params(&q).unwrap(), bytes);
    }

    #[test]
    fn header_layout() {
        let p = RnnParams::zeros(2, 3, 4);
        let bytes = encode_params(&p).unwrap();
        assert_eq!(&bytes[..4], b"ENNW");
        assert_eq!(&bytes[4..6], &[1, 0]);
        assert_eq!(&bytes[6..10], &[5, 0, 0, 0]);
        // first entry: "rnn.w_x", rank 2, dims 3 x 2
        assert_eq!(&bytes[10..12], &[7, 0]);
        assert_eq!(&bytes[12..19], b"rnn.w_x");
        assert_eq!(bytes[19], 2);
        assert_eq!(&bytes[20..28], &[3, 0, 0, 0, 2, 0, 0, 0]);
        let manifest_len: usize = 10 + p.tensors().iter().map(|t| 2 + t.name.len() + 1 + 4 * t.dims().len()).sum::<usize>();
        assert_eq!(bytes.len(), manifest_len + 8 * p.param_count());
    }

    #[test]
    fn corrupted_magic_rejected() {
        let bytes = encode_params(&params()).unwrap();
        for i in 0..4 {
            let mut b = bytes.clone();
            b[i] ^= 0x20;
            assert!(matches!(decode_params(&b), Err(EnnError::Format { offset: 0, .. })));
        }
    }

    #[test]
    fn wrong_version_rejected() {
        let mut bytes = encode_params(&params()).unwrap();
        bytes[4] = 2;
        let err = decode_params(&bytes).unwrap_err();
        assert!(matches!(err, EnnError::Format { offset: 4, .. }));
        assert!(err.to_string().contains("version 2"), "{err}");
    }

    #[test]
    fn truncation_reports_offset() {
        let bytes = encode_params(&params()).unwrap();
        for cut in [3, 5, 9, 11, 40, bytes.len() - 1] {
            match decode_params(&bytes[..cut]) {
                Err(EnnError::Format { offset, .. }) => assert!(offset <= cut as u64),
                other => panic!("cut {cut}: {other:?}"),
            }
        }
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(decode_params(&long), Err(EnnError::Format { offset, .. }) if offset == bytes.len() as u64));
    }

    #[test]
    fn shape_mismatch_rejected_on_assign() {
        let bytes = encode_params(&params()).unwrap();
        let cfg = CellConfig { input_dim: 3, hidden_dim: 6, memory_size: 5, ..CellConfig::default() };
        let mut other = ClassifierParams::zeros(&cfg, 3);
        assert!(matches!(other.assign(&decode_params(&bytes).unwrap()), Err(EnnError::Contract(_))));
        let mut rnn = RnnParams::zeros(3, 4, 3);
        assert!(rnn.assign(&decode_params(&bytes).unwrap()).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.ennw");
        let p = params();
        save_params(&p, &path).unwrap();
        let mut q = p.zeros_like();
        load_params(&mut q, &path).unwrap();
        assert_eq!(p, q);
        assert!(matches!(load_tensors(&dir.path().join("missing")), Err(EnnError::Io { .. })));
    }
}
