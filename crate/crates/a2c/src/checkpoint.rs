//! Binary checkpoint files.
//!
//! Layout (little-endian):
//! ```text
//! magic    8 bytes  "RMZCKPT\0"
//! version  u32
//! arch     u64      architecture hash
//! header   u32 length + JSON {arch, hyper, meta}
//! count    u32
//! count x { u32 name length, name, u32 ndim, ndim x u64 dims, f32 data }
//! ```

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::arch::{Arch, Params};
use crate::error::{Error, Result};
use crate::trainer::HyperParams;

pub const MAGIC: &[u8; 8] = b"RMZCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub updates: u64,
    pub frames: u64,
    pub run_seed: u64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    arch: Arch,
    hyper: HyperParams,
    meta: CheckpointMeta,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub arch: Arch,
    pub hyper: HyperParams,
    pub meta: CheckpointMeta,
    pub params: Params<f32>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.arch.hash().to_le_bytes());
        let header = serde_json::to_vec(&Header {
            arch: self.arch.clone(),
            hyper: self.hyper.clone(),
            meta: self.meta.clone(),
        })?;
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        let specs = self.arch.param_specs();
        out.extend_from_slice(&(specs.len() as u32).to_le_bytes());
        for (spec, data) in specs.iter().zip(&self.params.tensors) {
            out.extend_from_slice(&(spec.name.len() as u32).to_le_bytes());
            out.extend_from_slice(spec.name.as_bytes());
            out.extend_from_slice(&(spec.shape.len() as u32).to_le_bytes());
            for &d in &spec.shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    /// Parses a checkpoint. With `expected` set, a checkpoint for any other
    /// architecture is refused with [`Error::ArchMismatch`].
    pub fn from_bytes(bytes: &[u8], expected: Option<&Arch>, path: &Path) -> Result<Self> {
        let bad = |reason: &str| Error::Checkpoint { path: path.to_path_buf(), reason: reason.to_string() };
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8).ok_or_else(|| bad("truncated header"))? != MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let version = r.u32().ok_or_else(|| bad("truncated header"))?;
        if version != CHECKPOINT_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let hash = r.u64().ok_or_else(|| bad("truncated header"))?;
        if let Some(arch) = expected {
            if arch.hash() != hash {
                return Err(Error::ArchMismatch { expected: arch.hash(), found: hash });
            }
        }
        let len = r.u32().ok_or_else(|| bad("truncated header"))? as usize;
        let header: Header =
            serde_json::from_slice(r.take(len).ok_or_else(|| bad("truncated header"))?).map_err(|e| bad(&e.to_string()))?;
        if header.arch.hash() != hash {
            return Err(bad("architecture hash does not match the embedded description"));
        }
        header.arch.validate().map_err(|e| bad(&e.to_string()))?;
        let specs = header.arch.param_specs();
        let count = r.u32().ok_or_else(|| bad("truncated tensor table"))? as usize;
        if count != specs.len() {
            return Err(bad(&format!("expected {} tensors, found {count}", specs.len())));
        }
        let mut tensors = Vec::with_capacity(count);
        for spec in &specs {
            let name_len = r.u32().ok_or_else(|| bad("truncated tensor"))? as usize;
            let name = r.take(name_len).ok_or_else(|| bad("truncated tensor"))?;
            if name != spec.name.as_bytes() {
                return Err(bad(&format!("expected tensor {}", spec.name)));
            }
            let ndim = r.u32().ok_or_else(|| bad("truncated tensor"))? as usize;
            let mut shape = Vec::with_capacity(ndim.min(8));
            for _ in 0..ndim {
                shape.push(r.u64().ok_or_else(|| bad("truncated tensor"))? as usize);
            }
            if shape != spec.shape {
                return Err(bad(&format!("tensor {} has shape {shape:?}", spec.name)));
            }
            let raw = r.take(spec.numel() * 4).ok_or_else(|| bad("truncated tensor data"))?;
            tensors.push(raw.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect());
        }
        if r.pos != bytes.len() {
            return Err(bad("trailing bytes"));
        }
        Ok(Checkpoint { arch: header.arch, hyper: header.hyper, meta: header.meta, params: Params { tensors } })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let tmp = PathBuf::from(format!("{}.tmp", path.display()));
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path, expected: Option<&Arch>) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::Checkpoint { path: path.to_path_buf(), reason: e.to_string() })?;
        Self::from_bytes(&bytes, expected, path)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let s = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(s)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn u64(&mut self) -> Option<u64> {
        self.take(8).map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }
}
