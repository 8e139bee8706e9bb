//! Versioned binary checkpoints.
//!
//! Layout (little-endian): magic `VSODCKPT`, format version u32, config
//! digest (u32 length + UTF-8), step u64, generator state u64, parameter
//! count u32, then per parameter: name (u32 + UTF-8), rank u32, dims u32
//! each, values as raw f64 bits. Round trips are bit-exact.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::params::ParamRegistry;

const MAGIC: &[u8; 8] = b"VSODCKPT";
pub const FORMAT_VERSION: u32 = 1;

pub type Snapshot = BTreeMap<String, (Vec<usize>, Vec<f64>)>;

#[derive(Clone)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config_digest: String,
    pub step: u64,
    pub rng_state: u64,
    pub params: Snapshot,
}

impl Checkpoint {
    pub fn new(config_digest: &str, step: u64, rng_state: u64, params: Snapshot) -> Checkpoint {
        Checkpoint {
            format_version: FORMAT_VERSION,
            config_digest: config_digest.to_string(),
            step,
            rng_state,
            params,
        }
    }

    pub fn from_registry(
        reg: &ParamRegistry,
        config_digest: &str,
        step: u64,
        rng_state: u64,
    ) -> Checkpoint {
        Checkpoint::new(config_digest, step, rng_state, reg.snapshot())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf: Vec<u8> = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&self.format_version.to_le_bytes());
        write_str(&mut buf, &self.config_digest);
        buf.extend_from_slice(&self.step.to_le_bytes());
        buf.extend_from_slice(&self.rng_state.to_le_bytes());
        buf.extend_from_slice(&(self.params.len() as u32).to_le_bytes());
        for (name, (shape, values)) in &self.params {
            write_str(&mut buf, name);
            buf.extend_from_slice(&(shape.len() as u32).to_le_bytes());
            for &d in shape {
                buf.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in values {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(&buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .map_err(|e| Error::io(path, e))?
            .read_to_end(&mut bytes)
            .map_err(|e| Error::io(path, e))?;
        let mut cur = Cursor { bytes: &bytes, pos: 0, path };
        let magic = cur.take(8)?;
        if magic != MAGIC {
            return Err(Error::Checkpoint(format!(
                "{}: not a checkpoint file (bad magic)",
                path.display()
            )));
        }
        let version = cur.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "{}: unsupported format version {version}",
                path.display()
            )));
        }
        let config_digest = cur.string()?;
        let step = cur.u64()?;
        let rng_state = cur.u64()?;
        let count = cur.u32()? as usize;
        let mut params = BTreeMap::new();
        for _ in 0..count {
            let name = cur.string()?;
            let rank = cur.u32()? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(cur.u32()? as usize);
            }
            let numel: usize = shape.iter().product();
            let mut values = Vec::with_capacity(numel);
            for _ in 0..numel {
                values.push(f64::from_le_bytes(cur.take(8)?.try_into().expect("8 bytes")));
            }
            params.insert(name, (shape, values));
        }
        Ok(Checkpoint { format_version: version, config_digest, step, rng_state, params })
    }
}

fn write_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Checkpoint(format!(
                "{}: truncated at byte {}",
                self.path.display(),
                self.pos
            )));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| {
            Error::Checkpoint(format!("{}: invalid UTF-8 string", self.path.display()))
        })
    }
}
