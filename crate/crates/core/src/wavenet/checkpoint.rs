//! Flat parameter container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic    8 bytes  "WNVNNPRM"
//! version  u32      1
//! config   8 × u32  stacks, layers_per_stack, residual_channels,
//!                   skip_channels, input_taps, post_taps, vnn_taps,
//!                   quadratic_units
//! count    u32      number of tensors
//! count ×  { name_len u16, name (UTF-8), ndim u8, dims u32 × ndim,
//!            offset u64 (elements) }
//! total    u64      number of parameters
//! payload  f32 × total
//! ```

use std::io::{Read, Write};
use std::path::Path;

use super::config::ModelConfig;
use super::params::WaveNetVnnParams;
use crate::error::{AncError, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"WNVNNPRM";
pub const CHECKPOINT_VERSION: u32 = 1;

fn config_fields(c: &ModelConfig) -> [usize; 8] {
    [
        c.stacks,
        c.layers_per_stack,
        c.residual_channels,
        c.skip_channels,
        c.input_taps,
        c.post_taps,
        c.vnn_taps,
        c.quadratic_units,
    ]
}

pub fn encode_checkpoint(params: &WaveNetVnnParams) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    for v in config_fields(params.config()) {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&(params.tensors().len() as u32).to_le_bytes());
    for t in params.tensors() {
        out.extend_from_slice(&(t.name.len() as u16).to_le_bytes());
        out.extend_from_slice(t.name.as_bytes());
        out.push(t.shape.len() as u8);
        for &d in &t.shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.extend_from_slice(&(t.offset as u64).to_le_bytes());
    }
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for &v in params.as_slice() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(AncError::Format("checkpoint is truncated".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<WaveNetVnnParams> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    if c.take(8)? != CHECKPOINT_MAGIC {
        return Err(AncError::Format("not a parameter checkpoint (bad magic)".into()));
    }
    let version = c.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(AncError::Format(format!("unsupported checkpoint version {version}")));
    }
    let mut f = [0usize; 8];
    for v in &mut f {
        *v = c.u32()? as usize;
    }
    let config = ModelConfig {
        stacks: f[0],
        layers_per_stack: f[1],
        residual_channels: f[2],
        skip_channels: f[3],
        input_taps: f[4],
        post_taps: f[5],
        vnn_taps: f[6],
        quadratic_units: f[7],
    };
    let expected = WaveNetVnnParams::zeros(&config).map_err(|e| AncError::Format(format!("checkpoint geometry: {e}")))?;
    let count = c.u32()? as usize;
    if count != expected.tensors().len() {
        return Err(AncError::Format("checkpoint manifest does not match its geometry".into()));
    }
    for spec in expected.tensors() {
        let name_len = c.u16()? as usize;
        let name = std::str::from_utf8(c.take(name_len)?).map_err(|_| AncError::Format("tensor name is not UTF-8".into()))?;
        let ndim = c.u8()? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(c.u32()? as usize);
        }
        let offset = c.u64()? as usize;
        if name != spec.name || shape != spec.shape || offset != spec.offset {
            return Err(AncError::Format(format!("manifest entry '{name}' does not match expected '{}'", spec.name)));
        }
    }
    let total = c.u64()? as usize;
    if total != expected.len() {
        return Err(AncError::Format(format!("payload has {total} values, geometry needs {}", expected.len())));
    }
    let payload = c.take(total * 4)?;
    if c.pos != bytes.len() {
        return Err(AncError::Format("trailing bytes after payload".into()));
    }
    let data = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64)
        .collect();
    WaveNetVnnParams::from_flat(&config, data).map_err(|e| AncError::Format(format!("checkpoint payload: {e}")))
}

pub fn save_checkpoint(params: &WaveNetVnnParams, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| AncError::io(path, e))?;
    f.write_all(&encode_checkpoint(params)).map_err(|e| AncError::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<WaveNetVnnParams> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| AncError::io(path, e))?;
    decode_checkpoint(&bytes)
}

/// `name,index,value` rows for diffing two parameter sets.
pub fn write_params_csv(params: &WaveNetVnnParams, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| AncError::Format(format!("{}: {e}", path.display())))?;
    let err = |e: csv::Error| AncError::Format(format!("{}: {e}", path.display()));
    w.write_record(["name", "index", "value"]).map_err(err)?;
    for t in params.tensors() {
        for (i, v) in params.as_slice()[t.offset..t.offset + t.len()].iter().enumerate() {
            w.write_record([t.name.as_str(), &i.to_string(), &format!("{v:.9e}")]).map_err(err)?;
        }
    }
    w.flush().map_err(|e| AncError::io(path, e))
}
