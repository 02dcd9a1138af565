//! Checkpoint file: magic, version (u32 LE), config JSON length (u32 LE) and
//! bytes, parameter count (u64 LE), parameters (f64 LE).

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::flow::{DenoiserConfig, ToyDenoiser};

pub const CHECKPOINT_MAGIC: [u8; 8] = *b"VSFLOWCK";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn encode_checkpoint(model: &ToyDenoiser) -> Vec<u8> {
    let config = serde_json::to_vec(model.config()).expect("config serializes");
    let params = model.params();
    let mut out = Vec::with_capacity(8 + 4 + 4 + config.len() + 8 + 8 * params.len());
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(config.len() as u32).to_le_bytes());
    out.extend_from_slice(&config);
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for p in params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            format!("truncated at byte {} (needed {n} more, {} left)", self.pos, self.bytes.len() - self.pos)
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> std::result::Result<ToyDenoiser, String> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != CHECKPOINT_MAGIC {
        return Err("bad magic".into());
    }
    let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let len = u32::from_le_bytes(r.take(4)?.try_into().unwrap()) as usize;
    let config: DenoiserConfig = serde_json::from_slice(r.take(len)?).map_err(|e| format!("config: {e}"))?;
    let count = u64::from_le_bytes(r.take(8)?.try_into().unwrap());
    if count != config.param_count() as u64 {
        return Err(format!("{count} parameters, config implies {}", config.param_count()));
    }
    let raw = r.take(8 * count as usize)?;
    if r.pos != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - r.pos));
    }
    let params = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    ToyDenoiser::from_params(config, params).map_err(|e| e.to_string())
}

pub fn save_checkpoint(model: &ToyDenoiser, path: &Path) -> Result<()> {
    fs::write(path, encode_checkpoint(model)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<ToyDenoiser> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes).map_err(|reason| Error::Format {
        path: path.to_path_buf(),
        reason,
    })
}

/// `step,loss` with a header line.
pub fn write_loss_csv(trace: &[f64], path: &Path) -> Result<()> {
    let mut s = String::from("step,loss\n");
    for (i, l) in trace.iter().enumerate() {
        s += &format!("{i},{l:e}\n");
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}
