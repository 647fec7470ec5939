//! Versioned binary checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic "RTSFCKPT" | version u32 | config sha256 [32] | config toml (u32 len, bytes)
//! block count u32 | per block: name (u32 len, utf-8), rank u32, dims u64 x rank, f32 x numel
//! ```

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::autodiff::{numel, ParamStore};
use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig};

pub const MAGIC: &[u8; 8] = b"RTSFCKPT";
pub const VERSION: u32 = 1;

/// Decoded checkpoint contents.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub config_hash: [u8; 32],
    pub params: ParamStore,
}

impl Checkpoint {
    pub fn into_model(self) -> Result<Model> {
        Model::with_params(self.config, &self.params)
    }
}

pub fn config_toml(cfg: &ModelConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| Error::config(format!("cannot serialize model config: {e}")))
}

/// SHA-256 of the canonical TOML rendering of `cfg`.
pub fn config_hash(cfg: &ModelConfig) -> Result<[u8; 32]> {
    Ok(Sha256::digest(config_toml(cfg)?.as_bytes()).into())
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len());
    out.extend_from_slice(s.as_bytes());
}

pub fn to_bytes(model: &Model) -> Result<Vec<u8>> {
    let text = config_toml(model.config())?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&Sha256::digest(text.as_bytes()));
    put_str(&mut out, &text);
    put_u32(&mut out, model.params().len());
    for (_, p) in model.params().iter() {
        put_str(&mut out, &p.name);
        put_u32(&mut out, p.shape.len());
        for &d in &p.shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in &p.data {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Input(format!("checkpoint truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().unwrap());
        usize::try_from(v).map_err(|_| Error::Input("checkpoint dimension overflows".into()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Input("checkpoint string is not utf-8".into()))
    }
}

pub fn from_bytes(buf: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(8).ok() != Some(&MAGIC[..]) {
        return Err(Error::Input("not an rtsfnet checkpoint (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION as usize {
        return Err(Error::Input(format!("unsupported checkpoint version {version} (expected {VERSION})")));
    }
    let hash: [u8; 32] = r.take(32)?.try_into().unwrap();
    let text = r.string()?;
    if <[u8; 32]>::from(Sha256::digest(text.as_bytes())) != hash {
        return Err(Error::Input("checkpoint config hash does not match its embedded config".into()));
    }
    let config: ModelConfig =
        toml::from_str(&text).map_err(|e| Error::Input(format!("checkpoint config does not parse: {e}")))?;
    let count = r.u32()?;
    let mut params = ParamStore::new();
    for _ in 0..count {
        let name = r.string()?;
        let rank = r.u32()?;
        let shape = (0..rank).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
        let n = numel(&shape);
        let raw = r.take(n.checked_mul(4).ok_or_else(|| Error::Input("checkpoint block too large".into()))?)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        params.add(name, shape, data)?;
    }
    if r.pos != buf.len() {
        return Err(Error::Input(format!("{} trailing bytes after checkpoint", buf.len() - r.pos)));
    }
    Ok(Checkpoint {
        config,
        config_hash: hash,
        params,
    })
}

pub fn save(model: &Model, path: &Path) -> Result<()> {
    std::fs::write(path, to_bytes(model)?).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Reads a checkpoint; a missing file is a usage error.
pub fn read(path: &Path) -> Result<Checkpoint> {
    if !path.exists() {
        return Err(Error::usage(format!("checkpoint {} does not exist", path.display())));
    }
    let buf = std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    from_bytes(&buf)
}

pub fn load(path: &Path) -> Result<Model> {
    read(path)?.into_model()
}
