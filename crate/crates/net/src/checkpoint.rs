//! Single-file checkpoints.
//!
//! Layout, little-endian:
//!
//! ```text
//! magic "EDEICKPT" | version u32 | config length u32 | config (key=value text)
//! | tensor count u32 | per tensor: name length u16, name, shape 4 x u32, f64 values
//! | FNV-1a 64 checksum of everything before it
//! ```

use std::path::Path;

use edei_core::io::write_atomic;
use edei_core::kv::KvMap;

use crate::error::{NetError, Result};
use crate::model::{EdeiNet, ModelConfig};
use crate::tensor::{Scalar, Tensor};

pub const MAGIC: &[u8; 8] = b"EDEICKPT";
pub const VERSION: u32 = 1;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

pub fn encode<S: Scalar>(net: &EdeiNet<S>) -> Vec<u8> {
    let mut kv = net.config().to_kv();
    kv.set("checkpoint.stage", net.stage_done());
    let text = kv.to_text();
    let params = net.params();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(text.len() as u32).to_le_bytes());
    out.extend_from_slice(text.as_bytes());
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for id in params.ids() {
        let name = params.name(id).as_bytes();
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name);
        let t = params.get(id);
        for d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.f64().to_le_bytes());
        }
    }
    let sum = fnv1a(&out);
    out.extend_from_slice(&sum.to_le_bytes());
    out
}

/// Writes `net` atomically.
pub fn save<S: Scalar>(net: &EdeiNet<S>, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_atomic(path, &encode(net))?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn err(&self, field: &str, msg: impl Into<String>) -> NetError {
        NetError::Checkpoint {
            path: self.path.to_path_buf(),
            field: field.to_string(),
            msg: msg.into(),
        }
    }

    fn take(&mut self, n: usize, field: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(self.err(field, "truncated"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, field: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, field)?.try_into().unwrap()))
    }
    fn u32(&mut self, field: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, field)?.try_into().unwrap()))
    }
}

/// Parses checkpoint bytes; `path` only labels errors.
pub fn decode<S: Scalar>(bytes: &[u8], path: &Path) -> Result<EdeiNet<S>> {
    let mut r = Reader { bytes, pos: 0, path };
    if r.take(8, "magic")? != MAGIC {
        return Err(r.err("magic", "not a checkpoint file"));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(r.err("version", format!("unsupported version {version}, expected {VERSION}")));
    }
    if bytes.len() < 8 {
        return Err(r.err("checksum", "truncated"));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    if fnv1a(body) != u64::from_le_bytes(tail.try_into().unwrap()) {
        return Err(r.err("checksum", "content does not match its checksum"));
    }
    r.bytes = body;
    let len = r.u32("config")? as usize;
    let text = std::str::from_utf8(r.take(len, "config")?).map_err(|_| r.err("config", "not UTF-8"))?;
    let kv = KvMap::parse(text).map_err(|e| r.err("config", e.to_string()))?;
    let cfg = ModelConfig::from_kv(&kv).map_err(|e| r.err("config", e.to_string()))?;
    let stage: u8 = kv
        .get_or("checkpoint.stage", 0)
        .map_err(|e| r.err("checkpoint.stage", e.to_string()))?;
    let mut net = EdeiNet::<S>::new(&cfg, 0).map_err(|e| r.err("config", e.to_string()))?;
    net.set_stage_done(stage);
    let count = r.u32("tensor count")? as usize;
    if count != net.params().len() {
        return Err(r.err(
            "tensor count",
            format!("{count} tensors, the configured model has {}", net.params().len()),
        ));
    }
    let mut seen = vec![false; count];
    for _ in 0..count {
        let n = r.u16("tensor name")? as usize;
        let name = std::str::from_utf8(r.take(n, "tensor name")?)
            .map_err(|_| r.err("tensor name", "not UTF-8"))?
            .to_string();
        let id = net
            .params()
            .find(&name)
            .ok_or_else(|| r.err(&name, "unknown parameter"))?;
        if std::mem::replace(&mut seen[id.index()], true) {
            return Err(r.err(&name, "duplicate parameter"));
        }
        let mut shape = [0usize; 4];
        for d in &mut shape {
            *d = r.u32(&name)? as usize;
        }
        let expected = net.params().get(id).shape();
        if shape != expected {
            return Err(r.err(&name, format!("shape {shape:?}, expected {expected:?}")));
        }
        let numel: usize = shape.iter().product();
        let raw = r.take(numel * 8, &name)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| S::of(f64::from_le_bytes(c.try_into().unwrap())))
            .collect();
        *net.params_mut().get_mut(id) = Tensor::from_vec(shape, data);
    }
    if r.pos != body.len() {
        return Err(r.err("trailer", "unexpected bytes after the last tensor"));
    }
    Ok(net)
}

pub fn load<S: Scalar>(path: &Path) -> Result<EdeiNet<S>> {
    let bytes = std::fs::read(path).map_err(|e| NetError::Checkpoint {
        path: path.to_path_buf(),
        field: "file".into(),
        msg: e.to_string(),
    })?;
    decode(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ModelConfig {
        ModelConfig {
            base_channels: 4,
            num_scales: 1,
            attn_heads: 1,
            dcn_groups: 1,
            blocks_per_scale: 1,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let mut net = EdeiNet::<f32>::new(&tiny(), 3).unwrap();
        net.params_mut().randomize(5, 0.3);
        net.set_stage_done(1);
        let back: EdeiNet<f32> = decode(&encode(&net), Path::new("mem")).unwrap();
        assert_eq!(back.stage_done(), 1);
        assert_eq!(back.config(), net.config());
        for id in net.params().ids() {
            assert_eq!(back.params().get(id), net.params().get(id));
        }
    }

    #[test]
    fn corruption_names_the_field() {
        let net = EdeiNet::<f32>::new(&tiny(), 3).unwrap();
        let mut bytes = encode(&net);
        let p = Path::new("x.ckpt");
        let e = decode::<f32>(&bytes[..6], p).unwrap_err().to_string();
        assert!(e.contains("magic"), "{e}");
        bytes[8] = 9;
        assert!(decode::<f32>(&bytes, p).unwrap_err().to_string().contains("version"));
        bytes[8] = 1;
        let n = bytes.len();
        bytes[n / 2] ^= 0xff;
        assert!(decode::<f32>(&bytes, p).unwrap_err().to_string().contains("checksum"));
    }
}
