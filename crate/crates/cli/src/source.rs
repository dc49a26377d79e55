//! Where a sequence comes from, and its temporally upsampled form.
//!
//! A sequence is either a procedural scene or a directory of PNG frames.
//! `sequence.cfg` in each dataset sequence records the source and recipe so
//! harnesses can regenerate samples. When `EDEI_CACHE` names a directory,
//! upsampled sequences are cached there as raw little-endian `f64` blobs.

use std::path::{Path, PathBuf};

use edei_core::io::img;
use edei_core::kv::KvMap;
use edei_core::synthesis::{interpolate, procedural_clip, SceneConfig, SynthesisRecipe};
use edei_core::{Frame, FrameSequence};

use crate::config::SYNTH_PREFIX;
use crate::error::{CliError, Result};
use crate::manifest::sha256_hex;

pub const SEQUENCE_CFG: &str = "sequence.cfg";
pub const CACHE_ENV: &str = "EDEI_CACHE";
const CACHE_MAGIC: &[u8; 8] = b"EDEISEQ1";

#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    Procedural(SceneConfig),
    Frames(PathBuf),
}

impl Source {
    pub fn to_kv(&self) -> KvMap {
        let mut m = KvMap::new();
        match self {
            Source::Procedural(s) => {
                m.set("source", "procedural")
                    .set("source.height", s.height)
                    .set("source.width", s.width)
                    .set("source.frames", s.frames)
                    .set_f64("source.fps", s.fps)
                    .set_f64("source.velocity_y", s.velocity.0)
                    .set_f64("source.velocity_x", s.velocity.1)
                    .set("source.waves", s.waves)
                    .set("source.seed", s.seed);
            }
            Source::Frames(p) => {
                m.set("source", "frames").set("source.path", p.display());
            }
        }
        m
    }

    pub fn from_kv(m: &KvMap) -> Result<Self> {
        match m.require::<String>("source")?.as_str() {
            "procedural" => Ok(Source::Procedural(SceneConfig {
                height: m.require("source.height")?,
                width: m.require("source.width")?,
                frames: m.require("source.frames")?,
                fps: m.require("source.fps")?,
                velocity: (m.require("source.velocity_y")?, m.require("source.velocity_x")?),
                waves: m.require("source.waves")?,
                seed: m.require("source.seed")?,
            })),
            "frames" => Ok(Source::Frames(PathBuf::from(m.require::<String>("source.path")?))),
            other => Err(CliError::Config(format!("unknown source kind `{other}`"))),
        }
    }

    /// The clip at its native frame rate.
    pub fn load(&self, fps: f64) -> Result<FrameSequence> {
        match self {
            Source::Procedural(s) => Ok(procedural_clip(s)?),
            Source::Frames(dir) => {
                let files = png_files(dir)?;
                if files.is_empty() {
                    return Err(CliError::Data(format!("{}: no PNG frames", dir.display())));
                }
                let frames = files
                    .iter()
                    .map(|f| img::read_png(f))
                    .collect::<edei_core::Result<Vec<Frame>>>()?;
                Ok(FrameSequence::uniform(frames, fps, 0.0)?)
            }
        }
    }

    /// The clip upsampled by `recipe.interp_factor`, through the cache when enabled.
    pub fn upsampled(&self, recipe: &SynthesisRecipe) -> Result<FrameSequence> {
        let Some(dir) = std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()) else {
            return Ok(interpolate(&self.load(recipe.source_fps)?, recipe.interp_factor)?);
        };
        let path = Path::new(&dir).join(format!("{}.seq", self.cache_key(recipe)?));
        if let Ok(bytes) = std::fs::read(&path) {
            match decode_sequence(&bytes) {
                Some(seq) => {
                    log::debug!("cache hit {}", path.display());
                    return Ok(seq);
                }
                None => log::warn!("ignoring unreadable cache entry {}", path.display()),
            }
        }
        let seq = interpolate(&self.load(recipe.source_fps)?, recipe.interp_factor)?;
        std::fs::create_dir_all(&dir)?;
        edei_core::io::write_atomic(&path, &encode_sequence(&seq))?;
        Ok(seq)
    }

    fn cache_key(&self, recipe: &SynthesisRecipe) -> Result<String> {
        let mut text = self.to_kv().to_text();
        text.push_str(&format!(
            "interp_factor={}\nsource_fps={:?}\n",
            recipe.interp_factor, recipe.source_fps
        ));
        if let Source::Frames(dir) = self {
            for f in png_files(dir)? {
                text.push_str(&sha256_hex(&std::fs::read(&f)?));
                text.push('\n');
            }
        }
        Ok(sha256_hex(text.as_bytes()))
    }
}

/// PNG files directly inside `dir`, sorted by name.
pub fn png_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .collect();
    v.sort();
    Ok(v)
}

fn encode_sequence(seq: &FrameSequence) -> Vec<u8> {
    let (c, h, w) = seq.frame_shape();
    let mut out = CACHE_MAGIC.to_vec();
    for v in [seq.len(), c, h, w] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    for t in seq.timestamps() {
        out.extend_from_slice(&t.to_le_bytes());
    }
    for f in seq.frames() {
        for v in f.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn decode_sequence(bytes: &[u8]) -> Option<FrameSequence> {
    let rest = bytes.strip_prefix(CACHE_MAGIC)?;
    let mut words = rest.chunks_exact(8).map(|b| <[u8; 8]>::try_from(b).expect("8 bytes"));
    let mut header = [0usize; 4];
    for h in &mut header {
        *h = u64::from_le_bytes(words.next()?) as usize;
    }
    let [n, c, h, w] = header;
    let per = c.checked_mul(h)?.checked_mul(w)?;
    if rest.len() != 8 * (4 + n + n * per) {
        return None;
    }
    let mut vals = words.map(f64::from_le_bytes);
    let ts: Vec<f64> = vals.by_ref().take(n).collect();
    let frames = (0..n)
        .map(|_| Frame::new(c, h, w, vals.by_ref().take(per).collect()).ok())
        .collect::<Option<Vec<_>>>()?;
    FrameSequence::new(frames, ts).ok()
}

/// `sequence.cfg` contents: the source plus the recipe under the synth prefix.
pub fn sequence_cfg(source: &Source, recipe: &SynthesisRecipe) -> KvMap {
    let mut m = source.to_kv();
    let r = recipe.to_kv();
    for k in r.keys() {
        m.set(format!("{SYNTH_PREFIX}{k}"), r.raw(k).unwrap_or_default());
    }
    m
}

pub fn read_sequence_cfg(path: &Path) -> Result<(Source, SynthesisRecipe)> {
    let m = KvMap::load(path)?;
    let mut r = KvMap::new();
    for k in m.keys() {
        if let Some(rest) = k.strip_prefix(SYNTH_PREFIX) {
            r.set(rest, m.raw(k).unwrap_or_default());
        }
    }
    Ok((Source::from_kv(&m)?, SynthesisRecipe::from_kv(&r)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cache_blob_round_trips() {
        let s = procedural_clip(&SceneConfig {
            height: 8,
            width: 10,
            frames: 3,
            ..Default::default()
        })
        .unwrap();
        let b = encode_sequence(&s);
        assert_eq!(decode_sequence(&b).unwrap(), s);
        assert!(decode_sequence(&b[..b.len() - 1]).is_none());
        assert!(decode_sequence(b"EDEISEQ0").is_none());
    }

    #[test]
    fn sequence_cfg_round_trips() {
        let src = Source::Procedural(SceneConfig {
            seed: 77,
            velocity: (0.25, -1.0),
            ..Default::default()
        });
        let recipe = SynthesisRecipe {
            rng_seed: 5,
            exposure_ratio: 5.0,
            ..Default::default()
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(SEQUENCE_CFG);
        sequence_cfg(&src, &recipe).save(&p).unwrap();
        let (s2, r2) = read_sequence_cfg(&p).unwrap();
        assert_eq!(s2, src);
        assert_eq!(r2, recipe);
    }
}
