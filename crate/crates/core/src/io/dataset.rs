//! Dataset directory layout.
//!
//! ```text
//! <root>/<sequence>/<index>/short.img   16-bit PNG
//!                          /long.img
//!                          /gt.img      (optional for inference inputs)
//!                          /events.evt  packed events
//!                          /meta.cfg    key=value timing and synthesis parameters
//! ```

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::event::EventStream;
use crate::frame::Frame;
use crate::kv::KvMap;
use crate::sample::ExposureSample;
use crate::timing::ExposureTiming;

use super::{evt, img};

pub const SHORT: &str = "short.img";
pub const LONG: &str = "long.img";
pub const GT: &str = "gt.img";
pub const EVENTS: &str = "events.evt";
pub const META: &str = "meta.cfg";

/// Directory name for sample `index` inside a sequence.
pub fn index_dir(index: usize) -> String {
    format!("{index:06}")
}

/// Writes `sample` into `dir`, adding `extra` keys to `meta.cfg`.
pub fn write_sample(dir: &Path, sample: &ExposureSample, extra: &KvMap) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let q = sample.quantized();
    img::write_png16(&dir.join(SHORT), &q.short)?;
    img::write_png16(&dir.join(LONG), &q.long)?;
    img::write_png16(&dir.join(GT), &q.gt)?;
    evt::write(&dir.join(EVENTS), &q.events)?;
    let mut meta = extra.clone();
    let (t0, t1) = q.events.t_span();
    meta.set_f64("t_s", q.timing.t_s)
        .set_f64("t_b", q.timing.t_b)
        .set_f64("t_e", q.timing.t_e)
        .set_f64("delta_t", q.timing.delta_t)
        .set_f64("events_t_start", t0)
        .set_f64("events_t_end", t1)
        .set("seed", q.seed)
        .set("height", q.gt.height())
        .set("width", q.gt.width());
    super::write_atomic(&dir.join(META), meta.to_text().as_bytes())?;
    Ok(())
}

/// Everything stored for one sample; `gt` is absent for unlabeled inputs.
#[derive(Clone, Debug)]
pub struct SampleParts {
    pub short: Frame,
    pub long: Frame,
    pub gt: Option<Frame>,
    pub events: EventStream,
    pub timing: ExposureTiming,
    pub seed: u64,
    pub meta: KvMap,
}

impl SampleParts {
    pub fn into_sample(self) -> Option<ExposureSample> {
        Some(ExposureSample {
            gt: self.gt?,
            short: self.short,
            long: self.long,
            events: self.events,
            timing: self.timing,
            seed: self.seed,
        })
    }
}

pub fn read_parts(dir: &Path) -> Result<SampleParts> {
    let meta = KvMap::load(&dir.join(META))?;
    let timing = ExposureTiming {
        t_s: meta.require("t_s")?,
        t_b: meta.require("t_b")?,
        t_e: meta.require("t_e")?,
        delta_t: meta.require("delta_t")?,
    };
    let seed = meta.get_or("seed", 0u64)?;
    let short = img::read_png(&dir.join(SHORT))?;
    let long = img::read_png(&dir.join(LONG))?;
    let gt_path = dir.join(GT);
    let gt = if gt_path.exists() {
        Some(img::read_png(&gt_path)?)
    } else {
        None
    };
    let ev_path = dir.join(EVENTS);
    let file = evt::read(&ev_path)?;
    let t0: f64 = meta.require("events_t_start")?;
    let t1: f64 = meta.require("events_t_end")?;
    if (file.height, file.width) != (short.height(), short.width()) {
        return Err(Error::format(&ev_path, "sensor shape differs from images"));
    }
    let events = EventStream::new(file.events, file.height, file.width, t0, t1)
        .map_err(|e| Error::format(&ev_path, e.to_string()))?;
    Ok(SampleParts {
        short,
        long,
        gt,
        events,
        timing,
        seed,
        meta,
    })
}

/// Reads a labeled sample; fails if `gt.img` is missing.
pub fn read_sample(dir: &Path) -> Result<ExposureSample> {
    read_parts(dir)?
        .into_sample()
        .ok_or_else(|| Error::format(dir.join(GT), "missing ground truth"))
}

/// A sample location inside a dataset root.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct SampleRef {
    pub sequence: String,
    pub index: String,
    pub path: PathBuf,
}

/// All sample directories under `root`, sorted by sequence then index.
pub fn list_samples(root: &Path) -> Result<Vec<SampleRef>> {
    let mut out = Vec::new();
    for seq in sorted_dirs(root)? {
        for idx in sorted_dirs(&seq)? {
            if idx.join(META).exists() {
                out.push(SampleRef {
                    sequence: file_name(&seq),
                    index: file_name(&idx),
                    path: idx,
                });
            }
        }
    }
    out.sort();
    Ok(out)
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn sorted_dirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    v.sort();
    Ok(v)
}
