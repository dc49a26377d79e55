//! Packed little-endian event files.
//!
//! Header (16 bytes): magic `EDEI`, version `u16`, height `u16`, width `u16`,
//! event count as a 48-bit unsigned integer. Each record (14 bytes) is
//! `t_us: u64, x: u16, y: u16, p: i8, pad: i8`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::event::{Event, EventStream};

pub const MAGIC: [u8; 4] = *b"EDEI";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 16;
pub const RECORD_LEN: usize = 14;
const MAX_COUNT: u64 = (1 << 48) - 1;

/// Encodes the events of `stream`. Timestamps are rounded to microseconds and
/// must be non-negative. The time span is not part of the file.
pub fn encode(stream: &EventStream) -> Result<Vec<u8>> {
    let (h, w) = stream.sensor_shape();
    if h > u16::MAX as usize || w > u16::MAX as usize {
        return Err(Error::Shape(format!("sensor {h}x{w} does not fit u16")));
    }
    let count = stream.len() as u64;
    if count > MAX_COUNT {
        return Err(Error::Shape(format!("{count} events exceed the 48-bit count field")));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + RECORD_LEN * stream.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(h as u16).to_le_bytes());
    out.extend_from_slice(&(w as u16).to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes()[..6]);
    for e in stream.events() {
        if !(e.t >= 0.0) {
            return Err(Error::param("events", format!("negative timestamp {}", e.t)));
        }
        let t_us = (e.t * 1e6).round() as u64;
        out.extend_from_slice(&t_us.to_le_bytes());
        out.extend_from_slice(&e.x.to_le_bytes());
        out.extend_from_slice(&e.y.to_le_bytes());
        out.push(e.p as u8);
        out.push(0);
    }
    Ok(out)
}

/// Decoded file contents: sensor shape and events with times in seconds.
pub struct EvtFile {
    pub height: usize,
    pub width: usize,
    pub events: Vec<Event>,
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<EvtFile> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(path, "truncated header"));
    }
    if bytes[..4] != MAGIC {
        return Err(Error::format(path, "bad magic"));
    }
    let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]);
    let version = u16_at(4);
    if version != VERSION {
        return Err(Error::format(path, format!("unsupported version {version}")));
    }
    let height = u16_at(6) as usize;
    let width = u16_at(8) as usize;
    let mut count_bytes = [0u8; 8];
    count_bytes[..6].copy_from_slice(&bytes[10..16]);
    let count = u64::from_le_bytes(count_bytes) as usize;
    let body = &bytes[HEADER_LEN..];
    if body.len() != count * RECORD_LEN {
        return Err(Error::format(
            path,
            format!("header announces {count} events but body holds {} bytes", body.len()),
        ));
    }
    let events = body
        .chunks_exact(RECORD_LEN)
        .map(|r| {
            let t_us = u64::from_le_bytes(r[..8].try_into().unwrap());
            Event {
                t: t_us as f64 / 1e6,
                x: u16::from_le_bytes([r[8], r[9]]),
                y: u16::from_le_bytes([r[10], r[11]]),
                p: r[12] as i8,
            }
        })
        .collect();
    Ok(EvtFile { height, width, events })
}

pub fn write(path: &Path, stream: &EventStream) -> Result<()> {
    super::write_atomic(path, &encode(stream)?)?;
    Ok(())
}

pub fn read(path: &Path) -> Result<EvtFile> {
    decode(&std::fs::read(path)?, path)
}
