//! Lossless 16-bit PNG images (stored as `.img` in the dataset layout) and
//! 8-bit export for previews.

use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageFormat, Luma, Rgb};

use crate::error::{Error, Result};
use crate::frame::Frame;

fn to_u16(v: f64) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0).round() as u16
}

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn interleaved<T>(f: &Frame, conv: impl Fn(f64) -> T) -> Vec<T> {
    let (c, h, w) = f.shape();
    let mut out = Vec::with_capacity(c * h * w);
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                out.push(conv(f.at(ch, y, x)));
            }
        }
    }
    out
}

/// Encodes `f` (clamped to `[0, 1]`) as a 16-bit PNG.
pub fn encode_png16(f: &Frame) -> Result<Vec<u8>> {
    let (c, h, w) = f.shape();
    let data = interleaved(f, to_u16);
    let img = if c == 1 {
        DynamicImage::ImageLuma16(ImageBuffer::<Luma<u16>, _>::from_raw(w as u32, h as u32, data).unwrap())
    } else {
        DynamicImage::ImageRgb16(ImageBuffer::<Rgb<u16>, _>::from_raw(w as u32, h as u32, data).unwrap())
    };
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png)?;
    Ok(buf.into_inner())
}

/// Encodes `f` (clamped to `[0, 1]`) as an 8-bit PNG.
pub fn encode_png8(f: &Frame) -> Result<Vec<u8>> {
    let (c, h, w) = f.shape();
    let data = interleaved(f, to_u8);
    let img = if c == 1 {
        DynamicImage::ImageLuma8(ImageBuffer::from_raw(w as u32, h as u32, data).unwrap())
    } else {
        DynamicImage::ImageRgb8(ImageBuffer::from_raw(w as u32, h as u32, data).unwrap())
    };
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png)?;
    Ok(buf.into_inner())
}

pub fn write_png16(path: &Path, f: &Frame) -> Result<()> {
    super::write_atomic(path, &encode_png16(f)?)?;
    Ok(())
}

pub fn write_png8(path: &Path, f: &Frame) -> Result<()> {
    super::write_atomic(path, &encode_png8(f)?)?;
    Ok(())
}

/// Decodes a PNG of any bit depth. Grayscale stays single-channel, anything
/// else becomes RGB; alpha is dropped.
pub fn decode_png(bytes: &[u8], path: &Path) -> Result<Frame> {
    let img =
        image::load_from_memory_with_format(bytes, ImageFormat::Png).map_err(|e| Error::format(path, e.to_string()))?;
    let gray = matches!(
        img.color(),
        image::ColorType::L8 | image::ColorType::L16 | image::ColorType::La8 | image::ColorType::La16
    );
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (c, raw) = if gray {
        (1, img.into_luma16().into_raw())
    } else {
        (3, img.into_rgb16().into_raw())
    };
    let mut data = vec![0.0; c * h * w];
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                data[(ch * h + y) * w + x] = raw[(y * w + x) * c + ch] as f64 / 65535.0;
            }
        }
    }
    Frame::new(c, h, w, data).map_err(|e| Error::format(path, e.to_string()))
}

pub fn read_png(path: &Path) -> Result<Frame> {
    decode_png(&std::fs::read(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sixteen_bit_round_trip_is_exact_on_grid() {
        let f = Frame::from_fn(3, 9, 11, |c, y, x| {
            ((c * 1000 + y * 37 + x * 101) % 65536) as f64 / 65535.0
        })
        .unwrap();
        let back = decode_png(&encode_png16(&f).unwrap(), Path::new("t")).unwrap();
        assert_eq!(back, f);
        let g = Frame::from_fn(1, 8, 8, |_, y, x| ((y * 8 + x) * 1000) as f64 / 65535.0).unwrap();
        assert_eq!(decode_png(&encode_png16(&g).unwrap(), Path::new("t")).unwrap(), g);
    }

    #[test]
    fn eight_bit_export_clamps() {
        let f = Frame::from_fn(1, 8, 8, |_, y, _| y as f64 - 3.0).unwrap();
        let back = decode_png(&encode_png8(&f).unwrap(), Path::new("t")).unwrap();
        assert_eq!(back.at(0, 0, 0), 0.0);
        assert_eq!(back.at(0, 7, 0), 1.0);
    }
}
