//! Full-reference image quality metrics and the static ratio-fusion baseline.

use crate::error::{Error, Result};
use crate::frame::Frame;

/// PSNR reported for identical images.
pub const PSNR_CAP: f64 = 100.0;

/// Peak signal-to-noise ratio for a peak of 1, capped at [`PSNR_CAP`].
pub fn psnr(a: &Frame, b: &Frame) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::Shape(format!("psnr: {:?} vs {:?}", a.shape(), b.shape())));
    }
    let mse = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP))
}

/// Windowed SSIM parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SsimParams {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
        }
    }
}

fn gaussian_kernel(n: usize, sigma: f64) -> Vec<f64> {
    let c = (n as f64 - 1.0) / 2.0;
    let g: Vec<f64> = (0..n)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Separable "valid" filtering of a row-major plane.
fn filter_valid(plane: &[f64], h: usize, w: usize, k: &[f64]) -> (Vec<f64>, usize, usize) {
    let n = k.len();
    let (ow, oh) = (w - n + 1, h - n + 1);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..n).map(|i| k[i] * plane[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..n).map(|i| k[i] * rows[(y + i) * ow + x]).sum();
        }
    }
    (out, oh, ow)
}

/// Mean SSIM over all fully contained Gaussian windows of the luma channel.
pub fn ssim_with(a: &Frame, b: &Frame, p: &SsimParams) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::Shape(format!("ssim: {:?} vs {:?}", a.shape(), b.shape())));
    }
    let (ya, yb) = (a.luma(), b.luma());
    let (h, w) = (a.height(), a.width());
    if h < p.window || w < p.window {
        return Err(Error::Shape(format!(
            "ssim: image {h}x{w} smaller than the {}x{} window",
            p.window, p.window
        )));
    }
    let k = gaussian_kernel(p.window, p.sigma);
    let (c1, c2) = ((p.k1).powi(2), (p.k2).powi(2));
    let (xa, xb) = (ya.data(), yb.data());
    let prod = |f: &dyn Fn(usize) -> f64| (0..h * w).map(f).collect::<Vec<f64>>();
    let (mu_a, oh, ow) = filter_valid(xa, h, w, &k);
    let (mu_b, _, _) = filter_valid(xb, h, w, &k);
    let (aa, _, _) = filter_valid(&prod(&|i| xa[i] * xa[i]), h, w, &k);
    let (bb, _, _) = filter_valid(&prod(&|i| xb[i] * xb[i]), h, w, &k);
    let (ab, _, _) = filter_valid(&prod(&|i| xa[i] * xb[i]), h, w, &k);
    let mut total = 0.0;
    for i in 0..oh * ow {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = aa[i] - ma * ma;
        let vb = bb[i] - mb * mb;
        let cov = ab[i] - ma * mb;
        let num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
        let den = (ma * ma + mb * mb + c1) * (va + vb + c2);
        total += num / den;
    }
    Ok(total / (oh * ow) as f64)
}

pub fn ssim(a: &Frame, b: &Frame) -> Result<f64> {
    ssim_with(a, b, &SsimParams::default())
}

/// Division guard for [`ratio_fusion_static`].
pub const RATIO_EPS: f64 = 1e-6;

/// Aligned-scene fusion `(I_l / I_s) * I_s` with a guarded denominator.
///
/// Under exact arithmetic this returns `I_l`; it is the reference an ideal
/// aligner would reach on static scenes.
pub fn ratio_fusion_static(short: &Frame, long: &Frame) -> Result<Frame> {
    if !short.same_shape(long) {
        return Err(Error::Shape("ratio fusion inputs differ in shape".into()));
    }
    let data = short
        .data()
        .iter()
        .zip(long.data())
        .map(|(&s, &l)| (l / s.max(RATIO_EPS)) * s)
        .collect();
    Frame::new(short.channels(), short.height(), short.width(), data)
}

/// Metrics for one evaluated sample.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleMetric {
    pub name: String,
    pub psnr_db: f64,
    pub ssim: f64,
}

/// Mean PSNR/SSIM over a set of samples with the per-sample breakdown.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct MetricReport {
    pub psnr_db: f64,
    pub ssim: f64,
    pub per_sample: Vec<SampleMetric>,
}

impl MetricReport {
    pub fn from_samples(per_sample: Vec<SampleMetric>) -> Self {
        let n = per_sample.len().max(1) as f64;
        Self {
            psnr_db: per_sample.iter().map(|s| s.psnr_db).sum::<f64>() / n,
            ssim: per_sample.iter().map(|s| s.ssim).sum::<f64>() / n,
            per_sample,
        }
    }

    /// Scores `pred` against `gt` after clamping both to `[0, 1]`.
    pub fn score(name: impl Into<String>, pred: &Frame, gt: &Frame) -> Result<SampleMetric> {
        let (p, g) = (pred.clamped(), gt.clamped());
        Ok(SampleMetric {
            name: name.into(),
            psnr_db: psnr(&p, &g)?,
            ssim: ssim(&p, &g)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(c: usize) -> Frame {
        Frame::from_fn(c, 16, 16, |ch, y, x| ((y * 16 + x + ch * 7) % 97) as f64 / 97.0).unwrap()
    }

    #[test]
    fn psnr_cap_and_uniform_offset() {
        let a = ramp(3);
        assert_eq!(psnr(&a, &a).unwrap(), PSNR_CAP);
        let z = Frame::filled(1, 8, 8, 0.2).unwrap();
        let o = Frame::filled(1, 8, 8, 0.3).unwrap();
        assert!((psnr(&z, &o).unwrap() - 20.0).abs() < 1e-9);
        assert!(psnr(&a, &ramp(1)).is_err());
    }

    #[test]
    fn ssim_identity_and_errors() {
        let a = ramp(3);
        assert_eq!(ssim(&a, &a).unwrap(), 1.0);
        let small = Frame::filled(1, 10, 10, 0.5).unwrap();
        assert!(ssim(&small, &small).is_err());
    }

    #[test]
    fn ssim_of_constant_images_is_the_luminance_term() {
        // constant a and b = a + 0.5: variances vanish, contrast term is 1
        let a = Frame::filled(1, 16, 16, 0.2).unwrap();
        let b = Frame::filled(1, 16, 16, 0.7).unwrap();
        let c1 = 0.01f64.powi(2);
        let expected = (2.0 * 0.2 * 0.7 + c1) / (0.2f64.powi(2) + 0.7f64.powi(2) + c1);
        assert!((ssim(&a, &b).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn ratio_fusion_returns_long() {
        let s = ramp(3).map(|v| v * 0.1 + 0.01);
        let l = ramp(3);
        let f = ratio_fusion_static(&s, &l).unwrap();
        assert!(f.data().iter().zip(l.data()).all(|(a, b)| (a - b).abs() < 1e-6));
        let zeros = Frame::filled(3, 16, 16, 0.0).unwrap();
        let g = ratio_fusion_static(&zeros, &l).unwrap();
        assert!(g.data().iter().all(|v| v.is_finite()));
    }
}
