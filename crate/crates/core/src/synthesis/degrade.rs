//! Low-light darkening and signal-dependent noise.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::rng::{self, Stream};

/// Darkening `J = beta * (alpha * L)^gamma` and noise `N(J, sigma_p * J + sigma_g^2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DegradationParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub sigma_p: f64,
    pub sigma_g: f64,
}

impl DegradationParams {
    /// No darkening, no noise.
    pub const IDENTITY: DegradationParams = DegradationParams {
        alpha: 1.0,
        beta: 1.0,
        gamma: 1.0,
        sigma_p: 0.0,
        sigma_g: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::param("alpha", format!("{} not in (0, 1]", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::param("beta", format!("{} not in (0, 1]", self.beta)));
        }
        if !(self.gamma >= 1.0) {
            return Err(Error::param("gamma", format!("{} < 1", self.gamma)));
        }
        if !(self.sigma_p >= 0.0) {
            return Err(Error::param("sigma_p", "noise level must be non-negative"));
        }
        if !(self.sigma_g >= 0.0) {
            return Err(Error::param("sigma_g", "noise level must be non-negative"));
        }
        Ok(())
    }

    #[inline]
    pub fn darken(&self, l: f64) -> f64 {
        self.beta * (self.alpha * l).powf(self.gamma)
    }

    #[inline]
    pub fn variance(&self, j: f64) -> f64 {
        self.sigma_p * j + self.sigma_g * self.sigma_g
    }
}

/// Closed interval for uniform sampling; `lo == hi` pins the value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UniformRange {
    pub lo: f64,
    pub hi: f64,
}

impl UniformRange {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }
    pub const fn fixed(v: f64) -> Self {
        Self { lo: v, hi: v }
    }
    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        let u: f64 = rng.random();
        self.lo + (self.hi - self.lo) * u
    }
}

/// Per-sample sampling ranges for [`DegradationParams`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DegradationRanges {
    pub alpha: UniformRange,
    pub beta: UniformRange,
    pub gamma: UniformRange,
    pub sigma_p: UniformRange,
    pub sigma_g: UniformRange,
}

impl Default for DegradationRanges {
    /// `alpha ~ U(0.9, 1)`, `beta ~ U(0.5, 1)`, `gamma ~ U(2, 3.5)`,
    /// `sigma_p, sigma_g ~ U(0.05, 0.1)`.
    fn default() -> Self {
        Self {
            alpha: UniformRange::new(0.9, 1.0),
            beta: UniformRange::new(0.5, 1.0),
            gamma: UniformRange::new(2.0, 3.5),
            sigma_p: UniformRange::new(0.05, 0.1),
            sigma_g: UniformRange::new(0.05, 0.1),
        }
    }
}

impl DegradationRanges {
    pub fn fixed(p: DegradationParams) -> Self {
        Self {
            alpha: UniformRange::fixed(p.alpha),
            beta: UniformRange::fixed(p.beta),
            gamma: UniformRange::fixed(p.gamma),
            sigma_p: UniformRange::fixed(p.sigma_p),
            sigma_g: UniformRange::fixed(p.sigma_g),
        }
    }

    pub fn sample(&self, seed: u64) -> DegradationParams {
        let mut r = rng::keyed(seed, Stream::Degradation, 0, 0);
        DegradationParams {
            alpha: self.alpha.sample(&mut r),
            beta: self.beta.sample(&mut r),
            gamma: self.gamma.sample(&mut r),
            sigma_p: self.sigma_p.sample(&mut r),
            sigma_g: self.sigma_g.sample(&mut r),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("sigma_p", self.sigma_p),
            ("sigma_g", self.sigma_g),
        ];
        for (name, r) in all {
            if !(r.lo <= r.hi) {
                return Err(Error::param(name, format!("range [{}, {}] is empty", r.lo, r.hi)));
            }
        }
        // both extremes must be valid parameter values
        let at = |pick: fn(&UniformRange) -> f64| DegradationParams {
            alpha: pick(&self.alpha),
            beta: pick(&self.beta),
            gamma: pick(&self.gamma),
            sigma_p: pick(&self.sigma_p),
            sigma_g: pick(&self.sigma_g),
        };
        at(|r| r.lo).validate()?;
        at(|r| r.hi).validate()
    }
}

/// The deterministic darkening `J` applied to every value of `gt`.
pub fn darken(gt: &Frame, params: &DegradationParams) -> Result<Frame> {
    params.validate()?;
    Ok(gt.map(|l| params.darken(l.max(0.0))))
}

/// One unclamped draw from `N(J, sigma_p * J + sigma_g^2)`.
#[inline]
pub fn sample_noisy(j: f64, params: &DegradationParams, rng: &mut impl Rng) -> f64 {
    let var = params.variance(j).max(0.0);
    if var == 0.0 {
        return j;
    }
    let z: f64 = rng.sample(StandardNormal);
    j + var.sqrt() * z
}

/// Short-exposure image: darkened, noisy, clamped to `[0, 1]`.
///
/// Noise for pixel `(x, y)` comes from a generator keyed by `(seed, x, y)`,
/// drawn channel by channel, so the result does not depend on evaluation
/// order.
pub fn synth_short(gt: &Frame, params: &DegradationParams, seed: u64) -> Result<Frame> {
    params.validate()?;
    let (c, h, w) = gt.shape();
    let rows: Vec<Vec<f64>> = crate::par::map_indices(h, |y| {
        let mut row = vec![0.0; c * w];
        for x in 0..w {
            let mut r = rng::pixel(seed, Stream::ShortNoise, x, y);
            for ch in 0..c {
                let j = params.darken(gt.at(ch, y, x).max(0.0));
                row[ch * w + x] = sample_noisy(j, params, &mut r).clamp(0.0, 1.0);
            }
        }
        row
    });
    let mut data = vec![0.0; c * h * w];
    for (y, row) in rows.iter().enumerate() {
        for ch in 0..c {
            data[(ch * h + y) * w..(ch * h + y + 1) * w].copy_from_slice(&row[ch * w..(ch + 1) * w]);
        }
    }
    Frame::new(c, h, w, data)
}
