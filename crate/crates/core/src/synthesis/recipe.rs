use crate::error::{Error, Result};
use crate::kv::KvMap;

use super::degrade::{DegradationRanges, UniformRange};
use super::simulator::SimulatorConfig;

/// Everything needed to turn a sharp clip into exposure samples.
///
/// Frame counts refer to the temporally upsampled clip.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthesisRecipe {
    /// Frames inserted between neighbouring source frames.
    pub interp_factor: usize,
    /// Frames averaged into the long exposure.
    pub blur_count: usize,
    /// Long over short exposure duration `R`.
    pub exposure_ratio: f64,
    /// Gap `T_i` between the short instant and the long-exposure start.
    pub interval_frames: usize,
    /// Enhancement half-window as a fraction of `T_i`.
    pub delta_t_ratio: f64,
    /// Frame rate of the source clip.
    pub source_fps: f64,
    /// Distance between consecutive sample instants.
    pub sample_stride: usize,
    pub degradation: DegradationRanges,
    pub simulator: SimulatorConfig,
    pub rng_seed: u64,
}

impl Default for SynthesisRecipe {
    fn default() -> Self {
        Self {
            interp_factor: 7,
            blur_count: 49,
            exposure_ratio: 7.0,
            interval_frames: 8,
            delta_t_ratio: 0.5,
            source_fps: 120.0,
            sample_stride: 8,
            degradation: DegradationRanges::default(),
            simulator: SimulatorConfig::default(),
            rng_seed: 0,
        }
    }
}

const KEYS: &[&str] = &[
    "interp_factor",
    "blur_count",
    "exposure_ratio",
    "interval_frames",
    "delta_t_ratio",
    "source_fps",
    "sample_stride",
    "rng_seed",
    "alpha_min",
    "alpha_max",
    "beta_min",
    "beta_max",
    "gamma_min",
    "gamma_max",
    "sigma_p_min",
    "sigma_p_max",
    "sigma_g_min",
    "sigma_g_max",
    "threshold_c",
    "cutoff_hz",
    "noise_rate_hz",
    "refractory_s",
];

impl SynthesisRecipe {
    pub fn validate(&self) -> Result<()> {
        if self.blur_count < 1 {
            return Err(Error::param("blur_count", "must be at least 1"));
        }
        if self.interval_frames < 1 {
            return Err(Error::param(
                "interval_frames",
                "long exposure must start after the short instant",
            ));
        }
        if !(self.exposure_ratio > 0.0) {
            return Err(Error::param("exposure_ratio", "must be positive"));
        }
        if !(self.delta_t_ratio > 0.0) {
            return Err(Error::param("delta_t_ratio", "must be positive"));
        }
        if !(self.source_fps > 0.0) {
            return Err(Error::param("source_fps", "must be positive"));
        }
        if self.sample_stride < 1 {
            return Err(Error::param("sample_stride", "must be at least 1"));
        }
        self.degradation.validate()?;
        self.simulator.validate()
    }

    /// Frame rate after temporal upsampling.
    pub fn frame_rate(&self) -> f64 {
        self.source_fps * (self.interp_factor + 1) as f64
    }

    /// Nominal short-exposure length in frames, `blur_count / R`.
    pub fn short_frames(&self) -> f64 {
        self.blur_count as f64 / self.exposure_ratio
    }

    /// The same recipe at exposure ratio `r`: the long window scales with `r`
    /// while the short exposure and the interval `T_i` stay unchanged.
    pub fn with_ratio(&self, r: f64) -> SynthesisRecipe {
        let blur = (self.short_frames() * r).round().max(1.0) as usize;
        SynthesisRecipe {
            blur_count: blur,
            exposure_ratio: r,
            ..self.clone()
        }
    }

    /// Upsampled frames a sample needs before `t_s` and after it (inclusive).
    pub fn frames_before(&self) -> usize {
        (self.delta_t_ratio * self.interval_frames as f64).ceil() as usize
    }
    pub fn frames_after(&self) -> usize {
        self.interval_frames + self.blur_count - 1
    }

    pub fn to_kv(&self) -> KvMap {
        let mut m = KvMap::new();
        let d = &self.degradation;
        m.set("interp_factor", self.interp_factor)
            .set("blur_count", self.blur_count)
            .set_f64("exposure_ratio", self.exposure_ratio)
            .set("interval_frames", self.interval_frames)
            .set_f64("delta_t_ratio", self.delta_t_ratio)
            .set_f64("source_fps", self.source_fps)
            .set("sample_stride", self.sample_stride)
            .set("rng_seed", self.rng_seed);
        for (name, r) in [
            ("alpha", d.alpha),
            ("beta", d.beta),
            ("gamma", d.gamma),
            ("sigma_p", d.sigma_p),
            ("sigma_g", d.sigma_g),
        ] {
            m.set_f64(format!("{name}_min"), r.lo)
                .set_f64(format!("{name}_max"), r.hi);
        }
        m.set_f64("threshold_c", self.simulator.threshold_c)
            .set_f64("cutoff_hz", self.simulator.cutoff_hz)
            .set_f64("noise_rate_hz", self.simulator.noise_rate_hz)
            .set_f64("refractory_s", self.simulator.refractory_s);
        m
    }

    /// Reads a recipe; missing keys keep their defaults.
    pub fn from_kv(m: &KvMap) -> Result<Self> {
        m.check_known(KEYS)?;
        let d = Self::default();
        let range = |name: &str, def: UniformRange| -> Result<UniformRange> {
            Ok(UniformRange::new(
                m.get_or(&format!("{name}_min"), def.lo)?,
                m.get_or(&format!("{name}_max"), def.hi)?,
            ))
        };
        let r = Self {
            interp_factor: m.get_or("interp_factor", d.interp_factor)?,
            blur_count: m.get_or("blur_count", d.blur_count)?,
            exposure_ratio: m.get_or("exposure_ratio", d.exposure_ratio)?,
            interval_frames: m.get_or("interval_frames", d.interval_frames)?,
            delta_t_ratio: m.get_or("delta_t_ratio", d.delta_t_ratio)?,
            source_fps: m.get_or("source_fps", d.source_fps)?,
            sample_stride: m.get_or("sample_stride", d.sample_stride)?,
            rng_seed: m.get_or("rng_seed", d.rng_seed)?,
            degradation: DegradationRanges {
                alpha: range("alpha", d.degradation.alpha)?,
                beta: range("beta", d.degradation.beta)?,
                gamma: range("gamma", d.degradation.gamma)?,
                sigma_p: range("sigma_p", d.degradation.sigma_p)?,
                sigma_g: range("sigma_g", d.degradation.sigma_g)?,
            },
            simulator: SimulatorConfig {
                threshold_c: m.get_or("threshold_c", d.simulator.threshold_c)?,
                cutoff_hz: m.get_or("cutoff_hz", d.simulator.cutoff_hz)?,
                noise_rate_hz: m.get_or("noise_rate_hz", d.simulator.noise_rate_hz)?,
                refractory_s: m.get_or("refractory_s", d.simulator.refractory_s)?,
            },
        };
        r.validate()?;
        Ok(r)
    }
}
