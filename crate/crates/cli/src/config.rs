//! Layered run configuration: defaults, then a `key = value` file, then
//! `--set key=value` overrides, then dedicated flags such as `--seed`.

use std::path::Path;

use edei_core::kv::KvMap;
use edei_core::synthesis::{SceneConfig, SynthesisRecipe};
use edei_net::{ModelConfig, TrainConfig};

use crate::error::{CliError, Result};

pub const SYNTH_PREFIX: &str = "synth.";

const SCENE_KEYS: &[&str] = &[
    "scene.height",
    "scene.width",
    "scene.frames",
    "scene.velocity_y",
    "scene.velocity_x",
    "scene.waves",
    "scene.sequences",
    "scene.samples",
];

const RECIPE_KEYS: &[&str] = &[
    "interp_factor",
    "blur_count",
    "exposure_ratio",
    "interval_frames",
    "delta_t_ratio",
    "source_fps",
    "sample_stride",
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

/// Every key a config file may contain.
pub fn known_keys() -> Vec<String> {
    let mut keys: Vec<String> = vec!["seed".into(), "preset".into()];
    keys.extend(ModelConfig::kv_keys().iter().map(|k| k.to_string()));
    keys.extend(
        TrainConfig::kv_keys()
            .iter()
            .filter(|k| **k != "train.seed")
            .map(|k| k.to_string()),
    );
    keys.extend(SCENE_KEYS.iter().map(|k| k.to_string()));
    keys.extend(RECIPE_KEYS.iter().map(|k| format!("{SYNTH_PREFIX}{k}")));
    keys
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub kv: KvMap,
    pub seed: u64,
}

impl RunConfig {
    pub fn load(file: Option<&Path>, sets: &[String], seed: Option<u64>) -> Result<Self> {
        let mut kv = match file {
            Some(p) => KvMap::load(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
            None => KvMap::new(),
        };
        for s in sets {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("override `{s}` is not key=value")))?;
            kv.set(k.trim(), v.trim());
        }
        if let Some(s) = seed {
            kv.set("seed", s);
        }
        let known = known_keys();
        let known: Vec<&str> = known.iter().map(String::as_str).collect();
        kv.check_known(&known)?;
        let seed = kv.get_or("seed", 0u64)?;
        let preset: String = kv.get_or("preset", "full".to_string())?;
        if preset != "full" && preset != "desk" {
            return Err(CliError::Config(format!(
                "preset must be `full` or `desk`, got `{preset}`"
            )));
        }
        Ok(Self { kv, seed })
    }

    fn desk(&self) -> bool {
        self.kv.raw("preset") == Some("desk")
    }

    pub fn model(&self) -> Result<ModelConfig> {
        let mut base = if self.desk() {
            ModelConfig::desk()
        } else {
            ModelConfig::default()
        }
        .to_kv();
        base.merge(&self.kv);
        Ok(ModelConfig::from_kv(&base)?)
    }

    pub fn train(&self) -> Result<TrainConfig> {
        let base = if self.desk() {
            TrainConfig::desk()
        } else {
            TrainConfig::default()
        };
        let mut t = TrainConfig::from_kv(&self.kv, &base)?;
        t.seed = self.seed;
        Ok(t)
    }

    pub fn recipe(&self) -> Result<SynthesisRecipe> {
        let mut m = SynthesisRecipe::default().to_kv();
        for k in self.kv.keys() {
            if let Some(rest) = k.strip_prefix(SYNTH_PREFIX) {
                m.set(rest, self.kv.raw(k).unwrap_or_default());
            }
        }
        m.set("rng_seed", self.seed);
        let r = SynthesisRecipe::from_kv(&m)?;
        r.validate()?;
        Ok(r)
    }

    /// Procedural scene for sequence `index`, plus the sequence and sample
    /// counts. The scene frame rate is the recipe's source rate.
    pub fn scene(&self, index: usize) -> Result<(SceneConfig, usize, usize)> {
        let d = SceneConfig::default();
        let kv = &self.kv;
        let cfg = SceneConfig {
            height: kv.get_or("scene.height", d.height)?,
            width: kv.get_or("scene.width", d.width)?,
            frames: kv.get_or("scene.frames", d.frames)?,
            fps: self.recipe()?.source_fps,
            velocity: (
                kv.get_or("scene.velocity_y", d.velocity.0)?,
                kv.get_or("scene.velocity_x", d.velocity.1)?,
            ),
            waves: kv.get_or("scene.waves", d.waves)?,
            seed: edei_core::rng::mix(self.seed, edei_core::rng::Stream::Scene, index as u64, 1),
        };
        Ok((cfg, kv.get_or("scene.sequences", 2)?, kv.get_or("scene.samples", 4)?))
    }

    /// Deterministic SHA-256 of the effective configuration.
    pub fn hash(&self) -> String {
        crate::manifest::sha256_hex(self.kv.to_text().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layers_apply_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.cfg");
        std::fs::write(&p, "seed = 3\nmodel.base_channels = 8\npreset = desk\n").unwrap();
        let c = RunConfig::load(Some(&p), &["model.base_channels=12".into()], None).unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.model().unwrap().base_channels, 12);
        assert_eq!(c.model().unwrap().num_scales, 2);
        let c = RunConfig::load(Some(&p), &[], Some(9)).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.train().unwrap().seed, 9);
        assert_eq!(c.recipe().unwrap().rng_seed, 9);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_config_errors() {
        let e = RunConfig::load(None, &["modle.base_channels=3".into()], None).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let c = RunConfig::load(None, &["synth.blur_count=0".into()], None).unwrap();
        assert_eq!(c.recipe().unwrap_err().exit_code(), 2);
    }

    #[test]
    fn hash_is_stable() {
        let a = RunConfig::load(None, &["seed=1".into(), "preset=desk".into()], None).unwrap();
        let b = RunConfig::load(None, &["preset=desk".into()], Some(1)).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
