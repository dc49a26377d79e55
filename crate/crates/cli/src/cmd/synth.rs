use std::path::{Path, PathBuf};

use edei_core::io::dataset::{index_dir, write_sample};
use edei_core::kv::KvMap;
use edei_core::rng::{mix, Stream};
use edei_core::synthesis::{make_sample, sample_times, SynthesisRecipe};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::manifest::{tree_hash, RunManifest};
use crate::source::{png_files, sequence_cfg, Source, SEQUENCE_CFG};
use crate::SynthArgs;

pub const RECIPE_CFG: &str = "recipe.cfg";
pub const MANIFEST: &str = "synth.manifest.json";

/// Named sources: procedural scenes, one PNG directory, or its PNG subdirectories.
fn sources(cfg: &RunConfig, dir: Option<&Path>) -> Result<Vec<(String, Source)>> {
    let Some(dir) = dir else {
        let (_, n, _) = cfg.scene(0)?;
        return (0..n)
            .map(|i| Ok((format!("scene_{i:03}"), Source::Procedural(cfg.scene(i)?.0))))
            .collect();
    };
    let dir = dir
        .canonicalize()
        .map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    if !png_files(&dir)?.is_empty() {
        let name = dir
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or("seq".into());
        return Ok(vec![(name, Source::Frames(dir))]);
    }
    let mut subs: Vec<PathBuf> = std::fs::read_dir(&dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subs.sort();
    let mut out = Vec::new();
    for s in subs {
        if !png_files(&s)?.is_empty() {
            out.push((
                s.file_name().unwrap_or_default().to_string_lossy().into_owned(),
                Source::Frames(s),
            ));
        }
    }
    if out.is_empty() {
        return Err(CliError::Data(format!("{}: no PNG frames found", dir.display())));
    }
    Ok(out)
}

/// Recipe of sequence `index`: the run recipe with its own noise seed.
fn sequence_recipe(base: &SynthesisRecipe, seed: u64, index: usize) -> SynthesisRecipe {
    SynthesisRecipe {
        rng_seed: mix(seed, Stream::SampleSeed, index as u64, u64::MAX),
        ..base.clone()
    }
}

pub fn run(a: &SynthArgs) -> Result<()> {
    let cfg = RunConfig::load(a.common.config.as_deref(), &a.common.sets, a.common.seed)?;
    let recipe = cfg.recipe()?;
    let (_, _, per_seq) = cfg.scene(0)?;
    let srcs = sources(&cfg, a.source.as_deref())?;
    if a.common.dry_run {
        let mut plan = vec![
            format!("seed {} config {}", cfg.seed, cfg.hash()),
            format!(
                "recipe: R={} blur={} T_i={} frames",
                recipe.exposure_ratio, recipe.blur_count, recipe.interval_frames
            ),
        ];
        for (name, s) in &srcs {
            plan.push(format!("{name}: up to {per_seq} samples from {s:?}"));
        }
        plan.push(format!("write {}", a.out.display()));
        crate::cmd::print_plan(&plan);
        return Ok(());
    }
    let mut manifest = RunManifest::start("synth", cfg.hash(), cfg.seed);
    std::fs::create_dir_all(&a.out)?;
    recipe.to_kv().save(&a.out.join(RECIPE_CFG))?;
    let mut total = 0;
    for (i, (name, src)) in srcs.iter().enumerate() {
        let r = sequence_recipe(&recipe, cfg.seed, i);
        let seq = src.upsampled(&r)?;
        let times = sample_times(&seq, &r);
        if times.is_empty() {
            return Err(CliError::Data(format!(
                "{name}: {} upsampled frames cannot hold one sample (needs {})",
                seq.len(),
                r.frames_before() + r.frames_after() + 1
            )));
        }
        let dir = a.out.join(name);
        std::fs::create_dir_all(&dir)?;
        sequence_cfg(src, &r).save(&dir.join(SEQUENCE_CFG))?;
        for (k, &t) in times.iter().take(per_seq).enumerate() {
            let sample = make_sample(&seq, &r, t)?;
            let mut extra = KvMap::new();
            extra.set("sequence", name).set("exposure_ratio", r.exposure_ratio);
            write_sample(&dir.join(index_dir(k)), &sample, &extra)?;
            total += 1;
        }
        log::info!("{name}: {} samples", times.len().min(per_seq));
    }
    manifest.dataset_hash = Some(tree_hash(&a.out)?);
    manifest.outputs.push(a.out.clone());
    manifest.write(&a.out.join(MANIFEST))?;
    println!("wrote {total} samples to {}", a.out.display());
    Ok(())
}
