use edei_core::flow::Farneback;
use edei_core::stats::dataset_stats;
use serde_json::json;

use super::load_dataset;
use crate::config::RunConfig;
use crate::error::Result;
use crate::manifest::{beside, tree_hash, RunManifest};
use crate::StatsArgs;

pub fn run(a: &StatsArgs) -> Result<()> {
    let cfg = RunConfig::load(a.common.config.as_deref(), &a.common.sets, a.common.seed)?;
    if a.common.dry_run {
        let n = super::sample_refs(&a.data)?.len();
        crate::cmd::print_plan(&[
            format!("statistics over {n} samples in {}", a.data.display()),
            format!("write {}", a.out.display()),
        ]);
        return Ok(());
    }
    let mut manifest = RunManifest::start("stats", cfg.hash(), cfg.seed);
    manifest.dataset_hash = Some(tree_hash(&a.data)?);
    let mut groups: Vec<(String, Vec<_>)> = Vec::new();
    for n in load_dataset(&a.data)? {
        match groups.last_mut() {
            Some((s, v)) if *s == n.sequence => v.push(n.sample),
            _ => groups.push((n.sequence, vec![n.sample])),
        }
    }
    let seqs: Vec<_> = groups.into_iter().map(|(_, v)| v).collect();
    let r = dataset_stats(&seqs, &Farneback::default())?;
    for n in &r.notices {
        log::warn!("{n}");
    }
    let out = json!({
        "sequences": seqs.len(),
        "samples": seqs.iter().map(Vec::len).sum::<usize>(),
        "motion_px": r.motion_mag,
        "illumination": r.illumination,
        "texture": r.texture,
        "event_rate_mev_s": r.event_rate,
        "notices": r.notices,
    });
    let text = serde_json::to_string_pretty(&out).expect("json");
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    edei_core::io::write_atomic(&a.out, text.as_bytes())?;
    manifest.outputs.push(a.out.clone());
    manifest.write(&beside(&a.out))?;
    println!("{text}");
    Ok(())
}
