use edei_core::io::dataset::read_parts;
use edei_core::io::img::write_png16;
use edei_core::metrics::MetricReport;
use edei_net::data::prepare_input;
use serde_json::json;

use super::load_checkpoint;
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::manifest::{tree_hash, RunManifest};
use crate::InferArgs;

pub const OUTPUTS: [&str; 3] = ["fused.png", "enhanced.png", "deblurred.png"];
pub const REPORT: &str = "report.json";

pub fn run(a: &InferArgs) -> Result<()> {
    let cfg = RunConfig::load(a.common.config.as_deref(), &a.common.sets, a.common.seed)?;
    let parts = read_parts(&a.sample)?;
    if a.common.dry_run {
        if !a.ckpt.is_file() {
            return Err(CliError::Checkpoint(format!(
                "{}: no such checkpoint",
                a.ckpt.display()
            )));
        }
        let mut plan = vec![format!(
            "run {} on {} ({}x{}, {} events)",
            a.ckpt.display(),
            a.sample.display(),
            parts.short.height(),
            parts.short.width(),
            parts.events.len()
        )];
        plan.extend(
            OUTPUTS
                .iter()
                .chain([&REPORT])
                .map(|f| format!("write {}", a.out.join(f).display())),
        );
        crate::cmd::print_plan(&plan);
        return Ok(());
    }
    let net = load_checkpoint(&a.ckpt)?;
    let c = net.config();
    if parts.short.channels() != c.image_channels {
        return Err(CliError::Data(format!(
            "sample has {} channels but the checkpoint expects {}",
            parts.short.channels(),
            c.image_channels
        )));
    }
    let x = prepare_input(
        &parts.short,
        &parts.long,
        &parts.events,
        &parts.timing,
        c.event_bins,
        0.0,
    )?;
    let pred = net.predict(&x)?;
    let mut manifest = RunManifest::start("infer", cfg.hash(), cfg.seed);
    manifest.dataset_hash = Some(tree_hash(&a.sample)?);
    std::fs::create_dir_all(&a.out)?;
    let mut metrics = serde_json::Map::new();
    for (name, t) in OUTPUTS.iter().zip([&pred.fused, &pred.enhanced, &pred.deblurred]) {
        let f = t.to_frame(0)?.clamped();
        let path = a.out.join(name);
        write_png16(&path, &f)?;
        manifest.outputs.push(path);
        if let Some(gt) = &parts.gt {
            let m = MetricReport::score(*name, &f, gt)?;
            let key = name.trim_end_matches(".png");
            metrics.insert(key.into(), json!({"psnr": m.psnr_db, "ssim": m.ssim}));
        }
    }
    let report = match &parts.gt {
        Some(_) => json!({"reference": "gt", "metrics": metrics}),
        None => json!({"reference": "no-reference", "metrics": null}),
    };
    let path = a.out.join(REPORT);
    edei_core::io::write_atomic(&path, serde_json::to_string_pretty(&report).expect("json").as_bytes())?;
    manifest.outputs.push(path);
    manifest.write(&a.out.join("infer.manifest.json"))?;
    println!("{}", serde_json::to_string(&report).expect("json"));
    Ok(())
}
