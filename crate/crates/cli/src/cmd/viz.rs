use edei_core::io::dataset::read_parts;
use edei_core::io::img::{read_png, write_png8};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::manifest::{beside, RunManifest};
use crate::viz::{compose, rescale_brightness, Panel};
use crate::VizArgs;

pub fn run(a: &VizArgs) -> Result<()> {
    let cfg = RunConfig::load(a.common.config.as_deref(), &a.common.sets, a.common.seed)?;
    let parts = read_parts(&a.sample)?;
    let fused_path = a.pred.join(super::infer::OUTPUTS[0]);
    let fused = read_png(&fused_path)?;
    let mut panels = vec![
        Panel {
            title: "Short".into(),
            image: rescale_brightness(&parts.short, parts.long.mean()),
            scored: true,
        },
        Panel {
            title: "Long".into(),
            image: parts.long.clone(),
            scored: true,
        },
        Panel {
            title: "Ours".into(),
            image: fused,
            scored: true,
        },
    ];
    if let Some(gt) = &parts.gt {
        panels.push(Panel {
            title: "GT".into(),
            image: gt.clone(),
            scored: false,
        });
    }
    let comp = compose(&panels, &a.insets, parts.gt.as_ref()).map_err(CliError::Data)?;
    for w in &comp.warnings {
        log::warn!("{w}");
    }
    if a.common.dry_run {
        crate::cmd::print_plan(&[
            format!(
                "{} panels, {} insets",
                panels.len(),
                a.insets.len() - comp.warnings.iter().filter(|w| w.contains("dropped")).count()
            ),
            format!("write {}", a.out.display()),
        ]);
        return Ok(());
    }
    let mut manifest = RunManifest::start("viz", cfg.hash(), cfg.seed);
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_png8(&a.out, &comp.image)?;
    manifest.outputs.push(a.out.clone());
    manifest.write(&beside(&a.out))?;
    for (p, caps) in panels.iter().zip(&comp.captions) {
        if caps.iter().any(|c| !c.is_empty()) {
            println!("{}: {}", p.title, caps.join(", "));
        }
    }
    println!("wrote {}", a.out.display());
    Ok(())
}
