use std::fmt::Write as _;

use edei_core::metrics::MetricReport;
use edei_net::data::{prepare, Prepared};
use edei_net::eval::{evaluate, sweep_ratio, sweep_temporal, SweepRow, RATIOS, TEMPORAL_EPS};
use serde_json::json;

use super::{load_checkpoint, load_dataset, sample_refs, Real};
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::manifest::{beside, tree_hash, RunManifest};
use crate::source::{read_sequence_cfg, SEQUENCE_CFG};
use crate::{EvalArgs, Sweep};

fn report_lines(kind: &str, r: &MetricReport) -> Vec<serde_json::Value> {
    let mut v: Vec<serde_json::Value> = r
        .per_sample
        .iter()
        .map(|s| json!({"output": kind, "sample": s.name, "psnr": s.psnr_db, "ssim": s.ssim}))
        .collect();
    v.push(json!({"output": kind, "sample": "mean", "psnr": r.psnr_db, "ssim": r.ssim}));
    v
}

fn sweep_table(key: &str, groups: &[(String, Vec<SweepRow>)]) -> String {
    let mut t = format!("| group | {key} | PSNR (dB) | SSIM |\n|---|---|---|---|\n");
    for (g, rows) in groups {
        for r in rows {
            let _ = writeln!(t, "| {g} | {} | {:.3} | {:.4} |", r.value, r.psnr_db, r.ssim);
        }
    }
    t
}

/// Mean over groups of rows sharing the same swept values.
fn mean_rows(groups: &[(String, Vec<SweepRow>)]) -> Vec<SweepRow> {
    let n = groups.len() as f64;
    (0..groups[0].1.len())
        .map(|i| SweepRow {
            value: groups[0].1[i].value,
            psnr_db: groups.iter().map(|g| g.1[i].psnr_db).sum::<f64>() / n,
            ssim: groups.iter().map(|g| g.1[i].ssim).sum::<f64>() / n,
        })
        .collect()
}

pub fn run(a: &EvalArgs) -> Result<()> {
    let cfg = RunConfig::load(a.common.config.as_deref(), &a.common.sets, a.common.seed)?;
    let refs = sample_refs(&a.data)?;
    if a.common.dry_run {
        let what = match a.sweep {
            None => "plain evaluation".to_string(),
            Some(Sweep::Temporal) => format!("temporal sweep over eps {TEMPORAL_EPS:?}"),
            Some(Sweep::Ratio) => format!("ratio sweep over R {RATIOS:?}"),
        };
        let mut plan = vec![
            format!("checkpoint {}", a.ckpt.display()),
            format!("{what} on {} samples", refs.len()),
            format!("write {}", a.out.display()),
        ];
        if let Some(t) = &a.table {
            plan.push(format!("write {}", t.display()));
        }
        if !a.ckpt.is_file() {
            return Err(CliError::Checkpoint(format!(
                "{}: no such checkpoint",
                a.ckpt.display()
            )));
        }
        crate::cmd::print_plan(&plan);
        return Ok(());
    }
    let net = load_checkpoint(&a.ckpt)?;
    let bins = net.config().event_bins;
    let mut manifest = RunManifest::start("eval", cfg.hash(), cfg.seed);
    manifest.dataset_hash = Some(tree_hash(&a.data)?);
    let (lines, table): (Vec<serde_json::Value>, String) = match a.sweep {
        None => {
            let data: Vec<Prepared<Real>> = load_dataset(&a.data)?
                .iter()
                .map(|n| Ok(prepare(n.name.clone(), &n.sample, bins, 0.0)?))
                .collect::<Result<_>>()?;
            let r = evaluate(&net, &data)?;
            let mut lines = report_lines("fused", &r.fused);
            lines.extend(report_lines("enhanced", &r.enhanced));
            lines.extend(report_lines("deblurred", &r.deblurred));
            let table = format!(
                "| output | PSNR (dB) | SSIM |\n|---|---|---|\n| fused | {:.3} | {:.4} |\n| enhanced | {:.3} | {:.4} |\n| deblurred | {:.3} | {:.4} |\n",
                r.fused.psnr_db, r.fused.ssim, r.enhanced.psnr_db, r.enhanced.ssim, r.deblurred.psnr_db, r.deblurred.ssim
            );
            (lines, table)
        }
        Some(Sweep::Temporal) => {
            let samples: Vec<_> = load_dataset(&a.data)?.into_iter().map(|n| (n.name, n.sample)).collect();
            let rows = sweep_temporal(&net, &samples, &TEMPORAL_EPS)?;
            let groups = vec![("all".to_string(), rows)];
            let lines = groups[0]
                .1
                .iter()
                .map(|r| json!({"epsilon": r.value, "psnr": r.psnr_db, "ssim": r.ssim}))
                .collect();
            (lines, sweep_table("epsilon", &groups))
        }
        Some(Sweep::Ratio) => {
            let mut seqs: Vec<&str> = refs.iter().map(|r| r.sequence.as_str()).collect();
            seqs.dedup();
            let mut groups = Vec::new();
            for s in seqs {
                let p = a.data.join(s).join(SEQUENCE_CFG);
                if !p.is_file() {
                    return Err(CliError::Data(format!(
                        "{}: missing, cannot regenerate ratios",
                        p.display()
                    )));
                }
                let (src, recipe) = read_sequence_cfg(&p)?;
                let seq = src.upsampled(&recipe)?;
                log::info!("ratio sweep on {s}");
                groups.push((s.to_string(), sweep_ratio(&net, &seq, &recipe, &RATIOS)?));
            }
            let mut lines: Vec<serde_json::Value> = Vec::new();
            for (g, rows) in &groups {
                lines.extend(
                    rows.iter()
                        .map(|r| json!({"sequence": g, "ratio": r.value, "psnr": r.psnr_db, "ssim": r.ssim})),
                );
            }
            let mean = mean_rows(&groups);
            lines.extend(
                mean.iter()
                    .map(|r| json!({"sequence": "mean", "ratio": r.value, "psnr": r.psnr_db, "ssim": r.ssim})),
            );
            groups.push(("mean".into(), mean));
            (lines, sweep_table("ratio", &groups))
        }
    };
    let mut text = String::new();
    for l in &lines {
        text.push_str(&l.to_string());
        text.push('\n');
    }
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    edei_core::io::write_atomic(&a.out, text.as_bytes())?;
    manifest.outputs.push(a.out.clone());
    if let Some(t) = &a.table {
        edei_core::io::write_atomic(t, table.as_bytes())?;
        manifest.outputs.push(t.clone());
    }
    manifest.write(&beside(&a.out))?;
    print!("{table}");
    Ok(())
}
