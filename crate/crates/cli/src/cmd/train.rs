use std::io::Write;
use std::path::PathBuf;

use edei_net::checkpoint;
use edei_net::data::{prepare, Prepared};
use edei_net::{train_stage, EdeiNet, Stage};

use super::{load_checkpoint, load_dataset, Real};
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::manifest::{tree_hash, RunManifest};
use crate::TrainArgs;

fn prepared(root: &std::path::Path, bins: usize) -> Result<Vec<Prepared<Real>>> {
    load_dataset(root)?
        .iter()
        .map(|n| Ok(prepare(n.name.clone(), &n.sample, bins, 0.0)?))
        .collect()
}

pub fn run(a: &TrainArgs) -> Result<()> {
    let cfg = RunConfig::load(a.common.config.as_deref(), &a.common.sets, a.common.seed)?;
    let stage = Stage::from_number(a.stage)?;
    let tc = cfg.train()?;
    tc.validate()?;
    let init: Option<PathBuf> = match (stage, &a.init) {
        (_, Some(p)) => Some(p.clone()),
        (Stage::Fusion, None) => Some(a.out.join("stage1.ckpt")),
        (Stage::Paths, None) => None,
    };
    let ckpt = a.out.join(format!("stage{}.ckpt", a.stage));
    let metrics = a.out.join(format!("metrics-stage{}.jsonl", a.stage));
    if a.common.dry_run {
        let sc = tc.stage(stage);
        let model = match &init {
            Some(p) => format!("from {}", p.display()),
            None => format!("fresh {:?}", cfg.model()?),
        };
        let n = super::sample_refs(&a.data)?.len();
        crate::cmd::print_plan(&[
            format!("seed {} config {}", cfg.seed, cfg.hash()),
            format!(
                "stage {}: {} epochs at lr {} over {n} samples, batch {}, crop {}",
                a.stage, sc.epochs, sc.lr, tc.batch_size, tc.crop
            ),
            format!("model {model}"),
            format!("write {} and {}", ckpt.display(), metrics.display()),
        ]);
        if let Some(p) = &init {
            if !p.is_file() {
                return Err(CliError::Checkpoint(format!("{}: no such checkpoint", p.display())));
            }
        }
        return Ok(());
    }
    let mut net = match &init {
        Some(p) => {
            let net = load_checkpoint(p)?;
            let wanted = cfg.model()?;
            if *net.config() != wanted && cfg.kv.keys().any(|k| k.starts_with("model.")) {
                log::warn!(
                    "model keys in the config are ignored; using the architecture stored in {}",
                    p.display()
                );
            }
            net
        }
        None => EdeiNet::<Real>::new(&cfg.model()?, cfg.seed)?,
    };
    if stage == Stage::Fusion && net.stage_done() < 1 {
        return Err(CliError::Checkpoint(format!(
            "{}: stage 2 needs a checkpoint that finished stage 1",
            init.as_deref().unwrap_or(&a.out).display()
        )));
    }
    let bins = net.config().event_bins;
    let data = prepared(&a.data, bins)?;
    let val = match &a.val {
        Some(v) => prepared(v, bins)?,
        None => data.clone(),
    };
    let mut manifest = RunManifest::start(&format!("train-stage{}", a.stage), cfg.hash(), cfg.seed);
    manifest.dataset_hash = Some(tree_hash(&a.data)?);
    std::fs::create_dir_all(&a.out)?;
    let mut lines = Vec::new();
    let log = train_stage(&mut net, &data, &val, &tc, stage, |r| {
        if let (Some(p), Some(s)) = (r.val_psnr, r.val_ssim) {
            log::info!(
                "stage {} epoch {} loss {:.5} val {:.2} dB / {:.4}",
                r.stage,
                r.epoch + 1,
                r.loss,
                p,
                s
            );
        }
        lines.push(r.to_json());
    })?;
    checkpoint::save(&net, &ckpt)?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(&metrics)?);
    for l in &lines {
        writeln!(f, "{l}")?;
    }
    f.flush()?;
    manifest.outputs = vec![ckpt.clone(), metrics];
    manifest.write(&a.out.join(format!("train-stage{}.manifest.json", a.stage)))?;
    let last = log.epochs.last().expect("at least one epoch");
    println!(
        "stage {} done: final loss {:.5}, val PSNR {:.2} dB -> {}",
        a.stage,
        last.loss,
        last.val_psnr.unwrap_or(f64::NAN),
        ckpt.display()
    );
    Ok(())
}
