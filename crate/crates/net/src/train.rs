//! Two-stage training loop.

use edei_core::kv::KvMap;
use edei_core::metrics::MetricReport;
use edei_core::rng::{self, Stream};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::data::Prepared;
use crate::error::{NetError, Result};
use crate::graph::Graph;
use crate::loss::{loss_on_graph, Lambdas};
use crate::model::{is_fusion_param, EdeiNet, InputVars, ModelInput};
use crate::optim::{clip_global_norm, Adam, WarmRestarts};
use crate::params::ParamId;
use crate::tensor::{Scalar, Tensor};

/// Stage 1 trains both paths and the fusion sites, stage 2 only the gated fusion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Paths = 1,
    Fusion = 2,
}

impl Stage {
    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(Stage::Paths),
            2 => Ok(Stage::Fusion),
            _ => Err(NetError::config(format!("stage must be 1 or 2, got {n}"))),
        }
    }
    pub fn number(self) -> u8 {
        self as u8
    }
    pub fn trains(self, param: &str) -> bool {
        match self {
            Stage::Paths => !is_fusion_param(param),
            Stage::Fusion => is_fusion_param(param),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StageConfig {
    pub lambdas: Lambdas,
    pub lr: f64,
    pub epochs: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub stage1: StageConfig,
    pub stage2: StageConfig,
    pub batch_size: usize,
    pub crop: usize,
    pub seed: u64,
    /// Global gradient-norm bound.
    pub clip: f64,
    /// Validation runs every this many epochs and after the last one.
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            stage1: StageConfig {
                lambdas: Lambdas::STAGE1,
                lr: 1e-4,
                epochs: 100,
            },
            stage2: StageConfig {
                lambdas: Lambdas::STAGE2,
                lr: 5e-5,
                epochs: 50,
            },
            batch_size: 8,
            crop: 256,
            seed: 0,
            clip: 1.0,
            eval_every: 1,
        }
    }
}

const KV_KEYS: &[&str] = &[
    "train.batch_size",
    "train.crop",
    "train.seed",
    "train.clip",
    "train.eval_every",
    "stage1.lambda1",
    "stage1.lambda2",
    "stage1.lambda3",
    "stage1.lr",
    "stage1.epochs",
    "stage2.lambda1",
    "stage2.lambda2",
    "stage2.lambda3",
    "stage2.lr",
    "stage2.epochs",
];

impl TrainConfig {
    /// Settings matched to [`crate::ModelConfig::desk`].
    pub fn desk() -> Self {
        let d = Self::default();
        Self {
            stage1: StageConfig {
                lr: 2e-3,
                epochs: 400,
                ..d.stage1
            },
            stage2: StageConfig {
                lr: 3e-3,
                epochs: 100,
                ..d.stage2
            },
            batch_size: 4,
            crop: 64,
            eval_every: 50,
            ..d
        }
    }

    pub fn stage(&self, s: Stage) -> &StageConfig {
        match s {
            Stage::Paths => &self.stage1,
            Stage::Fusion => &self.stage2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for s in [&self.stage1, &self.stage2] {
            s.lambdas.validate()?;
            if !(s.lr.is_finite() && s.lr > 0.0) {
                return Err(NetError::config(format!(
                    "learning rate must be positive, got {}",
                    s.lr
                )));
            }
        }
        if self.batch_size == 0 || self.crop == 0 || self.eval_every == 0 {
            return Err(NetError::config("batch_size, crop and eval_every must be positive"));
        }
        if !(self.clip > 0.0) {
            return Err(NetError::config("clip must be positive"));
        }
        Ok(())
    }

    pub fn to_kv(&self) -> KvMap {
        let mut m = KvMap::new();
        m.set("train.batch_size", self.batch_size)
            .set("train.crop", self.crop)
            .set("train.seed", self.seed)
            .set_f64("train.clip", self.clip)
            .set("train.eval_every", self.eval_every);
        for (k, s) in [("stage1", &self.stage1), ("stage2", &self.stage2)] {
            m.set_f64(format!("{k}.lambda1"), s.lambdas.fused)
                .set_f64(format!("{k}.lambda2"), s.lambdas.enhanced)
                .set_f64(format!("{k}.lambda3"), s.lambdas.deblurred)
                .set_f64(format!("{k}.lr"), s.lr)
                .set(format!("{k}.epochs"), s.epochs);
        }
        m
    }

    /// Reads `train.*`, `stage1.*` and `stage2.*` keys over `base`.
    pub fn from_kv(m: &KvMap, base: &TrainConfig) -> Result<Self> {
        let stage = |k: &str, d: &StageConfig| -> Result<StageConfig> {
            Ok(StageConfig {
                lambdas: Lambdas::new(
                    m.get_or(&format!("{k}.lambda1"), d.lambdas.fused)?,
                    m.get_or(&format!("{k}.lambda2"), d.lambdas.enhanced)?,
                    m.get_or(&format!("{k}.lambda3"), d.lambdas.deblurred)?,
                ),
                lr: m.get_or(&format!("{k}.lr"), d.lr)?,
                epochs: m.get_or(&format!("{k}.epochs"), d.epochs)?,
            })
        };
        let cfg = Self {
            stage1: stage("stage1", &base.stage1)?,
            stage2: stage("stage2", &base.stage2)?,
            batch_size: m.get_or("train.batch_size", base.batch_size)?,
            crop: m.get_or("train.crop", base.crop)?,
            seed: m.get_or("train.seed", base.seed)?,
            clip: m.get_or("train.clip", base.clip)?,
            eval_every: m.get_or("train.eval_every", base.eval_every)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn kv_keys() -> &'static [&'static str] {
        KV_KEYS
    }
}

/// One line of the metrics log.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub stage: u8,
    pub loss: f64,
    pub val_psnr: Option<f64>,
    pub val_ssim: Option<f64>,
    pub lr: f64,
}

impl EpochRecord {
    pub fn to_json(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("null".to_string(), |v| format!("{v}"));
        format!(
            "{{\"epoch\":{},\"stage\":{},\"loss\":{},\"val_psnr\":{},\"val_ssim\":{},\"lr\":{}}}",
            self.epoch,
            self.stage,
            self.loss,
            opt(self.val_psnr),
            opt(self.val_ssim),
            self.lr
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    /// Loss of every optimizer step, before the update.
    pub step_losses: Vec<f64>,
}

/// Crop offsets for one sample at one step, reproducible from the seed.
pub fn crop_offsets(seed: u64, step: u64, slot: u64, size: (usize, usize), crop: (usize, usize)) -> (usize, usize) {
    let mut r = rng::keyed(seed, Stream::Crop, step, slot);
    (r.random_range(0..=size.0 - crop.0), r.random_range(0..=size.1 - crop.1))
}

fn crop_side(cfg_crop: usize, side: usize, multiple: usize) -> Result<usize> {
    let c = cfg_crop.min(side) / multiple * multiple;
    if c == 0 {
        return Err(NetError::shape(format!(
            "image side {side} is below the network multiple {multiple}"
        )));
    }
    Ok(c)
}

fn make_batch<S: Scalar>(
    items: &[&Prepared<S>],
    cfg: &TrainConfig,
    multiple: usize,
    step: u64,
) -> Result<(ModelInput<S>, Tensor<S>)> {
    let min_h = items.iter().map(|p| p.input.size().0).min().unwrap_or(0);
    let min_w = items.iter().map(|p| p.input.size().1).min().unwrap_or(0);
    let (ch, cw) = (
        crop_side(cfg.crop, min_h, multiple)?,
        crop_side(cfg.crop, min_w, multiple)?,
    );
    let mut inputs = Vec::with_capacity(items.len());
    let mut gts = Vec::with_capacity(items.len());
    for (slot, p) in items.iter().enumerate() {
        let gt =
            p.gt.as_ref()
                .ok_or_else(|| NetError::config(format!("training sample {} has no ground truth", p.name)))?;
        let (y0, x0) = crop_offsets(cfg.seed, step, slot as u64, p.input.size(), (ch, cw));
        inputs.push(p.input.crop(y0, x0, ch, cw));
        gts.push(gt.crop(y0, x0, ch, cw));
    }
    let refs: Vec<&ModelInput<S>> = inputs.iter().collect();
    let gt_refs: Vec<&Tensor<S>> = gts.iter().collect();
    Ok((ModelInput::stack(&refs), Tensor::stack(&gt_refs)))
}

/// Loss and gradients of the trainable parameters for one batch.
pub fn loss_and_grads<S: Scalar>(
    net: &EdeiNet<S>,
    x: &ModelInput<S>,
    gt: &Tensor<S>,
    stage: Stage,
    lambdas: Lambdas,
) -> Result<(f64, Vec<(ParamId, Tensor<S>)>)> {
    net.check_input(x)?;
    let mut g = Graph::new();
    let p = net.params().bind(&mut g, |n| stage.trains(n));
    let iv = InputVars::constants(&mut g, x);
    let o = net.forward_paths(&mut g, &p, iv, None);
    let fused = (lambdas.fused != 0.0).then(|| net.cgf_fuse(&mut g, &p, &o, None, None));
    let loss = loss_on_graph(&mut g, fused, o.enhanced, o.deblurred, gt, lambdas)?;
    let value = g.value(loss).data()[0].f64();
    let mut grads = g.backward(loss);
    let params = net.params();
    let out = params
        .ids()
        .filter(|&id| stage.trains(params.name(id)))
        .filter_map(|id| grads.take(p.var(id)).map(|t| (id, t)))
        .collect();
    Ok((value, out))
}

/// Validation metrics of the stage's supervised output: `L̂_s` after
/// stage 1, `L̂` after stage 2.
pub fn validate<S: Scalar>(net: &EdeiNet<S>, val: &[Prepared<S>], stage: Stage) -> Result<MetricReport> {
    let mut rows = Vec::with_capacity(val.len());
    for p in val {
        let Some(gt) = &p.gt else { continue };
        let pred = net.predict(&p.input)?;
        let out = match stage {
            Stage::Paths => &pred.enhanced,
            Stage::Fusion => &pred.fused,
        };
        rows.push(MetricReport::score(&p.name, &out.to_frame(0)?, &gt.to_frame(0)?)?);
    }
    Ok(MetricReport::from_samples(rows))
}

/// Runs one training stage in place. `on_epoch` sees each record as it is produced.
pub fn train_stage<S: Scalar>(
    net: &mut EdeiNet<S>,
    data: &[Prepared<S>],
    val: &[Prepared<S>],
    cfg: &TrainConfig,
    stage: Stage,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainLog> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(NetError::config("no training samples"));
    }
    if stage == Stage::Fusion && net.stage_done() < 1 {
        return Err(NetError::MissingStage1);
    }
    let sc = *cfg.stage(stage);
    let sched = WarmRestarts::for_stage(sc.lr, sc.epochs);
    let multiple = net.config().size_multiple();
    let mut opt = Adam::<S>::new(net.params().len());
    let mut log = TrainLog::default();
    let batches = data.len().div_ceil(cfg.batch_size);
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..sc.epochs {
        let mut r = rng::keyed(cfg.seed, Stream::Shuffle, epoch as u64, stage.number() as u64);
        order.sort_unstable();
        order.shuffle(&mut r);
        let mut total = 0.0;
        let mut lr = sc.lr;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let step = log.step_losses.len() as u64;
            let items: Vec<&Prepared<S>> = chunk.iter().map(|&i| &data[i]).collect();
            let (x, gt) = make_batch(&items, cfg, multiple, step)?;
            let (loss, mut grads) = loss_and_grads(net, &x, &gt, stage, sc.lambdas)?;
            if !loss.is_finite() {
                return Err(NetError::config(format!("loss diverged at step {step}")));
            }
            clip_global_norm(&mut grads, cfg.clip);
            lr = sched.at(epoch as f64 + b as f64 / batches as f64);
            opt.update(net.params_mut(), &grads, lr);
            log.step_losses.push(loss);
            total += loss;
        }
        let last = epoch + 1 == sc.epochs;
        let (val_psnr, val_ssim) = if !val.is_empty() && ((epoch + 1) % cfg.eval_every == 0 || last) {
            let m = validate(net, val, stage)?;
            (Some(m.psnr_db), Some(m.ssim))
        } else {
            (None, None)
        };
        let rec = EpochRecord {
            epoch,
            stage: stage.number(),
            loss: total / batches as f64,
            val_psnr,
            val_ssim,
            lr,
        };
        on_epoch(&rec);
        log.epochs.push(rec);
    }
    net.set_stage_done(net.stage_done().max(stage.number()));
    Ok(log)
}
