//! Evaluation of trained networks and the robustness sweeps.

use edei_core::metrics::{MetricReport, SampleMetric};
use edei_core::synthesis::{make_sample, sample_times, SynthesisRecipe};
use edei_core::{ExposureSample, FrameSequence};

use crate::data::{prepare, Prepared};
use crate::error::{NetError, Result};
use crate::loss::Lambdas;
use crate::model::{EdeiNet, ModelConfig};
use crate::tensor::Scalar;
use crate::train::{train_stage, Stage, TrainConfig};

/// Metrics of all three outputs over a sample set.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalReport {
    pub fused: MetricReport,
    pub enhanced: MetricReport,
    pub deblurred: MetricReport,
}

pub fn evaluate<S: Scalar>(net: &EdeiNet<S>, data: &[Prepared<S>]) -> Result<EvalReport> {
    let (mut f, mut e, mut d): (Vec<SampleMetric>, Vec<SampleMetric>, Vec<SampleMetric>) = Default::default();
    for p in data {
        let gt =
            p.gt.as_ref()
                .ok_or_else(|| NetError::config(format!("sample {} has no ground truth", p.name)))?
                .to_frame(0)?;
        let pred = net.predict(&p.input)?;
        f.push(MetricReport::score(&p.name, &pred.fused.to_frame(0)?, &gt)?);
        e.push(MetricReport::score(&p.name, &pred.enhanced.to_frame(0)?, &gt)?);
        d.push(MetricReport::score(&p.name, &pred.deblurred.to_frame(0)?, &gt)?);
    }
    Ok(EvalReport {
        fused: MetricReport::from_samples(f),
        enhanced: MetricReport::from_samples(e),
        deblurred: MetricReport::from_samples(d),
    })
}

/// One row of a sweep table: the swept value and the fused-output metrics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub psnr_db: f64,
    pub ssim: f64,
}

impl SweepRow {
    pub fn to_json(&self, key: &str) -> String {
        format!(
            "{{\"{key}\":{},\"psnr\":{},\"ssim\":{}}}",
            self.value, self.psnr_db, self.ssim
        )
    }
}

/// Offsets of the deblurring-window start, in units of the interval `T_i`.
pub const TEMPORAL_EPS: [f64; 9] = [-0.2, -0.15, -0.1, -0.05, 0.0, 0.05, 0.1, 0.15, 0.2];

/// Unseen and training exposure ratios.
pub const RATIOS: [f64; 9] = [3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0];

fn prepare_all<S: Scalar>(samples: &[(String, ExposureSample)], bins: usize, eps: f64) -> Result<Vec<Prepared<S>>> {
    samples.iter().map(|(n, s)| prepare(n.clone(), s, bins, eps)).collect()
}

/// Re-voxelizes the deblurring events with each perturbed window and
/// evaluates the fused output.
pub fn sweep_temporal<S: Scalar>(
    net: &EdeiNet<S>,
    samples: &[(String, ExposureSample)],
    eps_list: &[f64],
) -> Result<Vec<SweepRow>> {
    let bins = net.config().event_bins;
    eps_list
        .iter()
        .map(|&eps| {
            let r = evaluate(net, &prepare_all::<S>(samples, bins, eps)?)?;
            Ok(SweepRow {
                value: eps,
                psnr_db: r.fused.psnr_db,
                ssim: r.fused.ssim,
            })
        })
        .collect()
}

/// Samples of `seq` regenerated at exposure ratio `r` with `T_i` unchanged.
pub fn ratio_samples(
    seq: &FrameSequence,
    recipe: &SynthesisRecipe,
    r: f64,
    times: &[f64],
) -> Result<Vec<(String, ExposureSample)>> {
    let rr = recipe.with_ratio(r);
    times
        .iter()
        .enumerate()
        .map(|(i, &t)| Ok((format!("R{r}_{i:04}"), make_sample(seq, &rr, t)?)))
        .collect()
}

/// Sample instants valid for every ratio in `ratios`.
pub fn common_times(seq: &FrameSequence, recipe: &SynthesisRecipe, ratios: &[f64]) -> Vec<f64> {
    let widest = ratios.iter().copied().fold(recipe.exposure_ratio, f64::max);
    sample_times(seq, &recipe.with_ratio(widest))
}

/// Evaluates the fused output on samples regenerated for each ratio.
/// `seq` must already be temporally upsampled.
pub fn sweep_ratio<S: Scalar>(
    net: &EdeiNet<S>,
    seq: &FrameSequence,
    recipe: &SynthesisRecipe,
    ratios: &[f64],
) -> Result<Vec<SweepRow>> {
    let times = common_times(seq, recipe, ratios);
    if times.is_empty() {
        return Err(NetError::config("sequence too short for the widest exposure ratio"));
    }
    let bins = net.config().event_bins;
    ratios
        .iter()
        .map(|&r| {
            let samples = ratio_samples(seq, recipe, r, &times)?;
            let rep = evaluate(net, &prepare_all::<S>(&samples, bins, 0.0)?)?;
            Ok(SweepRow {
                value: r,
                psnr_db: rep.fused.psnr_db,
                ssim: rep.fused.ssim,
            })
        })
        .collect()
}

/// Both-path PSNR after stage-1 training with deblurring weight `lambda3`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lambda3Row {
    pub lambda3: f64,
    pub psnr_deblurred: f64,
    pub psnr_enhanced: f64,
}

/// Trains a fresh network per `lambda3` value and records both paths on `val`.
pub fn sweep_lambda3<S: Scalar>(
    model: &ModelConfig,
    train: &TrainConfig,
    data: &[Prepared<S>],
    val: &[Prepared<S>],
    values: &[f64],
) -> Result<Vec<Lambda3Row>> {
    values
        .iter()
        .map(|&l3| {
            let mut cfg = train.clone();
            cfg.stage1.lambdas = Lambdas::new(cfg.stage1.lambdas.fused, cfg.stage1.lambdas.enhanced, l3);
            let mut net = EdeiNet::<S>::new(model, train.seed)?;
            train_stage(&mut net, data, &[], &cfg, Stage::Paths, |_| {})?;
            let r = evaluate(&net, val)?;
            Ok(Lambda3Row {
                lambda3: l3,
                psnr_deblurred: r.deblurred.psnr_db,
                psnr_enhanced: r.enhanced.psnr_db,
            })
        })
        .collect()
}
