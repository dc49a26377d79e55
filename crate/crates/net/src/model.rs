//! The dual-path restoration network.
//!
//! A deblurring path (long exposure plus events inside the exposure) and an
//! enhancement path (short exposure plus events around its instant) run as
//! two lockstep UNets. After the residual blocks of every encoder and decoder
//! scale the paths meet in a fusion site: deformable alignment warps the
//! deblurring features toward the short-exposure instant, then channel
//! cross-attention injects them into the enhancement features. Each path ends
//! in a residual image head, and a gated fusion stage blends both.

use edei_core::kv::KvMap;

use crate::error::{NetError, Result};
use crate::graph::{Graph, Var};
use crate::layers::{Conv, CrossAttention, DeformAlign, FeatureExtractor, ResBlock, Sam, UpConv};
use crate::params::{Bound, Builder, ParamStore};
use crate::tensor::{Scalar, Tensor};

/// Switches for the ablation variants.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Ablation {
    pub feed_events_deblur: bool,
    pub feed_events_enhance: bool,
    pub enable_da: bool,
    pub enable_caf: bool,
    /// Two independent sub-networks: deblur first, then enhance with the
    /// deblurred frame as an extra input. Excludes the fusion sites.
    pub serial_pipeline: bool,
}

impl Default for Ablation {
    fn default() -> Self {
        Self {
            feed_events_deblur: true,
            feed_events_enhance: true,
            enable_da: true,
            enable_caf: true,
            serial_pipeline: false,
        }
    }
}

impl Ablation {
    pub fn validate(&self) -> Result<()> {
        if self.serial_pipeline && (self.enable_da || self.enable_caf) {
            return Err(NetError::config(
                "serial_pipeline has no fusion sites; set enable_da and enable_caf to false",
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub base_channels: usize,
    pub num_scales: usize,
    pub attn_heads: usize,
    pub dcn_groups: usize,
    pub event_bins: usize,
    pub image_channels: usize,
    /// Residual blocks per scale in both encoder and decoder.
    pub blocks_per_scale: usize,
    pub ablation: Ablation,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            base_channels: 32,
            num_scales: 3,
            attn_heads: 4,
            dcn_groups: 8,
            event_bins: 6,
            image_channels: 3,
            blocks_per_scale: 3,
            ablation: Ablation::default(),
        }
    }
}

const KV_KEYS: &[&str] = &[
    "model.base_channels",
    "model.num_scales",
    "model.attn_heads",
    "model.dcn_groups",
    "model.event_bins",
    "model.image_channels",
    "model.blocks_per_scale",
    "ablation.feed_events_deblur",
    "ablation.feed_events_enhance",
    "ablation.enable_da",
    "ablation.enable_caf",
    "ablation.serial_pipeline",
];

impl ModelConfig {
    /// Small preset for laptop-scale experiments.
    pub fn desk() -> Self {
        Self {
            base_channels: 16,
            num_scales: 2,
            attn_heads: 2,
            dcn_groups: 2,
            blocks_per_scale: 1,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.base_channels;
        if c == 0 || self.num_scales == 0 || self.event_bins == 0 || self.blocks_per_scale == 0 {
            return Err(NetError::config(
                "base_channels, num_scales, event_bins and blocks_per_scale must be positive",
            ));
        }
        if self.attn_heads == 0 || !c.is_multiple_of(self.attn_heads) {
            return Err(NetError::config(format!(
                "base_channels {c} not divisible by attn_heads {}",
                self.attn_heads
            )));
        }
        if self.dcn_groups == 0 || !c.is_multiple_of(self.dcn_groups) {
            return Err(NetError::config(format!(
                "base_channels {c} not divisible by dcn_groups {}",
                self.dcn_groups
            )));
        }
        if self.image_channels != 1 && self.image_channels != 3 {
            return Err(NetError::config("image_channels must be 1 or 3"));
        }
        self.ablation.validate()
    }

    pub fn channels(&self, scale: usize) -> usize {
        self.base_channels << scale
    }

    /// Spatial sizes must be multiples of this.
    pub fn size_multiple(&self) -> usize {
        1 << (self.num_scales - 1)
    }

    pub fn fusion_sites(&self) -> usize {
        if self.ablation.serial_pipeline {
            0
        } else {
            2 * self.num_scales
        }
    }

    pub fn to_kv(&self) -> KvMap {
        let mut m = KvMap::new();
        m.set("model.base_channels", self.base_channels)
            .set("model.num_scales", self.num_scales)
            .set("model.attn_heads", self.attn_heads)
            .set("model.dcn_groups", self.dcn_groups)
            .set("model.event_bins", self.event_bins)
            .set("model.image_channels", self.image_channels)
            .set("model.blocks_per_scale", self.blocks_per_scale)
            .set("ablation.feed_events_deblur", self.ablation.feed_events_deblur)
            .set("ablation.feed_events_enhance", self.ablation.feed_events_enhance)
            .set("ablation.enable_da", self.ablation.enable_da)
            .set("ablation.enable_caf", self.ablation.enable_caf)
            .set("ablation.serial_pipeline", self.ablation.serial_pipeline);
        m
    }

    /// Reads `model.*` and `ablation.*` keys over the defaults; other keys are ignored.
    pub fn from_kv(m: &KvMap) -> Result<Self> {
        let d = Self::default();
        let a = d.ablation;
        let cfg = Self {
            base_channels: m.get_or("model.base_channels", d.base_channels)?,
            num_scales: m.get_or("model.num_scales", d.num_scales)?,
            attn_heads: m.get_or("model.attn_heads", d.attn_heads)?,
            dcn_groups: m.get_or("model.dcn_groups", d.dcn_groups)?,
            event_bins: m.get_or("model.event_bins", d.event_bins)?,
            image_channels: m.get_or("model.image_channels", d.image_channels)?,
            blocks_per_scale: m.get_or("model.blocks_per_scale", d.blocks_per_scale)?,
            ablation: Ablation {
                feed_events_deblur: m.get_or("ablation.feed_events_deblur", a.feed_events_deblur)?,
                feed_events_enhance: m.get_or("ablation.feed_events_enhance", a.feed_events_enhance)?,
                enable_da: m.get_or("ablation.enable_da", a.enable_da)?,
                enable_caf: m.get_or("ablation.enable_caf", a.enable_caf)?,
                serial_pipeline: m.get_or("ablation.serial_pipeline", a.serial_pipeline)?,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn kv_keys() -> &'static [&'static str] {
        KV_KEYS
    }
}

/// Returns `cfg` with the ablation flags replaced, after a consistency check.
pub fn apply_ablation(cfg: &ModelConfig, flags: Ablation) -> Result<ModelConfig> {
    flags.validate()?;
    let out = ModelConfig {
        ablation: flags,
        ..cfg.clone()
    };
    out.validate()?;
    Ok(out)
}

/// Network inputs for a batch; voxel grids have `event_bins` channels.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelInput<S> {
    pub short: Tensor<S>,
    pub long: Tensor<S>,
    pub vox_deblur: Tensor<S>,
    pub vox_enhance: Tensor<S>,
}

impl<S: Scalar> ModelInput<S> {
    pub fn batch(&self) -> usize {
        self.short.n()
    }

    pub fn size(&self) -> (usize, usize) {
        (self.short.h(), self.short.w())
    }

    pub fn crop(&self, y0: usize, x0: usize, h: usize, w: usize) -> Self {
        Self {
            short: self.short.crop(y0, x0, h, w),
            long: self.long.crop(y0, x0, h, w),
            vox_deblur: self.vox_deblur.crop(y0, x0, h, w),
            vox_enhance: self.vox_enhance.crop(y0, x0, h, w),
        }
    }

    pub fn pad_to(&self, h: usize, w: usize) -> Self {
        Self {
            short: self.short.pad_to(h, w),
            long: self.long.pad_to(h, w),
            vox_deblur: self.vox_deblur.pad_to(h, w),
            vox_enhance: self.vox_enhance.pad_to(h, w),
        }
    }

    pub fn stack(items: &[&ModelInput<S>]) -> Self {
        let pick = |f: fn(&ModelInput<S>) -> &Tensor<S>| Tensor::stack(&items.iter().map(|i| f(i)).collect::<Vec<_>>());
        Self {
            short: pick(|i| &i.short),
            long: pick(|i| &i.long),
            vox_deblur: pick(|i| &i.vox_deblur),
            vox_enhance: pick(|i| &i.vox_enhance),
        }
    }

    pub fn cast<T: Scalar>(&self) -> ModelInput<T> {
        ModelInput {
            short: self.short.cast(),
            long: self.long.cast(),
            vox_deblur: self.vox_deblur.cast(),
            vox_enhance: self.vox_enhance.cast(),
        }
    }
}

/// The four inputs placed on a tape.
#[derive(Clone, Copy, Debug)]
pub struct InputVars {
    pub short: Var,
    pub long: Var,
    pub vox_deblur: Var,
    pub vox_enhance: Var,
}

impl InputVars {
    pub fn constants<S: Scalar>(g: &mut Graph<S>, x: &ModelInput<S>) -> Self {
        Self {
            short: g.constant(x.short.clone()),
            long: g.constant(x.long.clone()),
            vox_deblur: g.constant(x.vox_deblur.clone()),
            vox_enhance: g.constant(x.vox_enhance.clone()),
        }
    }
}

/// Outputs of both paths plus their full-resolution features.
#[derive(Clone, Copy, Debug)]
pub struct PathOutputs {
    pub deblurred: Var,
    pub enhanced: Var,
    pub feat_l: Var,
    pub feat_s: Var,
}

/// Intermediate values captured during a forward pass.
#[derive(Clone, Debug, Default)]
pub struct Trace<S> {
    /// `(F_l, F_s)` entering each fusion site: encoder scales, then decoder scales from deepest.
    pub site_inputs: Vec<(Tensor<S>, Tensor<S>)>,
    pub attention: Vec<Tensor<S>>,
    pub mask: Option<Tensor<S>>,
}

#[derive(Clone, Debug)]
pub struct FusionSite {
    pub da: Option<DeformAlign>,
    pub caf: Option<CrossAttention>,
}

impl FusionSite {
    fn new<S: Scalar>(pb: &mut Builder<S>, name: &str, cfg: &ModelConfig, c: usize) -> Self {
        let mut s = pb.sub(name);
        Self {
            da: cfg
                .ablation
                .enable_da
                .then(|| DeformAlign::new(&mut s, "da", c, cfg.dcn_groups)),
            caf: cfg
                .ablation
                .enable_caf
                .then(|| CrossAttention::new(&mut s, "caf", c, cfg.attn_heads)),
        }
    }

    pub fn forward<S: Scalar>(
        &self,
        g: &mut Graph<S>,
        p: &Bound,
        fl: Var,
        fs: Var,
        trace: Option<&mut Trace<S>>,
    ) -> (Var, Var) {
        let mut trace = trace;
        if let Some(t) = trace.as_deref_mut() {
            t.site_inputs.push((g.value(fl).clone(), g.value(fs).clone()));
        }
        let fl2 = match &self.da {
            Some(da) => da.forward(g, p, fl, fs),
            None => fl,
        };
        let fs2 = match &self.caf {
            Some(caf) => caf.forward(g, p, fs, fl2, trace.map(|t| &mut t.attention)),
            None => fs,
        };
        (fl2, fs2)
    }
}

#[derive(Clone, Debug)]
pub struct Path {
    pub feat: FeatureExtractor,
    pub enc: Vec<Vec<ResBlock>>,
    pub down: Vec<Conv>,
    pub up: Vec<UpConv>,
    pub fuse: Vec<Conv>,
    pub dec: Vec<Vec<ResBlock>>,
    pub head: Conv,
}

impl Path {
    fn new<S: Scalar>(pb: &mut Builder<S>, name: &str, cfg: &ModelConfig, in_channels: usize) -> Self {
        let mut s = pb.sub(name);
        let sc = cfg.num_scales;
        let blocks = |s: &mut Builder<S>, tag: &str, k: usize| {
            (0..cfg.blocks_per_scale)
                .map(|i| ResBlock::new(s, &format!("{tag}{k}.rb{i}"), cfg.channels(k)))
                .collect::<Vec<_>>()
        };
        let feat = FeatureExtractor::new(&mut s, "feat", in_channels, cfg.base_channels);
        let enc = (0..sc).map(|k| blocks(&mut s, "enc", k)).collect();
        let down = (0..sc - 1)
            .map(|k| {
                Conv::strided(
                    &mut s,
                    &format!("down{k}"),
                    cfg.channels(k),
                    cfg.channels(k + 1),
                    2,
                    2,
                    0,
                    false,
                )
            })
            .collect();
        let up = (0..sc - 1)
            .map(|k| UpConv::new(&mut s, &format!("up{k}"), cfg.channels(k + 1), cfg.channels(k)))
            .collect();
        let fuse = (0..sc - 1)
            .map(|k| {
                Conv::new(
                    &mut s,
                    &format!("skip{k}"),
                    2 * cfg.channels(k),
                    cfg.channels(k),
                    1,
                    false,
                )
            })
            .collect();
        let dec = (0..sc).map(|k| blocks(&mut s, "dec", k)).collect();
        let head = Conv::new(&mut s, "head", cfg.base_channels, cfg.image_channels, 3, true);
        Self {
            feat,
            enc,
            down,
            up,
            fuse,
            dec,
            head,
        }
    }

    fn blocks<S: Scalar>(g: &mut Graph<S>, p: &Bound, blocks: &[ResBlock], mut x: Var) -> Var {
        for b in blocks {
            x = b.forward(g, p, x);
        }
        x
    }

    fn merge<S: Scalar>(&self, g: &mut Graph<S>, p: &Bound, k: usize, x: Var, skip: Var) -> Var {
        let x = self.up[k].forward(g, p, x);
        let x = g.cat_channels(&[x, skip]);
        self.fuse[k].forward(g, p, x)
    }

    /// Stand-alone UNet pass returning `(features, image)`.
    fn run<S: Scalar>(&self, g: &mut Graph<S>, p: &Bound, image: Var, events: Var, base: Var) -> (Var, Var) {
        let sc = self.enc.len();
        let mut x = self.feat.forward(g, p, image, events);
        let mut skips = Vec::new();
        for k in 0..sc {
            x = Self::blocks(g, p, &self.enc[k], x);
            if k + 1 < sc {
                skips.push(x);
                x = self.down[k].forward(g, p, x);
            }
        }
        for k in (0..sc).rev() {
            if k + 1 < sc {
                x = self.merge(g, p, k, x, skips[k]);
            }
            x = Self::blocks(g, p, &self.dec[k], x);
        }
        let r = self.head.forward(g, p, x);
        (x, g.add(base, r))
    }
}

#[derive(Clone, Debug)]
pub struct GatedFusion {
    pub sam_l: Sam,
    pub sam_s: Sam,
    pub sa1: Conv,
    pub sa2: Conv,
    pub out: Conv,
}

/// The parameter prefix of the gated fusion stage.
pub const FUSION_PREFIX: &str = "cgf.";

pub fn is_fusion_param(name: &str) -> bool {
    name.starts_with(FUSION_PREFIX)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamCount {
    pub total: usize,
    /// Everything except the gated fusion stage.
    pub paths: usize,
}

#[derive(Clone, Debug)]
pub struct EdeiNet<S> {
    cfg: ModelConfig,
    params: ParamStore<S>,
    stage_done: u8,
    pub deblur: Path,
    pub enhance: Path,
    pub enc_sites: Vec<FusionSite>,
    pub dec_sites: Vec<FusionSite>,
    pub fusion: GatedFusion,
}

/// Host-side network outputs for a batch.
#[derive(Clone, Debug)]
pub struct Prediction<S> {
    pub deblurred: Tensor<S>,
    pub enhanced: Tensor<S>,
    pub fused: Tensor<S>,
}

impl<S: Scalar> EdeiNet<S> {
    pub fn new(cfg: &ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut params = ParamStore::default();
        let mut pb = Builder::new(&mut params, seed);
        let img = cfg.image_channels;
        let bins = cfg.event_bins;
        let deblur = Path::new(&mut pb, "deblur", cfg, img + bins);
        let enh_in = if cfg.ablation.serial_pipeline {
            2 * img + bins
        } else {
            img + bins
        };
        let enhance = Path::new(&mut pb, "enhance", cfg, enh_in);
        let (mut enc_sites, mut dec_sites) = (Vec::new(), Vec::new());
        if !cfg.ablation.serial_pipeline {
            let mut s = pb.sub("dfaf");
            for k in 0..cfg.num_scales {
                enc_sites.push(FusionSite::new(&mut s, &format!("enc{k}"), cfg, cfg.channels(k)));
            }
            for k in (0..cfg.num_scales).rev() {
                dec_sites.push(FusionSite::new(&mut s, &format!("dec{k}"), cfg, cfg.channels(k)));
            }
            dec_sites.reverse();
        }
        let c = cfg.base_channels;
        let fusion = {
            let mut s = pb.sub("cgf");
            GatedFusion {
                sam_l: Sam::new(&mut s, "sam_l", c, img),
                sam_s: Sam::new(&mut s, "sam_s", c, img),
                sa1: Conv::new(&mut s, "sa1", 2 * c, c, 3, false),
                sa2: Conv::new(&mut s, "sa2", c, 1, 3, false),
                out: Conv::new(&mut s, "out", c, img, 3, true),
            }
        };
        Ok(Self {
            cfg: cfg.clone(),
            params,
            stage_done: 0,
            deblur,
            enhance,
            enc_sites,
            dec_sites,
            fusion,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }
    pub fn params(&self) -> &ParamStore<S> {
        &self.params
    }
    pub fn params_mut(&mut self) -> &mut ParamStore<S> {
        &mut self.params
    }

    /// Highest training stage completed on these parameters (0 when untrained).
    pub fn stage_done(&self) -> u8 {
        self.stage_done
    }
    pub fn set_stage_done(&mut self, stage: u8) {
        self.stage_done = stage;
    }

    /// Fusion sites in trace order: encoder scales, then decoder scales from deepest.
    pub fn sites(&self) -> Vec<&FusionSite> {
        self.enc_sites.iter().chain(self.dec_sites.iter().rev()).collect()
    }

    pub fn count(&self) -> ParamCount {
        ParamCount {
            total: self.params.count(),
            paths: self.params.count_where(|n| !is_fusion_param(n)),
        }
    }

    /// Same architecture with parameters converted to another precision.
    pub fn cast<T: Scalar>(&self) -> EdeiNet<T> {
        EdeiNet {
            cfg: self.cfg.clone(),
            params: self.params.cast(),
            stage_done: self.stage_done,
            deblur: self.deblur.clone(),
            enhance: self.enhance.clone(),
            enc_sites: self.enc_sites.clone(),
            dec_sites: self.dec_sites.clone(),
            fusion: self.fusion.clone(),
        }
    }

    pub fn check_input(&self, x: &ModelInput<S>) -> Result<()> {
        let [n, c, h, w] = x.short.shape();
        let img = self.cfg.image_channels;
        let bins = self.cfg.event_bins;
        if c != img || x.long.shape() != [n, img, h, w] {
            return Err(NetError::shape(format!(
                "images must be {img}-channel and equally sized, got {:?} and {:?}",
                x.short.shape(),
                x.long.shape()
            )));
        }
        for (name, v) in [("deblur", &x.vox_deblur), ("enhance", &x.vox_enhance)] {
            if v.shape() != [n, bins, h, w] {
                return Err(NetError::shape(format!(
                    "{name} voxel grid {:?} does not match images {:?} with {bins} bins",
                    v.shape(),
                    x.short.shape()
                )));
            }
        }
        let m = self.cfg.size_multiple();
        if h % m != 0 || w % m != 0 {
            return Err(NetError::shape(format!("input {h}x{w} is not a multiple of {m}")));
        }
        Ok(())
    }

    /// Runs both paths. Inputs must already satisfy [`Self::check_input`].
    pub fn forward_paths(
        &self,
        g: &mut Graph<S>,
        p: &Bound,
        x: InputVars,
        mut trace: Option<&mut Trace<S>>,
    ) -> PathOutputs {
        let ab = self.cfg.ablation;
        let ev_d = if ab.feed_events_deblur {
            x.vox_deblur
        } else {
            g.affine(x.vox_deblur, 0.0, 0.0)
        };
        let ev_e = if ab.feed_events_enhance {
            x.vox_enhance
        } else {
            g.affine(x.vox_enhance, 0.0, 0.0)
        };
        if ab.serial_pipeline {
            let (feat_l, deblurred) = self.deblur.run(g, p, x.long, ev_d, x.long);
            let img = g.cat_channels(&[x.short, deblurred]);
            let (feat_s, enhanced) = self.enhance.run(g, p, img, ev_e, x.short);
            return PathOutputs {
                deblurred,
                enhanced,
                feat_l,
                feat_s,
            };
        }
        let (dl, en) = (&self.deblur, &self.enhance);
        let sc = self.cfg.num_scales;
        let mut fl = dl.feat.forward(g, p, x.long, ev_d);
        let mut fs = en.feat.forward(g, p, x.short, ev_e);
        let mut skips = Vec::new();
        for k in 0..sc {
            fl = Path::blocks(g, p, &dl.enc[k], fl);
            fs = Path::blocks(g, p, &en.enc[k], fs);
            (fl, fs) = self.enc_sites[k].forward(g, p, fl, fs, trace.as_deref_mut());
            if k + 1 < sc {
                skips.push((fl, fs));
                fl = dl.down[k].forward(g, p, fl);
                fs = en.down[k].forward(g, p, fs);
            }
        }
        for k in (0..sc).rev() {
            if k + 1 < sc {
                fl = dl.merge(g, p, k, fl, skips[k].0);
                fs = en.merge(g, p, k, fs, skips[k].1);
            }
            fl = Path::blocks(g, p, &dl.dec[k], fl);
            fs = Path::blocks(g, p, &en.dec[k], fs);
            (fl, fs) = self.dec_sites[k].forward(g, p, fl, fs, trace.as_deref_mut());
        }
        let rl = dl.head.forward(g, p, fl);
        let rs = en.head.forward(g, p, fs);
        PathOutputs {
            deblurred: g.add(x.long, rl),
            enhanced: g.add(x.short, rs),
            feat_l: fl,
            feat_s: fs,
        }
    }

    /// Gated fusion of both paths. `mask` replaces the learned spatial mask.
    pub fn cgf_fuse(
        &self,
        g: &mut Graph<S>,
        p: &Bound,
        o: &PathOutputs,
        mask: Option<f64>,
        trace: Option<&mut Trace<S>>,
    ) -> Var {
        let f = &self.fusion;
        let fl = f.sam_l.forward(g, p, o.deblurred, o.feat_l);
        let fs = f.sam_s.forward(g, p, o.enhanced, o.feat_s);
        let m = match mask {
            Some(v) => {
                let [n, _, h, w] = g.value(fl).shape();
                g.constant(Tensor::full([n, 1, h, w], S::of(v)))
            }
            None => {
                let x = g.cat_channels(&[fl, fs]);
                let x = f.sa1.forward(g, p, x);
                let x = g.relu(x);
                let x = f.sa2.forward(g, p, x);
                g.sigmoid(x)
            }
        };
        if let Some(t) = trace {
            t.mask = Some(g.value(m).clone());
        }
        let a = g.mul_mask(fs, m);
        let inv = g.affine(m, -1.0, 1.0);
        let b = g.mul_mask(fl, inv);
        let mixed = g.add(a, b);
        let r = f.out.forward(g, p, mixed);
        g.add(r, o.enhanced)
    }

    /// Inference without gradients; inputs are edge-padded to a valid size
    /// and outputs cropped back.
    pub fn predict(&self, x: &ModelInput<S>) -> Result<Prediction<S>> {
        self.predict_traced(x, None, None)
    }

    pub fn predict_traced(
        &self,
        x: &ModelInput<S>,
        mask: Option<f64>,
        mut trace: Option<&mut Trace<S>>,
    ) -> Result<Prediction<S>> {
        let (h, w) = x.size();
        let m = self.cfg.size_multiple();
        let (hp, wp) = (h.div_ceil(m) * m, w.div_ceil(m) * m);
        let padded = if (hp, wp) == (h, w) {
            x.clone()
        } else {
            x.pad_to(hp, wp)
        };
        self.check_input(&padded)?;
        let mut g = Graph::new();
        let p = self.params.bind(&mut g, |_| false);
        let iv = InputVars::constants(&mut g, &padded);
        let o = self.forward_paths(&mut g, &p, iv, trace.as_deref_mut());
        let fused = self.cgf_fuse(&mut g, &p, &o, mask, trace);
        let take = |v: Var| g.value(v).crop(0, 0, h, w);
        Ok(Prediction {
            deblurred: take(o.deblurred),
            enhanced: take(o.enhanced),
            fused: take(fused),
        })
    }
}

/// Exact trainable-parameter count of the network described by `cfg`.
pub fn count_parameters(cfg: &ModelConfig) -> Result<ParamCount> {
    Ok(EdeiNet::<f32>::new(cfg, 0)?.count())
}
