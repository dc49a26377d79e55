//! Building blocks of the dual-path network.

use crate::graph::{Graph, Var};
use crate::params::{Bound, Builder, Init, ParamId};
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Debug)]
pub struct Conv {
    pub w: ParamId,
    pub b: ParamId,
    pub stride: usize,
    pub pad: usize,
}

impl Conv {
    pub fn new<S: Scalar>(pb: &mut Builder<S>, name: &str, cin: usize, cout: usize, k: usize, zero: bool) -> Self {
        Self::strided(pb, name, cin, cout, k, 1, k / 2, zero)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn strided<S: Scalar>(
        pb: &mut Builder<S>,
        name: &str,
        cin: usize,
        cout: usize,
        k: usize,
        stride: usize,
        pad: usize,
        zero: bool,
    ) -> Self {
        let mut s = pb.sub(name);
        let fan = cin * k * k;
        let (wi, bi) = if zero {
            (Init::Zeros, Init::Zeros)
        } else {
            (Init::FanIn(fan), Init::FanIn(fan))
        };
        Self {
            w: s.param("w", [cout, cin, k, k], wi),
            b: s.param("b", [1, cout, 1, 1], bi),
            stride,
            pad,
        }
    }

    pub fn forward<S: Scalar>(&self, g: &mut Graph<S>, p: &Bound, x: Var) -> Var {
        g.conv2d(x, p.var(self.w), Some(p.var(self.b)), self.stride, self.pad)
    }
}

#[derive(Clone, Debug)]
pub struct DwConv {
    pub w: ParamId,
    pub b: ParamId,
}

impl DwConv {
    pub fn new<S: Scalar>(pb: &mut Builder<S>, name: &str, c: usize) -> Self {
        let mut s = pb.sub(name);
        Self {
            w: s.param("w", [c, 1, 3, 3], Init::FanIn(9)),
            b: s.param("b", [1, c, 1, 1], Init::FanIn(9)),
        }
    }

    pub fn forward<S: Scalar>(&self, g: &mut Graph<S>, p: &Bound, x: Var) -> Var {
        g.dwconv3(x, p.var(self.w), Some(p.var(self.b)))
    }
}

#[derive(Clone, Debug)]
pub struct UpConv {
    pub w: ParamId,
    pub b: ParamId,
}

impl UpConv {
    pub fn new<S: Scalar>(pb: &mut Builder<S>, name: &str, cin: usize, cout: usize) -> Self {
        let mut s = pb.sub(name);
        Self {
            w: s.param("w", [cin, cout, 2, 2], Init::FanIn(cin)),
            b: s.param("b", [1, cout, 1, 1], Init::FanIn(cin)),
        }
    }

    pub fn forward<S: Scalar>(&self, g: &mut Graph<S>, p: &Bound, x: Var) -> Var {
        g.conv_t2(x, p.var(self.w), Some(p.var(self.b)))
    }
}

#[derive(Clone, Debug)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
}

impl LayerNorm {
    pub fn new<S: Scalar>(pb: &mut Builder<S>, name: &str, c: usize) -> Self {
        let mut s = pb.sub(name);
        Self {
            gamma: s.param("gamma", [1, c, 1, 1], Init::Ones),
            beta: s.param("beta", [1, c, 1, 1], Init::Zeros),
        }
    }

    pub fn forward<S: Scalar>(&self, g: &mut Graph<S>, p: &Bound, x: Var) -> Var {
        g.layer_norm(x, p.var(self.gamma), p.var(self.beta))
    }
}

/// `x + conv(relu(conv(x)))`.
#[derive(Clone, Debug)]
pub struct ResBlock {
    pub c1: Conv,
    pub c2: Conv,
}

impl ResBlock {
    pub fn new<S: Scalar>(pb: &mut Builder<S>, name: &str, c: usize) -> Self {
        let mut s = pb.sub(name);
        Self {
            c1: Conv::new(&mut s, "c1", c, c, 3, false),
            c2: Conv::new(&mut s, "c2", c, c, 3, false),
        }
    }

    pub fn forward<S: Scalar>(&self, g: &mut Graph<S>, p: &Bound, x: Var) -> Var {
        let h = self.c1.forward(g, p, x);
        let h = g.relu(h);
        let h = self.c2.forward(g, p, h);
        g.add(x, h)
    }
}

/// Image and voxel grid to features: 3x3 convolution then a residual block.
#[derive(Clone, Debug)]
pub struct FeatureExtractor {
    pub conv: Conv,
    pub res: ResBlock,
}

impl FeatureExtractor {
    pub fn new<S: Scalar>(pb: &mut Builder<S>, name: &str, cin: usize, c: usize) -> Self {
        let mut s = pb.sub(name);
        Self {
            conv: Conv::new(&mut s, "conv", cin, c, 3, false),
            res: ResBlock::new(&mut s, "res", c),
        }
    }

    pub fn forward<S: Scalar>(&self, g: &mut Graph<S>, p: &Bound, image: Var, events: Var) -> Var {
        let x = g.cat_channels(&[image, events]);
        let x = self.conv.forward(g, p, x);
        self.res.forward(g, p, x)
    }
}

/// Offsets predicted from both paths drive a deformable convolution of the
/// long-exposure features only.
#[derive(Clone, Debug)]
pub struct DeformAlign {
    pub offset: Conv,
    pub w: ParamId,
    pub b: ParamId,
    pub groups: usize,
}

impl DeformAlign {
    pub fn new<S: Scalar>(pb: &mut Builder<S>, name: &str, c: usize, groups: usize) -> Self {
        let mut s = pb.sub(name);
        Self {
            offset: Conv::new(&mut s, "offset", 2 * c, 18 * groups, 3, true),
            w: s.param("w", [c, c, 3, 3], Init::FanIn(9 * c)),
            b: s.param("b", [1, c, 1, 1], Init::FanIn(9 * c)),
            groups,
        }
    }

    /// Offset magnitude bound for an `h x w` feature map.
    pub fn offset_limit(h: usize, w: usize) -> f64 {
        (h.max(w) as f64 / 4.0).ceil()
    }

    pub fn offsets<S: Scalar>(&self, g: &mut Graph<S>, p: &Bound, fl: Var, fs: Var) -> Var {
        let [_, _, h, w] = g.value(fl).shape();
        let x = g.cat_channels(&[fl, fs]);
        let off = self.offset.forward(g, p, x);
        let lim = Self::offset_limit(h, w);
        g.clamp(off, -lim, lim)
    }

    pub fn apply<S: Scalar>(&self, g: &mut Graph<S>, p: &Bound, fl: Var, offsets: Var) -> Var {
        g.deform_conv(fl, offsets, p.var(self.w), Some(p.var(self.b)), self.groups)
    }

    pub fn forward<S: Scalar>(&self, g: &mut Graph<S>, p: &Bound, fl: Var, fs: Var) -> Var {
        let off = self.offsets(g, p, fl, fs);
        self.apply(g, p, fl, off)
    }
}

/// Channel cross-attention from the enhancement path (queries) to the
/// aligned deblurring features (keys and values), then a feed-forward block.
#[derive(Clone, Debug)]
pub struct CrossAttention {
    pub ln_q: LayerNorm,
    pub q_pw: Conv,
    pub q_dw: DwConv,
    pub ln_kv: LayerNorm,
    pub kv_pw: Conv,
    pub kv_dw: DwConv,
    pub temp: ParamId,
    pub ln_ffn: LayerNorm,
    pub ffn_in: Conv,
    pub ffn_dw: DwConv,
    pub ffn_out: Conv,
    pub heads: usize,
    pub channels: usize,
}

impl CrossAttention {
    pub fn new<S: Scalar>(pb: &mut Builder<S>, name: &str, c: usize, heads: usize) -> Self {
        let mut s = pb.sub(name);
        Self {
            ln_q: LayerNorm::new(&mut s, "ln_q", c),
            q_pw: Conv::new(&mut s, "q_pw", c, c, 1, false),
            q_dw: DwConv::new(&mut s, "q_dw", c),
            ln_kv: LayerNorm::new(&mut s, "ln_kv", c),
            kv_pw: Conv::new(&mut s, "kv_pw", c, 2 * c, 1, false),
            kv_dw: DwConv::new(&mut s, "kv_dw", 2 * c),
            temp: s.param("temp", [1, heads, 1, 1], Init::Ones),
            ln_ffn: LayerNorm::new(&mut s, "ln_ffn", c),
            ffn_in: Conv::new(&mut s, "ffn_in", c, 2 * c, 1, false),
            ffn_dw: DwConv::new(&mut s, "ffn_dw", 2 * c),
            ffn_out: Conv::new(&mut s, "ffn_out", 2 * c, c, 1, false),
            heads,
            channels: c,
        }
    }

    /// Queries, keys and values before attention.
    pub fn qkv<S: Scalar>(&self, g: &mut Graph<S>, p: &Bound, fs: Var, fl: Var) -> (Var, Var, Var) {
        let q = self.ln_q.forward(g, p, fs);
        let q = self.q_pw.forward(g, p, q);
        let q = self.q_dw.forward(g, p, q);
        let kv = self.ln_kv.forward(g, p, fl);
        let kv = self.kv_pw.forward(g, p, kv);
        let kv = self.kv_dw.forward(g, p, kv);
        let k = g.slice_channels(kv, 0, self.channels);
        let v = g.slice_channels(kv, self.channels, self.channels);
        (q, k, v)
    }

    pub fn ffn<S: Scalar>(&self, g: &mut Graph<S>, p: &Bound, x: Var) -> Var {
        let h = self.ln_ffn.forward(g, p, x);
        let h = self.ffn_in.forward(g, p, h);
        let h = self.ffn_dw.forward(g, p, h);
        let h = g.gelu(h);
        let h = self.ffn_out.forward(g, p, h);
        g.add(x, h)
    }

    /// Returns the fused features and, when `log` is set, the attention maps.
    pub fn forward<S: Scalar>(
        &self,
        g: &mut Graph<S>,
        p: &Bound,
        fs: Var,
        fl: Var,
        log: Option<&mut Vec<Tensor<S>>>,
    ) -> Var {
        let (q, k, v) = self.qkv(g, p, fs, fl);
        if let Some(log) = log {
            log.push(crate::ops::attention_maps(
                g.value(q),
                g.value(k),
                g.value(p.var(self.temp)),
                self.heads,
            ));
        }
        let a = g.channel_attention(q, k, v, p.var(self.temp), self.heads);
        let x = g.add(fs, a);
        self.ffn(g, p, x)
    }
}

/// Supervised attention: an image-domain estimate gates the features.
#[derive(Clone, Debug)]
pub struct Sam {
    pub feat: Conv,
    pub to_img: Conv,
    pub from_img: Conv,
}

impl Sam {
    pub fn new<S: Scalar>(pb: &mut Builder<S>, name: &str, c: usize, img: usize) -> Self {
        let mut s = pb.sub(name);
        Self {
            feat: Conv::new(&mut s, "feat", c, c, 3, false),
            to_img: Conv::new(&mut s, "to_img", c, img, 3, false),
            from_img: Conv::new(&mut s, "from_img", img, c, 3, false),
        }
    }

    pub fn forward<S: Scalar>(&self, g: &mut Graph<S>, p: &Bound, image: Var, x: Var) -> Var {
        let x1 = self.feat.forward(g, p, x);
        let r = self.to_img.forward(g, p, x);
        let im = g.add(r, image);
        let gate = self.from_img.forward(g, p, im);
        let gate = g.sigmoid(gate);
        let y = g.mul(x1, gate);
        g.add(y, x)
    }
}
