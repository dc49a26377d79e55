//! Layer normalisation across channels at every pixel.

use crate::graph::{Graph, Var};
use crate::tensor::{Scalar, Tensor};

const LN_EPS: f64 = 1e-5;

/// Returns normalised values and per-pixel inverse standard deviations.
fn normalise<S: Scalar>(x: &Tensor<S>) -> (Vec<S>, Vec<S>) {
    let [n, c, h, w] = x.shape();
    let p = h * w;
    let inv_c = S::one() / S::of(c as f64);
    let eps = S::of(LN_EPS);
    let mut xhat = vec![S::zero(); x.len()];
    let mut rstd = vec![S::zero(); n * p];
    for b in 0..n {
        let item = x.item(b);
        let mut mean = vec![S::zero(); p];
        for ch in 0..c {
            for (m, &v) in mean.iter_mut().zip(&item[ch * p..(ch + 1) * p]) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m *= inv_c);
        let mut var = vec![S::zero(); p];
        for ch in 0..c {
            for ((s, &v), &m) in var.iter_mut().zip(&item[ch * p..(ch + 1) * p]).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let r = &mut rstd[b * p..(b + 1) * p];
        for (ri, &s) in r.iter_mut().zip(&var) {
            *ri = S::one() / (s * inv_c + eps).sqrt();
        }
        for ch in 0..c {
            let dst = &mut xhat[(b * c + ch) * p..(b * c + ch + 1) * p];
            for i in 0..p {
                dst[i] = (item[ch * p + i] - mean[i]) * r[i];
            }
        }
    }
    (xhat, rstd)
}

impl<S: Scalar> Graph<S> {
    /// `gamma` and `beta` are `(1, C, 1, 1)`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Var {
        let tx = self.value(x);
        let [n, c, h, w] = tx.shape();
        assert_eq!(self.value(gamma).shape(), [1, c, 1, 1], "layer_norm: gamma shape");
        assert_eq!(self.value(beta).shape(), [1, c, 1, 1], "layer_norm: beta shape");
        let p = h * w;
        let (xhat, _) = normalise(tx);
        let (gm, bt) = (self.value(gamma).data(), self.value(beta).data());
        let mut out = xhat;
        for b in 0..n {
            for ch in 0..c {
                for v in &mut out[(b * c + ch) * p..(b * c + ch + 1) * p] {
                    *v = *v * gm[ch] + bt[ch];
                }
            }
        }
        self.record(
            Tensor::from_vec([n, c, h, w], out),
            &[x, gamma, beta],
            Box::new(move |inp, _, g| {
                let (xhat, rstd) = normalise(inp[0]);
                let gm = inp[1].data();
                let inv_c = S::one() / S::of(c as f64);
                let mut dx = vec![S::zero(); n * c * p];
                let mut dg = vec![S::zero(); c];
                let mut db = vec![S::zero(); c];
                for b in 0..n {
                    let mut m1 = vec![S::zero(); p];
                    let mut m2 = vec![S::zero(); p];
                    for ch in 0..c {
                        let off = (b * c + ch) * p;
                        for i in 0..p {
                            let gy = g.data()[off + i];
                            let d = gy * gm[ch];
                            m1[i] += d;
                            m2[i] += d * xhat[off + i];
                            dg[ch] += gy * xhat[off + i];
                            db[ch] += gy;
                        }
                    }
                    for ch in 0..c {
                        let off = (b * c + ch) * p;
                        for i in 0..p {
                            let d = g.data()[off + i] * gm[ch];
                            dx[off + i] = rstd[b * p + i] * (d - m1[i] * inv_c - xhat[off + i] * m2[i] * inv_c);
                        }
                    }
                }
                vec![
                    Some(Tensor::from_vec([n, c, h, w], dx)),
                    Some(Tensor::from_vec([1, c, 1, 1], dg)),
                    Some(Tensor::from_vec([1, c, 1, 1], db)),
                ]
            }),
        )
    }
}
