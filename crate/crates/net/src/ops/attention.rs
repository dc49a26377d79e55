//! Multi-head channel attention.
//!
//! For each head, queries and keys are `d x P` blocks (channels by pixels),
//! L2-normalised along pixels so the logits do not grow with image size.
//! `A = softmax(tau * Qn Kn^T / sqrt(d))` is `d x d` and the output is `A V`.

use crate::graph::{Graph, Var};
use crate::tensor::{gemm, Scalar, Tensor};

const NORM_EPS: f64 = 1e-12;

fn l2_rows<S: Scalar>(x: &[S], d: usize, p: usize) -> (Vec<S>, Vec<S>) {
    let mut out = x.to_vec();
    let mut norms = Vec::with_capacity(d);
    for row in out.chunks_mut(p) {
        let nrm = row.iter().map(|&v| v * v).sum::<S>().sqrt().max(S::of(NORM_EPS));
        row.iter_mut().for_each(|v| *v /= nrm);
        norms.push(nrm);
    }
    (out, norms)
}

fn softmax_rows<S: Scalar>(a: &mut [S], d: usize) {
    for row in a.chunks_mut(d) {
        let m = row.iter().copied().fold(S::neg_infinity(), S::max);
        let mut s = S::zero();
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            s += *v;
        }
        row.iter_mut().for_each(|v| *v /= s);
    }
}

struct Head<S> {
    qn: Vec<S>,
    kn: Vec<S>,
    nq: Vec<S>,
    nk: Vec<S>,
    sim: Vec<S>,
    attn: Vec<S>,
}

fn head<S: Scalar>(q: &[S], k: &[S], tau: S, d: usize, p: usize) -> Head<S> {
    let (qn, nq) = l2_rows(q, d, p);
    let (kn, nk) = l2_rows(k, d, p);
    let mut sim = vec![S::zero(); d * d];
    gemm(d, p, d, &qn, false, &kn, true, S::zero(), &mut sim);
    let scale = tau / S::of(d as f64).sqrt();
    let mut attn: Vec<S> = sim.iter().map(|&s| s * scale).collect();
    softmax_rows(&mut attn, d);
    Head {
        qn,
        kn,
        nq,
        nk,
        sim,
        attn,
    }
}

fn unnormalise_grad<S: Scalar>(dn: &[S], xn: &[S], norms: &[S], p: usize) -> Vec<S> {
    let mut out = vec![S::zero(); dn.len()];
    for (i, &nrm) in norms.iter().enumerate() {
        let (g, x) = (&dn[i * p..(i + 1) * p], &xn[i * p..(i + 1) * p]);
        let o = &mut out[i * p..(i + 1) * p];
        if nrm > S::of(NORM_EPS) {
            let dot: S = g.iter().zip(x).map(|(&a, &b)| a * b).sum();
            for j in 0..p {
                o[j] = (g[j] - x[j] * dot) / nrm;
            }
        } else {
            for j in 0..p {
                o[j] = g[j] / nrm;
            }
        }
    }
    out
}

/// Attention maps `(N, heads, d, d)` for the given queries and keys.
pub fn attention_maps<S: Scalar>(q: &Tensor<S>, k: &Tensor<S>, temp: &Tensor<S>, heads: usize) -> Tensor<S> {
    let [n, c, h, w] = q.shape();
    let (d, p) = (c / heads, h * w);
    let mut out = Vec::with_capacity(n * heads * d * d);
    for b in 0..n {
        for hd in 0..heads {
            let r = b * c * p + hd * d * p..b * c * p + (hd + 1) * d * p;
            out.extend(head(&q.data()[r.clone()], &k.data()[r], temp.data()[hd], d, p).attn);
        }
    }
    Tensor::from_vec([n, heads, d, d], out)
}

impl<S: Scalar> Graph<S> {
    /// `q`, `k`, `v` are `(N, C, H, W)`; `temp` is `(1, heads, 1, 1)`.
    pub fn channel_attention(&mut self, q: Var, k: Var, v: Var, temp: Var, heads: usize) -> Var {
        let [n, c, h, w] = self.value(q).shape();
        assert!(
            heads >= 1 && c % heads == 0,
            "channel_attention: heads must divide channels"
        );
        assert_eq!(self.value(k).shape(), [n, c, h, w], "channel_attention: key shape");
        assert_eq!(self.value(v).shape(), [n, c, h, w], "channel_attention: value shape");
        assert_eq!(
            self.value(temp).shape(),
            [1, heads, 1, 1],
            "channel_attention: temperature shape"
        );
        let (d, p) = (c / heads, h * w);
        let block = move |b: usize, hd: usize| b * c * p + hd * d * p..b * c * p + (hd + 1) * d * p;
        let mut out = vec![S::zero(); n * c * p];
        {
            let (tq, tk, tv, tt) = (self.value(q), self.value(k), self.value(v), self.value(temp));
            for b in 0..n {
                for hd in 0..heads {
                    let r = block(b, hd);
                    let hs = head(&tq.data()[r.clone()], &tk.data()[r.clone()], tt.data()[hd], d, p);
                    gemm(
                        d,
                        d,
                        p,
                        &hs.attn,
                        false,
                        &tv.data()[r.clone()],
                        false,
                        S::zero(),
                        &mut out[r],
                    );
                }
            }
        }
        self.record(
            Tensor::from_vec([n, c, h, w], out),
            &[q, k, v, temp],
            Box::new(move |inp, _, g| {
                let (tq, tk, tv, tt) = (inp[0], inp[1], inp[2], inp[3]);
                let rs = S::one() / S::of(d as f64).sqrt();
                let mut dq = vec![S::zero(); n * c * p];
                let mut dk = vec![S::zero(); n * c * p];
                let mut dv = vec![S::zero(); n * c * p];
                let mut dt = vec![S::zero(); heads];
                for b in 0..n {
                    for hd in 0..heads {
                        let r = block(b, hd);
                        let tau = tt.data()[hd];
                        let hs = head(&tq.data()[r.clone()], &tk.data()[r.clone()], tau, d, p);
                        let go = &g.data()[r.clone()];
                        let vv = &tv.data()[r.clone()];
                        let mut da = vec![S::zero(); d * d];
                        gemm(d, p, d, go, false, vv, true, S::zero(), &mut da);
                        gemm(d, d, p, &hs.attn, true, go, false, S::zero(), &mut dv[r.clone()]);
                        let mut dl = vec![S::zero(); d * d];
                        for i in 0..d {
                            let (ar, dr) = (&hs.attn[i * d..(i + 1) * d], &da[i * d..(i + 1) * d]);
                            let dot: S = ar.iter().zip(dr).map(|(&a, &x)| a * x).sum();
                            for j in 0..d {
                                dl[i * d + j] = ar[j] * (dr[j] - dot);
                            }
                        }
                        dt[hd] += dl.iter().zip(&hs.sim).map(|(&a, &s)| a * s).sum::<S>() * rs;
                        let ds: Vec<S> = dl.iter().map(|&x| x * tau * rs).collect();
                        let mut dqn = vec![S::zero(); d * p];
                        let mut dkn = vec![S::zero(); d * p];
                        gemm(d, d, p, &ds, false, &hs.kn, false, S::zero(), &mut dqn);
                        gemm(d, d, p, &ds, true, &hs.qn, false, S::zero(), &mut dkn);
                        dq[r.clone()].copy_from_slice(&unnormalise_grad(&dqn, &hs.qn, &hs.nq, p));
                        dk[r].copy_from_slice(&unnormalise_grad(&dkn, &hs.kn, &hs.nk, p));
                    }
                }
                vec![
                    Some(Tensor::from_vec([n, c, h, w], dq)),
                    Some(Tensor::from_vec([n, c, h, w], dk)),
                    Some(Tensor::from_vec([n, c, h, w], dv)),
                    Some(Tensor::from_vec([1, heads, 1, 1], dt)),
                ]
            }),
        )
    }
}
