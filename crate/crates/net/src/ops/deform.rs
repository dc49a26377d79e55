//! Deformable 3x3 convolution with per-group offsets and bilinear sampling.
//!
//! Offsets have `2 * 9 * groups` channels ordered `(group, tap, [dy, dx])`;
//! tap `k` sits at kernel position `(k / 3, k % 3)`. Samples falling outside
//! the image read zeros, matching zero padding at zero offset.

use edei_core::par;

use crate::graph::{Graph, Var};
use crate::ops::conv::{bias_grad, sum_in_order};
use crate::tensor::{gemm, Scalar, Tensor};

/// Bilinear sample plan for one tap at one pixel. Corners outside the
/// image carry zero weight and a zero value mask.
#[derive(Clone, Copy)]
struct Tap<S> {
    idx: [u32; 4],
    w: [S; 4],
    valid: [S; 4],
    ly: S,
    lx: S,
}

struct Layout {
    c: usize,
    h: usize,
    w: usize,
    groups: usize,
}

impl Layout {
    fn p(&self) -> usize {
        self.h * self.w
    }
}

fn taps<S: Scalar>(off: &[S], l: &Layout) -> Vec<Tap<S>> {
    let p = l.p();
    let (h, w) = (l.h as isize, l.w as isize);
    let zero = S::zero();
    let mut out = Vec::with_capacity(l.groups * 9 * p);
    for g in 0..l.groups {
        for k in 0..9 {
            let dy = &off[(g * 9 + k) * 2 * p..][..p];
            let dx = &off[((g * 9 + k) * 2 + 1) * p..][..p];
            let (ky, kx) = ((k / 3) as f64 - 1.0, (k % 3) as f64 - 1.0);
            for i in 0..p {
                let py = (i / l.w) as f64 + ky + dy[i].f64();
                let px = (i % l.w) as f64 + kx + dx[i].f64();
                let mut t = Tap {
                    idx: [0; 4],
                    w: [zero; 4],
                    valid: [zero; 4],
                    ly: zero,
                    lx: zero,
                };
                if py > -1.0 && px > -1.0 && py < l.h as f64 && px < l.w as f64 {
                    // both coordinates exceed -1, so truncation after a +1 shift floors them
                    let (y0, x0) = ((py + 1.0) as isize - 1, (px + 1.0) as isize - 1);
                    let (ly, lx) = (py - y0 as f64, px - x0 as f64);
                    t.ly = S::of(ly);
                    t.lx = S::of(lx);
                    let ws = [(1.0 - ly) * (1.0 - lx), (1.0 - ly) * lx, ly * (1.0 - lx), ly * lx];
                    for (j, (yy, xx)) in [(y0, x0), (y0, x0 + 1), (y0 + 1, x0), (y0 + 1, x0 + 1)]
                        .into_iter()
                        .enumerate()
                    {
                        if yy >= 0 && xx >= 0 && yy < h && xx < w {
                            t.idx[j] = (yy * w + xx) as u32;
                            t.w[j] = S::of(ws[j]);
                            t.valid[j] = S::one();
                        }
                    }
                }
                out.push(t);
            }
        }
    }
    out
}

#[inline]
fn sample<S: Scalar>(plane: &[S], t: &Tap<S>) -> S {
    t.w[0] * plane[t.idx[0] as usize]
        + t.w[1] * plane[t.idx[1] as usize]
        + t.w[2] * plane[t.idx[2] as usize]
        + t.w[3] * plane[t.idx[3] as usize]
}

fn sample_cols<S: Scalar>(x: &[S], taps: &[Tap<S>], l: &Layout) -> Vec<S> {
    let p = l.p();
    let cg = l.c / l.groups;
    let mut cols = vec![S::zero(); l.c * 9 * p];
    for c in 0..l.c {
        let g = c / cg;
        let plane = &x[c * p..(c + 1) * p];
        for k in 0..9 {
            let tk = &taps[(g * 9 + k) * p..][..p];
            let row = &mut cols[(c * 9 + k) * p..][..p];
            for (dst, t) in row.iter_mut().zip(tk) {
                *dst = sample(plane, t);
            }
        }
    }
    cols
}

impl<S: Scalar> Graph<S> {
    /// Deformable convolution: `x` is `(N, C, H, W)`, `offset` is
    /// `(N, 18 * groups, H, W)`, `w` is `(Cout, C, 3, 3)`.
    pub fn deform_conv(&mut self, x: Var, offset: Var, w: Var, b: Option<Var>, groups: usize) -> Var {
        let (tx, to, tw) = (self.value(x), self.value(offset), self.value(w));
        let [n, c, h, wd] = tx.shape();
        let cout = tw.shape()[0];
        assert_eq!(tw.shape(), [cout, c, 3, 3], "deform_conv: weight shape");
        assert!(
            groups >= 1 && c % groups == 0,
            "deform_conv: groups must divide channels"
        );
        assert_eq!(to.shape(), [n, 18 * groups, h, wd], "deform_conv: offset shape");
        let l = Layout { c, h, w: wd, groups };
        let p = l.p();
        let kk = c * 9;
        let mut out = Tensor::zeros([n, cout, h, wd]);
        let bias = b.map(|b| self.value(b).data().to_vec());
        par::for_each_chunk_mut(out.data_mut(), cout * p, |i, o| {
            let t = taps(to.item(i), &l);
            let cols = sample_cols(tx.item(i), &t, &l);
            gemm(cout, kk, p, tw.data(), false, &cols, false, S::zero(), o);
            if let Some(bias) = &bias {
                for (row, &bv) in o.chunks_mut(p).zip(bias) {
                    for v in row {
                        *v += bv;
                    }
                }
            }
        });
        let mut parents = vec![x, offset, w];
        parents.extend(b);
        self.record(
            out,
            &parents,
            Box::new(move |inp, _, gout| {
                let (tx, to, tw) = (inp[0], inp[1], inp[2]);
                let cg = c / groups;
                let parts = par::map_indices(n, |i| {
                    let xi = tx.item(i);
                    let t = taps(to.item(i), &l);
                    let cols = sample_cols(xi, &t, &l);
                    let go = gout.item(i);
                    let mut dw = vec![S::zero(); cout * kk];
                    gemm(cout, p, kk, go, false, &cols, true, S::zero(), &mut dw);
                    let mut dcols = vec![S::zero(); kk * p];
                    gemm(kk, cout, p, tw.data(), true, go, false, S::zero(), &mut dcols);
                    let mut dx = vec![S::zero(); c * p];
                    let mut doff = vec![S::zero(); 18 * groups * p];
                    let one = S::one();
                    for ch in 0..c {
                        let g = ch / cg;
                        let plane = &xi[ch * p..(ch + 1) * p];
                        for k in 0..9 {
                            let tk = &t[(g * 9 + k) * p..][..p];
                            let dc = &dcols[(ch * 9 + k) * p..][..p];
                            let oy = (g * 9 + k) * 2 * p;
                            let ox = oy + p;
                            for q in 0..p {
                                let tp = &tk[q];
                                let gq = dc[q];
                                let val = |j: usize| tp.valid[j] * plane[tp.idx[j] as usize];
                                let (v00, v01, v10, v11) = (val(0), val(1), val(2), val(3));
                                let dpy = (one - tp.lx) * (v10 - v00) + tp.lx * (v11 - v01);
                                let dpx = (one - tp.ly) * (v01 - v00) + tp.ly * (v11 - v10);
                                doff[oy + q] += gq * dpy;
                                doff[ox + q] += gq * dpx;
                                let dxc = &mut dx[ch * p..(ch + 1) * p];
                                for j in 0..4 {
                                    dxc[tp.idx[j] as usize] += tp.w[j] * gq;
                                }
                            }
                        }
                    }
                    (dx, doff, dw)
                });
                let mut dx = Vec::with_capacity(n * c * p);
                let mut doff = Vec::with_capacity(n * 18 * groups * p);
                let mut dws = Vec::with_capacity(n);
                for (a, b, d) in parts {
                    dx.extend(a);
                    doff.extend(b);
                    dws.push(d);
                }
                let mut res = vec![
                    Some(Tensor::from_vec([n, c, h, wd], dx)),
                    Some(Tensor::from_vec([n, 18 * groups, h, wd], doff)),
                    Some(sum_in_order(dws, tw.shape())),
                ];
                if inp.len() > 3 {
                    res.push(Some(bias_grad(gout)));
                }
                res
            }),
        )
    }
}
