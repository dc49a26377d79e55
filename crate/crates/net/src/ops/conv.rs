//! Dense, depthwise and transposed convolutions (im2col + GEMM).

use edei_core::par;

use crate::graph::{Graph, Var};
use crate::tensor::{gemm, Scalar, Tensor};

#[derive(Clone, Copy, Debug)]
struct Geom {
    cin: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    pad: usize,
    ho: usize,
    wo: usize,
}

impl Geom {
    fn is_pointwise(&self) -> bool {
        self.k == 1 && self.stride == 1 && self.pad == 0
    }
}

fn im2col<S: Scalar>(x: &[S], g: &Geom) -> Vec<S> {
    let p = g.ho * g.wo;
    let mut cols = vec![S::zero(); g.cin * g.k * g.k * p];
    for ci in 0..g.cin {
        let plane = &x[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = &mut cols[((ci * g.k + ky) * g.k + kx) * p..][..p];
                for oy in 0..g.ho {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let src = &plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    let dst = &mut row[oy * g.wo..(oy + 1) * g.wo];
                    if g.stride == 1 {
                        let lo = g.pad.saturating_sub(kx);
                        let hi = g.wo.min((g.w + g.pad).saturating_sub(kx));
                        if lo < hi {
                            let s0 = lo + kx - g.pad;
                            dst[lo..hi].copy_from_slice(&src[s0..s0 + hi - lo]);
                        }
                    } else {
                        for (ox, d) in dst.iter_mut().enumerate() {
                            let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                            if ix >= 0 && ix < g.w as isize {
                                *d = src[ix as usize];
                            }
                        }
                    }
                }
            }
        }
    }
    cols
}

fn col2im<S: Scalar>(cols: &[S], g: &Geom, dx: &mut [S]) {
    let p = g.ho * g.wo;
    for ci in 0..g.cin {
        let plane = &mut dx[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = &cols[((ci * g.k + ky) * g.k + kx) * p..][..p];
                for oy in 0..g.ho {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    let src = &row[oy * g.wo..(oy + 1) * g.wo];
                    for (ox, &v) in src.iter().enumerate() {
                        let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                        if ix >= 0 && ix < g.w as isize {
                            dst[ix as usize] += v;
                        }
                    }
                }
            }
        }
    }
}

fn add_bias<S: Scalar>(out: &mut [S], bias: &[S], p: usize) {
    for (row, &b) in out.chunks_mut(p).zip(bias) {
        for v in row {
            *v += b;
        }
    }
}

/// Per-channel sums of an `(N, C, H, W)` gradient, shaped like a bias.
pub(crate) fn bias_grad<S: Scalar>(g: &Tensor<S>) -> Tensor<S> {
    let [n, c, _, _] = g.shape();
    let p = g.plane_len();
    let mut db = vec![S::zero(); c];
    for b in 0..n {
        for (ch, acc) in db.iter_mut().enumerate() {
            *acc += g.data()[(b * c + ch) * p..(b * c + ch + 1) * p]
                .iter()
                .copied()
                .sum::<S>();
        }
    }
    Tensor::from_vec([1, c, 1, 1], db)
}

/// Sums per-item weight gradients in item order.
pub(crate) fn sum_in_order<S: Scalar>(parts: Vec<Vec<S>>, shape: [usize; 4]) -> Tensor<S> {
    let mut acc = vec![S::zero(); shape.iter().product()];
    for p in parts {
        for (a, v) in acc.iter_mut().zip(p) {
            *a += v;
        }
    }
    Tensor::from_vec(shape, acc)
}

impl<S: Scalar> Graph<S> {
    /// Cross-correlation with a square kernel. `w` is `(Cout, Cin, k, k)`, `b` is `(1, Cout, 1, 1)`.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, stride: usize, pad: usize) -> Var {
        let (tx, tw) = (self.value(x), self.value(w));
        let [n, cin, h, wd] = tx.shape();
        let [cout, wcin, k, k2] = tw.shape();
        assert!(
            wcin == cin && k == k2,
            "conv2d: weight {:?} vs input {:?}",
            tw.shape(),
            tx.shape()
        );
        assert!(
            h + 2 * pad >= k && wd + 2 * pad >= k,
            "conv2d: input smaller than kernel"
        );
        let g = Geom {
            cin,
            h,
            w: wd,
            k,
            stride,
            pad,
            ho: (h + 2 * pad - k) / stride + 1,
            wo: (wd + 2 * pad - k) / stride + 1,
        };
        let p = g.ho * g.wo;
        let kk = cin * k * k;
        let mut out = Tensor::zeros([n, cout, g.ho, g.wo]);
        let bias = b.map(|b| self.value(b).data().to_vec());
        par::for_each_chunk_mut(out.data_mut(), cout * p, |i, o| {
            let xi = tx.item(i);
            if g.is_pointwise() {
                gemm(cout, kk, p, tw.data(), false, xi, false, S::zero(), o);
            } else {
                let cols = im2col(xi, &g);
                gemm(cout, kk, p, tw.data(), false, &cols, false, S::zero(), o);
            }
            if let Some(bias) = &bias {
                add_bias(o, bias, p);
            }
        });
        let mut parents = vec![x, w];
        parents.extend(b);
        self.record(
            out,
            &parents,
            Box::new(move |inp, _, gout| {
                let (tx, tw) = (inp[0], inp[1]);
                let parts = par::map_indices(n, |i| {
                    let go = gout.item(i);
                    let xi = tx.item(i);
                    let mut dw = vec![S::zero(); cout * kk];
                    let mut dx = vec![S::zero(); cin * h * wd];
                    if g.is_pointwise() {
                        gemm(cout, p, kk, go, false, xi, true, S::zero(), &mut dw);
                        gemm(kk, cout, p, tw.data(), true, go, false, S::zero(), &mut dx);
                    } else {
                        let cols = im2col(xi, &g);
                        gemm(cout, p, kk, go, false, &cols, true, S::zero(), &mut dw);
                        let mut dcols = vec![S::zero(); kk * p];
                        gemm(kk, cout, p, tw.data(), true, go, false, S::zero(), &mut dcols);
                        col2im(&dcols, &g, &mut dx);
                    }
                    (dx, dw)
                });
                let mut dx = Vec::with_capacity(n * cin * h * wd);
                let mut dws = Vec::with_capacity(n);
                for (a, b) in parts {
                    dx.extend(a);
                    dws.push(b);
                }
                let mut res = vec![
                    Some(Tensor::from_vec([n, cin, h, wd], dx)),
                    Some(sum_in_order(dws, tw.shape())),
                ];
                if inp.len() > 2 {
                    res.push(Some(bias_grad(gout)));
                }
                res
            }),
        )
    }

    /// Depthwise 3x3 convolution with unit padding. `w` is `(C, 1, 3, 3)`.
    pub fn dwconv3(&mut self, x: Var, w: Var, b: Option<Var>) -> Var {
        let (tx, tw) = (self.value(x), self.value(w));
        let [n, c, h, wd] = tx.shape();
        assert_eq!(tw.shape(), [c, 1, 3, 3], "dwconv3: weight shape");
        let p = h * wd;
        let mut out = Tensor::zeros([n, c, h, wd]);
        let bias = b.map(|b| self.value(b).data().to_vec());
        par::for_each_chunk_mut(out.data_mut(), p, |idx, o| {
            let ch = idx % c;
            let src = &tx.data()[idx * p..(idx + 1) * p];
            let k = &tw.data()[ch * 9..ch * 9 + 9];
            dw_forward(src, k, h, wd, o);
            if let Some(bias) = &bias {
                for v in o.iter_mut() {
                    *v += bias[ch];
                }
            }
        });
        let mut parents = vec![x, w];
        parents.extend(b);
        self.record(
            out,
            &parents,
            Box::new(move |inp, _, gout| {
                let (tx, tw) = (inp[0], inp[1]);
                let parts = par::map_indices(n * c, |idx| {
                    let ch = idx % c;
                    let src = &tx.data()[idx * p..(idx + 1) * p];
                    let go = &gout.data()[idx * p..(idx + 1) * p];
                    let k = &tw.data()[ch * 9..ch * 9 + 9];
                    dw_backward(src, k, go, h, wd)
                });
                let mut dx = Vec::with_capacity(n * c * p);
                let mut dw = vec![S::zero(); c * 9];
                for (idx, (a, kgrad)) in parts.into_iter().enumerate() {
                    dx.extend(a);
                    let ch = idx % c;
                    for (d, v) in dw[ch * 9..ch * 9 + 9].iter_mut().zip(kgrad) {
                        *d += v;
                    }
                }
                let mut res = vec![
                    Some(Tensor::from_vec([n, c, h, wd], dx)),
                    Some(Tensor::from_vec([c, 1, 3, 3], dw)),
                ];
                if inp.len() > 2 {
                    res.push(Some(bias_grad(gout)));
                }
                res
            }),
        )
    }

    /// Transposed 2x2 convolution with stride 2. `w` is `(Cin, Cout, 2, 2)`.
    pub fn conv_t2(&mut self, x: Var, w: Var, b: Option<Var>) -> Var {
        let (tx, tw) = (self.value(x), self.value(w));
        let [n, cin, h, wd] = tx.shape();
        let [wcin, cout, k1, k2] = tw.shape();
        assert!(wcin == cin && k1 == 2 && k2 == 2, "conv_t2: weight shape");
        let p = h * wd;
        let (ho, wo) = (2 * h, 2 * wd);
        let q = cout * 4;
        let mut out = Tensor::zeros([n, cout, ho, wo]);
        let bias = b.map(|b| self.value(b).data().to_vec());
        par::for_each_chunk_mut(out.data_mut(), cout * ho * wo, |i, o| {
            // cols(q x p) = w^T (q x cin) * x (cin x p)
            let mut cols = vec![S::zero(); q * p];
            gemm(q, cin, p, tw.data(), true, tx.item(i), false, S::zero(), &mut cols);
            for co in 0..cout {
                for t in 0..4 {
                    let (dy, dx) = (t / 2, t % 2);
                    let row = &cols[(co * 4 + t) * p..][..p];
                    for y in 0..h {
                        for x in 0..wd {
                            o[(co * ho + 2 * y + dy) * wo + 2 * x + dx] = row[y * wd + x];
                        }
                    }
                }
                if let Some(bias) = &bias {
                    for v in &mut o[co * ho * wo..(co + 1) * ho * wo] {
                        *v += bias[co];
                    }
                }
            }
        });
        let mut parents = vec![x, w];
        parents.extend(b);
        self.record(
            out,
            &parents,
            Box::new(move |inp, _, gout| {
                let (tx, tw) = (inp[0], inp[1]);
                let parts = par::map_indices(n, |i| {
                    let go = gout.item(i);
                    let mut dcols = vec![S::zero(); q * p];
                    for co in 0..cout {
                        for t in 0..4 {
                            let (dy, dx) = (t / 2, t % 2);
                            let row = &mut dcols[(co * 4 + t) * p..][..p];
                            for y in 0..h {
                                for x in 0..wd {
                                    row[y * wd + x] = go[(co * ho + 2 * y + dy) * wo + 2 * x + dx];
                                }
                            }
                        }
                    }
                    let mut dx = vec![S::zero(); cin * p];
                    gemm(cin, q, p, tw.data(), false, &dcols, false, S::zero(), &mut dx);
                    let mut dw = vec![S::zero(); cin * q];
                    gemm(cin, p, q, tx.item(i), false, &dcols, true, S::zero(), &mut dw);
                    (dx, dw)
                });
                let mut dx = Vec::with_capacity(n * cin * p);
                let mut dws = Vec::with_capacity(n);
                for (a, b) in parts {
                    dx.extend(a);
                    dws.push(b);
                }
                let mut res = vec![
                    Some(Tensor::from_vec([n, cin, h, wd], dx)),
                    Some(sum_in_order(dws, tw.shape())),
                ];
                if inp.len() > 2 {
                    res.push(Some(bias_grad(gout)));
                }
                res
            }),
        )
    }
}

fn dw_forward<S: Scalar>(src: &[S], k: &[S], h: usize, w: usize, out: &mut [S]) {
    for ky in 0..3 {
        for kx in 0..3 {
            let kv = k[ky * 3 + kx];
            for y in 0..h {
                let iy = y as isize + ky as isize - 1;
                if iy < 0 || iy >= h as isize {
                    continue;
                }
                let srow = &src[iy as usize * w..(iy as usize + 1) * w];
                let orow = &mut out[y * w..(y + 1) * w];
                let lo = 1usize.saturating_sub(kx);
                let hi = w.min(w + 1 - kx);
                for x in lo..hi {
                    orow[x] += kv * srow[x + kx - 1];
                }
            }
        }
    }
}

fn dw_backward<S: Scalar>(src: &[S], k: &[S], go: &[S], h: usize, w: usize) -> (Vec<S>, [S; 9]) {
    let mut dx = vec![S::zero(); h * w];
    let mut dk = [S::zero(); 9];
    for ky in 0..3 {
        for kx in 0..3 {
            let kv = k[ky * 3 + kx];
            let mut acc = S::zero();
            for y in 0..h {
                let iy = y as isize + ky as isize - 1;
                if iy < 0 || iy >= h as isize {
                    continue;
                }
                let iy = iy as usize;
                let grow = &go[y * w..(y + 1) * w];
                let lo = 1usize.saturating_sub(kx);
                let hi = w.min(w + 1 - kx);
                for x in lo..hi {
                    let ix = x + kx - 1;
                    acc += grow[x] * src[iy * w + ix];
                    dx[iy * w + ix] += kv * grow[x];
                }
            }
            dk[ky * 3 + kx] = acc;
        }
    }
    (dx, dk)
}
