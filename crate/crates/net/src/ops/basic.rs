//! Elementwise, structural and reduction operations.

use crate::graph::{Graph, Var};
use crate::tensor::{Scalar, Tensor};

fn same<S: Scalar>(g: &Graph<S>, a: Var, b: Var, op: &str) {
    assert_eq!(g.value(a).shape(), g.value(b).shape(), "{op}: shape mismatch");
}

impl<S: Scalar> Graph<S> {
    pub fn add(&mut self, a: Var, b: Var) -> Var {
        same(self, a, b, "add");
        let out = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.record(out, &[a, b], Box::new(|_, _, g| vec![Some(g.clone()), Some(g.clone())]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        same(self, a, b, "sub");
        let out = self.value(a).zip_map(self.value(b), |x, y| x - y);
        self.record(
            out,
            &[a, b],
            Box::new(|_, _, g| vec![Some(g.clone()), Some(g.map(|v| -v))]),
        )
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        same(self, a, b, "mul");
        let out = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.record(
            out,
            &[a, b],
            Box::new(|i, _, g| vec![Some(g.zip_map(i[1], |g, y| g * y)), Some(g.zip_map(i[0], |g, x| g * x))]),
        )
    }

    /// `s * a + t`.
    pub fn affine(&mut self, a: Var, s: f64, t: f64) -> Var {
        let (s, t) = (S::of(s), S::of(t));
        let out = self.value(a).map(|x| s * x + t);
        self.record(out, &[a], Box::new(move |_, _, g| vec![Some(g.scale(s))]))
    }

    /// Multiplies every channel of `a` by the single-channel `m`.
    pub fn mul_mask(&mut self, a: Var, m: Var) -> Var {
        let (ta, tm) = (self.value(a), self.value(m));
        let [n, c, h, w] = ta.shape();
        assert_eq!(tm.shape(), [n, 1, h, w], "mul_mask: mask shape");
        let p = h * w;
        let mut out = ta.clone();
        for i in 0..n {
            let mk = &tm.data()[i * p..(i + 1) * p];
            for ch in 0..c {
                let o = &mut out.data_mut()[(i * c + ch) * p..(i * c + ch + 1) * p];
                for (v, &mv) in o.iter_mut().zip(mk) {
                    *v *= mv;
                }
            }
        }
        self.record(
            out,
            &[a, m],
            Box::new(move |i, _, g| {
                let (ta, tm) = (i[0], i[1]);
                let mut ga = g.clone();
                let mut gm = Tensor::zeros(tm.shape());
                for b in 0..n {
                    let mk = &tm.data()[b * p..(b + 1) * p];
                    for ch in 0..c {
                        let off = (b * c + ch) * p;
                        let gs = &mut ga.data_mut()[off..off + p];
                        let xs = &ta.data()[off..off + p];
                        let gms = &mut gm.data_mut()[b * p..(b + 1) * p];
                        for k in 0..p {
                            gms[k] += gs[k] * xs[k];
                            gs[k] *= mk[k];
                        }
                    }
                }
                vec![Some(ga), Some(gm)]
            }),
        )
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.max(S::zero()));
        self.record(
            out,
            &[a],
            Box::new(|i, _, g| vec![Some(g.zip_map(i[0], |g, x| if x > S::zero() { g } else { S::zero() }))]),
        )
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| S::one() / (S::one() + (-x).exp()));
        self.record(
            out,
            &[a],
            Box::new(|_, o, g| vec![Some(g.zip_map(o, |g, y| g * y * (S::one() - y)))]),
        )
    }

    /// Exact GELU, `x * Phi(x)`.
    pub fn gelu(&mut self, a: Var) -> Var {
        let r2 = S::of(std::f64::consts::FRAC_1_SQRT_2);
        let half = S::of(0.5);
        let out = self.value(a).map(|x| half * x * (S::one() + (x * r2).erf()));
        let k = S::of(1.0 / (2.0 * std::f64::consts::PI).sqrt());
        self.record(
            out,
            &[a],
            Box::new(move |i, _, g| {
                vec![Some(g.zip_map(i[0], |g, x| {
                    let cdf = half * (S::one() + (x * r2).erf());
                    let pdf = k * (-half * x * x).exp();
                    g * (cdf + x * pdf)
                }))]
            }),
        )
    }

    /// Elementwise clamp; the gradient passes only strictly inside the range.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let (lo, hi) = (S::of(lo), S::of(hi));
        let out = self.value(a).map(|x| x.max(lo).min(hi));
        self.record(
            out,
            &[a],
            Box::new(move |i, _, g| {
                vec![Some(
                    g.zip_map(i[0], |g, x| if x > lo && x < hi { g } else { S::zero() }),
                )]
            }),
        )
    }

    pub fn cat_channels(&mut self, parts: &[Var]) -> Var {
        let out = {
            let ts: Vec<&Tensor<S>> = parts.iter().map(|&v| self.value(v)).collect();
            Tensor::cat_channels(&ts)
        };
        let chans: Vec<usize> = parts.iter().map(|&v| self.value(v).c()).collect();
        self.record(
            out,
            parts,
            Box::new(move |_, _, g| {
                let [n, c, h, w] = g.shape();
                let p = h * w;
                let mut outs: Vec<Vec<S>> = chans.iter().map(|&k| Vec::with_capacity(n * k * p)).collect();
                for b in 0..n {
                    let mut ch = 0;
                    for (o, &k) in outs.iter_mut().zip(&chans) {
                        let off = (b * c + ch) * p;
                        o.extend_from_slice(&g.data()[off..off + k * p]);
                        ch += k;
                    }
                }
                outs.into_iter()
                    .zip(&chans)
                    .map(|(d, &k)| Some(Tensor::from_vec([n, k, h, w], d)))
                    .collect()
            }),
        )
    }

    /// Channels `[start, start + len)`.
    pub fn slice_channels(&mut self, a: Var, start: usize, len: usize) -> Var {
        let t = self.value(a);
        let [n, c, h, w] = t.shape();
        assert!(start + len <= c, "slice_channels out of range");
        let p = h * w;
        let mut d = Vec::with_capacity(n * len * p);
        for b in 0..n {
            d.extend_from_slice(&t.data()[(b * c + start) * p..(b * c + start + len) * p]);
        }
        self.record(
            Tensor::from_vec([n, len, h, w], d),
            &[a],
            Box::new(move |_, _, g| {
                let mut full = Tensor::zeros([n, c, h, w]);
                for b in 0..n {
                    full.data_mut()[(b * c + start) * p..(b * c + start + len) * p]
                        .copy_from_slice(&g.data()[b * len * p..(b + 1) * len * p]);
                }
                vec![Some(full)]
            }),
        )
    }

    /// Mean absolute difference to a constant target, as a `1x1x1x1` scalar.
    pub fn l1_mean(&mut self, a: Var, target: &Tensor<S>) -> Var {
        let t = self.value(a);
        assert_eq!(t.shape(), target.shape(), "l1_mean: shape mismatch");
        let inv = S::one() / S::of(t.len() as f64);
        let sum: f64 = t
            .data()
            .iter()
            .zip(target.data())
            .map(|(&x, &y)| (x - y).abs().f64())
            .sum();
        let target = target.clone();
        self.record(
            Tensor::scalar(S::of(sum) * inv),
            &[a],
            Box::new(move |i, _, g| {
                let s = g.data()[0] * inv;
                vec![Some(i[0].zip_map(&target, |x, y| {
                    if x > y {
                        s
                    } else if x < y {
                        -s
                    } else {
                        S::zero()
                    }
                }))]
            }),
        )
    }

    /// Sum of all elements as a scalar.
    pub fn sum_all(&mut self, a: Var) -> Var {
        let shape = self.value(a).shape();
        let s = self.value(a).sum();
        self.record(
            Tensor::scalar(s),
            &[a],
            Box::new(move |_, _, g| vec![Some(Tensor::full(shape, g.data()[0]))]),
        )
    }

    /// `sum_i w_i * x_i` over scalars.
    pub fn weighted_sum(&mut self, terms: &[(Var, f64)]) -> Var {
        let ws: Vec<S> = terms.iter().map(|&(_, w)| S::of(w)).collect();
        let mut acc = S::zero();
        for (&(v, _), &w) in terms.iter().zip(&ws) {
            assert_eq!(self.value(v).len(), 1, "weighted_sum takes scalars");
            acc += w * self.value(v).data()[0];
        }
        let vars: Vec<Var> = terms.iter().map(|t| t.0).collect();
        self.record(
            Tensor::scalar(acc),
            &vars,
            Box::new(move |_, _, g| ws.iter().map(|&w| Some(Tensor::scalar(g.data()[0] * w))).collect()),
        )
    }
}
