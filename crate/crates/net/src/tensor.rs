//! Dense NCHW tensors over `f32` or `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use edei_core::Frame;
use num_traits::Float;

/// Floating-point element type usable by the network.
pub trait Scalar:
    Float + Default + Debug + Display + Send + Sync + Sum + AddAssign + SubAssign + MulAssign + DivAssign + 'static
{
    fn of(v: f64) -> Self;
    fn f64(self) -> f64;
    fn erf(self) -> Self;

    /// `c = alpha * a(m x k) * b(k x n) + beta * c` with explicit strides.
    #[allow(clippy::too_many_arguments)]
    fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        a_strides: (isize, isize),
        b: &[Self],
        b_strides: (isize, isize),
        beta: Self,
        c: &mut [Self],
        c_strides: (isize, isize),
    );
}

macro_rules! scalar_impl {
    ($t:ty, $gemm:path, $erf:path) => {
        impl Scalar for $t {
            #[inline]
            fn of(v: f64) -> Self {
                v as $t
            }
            #[inline]
            fn f64(self) -> f64 {
                self as f64
            }
            #[inline]
            fn erf(self) -> Self {
                $erf(self)
            }
            fn gemm_raw(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: &[Self],
                (rsa, csa): (isize, isize),
                b: &[Self],
                (rsb, csb): (isize, isize),
                beta: Self,
                c: &mut [Self],
                (rsc, csc): (isize, isize),
            ) {
                let last = |rows: usize, cols: usize, rs: isize, cs: isize| {
                    if rows == 0 || cols == 0 {
                        0
                    } else {
                        ((rows - 1) as isize * rs + (cols - 1) as isize * cs) as usize + 1
                    }
                };
                assert!(a.len() >= last(m, k, rsa, csa), "gemm: a too short");
                assert!(b.len() >= last(k, n, rsb, csb), "gemm: b too short");
                assert!(c.len() >= last(m, n, rsc, csc), "gemm: c too short");
                if m == 0 || n == 0 {
                    return;
                }
                // SAFETY: the asserts above bound every strided access.
                unsafe {
                    $gemm(
                        m,
                        k,
                        n,
                        alpha,
                        a.as_ptr(),
                        rsa,
                        csa,
                        b.as_ptr(),
                        rsb,
                        csb,
                        beta,
                        c.as_mut_ptr(),
                        rsc,
                        csc,
                    )
                }
            }
        }
    };
}

scalar_impl!(f32, matrixmultiply::sgemm, libm::erff);
scalar_impl!(f64, matrixmultiply::dgemm, libm::erf);

/// Row-major product `c = op(a) * op(b) + beta * c`, where `op` optionally
/// transposes. `op(a)` is `m x k`, `op(b)` is `k x n`.
#[allow(clippy::too_many_arguments)]
pub fn gemm<S: Scalar>(m: usize, k: usize, n: usize, a: &[S], ta: bool, b: &[S], tb: bool, beta: S, c: &mut [S]) {
    let sa = if ta { (1, m as isize) } else { (k as isize, 1) };
    let sb = if tb { (1, k as isize) } else { (n as isize, 1) };
    S::gemm_raw(m, k, n, S::one(), a, sa, b, sb, beta, c, (n as isize, 1));
}

#[derive(Clone, PartialEq)]
pub struct Tensor<S> {
    shape: [usize; 4],
    data: Vec<S>,
}

impl<S> Debug for Tensor<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Tensor{:?}", self.shape)
    }
}

impl<S: Scalar> Tensor<S> {
    pub fn zeros(shape: [usize; 4]) -> Self {
        Self {
            shape,
            data: vec![S::zero(); shape.iter().product()],
        }
    }

    pub fn full(shape: [usize; 4], v: S) -> Self {
        Self {
            shape,
            data: vec![v; shape.iter().product()],
        }
    }

    pub fn scalar(v: S) -> Self {
        Self::full([1, 1, 1, 1], v)
    }

    pub fn from_vec(shape: [usize; 4], data: Vec<S>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "tensor shape {shape:?}");
        Self { shape, data }
    }

    pub fn from_fn(shape: [usize; 4], f: impl Fn(usize, usize, usize, usize) -> S) -> Self {
        let [n, c, h, w] = shape;
        let mut data = Vec::with_capacity(n * c * h * w);
        for i in 0..n {
            for j in 0..c {
                for y in 0..h {
                    for x in 0..w {
                        data.push(f(i, j, y, x));
                    }
                }
            }
        }
        Self { shape, data }
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }
    pub fn n(&self) -> usize {
        self.shape[0]
    }
    pub fn c(&self) -> usize {
        self.shape[1]
    }
    pub fn h(&self) -> usize {
        self.shape[2]
    }
    pub fn w(&self) -> usize {
        self.shape[3]
    }
    pub fn plane_len(&self) -> usize {
        self.shape[2] * self.shape[3]
    }
    /// Elements per batch item.
    pub fn item_len(&self) -> usize {
        self.shape[1] * self.shape[2] * self.shape[3]
    }
    pub fn len(&self) -> usize {
        self.data.len()
    }
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
    pub fn data(&self) -> &[S] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }
    pub fn into_data(self) -> Vec<S> {
        self.data
    }

    #[inline]
    pub fn at(&self, n: usize, c: usize, y: usize, x: usize) -> S {
        let [_, cc, h, w] = self.shape;
        self.data[((n * cc + c) * h + y) * w + x]
    }

    pub fn item(&self, n: usize) -> &[S] {
        let l = self.item_len();
        &self.data[n * l..(n + 1) * l]
    }

    pub fn reshaped(mut self, shape: [usize; 4]) -> Self {
        assert_eq!(shape.iter().product::<usize>(), self.data.len(), "reshape to {shape:?}");
        self.shape = shape;
        self
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        Self {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(S, S) -> S) -> Self {
        assert_eq!(self.shape, other.shape, "zip_map shapes");
        Self {
            shape: self.shape,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        assert_eq!(self.shape, other.shape, "add_assign shapes");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&self, s: S) -> Self {
        self.map(|v| v * s)
    }

    pub fn sum(&self) -> S {
        self.data.iter().copied().sum()
    }

    pub fn sum_sq(&self) -> f64 {
        self.data.iter().map(|v| v.f64() * v.f64()).sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.shape, other.shape, "max_abs_diff shapes");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a.f64() - b.f64()).abs())
            .fold(0.0, f64::max)
    }

    pub fn cast<T: Scalar>(&self) -> Tensor<T> {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|v| T::of(v.f64())).collect(),
        }
    }

    /// One frame as a `1 x C x H x W` tensor.
    pub fn from_frame(f: &Frame) -> Self {
        Self {
            shape: [1, f.channels(), f.height(), f.width()],
            data: f.data().iter().map(|&v| S::of(v)).collect(),
        }
    }

    /// Batch item `n` as a frame; non-finite values are an error.
    pub fn to_frame(&self, n: usize) -> edei_core::Result<Frame> {
        Frame::new(
            self.c(),
            self.h(),
            self.w(),
            self.item(n).iter().map(|v| v.f64()).collect(),
        )
    }

    /// Stacks equally shaped tensors along the batch axis.
    pub fn stack(items: &[&Tensor<S>]) -> Self {
        let first = items[0].shape;
        let mut data = Vec::with_capacity(items.iter().map(|t| t.len()).sum());
        let mut n = 0;
        for t in items {
            assert_eq!(t.shape[1..], first[1..], "stack shapes");
            data.extend_from_slice(&t.data);
            n += t.shape[0];
        }
        Self {
            shape: [n, first[1], first[2], first[3]],
            data,
        }
    }

    /// Concatenates along the channel axis.
    pub fn cat_channels(items: &[&Tensor<S>]) -> Self {
        let [n, _, h, w] = items[0].shape;
        let c: usize = items.iter().map(|t| t.c()).sum();
        let mut data = Vec::with_capacity(n * c * h * w);
        for i in 0..n {
            for t in items {
                assert!(t.n() == n && t.h() == h && t.w() == w, "cat_channels shapes");
                data.extend_from_slice(t.item(i));
            }
        }
        Self {
            shape: [n, c, h, w],
            data,
        }
    }

    /// Spatial window `[y0, y0 + h) x [x0, x0 + w)` of every item and channel.
    pub fn crop(&self, y0: usize, x0: usize, h: usize, w: usize) -> Self {
        let [n, c, hh, ww] = self.shape;
        assert!(y0 + h <= hh && x0 + w <= ww, "crop out of bounds");
        let mut data = Vec::with_capacity(n * c * h * w);
        for p in 0..n * c {
            for y in y0..y0 + h {
                let row = (p * hh + y) * ww;
                data.extend_from_slice(&self.data[row + x0..row + x0 + w]);
            }
        }
        Self {
            shape: [n, c, h, w],
            data,
        }
    }

    /// Extends the bottom and right edges to `h x w` by edge replication.
    pub fn pad_to(&self, h: usize, w: usize) -> Self {
        let [n, c, hh, ww] = self.shape;
        assert!(h >= hh && w >= ww, "pad_to shrinks");
        let mut data = Vec::with_capacity(n * c * h * w);
        for p in 0..n * c {
            for y in 0..h {
                let row = (p * hh + y.min(hh - 1)) * ww;
                for x in 0..w {
                    data.push(self.data[row + x.min(ww - 1)]);
                }
            }
        }
        Self {
            shape: [n, c, h, w],
            data,
        }
    }
}
