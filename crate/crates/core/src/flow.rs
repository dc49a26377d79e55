//! Dense optical flow by polynomial expansion (Farnebäck's two-frame method).
//!
//! Each frame is locally approximated by a quadratic `x'Ax + b'x + c` fitted
//! with Gaussian-weighted least squares. A displacement `d` turns the second
//! frame's linear term into `b1 - 2 A d`, so `d` follows from a small linear
//! system, accumulated over a window and refined coarse-to-fine.

use crate::error::{Error, Result};
use crate::frame::Frame;

/// Per-pixel displacement from the first to the second frame.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowField {
    pub height: usize,
    pub width: usize,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl FlowField {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            u: vec![0.0; height * width],
            v: vec![0.0; height * width],
        }
    }

    pub fn mean_magnitude(&self) -> f64 {
        let n = self.u.len().max(1) as f64;
        self.u.iter().zip(&self.v).map(|(a, b)| a.hypot(*b)).sum::<f64>() / n
    }

    pub fn mean(&self) -> (f64, f64) {
        let n = self.u.len().max(1) as f64;
        (self.u.iter().sum::<f64>() / n, self.v.iter().sum::<f64>() / n)
    }
}

/// Anything that estimates dense motion between two frames.
pub trait FlowEstimator {
    fn estimate(&self, first: &Frame, second: &Frame) -> Result<FlowField>;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Farneback {
    pub levels: usize,
    pub window: usize,
    pub iterations: usize,
    pub poly_n: usize,
    pub poly_sigma: f64,
}

impl Default for Farneback {
    fn default() -> Self {
        Self {
            levels: 3,
            window: 15,
            iterations: 3,
            poly_n: 7,
            poly_sigma: 1.5,
        }
    }
}

#[derive(Clone)]
struct Plane {
    h: usize,
    w: usize,
    d: Vec<f64>,
}

impl Plane {
    #[inline]
    fn get(&self, y: isize, x: isize) -> f64 {
        let y = y.clamp(0, self.h as isize - 1) as usize;
        let x = x.clamp(0, self.w as isize - 1) as usize;
        self.d[y * self.w + x]
    }

    fn bilinear(&self, y: f64, x: f64) -> f64 {
        let (y0, x0) = (y.floor(), x.floor());
        let (fy, fx) = (y - y0, x - x0);
        let (y0, x0) = (y0 as isize, x0 as isize);
        let top = self.get(y0, x0) * (1.0 - fx) + self.get(y0, x0 + 1) * fx;
        let bot = self.get(y0 + 1, x0) * (1.0 - fx) + self.get(y0 + 1, x0 + 1) * fx;
        top * (1.0 - fy) + bot * fy
    }

    /// Gaussian blur then 2x decimation.
    fn downsample(&self) -> Plane {
        let k = [0.0625, 0.25, 0.375, 0.25, 0.0625];
        let mut tmp = vec![0.0; self.h * self.w];
        for y in 0..self.h {
            for x in 0..self.w {
                tmp[y * self.w + x] = (0..5)
                    .map(|i| k[i] * self.get(y as isize, x as isize + i as isize - 2))
                    .sum();
            }
        }
        let t = Plane {
            h: self.h,
            w: self.w,
            d: tmp,
        };
        let (h, w) = (self.h.div_ceil(2), self.w.div_ceil(2));
        let mut d = vec![0.0; h * w];
        for y in 0..h {
            for x in 0..w {
                d[y * w + x] = (0..5)
                    .map(|i| k[i] * t.get(2 * y as isize + i as isize - 2, 2 * x as isize))
                    .sum();
            }
        }
        Plane { h, w, d }
    }
}

/// Least-squares projector from an `n x n` patch onto `[1, x, y, x^2, y^2, xy]`.
fn expansion_projector(n: usize, sigma: f64) -> Vec<[f64; 6]> {
    let r = (n / 2) as isize;
    let mut basis = Vec::new();
    let mut weights = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            let (x, y) = (dx as f64, dy as f64);
            basis.push([1.0, x, y, x * x, y * y, x * y]);
            weights.push((-(x * x + y * y) / (2.0 * sigma * sigma)).exp());
        }
    }
    let mut g = [[0.0; 6]; 6];
    for (b, &wt) in basis.iter().zip(&weights) {
        for i in 0..6 {
            for j in 0..6 {
                g[i][j] += wt * b[i] * b[j];
            }
        }
    }
    let gi = invert6(g);
    basis
        .iter()
        .zip(&weights)
        .map(|(b, &wt)| {
            let mut row = [0.0; 6];
            for i in 0..6 {
                row[i] = wt * (0..6).map(|j| gi[i][j] * b[j]).sum::<f64>();
            }
            row
        })
        .collect()
}

fn invert6(mut a: [[f64; 6]; 6]) -> [[f64; 6]; 6] {
    let mut inv = [[0.0; 6]; 6];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for col in 0..6 {
        let piv = (col..6)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        inv.swap(col, piv);
        let p = a[col][col];
        for j in 0..6 {
            a[col][j] /= p;
            inv[col][j] /= p;
        }
        for i in 0..6 {
            if i != col {
                let f = a[i][col];
                for j in 0..6 {
                    a[i][j] -= f * a[col][j];
                    inv[i][j] -= f * inv[col][j];
                }
            }
        }
    }
    inv
}

/// Quadratic coefficients per pixel: `axx, ayy, axy/2` and `bx, by`.
struct Expansion {
    axx: Plane,
    ayy: Plane,
    axy: Plane,
    bx: Plane,
    by: Plane,
}

fn expand(p: &Plane, proj: &[[f64; 6]], n: usize) -> Expansion {
    let r = (n / 2) as isize;
    let mut planes: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; p.h * p.w]);
    for y in 0..p.h {
        for x in 0..p.w {
            let mut c = [0.0; 6];
            let mut k = 0;
            for dy in -r..=r {
                for dx in -r..=r {
                    let v = p.get(y as isize + dy, x as isize + dx);
                    for i in 0..6 {
                        c[i] += proj[k][i] * v;
                    }
                    k += 1;
                }
            }
            let idx = y * p.w + x;
            planes[0][idx] = c[3];
            planes[1][idx] = c[4];
            planes[2][idx] = 0.5 * c[5];
            planes[3][idx] = c[1];
            planes[4][idx] = c[2];
        }
    }
    let mk = |d: Vec<f64>| Plane { h: p.h, w: p.w, d };
    let [axx, ayy, axy, bx, by] = planes;
    Expansion {
        axx: mk(axx),
        ayy: mk(ayy),
        axy: mk(axy),
        bx: mk(bx),
        by: mk(by),
    }
}

fn box_sum(p: &[f64], h: usize, w: usize, n: usize) -> Vec<f64> {
    let r = (n / 2) as isize;
    let mut rows = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let lo = (x as isize - r).max(0) as usize;
            let hi = ((x as isize + r) as usize).min(w - 1);
            rows[y * w + x] = p[y * w + lo..=y * w + hi].iter().sum();
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        let lo = (y as isize - r).max(0) as usize;
        let hi = ((y as isize + r) as usize).min(h - 1);
        for x in 0..w {
            out[y * w + x] = (lo..=hi).map(|yy| rows[yy * w + x]).sum();
        }
    }
    out
}

impl Farneback {
    fn refine(&self, e1: &Expansion, e2: &Expansion, flow: &mut FlowField) {
        let (h, w) = (flow.height, flow.width);
        let mut terms: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; h * w]);
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let (du, dv) = (flow.u[i], flow.v[i]);
                let (sy, sx) = (y as f64 + dv, x as f64 + du);
                let a11 = 0.5 * (e1.axx.d[i] + e2.axx.bilinear(sy, sx));
                let a22 = 0.5 * (e1.ayy.d[i] + e2.ayy.bilinear(sy, sx));
                let a12 = 0.5 * (e1.axy.d[i] + e2.axy.bilinear(sy, sx));
                let bx = -0.5 * (e2.bx.bilinear(sy, sx) - e1.bx.d[i]) + a11 * du + a12 * dv;
                let by = -0.5 * (e2.by.bilinear(sy, sx) - e1.by.d[i]) + a12 * du + a22 * dv;
                terms[0][i] = a11 * a11 + a12 * a12;
                terms[1][i] = a12 * (a11 + a22);
                terms[2][i] = a12 * a12 + a22 * a22;
                terms[3][i] = a11 * bx + a12 * by;
                terms[4][i] = a12 * bx + a22 * by;
            }
        }
        let s: Vec<Vec<f64>> = terms.iter().map(|t| box_sum(t, h, w, self.window)).collect();
        for i in 0..h * w {
            let (g11, g12, g22, h1, h2) = (s[0][i], s[1][i], s[2][i], s[3][i], s[4][i]);
            let det = g11 * g22 - g12 * g12;
            let scale = (g11 + g22).abs().max(1e-300);
            if det.abs() > 1e-12 * scale * scale {
                flow.u[i] = (g22 * h1 - g12 * h2) / det;
                flow.v[i] = (g11 * h2 - g12 * h1) / det;
            }
        }
    }
}

fn upsample_flow(f: &FlowField, h: usize, w: usize) -> FlowField {
    let up = |d: &[f64]| {
        let p = Plane {
            h: f.height,
            w: f.width,
            d: d.to_vec(),
        };
        let mut out = vec![0.0; h * w];
        for y in 0..h {
            for x in 0..w {
                out[y * w + x] = 2.0 * p.bilinear((y as f64 - 0.5) / 2.0, (x as f64 - 0.5) / 2.0);
            }
        }
        out
    };
    FlowField {
        height: h,
        width: w,
        u: up(&f.u),
        v: up(&f.v),
    }
}

impl FlowEstimator for Farneback {
    fn estimate(&self, first: &Frame, second: &Frame) -> Result<FlowField> {
        if !first.same_size(second) {
            return Err(Error::Shape("flow frames differ in size".into()));
        }
        if self.poly_n.is_multiple_of(2) || self.window.is_multiple_of(2) {
            return Err(Error::param("farneback", "poly_n and window must be odd"));
        }
        let to_plane = |f: &Frame| Plane {
            h: f.height(),
            w: f.width(),
            d: f.luma().into_data(),
        };
        let mut pyr1 = vec![to_plane(first)];
        let mut pyr2 = vec![to_plane(second)];
        for _ in 1..self.levels.max(1) {
            let (a, b) = (pyr1.last().unwrap().downsample(), pyr2.last().unwrap().downsample());
            if a.h < self.poly_n || a.w < self.poly_n {
                break;
            }
            pyr1.push(a);
            pyr2.push(b);
        }
        let proj = expansion_projector(self.poly_n, self.poly_sigma);
        let mut flow: Option<FlowField> = None;
        for (p1, p2) in pyr1.iter().zip(&pyr2).rev() {
            let mut f = match flow {
                None => FlowField::zeros(p1.h, p1.w),
                Some(prev) => upsample_flow(&prev, p1.h, p1.w),
            };
            let (e1, e2) = (expand(p1, &proj, self.poly_n), expand(p2, &proj, self.poly_n));
            for _ in 0..self.iterations {
                self.refine(&e1, &e2, &mut f);
            }
            flow = Some(f);
        }
        Ok(flow.unwrap())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn texture(dx: f64, dy: f64) -> Frame {
        Frame::from_fn(1, 96, 96, |_, y, x| {
            let (x, y) = (x as f64 - dx, y as f64 - dy);
            0.5 + 0.18 * (x / 5.3 + 0.4).sin() * (y / 4.1).cos()
                + 0.12 * ((x + 0.7 * y) / 6.7).sin()
                + 0.08 * ((x * 0.3 - y) / 3.9).cos()
        })
        .unwrap()
    }

    #[test]
    fn identical_frames_have_no_motion() {
        let a = texture(0.0, 0.0);
        let f = Farneback::default().estimate(&a, &a).unwrap();
        assert!(f.mean_magnitude() < 0.05);
    }

    #[test]
    fn recovers_global_shift() {
        let f = Farneback::default()
            .estimate(&texture(0.0, 0.0), &texture(3.0, 0.0))
            .unwrap();
        let (u, v) = f.mean();
        assert!((f.mean_magnitude() - 3.0).abs() < 0.3, "mag {}", f.mean_magnitude());
        assert!((u - 3.0).abs() < 0.3 && v.abs() < 0.3, "({u}, {v})");
    }

    #[test]
    fn projector_reproduces_quadratics() {
        let proj = expansion_projector(7, 1.5);
        // f = 2 + 0.5x - y + 0.3x^2 + 0.1y^2 - 0.2xy
        let mut c = [0.0; 6];
        let mut k = 0;
        for dy in -3..=3 {
            for dx in -3..=3 {
                let (x, y) = (dx as f64, dy as f64);
                let v = 2.0 + 0.5 * x - y + 0.3 * x * x + 0.1 * y * y - 0.2 * x * y;
                for i in 0..6 {
                    c[i] += proj[k][i] * v;
                }
                k += 1;
            }
        }
        let want = [2.0, 0.5, -1.0, 0.3, 0.1, -0.2];
        for i in 0..6 {
            assert!((c[i] - want[i]).abs() < 1e-9, "{i}: {} vs {}", c[i], want[i]);
        }
    }
}
