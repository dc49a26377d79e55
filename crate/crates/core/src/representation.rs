//! Fixed-shape event encodings for the network.

use crate::error::{Error, Result};
use crate::event::EventStream;
use crate::timing::ExposureTiming;

/// Signed polarity mass in `bins` temporal bins over a time window.
#[derive(Clone, Debug, PartialEq)]
pub struct VoxelGrid {
    pub bins: usize,
    pub height: usize,
    pub width: usize,
    /// Bin-major `bins x height x width`.
    pub data: Vec<f64>,
    pub window: (f64, f64),
}

impl VoxelGrid {
    pub fn zeros(bins: usize, height: usize, width: usize, window: (f64, f64)) -> Self {
        Self {
            bins,
            height,
            width,
            data: vec![0.0; bins * height * width],
            window,
        }
    }

    #[inline]
    pub fn at(&self, b: usize, y: usize, x: usize) -> f64 {
        self.data[(b * self.height + y) * self.width + x]
    }

    pub fn total(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Per-pixel sum over bins, row-major.
    pub fn pixel_totals(&self) -> Vec<f64> {
        let n = self.height * self.width;
        let mut out = vec![0.0; n];
        for b in 0..self.bins {
            for (o, v) in out.iter_mut().zip(&self.data[b * n..(b + 1) * n]) {
                *o += v;
            }
        }
        out
    }
}

/// Deposits each event of `window` (inclusive) into the two nearest bin
/// centres with linear weights.
///
/// Normalised time is `u = (t - t0) / (t1 - t0) * (bins - 1)`; the event adds
/// `p * (1 - frac(u))` to bin `floor(u)` and `p * frac(u)` to the next.
pub fn voxelize(events: &EventStream, window: (f64, f64), bins: usize) -> Result<VoxelGrid> {
    let (t0, t1) = window;
    if !(t0 < t1) || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::DegenerateWindow(t0, t1));
    }
    if bins == 0 {
        return Err(Error::param("bins", "need at least one bin"));
    }
    let (h, w) = events.sensor_shape();
    let mut grid = VoxelGrid::zeros(bins, h, w, window);
    let plane = h * w;
    let scale = (bins - 1) as f64 / (t1 - t0);
    for e in events.window(t0, t1) {
        let u = ((e.t - t0) * scale).clamp(0.0, (bins - 1) as f64);
        let lo = (u.floor() as usize).min(bins - 1);
        let frac = u - lo as f64;
        let p = e.p as f64;
        let px = e.y as usize * w + e.x as usize;
        grid.data[lo * plane + px] += p * (1.0 - frac);
        if frac > 0.0 {
            grid.data[(lo + 1) * plane + px] += p * frac;
        }
    }
    Ok(grid)
}

/// The deblurring-path window stretched by `epsilon * T_i` at its start:
/// `[t_s - epsilon * T_i, t_e]`.
pub fn perturb_window(timing: &ExposureTiming, epsilon: f64) -> (f64, f64) {
    (timing.t_s - epsilon * timing.interval(), timing.t_e)
}
