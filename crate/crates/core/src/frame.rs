//! Radiometric frames and timestamped frame sequences.

use crate::error::{Error, Result};

/// Smallest accepted frame side.
pub const MIN_SIDE: usize = 8;

/// Rec.601 luma weights.
pub const REC601: [f64; 3] = [0.299, 0.587, 0.114];

/// A planar (channel-major) image of real intensities, nominally in `[0, 1]`.
///
/// Values may leave `[0, 1]` in intermediate results (darkening, noise);
/// [`Frame::clamped`] restores the nominal range before persistence.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Frame {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::Shape(format!("channels must be 1 or 3, got {channels}")));
        }
        if height < MIN_SIDE || width < MIN_SIDE {
            return Err(Error::Shape(format!(
                "frame {height}x{width} is smaller than {MIN_SIDE}x{MIN_SIDE}"
            )));
        }
        if data.len() != channels * height * width {
            return Err(Error::Shape(format!(
                "expected {} values for {channels}x{height}x{width}, got {}",
                channels * height * width,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(channels, height, width, vec![value; channels * height * width])
    }

    /// Builds a frame from `f(channel, y, x)`.
    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        f: impl Fn(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        Self::new(channels, height, width, data)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn into_data(self) -> Vec<f64> {
        self.data
    }
    pub fn len(&self) -> usize {
        self.data.len()
    }
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn same_shape(&self, other: &Frame) -> bool {
        self.shape() == other.shape()
    }

    pub fn same_size(&self, other: &Frame) -> bool {
        self.height == other.height && self.width == other.width
    }

    /// Applies `f` elementwise. Panics if `f` produces a non-finite value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Frame {
        let data: Vec<f64> = self.data.iter().map(|&v| f(v)).collect();
        Frame::new(self.channels, self.height, self.width, data).expect("map produced non-finite value")
    }

    pub fn clamped(&self) -> Frame {
        self.map(|v| v.clamp(0.0, 1.0))
    }

    /// Rec.601 luma; single-channel frames are returned unchanged.
    pub fn luma(&self) -> Frame {
        if self.channels == 1 {
            return self.clone();
        }
        let n = self.height * self.width;
        let (r, g, b) = (self.plane(0), self.plane(1), self.plane(2));
        let data = (0..n)
            .map(|i| REC601[0] * r[i] + REC601[1] * g[i] + REC601[2] * b[i])
            .collect();
        Frame {
            channels: 1,
            height: self.height,
            width: self.width,
            data,
        }
    }

    pub fn crop(&self, y0: usize, x0: usize, h: usize, w: usize) -> Result<Frame> {
        if y0 + h > self.height || x0 + w > self.width {
            return Err(Error::Shape(format!(
                "crop {h}x{w}+{y0}+{x0} exceeds {}x{}",
                self.height, self.width
            )));
        }
        let mut data = Vec::with_capacity(self.channels * h * w);
        for c in 0..self.channels {
            for y in y0..y0 + h {
                let row = (c * self.height + y) * self.width;
                data.extend_from_slice(&self.data[row + x0..row + x0 + w]);
            }
        }
        Frame::new(self.channels, h, w, data)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// `(1 - w) * self + w * other`; both frames must share a shape.
    pub fn lerp(&self, other: &Frame, w: f64) -> Result<Frame> {
        if !self.same_shape(other) {
            return Err(Error::Shape("lerp between frames of different shape".into()));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (1.0 - w) * a + w * b)
            .collect();
        Ok(Frame {
            channels: self.channels,
            height: self.height,
            width: self.width,
            data,
        })
    }
}

/// Frames with strictly increasing timestamps in seconds.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSequence {
    frames: Vec<Frame>,
    timestamps: Vec<f64>,
}

impl FrameSequence {
    pub fn new(frames: Vec<Frame>, timestamps: Vec<f64>) -> Result<Self> {
        if frames.len() != timestamps.len() {
            return Err(Error::Shape(format!(
                "{} frames but {} timestamps",
                frames.len(),
                timestamps.len()
            )));
        }
        if frames.is_empty() {
            return Err(Error::Shape("empty frame sequence".into()));
        }
        if frames.iter().any(|f| !f.same_shape(&frames[0])) {
            return Err(Error::Shape("frames in a sequence must share a shape".into()));
        }
        if timestamps.iter().any(|t| !t.is_finite()) {
            return Err(Error::param("timestamps", "non-finite timestamp"));
        }
        if timestamps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("timestamps", "timestamps must be strictly increasing"));
        }
        Ok(Self { frames, timestamps })
    }

    /// Frames sampled uniformly at `fps`, starting at `t0`.
    pub fn uniform(frames: Vec<Frame>, fps: f64, t0: f64) -> Result<Self> {
        if !(fps > 0.0) {
            return Err(Error::param("fps", "must be positive"));
        }
        let ts = (0..frames.len()).map(|i| t0 + i as f64 / fps).collect();
        Self::new(frames, ts)
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }
    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }
    pub fn len(&self) -> usize {
        self.frames.len()
    }
    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
    pub fn start(&self) -> f64 {
        self.timestamps[0]
    }
    pub fn end(&self) -> f64 {
        *self.timestamps.last().unwrap()
    }
    pub fn frame_shape(&self) -> (usize, usize, usize) {
        self.frames[0].shape()
    }

    /// Tolerance for matching timestamps: a millionth of the smallest gap.
    pub fn time_tolerance(&self) -> f64 {
        let min_gap = self
            .timestamps
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        if min_gap.is_finite() {
            min_gap * 1e-6
        } else {
            1e-12
        }
    }

    /// Index of the frame stamped at `t`, within [`Self::time_tolerance`].
    pub fn index_at(&self, t: f64) -> Option<usize> {
        let tol = self.time_tolerance();
        let i = self.timestamps.partition_point(|&s| s < t - tol);
        (i < self.len() && (self.timestamps[i] - t).abs() <= tol).then_some(i)
    }

    /// Indices of frames stamped inside `[start, end]` (tolerant at both ends).
    pub fn indices_in(&self, start: f64, end: f64) -> std::ops::Range<usize> {
        let tol = self.time_tolerance();
        let lo = self.timestamps.partition_point(|&s| s < start - tol);
        let hi = self.timestamps.partition_point(|&s| s <= end + tol);
        lo..hi.max(lo)
    }

    /// A contiguous sub-sequence.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<FrameSequence> {
        FrameSequence::new(self.frames[range.clone()].to_vec(), self.timestamps[range].to_vec())
    }

    pub fn map_frames(&self, f: impl Fn(&Frame) -> Frame) -> Result<FrameSequence> {
        FrameSequence::new(self.frames.iter().map(f).collect(), self.timestamps.clone())
    }
}
