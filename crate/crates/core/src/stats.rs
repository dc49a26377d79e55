//! Dataset statistics: motion, illumination, texture and event rate.

use crate::error::Result;
use crate::flow::FlowEstimator;
use crate::frame::Frame;
use crate::sample::ExposureSample;

#[derive(Clone, Debug, PartialEq)]
pub struct StatsReport {
    /// Mean optical-flow magnitude between consecutive ground-truth frames in
    /// pixels; `None` when no sequence has two frames.
    pub motion_mag: Option<f64>,
    /// Mean Rec.601 luma.
    pub illumination: f64,
    /// Mean Sobel gradient magnitude of the luma.
    pub texture: f64,
    /// Millions of events per second.
    pub event_rate: f64,
    pub notices: Vec<String>,
}

/// Mean Sobel gradient magnitude with replicated borders.
pub fn sobel_mean(f: &Frame) -> f64 {
    let y = f.luma();
    let (h, w) = (y.height() as isize, y.width() as isize);
    let at = |r: isize, c: isize| y.at(0, r.clamp(0, h - 1) as usize, c.clamp(0, w - 1) as usize);
    let mut total = 0.0;
    for r in 0..h {
        for c in 0..w {
            let gx = (at(r - 1, c + 1) + 2.0 * at(r, c + 1) + at(r + 1, c + 1))
                - (at(r - 1, c - 1) + 2.0 * at(r, c - 1) + at(r + 1, c - 1));
            let gy = (at(r + 1, c - 1) + 2.0 * at(r + 1, c) + at(r + 1, c + 1))
                - (at(r - 1, c - 1) + 2.0 * at(r - 1, c) + at(r - 1, c + 1));
            total += gx.hypot(gy);
        }
    }
    total / (h * w) as f64
}

/// Statistics over `sequences`, each an ordered list of samples.
///
/// Motion uses consecutive ground-truth frames within a sequence; the event
/// rate divides the total event count by the total stream duration.
pub fn dataset_stats(sequences: &[Vec<ExposureSample>], flow: &dyn FlowEstimator) -> Result<StatsReport> {
    let mut notices = Vec::new();
    let (mut lum, mut tex, mut n_frames) = (0.0, 0.0, 0usize);
    let (mut motion, mut n_pairs) = (0.0, 0usize);
    let (mut events, mut duration) = (0usize, 0.0);
    for (i, seq) in sequences.iter().enumerate() {
        for s in seq {
            lum += s.gt.luma().mean();
            tex += sobel_mean(&s.gt);
            n_frames += 1;
            events += s.events.len();
            duration += s.events.duration();
        }
        if seq.len() < 2 {
            notices.push(format!("sequence {i}: fewer than 2 frames, motion omitted"));
        }
        for pair in seq.windows(2) {
            motion += flow.estimate(&pair[0].gt, &pair[1].gt)?.mean_magnitude();
            n_pairs += 1;
        }
    }
    let n = n_frames.max(1) as f64;
    Ok(StatsReport {
        motion_mag: (n_pairs > 0).then(|| motion / n_pairs as f64),
        illumination: lum / n,
        texture: tex / n,
        event_rate: event_rate(events, duration),
        notices,
    })
}

/// Events per second in millions; zero for an empty duration.
pub fn event_rate(count: usize, duration_s: f64) -> f64 {
    if duration_s > 0.0 {
        count as f64 / duration_s / 1e6
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_arithmetic() {
        assert_eq!(event_rate(2_000_000, 1.0), 2.0);
        assert_eq!(event_rate(10, 0.0), 0.0);
    }

    #[test]
    fn flat_image_has_no_texture() {
        assert_eq!(sobel_mean(&Frame::filled(3, 8, 8, 0.4).unwrap()), 0.0);
        let edge = Frame::from_fn(1, 8, 8, |_, _, x| if x < 4 { 0.0 } else { 1.0 }).unwrap();
        // two columns see the step with |gx| = 4
        assert!((sobel_mean(&edge) - 8.0 * 2.0 * 4.0 / 64.0).abs() < 1e-12);
    }
}
