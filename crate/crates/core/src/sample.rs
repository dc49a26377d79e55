//! The training/evaluation tuple and its invariant checks.

use crate::event::EventStream;
use crate::frame::Frame;
use crate::timing::ExposureTiming;

/// One dual-exposure observation with its events and ground truth.
///
/// `gt` is the latent sharp frame at the short-exposure instant `timing.t_s`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExposureSample {
    pub short: Frame,
    pub long: Frame,
    pub events: EventStream,
    pub gt: Frame,
    pub timing: ExposureTiming,
    pub seed: u64,
}

impl ExposureSample {
    pub fn height(&self) -> usize {
        self.gt.height()
    }
    pub fn width(&self) -> usize {
        self.gt.width()
    }

    /// Snaps frames to the 16-bit grid and events to microseconds, i.e. the
    /// exact precision of the on-disk layout.
    pub fn quantized(&self) -> ExposureSample {
        let q = |f: &Frame| f.map(|v| (v.clamp(0.0, 1.0) * 65535.0).round() / 65535.0);
        ExposureSample {
            short: q(&self.short),
            long: q(&self.long),
            gt: q(&self.gt),
            events: self.events.quantized_to_us(),
            timing: self.timing,
            seed: self.seed,
        }
    }
}

/// Lists every broken invariant of `s`; empty means the sample is valid.
pub fn validate_sample(s: &ExposureSample) -> Vec<String> {
    let mut out = s.timing.violations();
    for (name, f) in [("short", &s.short), ("long", &s.long)] {
        if !f.same_size(&s.gt) {
            out.push(format!("{name} frame size differs from gt"));
        }
    }
    if s.events.sensor_shape() != (s.gt.height(), s.gt.width()) {
        out.push("event sensor shape differs from frames".to_string());
    }
    out.extend(s.events.violations());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::Event;

    fn sample() -> ExposureSample {
        let f = Frame::filled(3, 8, 8, 0.5).unwrap();
        ExposureSample {
            short: f.clone(),
            long: f.clone(),
            gt: f,
            events: EventStream::new(vec![Event::new(0.1, 1, 1, 1)], 8, 8, 0.0, 0.5).unwrap(),
            timing: ExposureTiming::new(0.05, 0.1, 0.5, 0.05).unwrap(),
            seed: 1,
        }
    }

    #[test]
    fn well_formed_sample_has_no_violations() {
        assert!(validate_sample(&sample()).is_empty());
    }

    #[test]
    fn timing_order_is_reported() {
        let mut s = sample();
        s.timing.t_s = 0.2;
        assert_eq!(validate_sample(&s), vec!["timing order violated".to_string()]);
    }

    #[test]
    fn unsorted_events_are_reported() {
        let mut s = sample();
        s.events = EventStream::new_unchecked(
            vec![Event::new(0.3, 1, 1, 1), Event::new(0.2, 1, 1, -1)],
            8,
            8,
            0.0,
            0.5,
        );
        assert_eq!(validate_sample(&s), vec!["events not time-sorted".to_string()]);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let mut s = sample();
        s.long = Frame::filled(3, 9, 8, 0.5).unwrap();
        assert_eq!(validate_sample(&s), vec!["long frame size differs from gt".to_string()]);
    }
}
