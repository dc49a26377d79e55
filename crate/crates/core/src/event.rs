//! Asynchronous brightness-change events.

use crate::error::{Error, Result};

/// One event: timestamp in seconds, pixel coordinates, polarity `+1`/`-1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Event {
    pub t: f64,
    pub x: u16,
    pub y: u16,
    pub p: i8,
}

impl Event {
    pub fn new(t: f64, x: u16, y: u16, p: i8) -> Self {
        Self { t, x, y, p }
    }

    /// Total order used for sorting streams: time, then row, column, polarity.
    pub fn order(a: &Event, b: &Event) -> std::cmp::Ordering {
        a.t.total_cmp(&b.t)
            .then(a.y.cmp(&b.y))
            .then(a.x.cmp(&b.x))
            .then(a.p.cmp(&b.p))
    }
}

/// Time-sorted events from a sensor of `height x width` pixels covering
/// `[t_start, t_end]`.
#[derive(Clone, Debug, PartialEq)]
pub struct EventStream {
    events: Vec<Event>,
    height: usize,
    width: usize,
    t_start: f64,
    t_end: f64,
}

impl EventStream {
    pub fn new(events: Vec<Event>, height: usize, width: usize, t_start: f64, t_end: f64) -> Result<Self> {
        let s = Self::new_unchecked(events, height, width, t_start, t_end);
        match s.violations().into_iter().next() {
            None => Ok(s),
            Some(v) => Err(Error::param("events", v)),
        }
    }

    /// Builds a stream without checking invariants; use [`Self::violations`]
    /// to inspect it.
    pub fn new_unchecked(events: Vec<Event>, height: usize, width: usize, t_start: f64, t_end: f64) -> Self {
        Self {
            events,
            height,
            width,
            t_start,
            t_end,
        }
    }

    pub fn empty(height: usize, width: usize, t_start: f64, t_end: f64) -> Self {
        Self::new_unchecked(Vec::new(), height, width, t_start, t_end)
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }
    pub fn len(&self) -> usize {
        self.events.len()
    }
    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
    pub fn sensor_shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }
    pub fn t_span(&self) -> (f64, f64) {
        (self.t_start, self.t_end)
    }
    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    /// Human-readable list of broken invariants (empty when valid).
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.t_start.is_finite() && self.t_end.is_finite() && self.t_start <= self.t_end) {
            out.push("event t_span invalid".to_string());
        }
        if self.events.windows(2).any(|w| w[1].t < w[0].t) {
            out.push("events not time-sorted".to_string());
        }
        if self.events.iter().any(|e| !(e.t >= self.t_start && e.t <= self.t_end)) {
            out.push("event outside t_span".to_string());
        }
        if self
            .events
            .iter()
            .any(|e| e.x as usize >= self.width || e.y as usize >= self.height)
        {
            out.push("event outside sensor".to_string());
        }
        if self.events.iter().any(|e| e.p != 1 && e.p != -1) {
            out.push("event polarity not +1/-1".to_string());
        }
        out
    }

    /// Events with `start <= t <= end`.
    pub fn window(&self, start: f64, end: f64) -> &[Event] {
        let lo = self.events.partition_point(|e| e.t < start);
        let hi = self.events.partition_point(|e| e.t <= end);
        &self.events[lo..hi.max(lo)]
    }

    /// Restricts the stream to `[start, end]` and sets that as its span.
    pub fn clipped(&self, start: f64, end: f64) -> EventStream {
        EventStream::new_unchecked(self.window(start, end).to_vec(), self.height, self.width, start, end)
    }

    /// Snaps the stream to the microsecond grid used on disk.
    ///
    /// The span is widened outward to whole microseconds and every event is
    /// rounded to the nearest microsecond inside it, so writing and reading
    /// the result is lossless.
    pub fn quantized_to_us(&self) -> EventStream {
        // values already on the grid must stay put, or quantizing twice drifts
        let snap = |us: f64, outward: fn(f64) -> f64| {
            let r = us.round();
            if (us - r).abs() < 1e-6 {
                r
            } else {
                outward(us)
            }
        };
        let lo = snap(self.t_start * 1e6, f64::floor);
        let hi = snap(self.t_end * 1e6, f64::ceil).max(lo);
        let events = self
            .events
            .iter()
            .map(|e| Event {
                t: (e.t * 1e6).round().clamp(lo, hi) / 1e6,
                ..*e
            })
            .collect();
        EventStream::new_unchecked(events, self.height, self.width, lo / 1e6, hi / 1e6)
    }

    /// Same events with every timestamp (and the span) shifted by `dt`.
    pub fn shifted(&self, dt: f64) -> EventStream {
        let events = self.events.iter().map(|e| Event { t: e.t + dt, ..*e }).collect();
        EventStream::new_unchecked(events, self.height, self.width, self.t_start + dt, self.t_end + dt)
    }

    /// Per-pixel signed polarity sums, row-major.
    pub fn signed_counts(&self) -> Vec<i64> {
        let mut acc = vec![0i64; self.height * self.width];
        for e in &self.events {
            acc[e.y as usize * self.width + e.x as usize] += e.p as i64;
        }
        acc
    }
}
