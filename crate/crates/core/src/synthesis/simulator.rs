//! Log-intensity threshold-crossing event simulator.
//!
//! Each pixel low-pass filters `ln(L + LOG_EPS)` with a first-order IIR
//! (`a = 1 - exp(-2*pi*cutoff*dt)`) and keeps a reference level. Whenever the
//! filtered signal is at least `C` away from the reference, it emits
//! `floor(|delta| / C)` events of polarity `sign(delta)`, timestamped by linear
//! interpolation of the level crossings inside the frame step, and moves the
//! reference by the emitted amount. Spurious events arrive as a Poisson
//! process per pixel.

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};
use crate::event::{Event, EventStream};
use crate::frame::FrameSequence;
use crate::rng::{self, Stream};
use crate::LOG_EPS;

/// Relative slack when comparing a log change against a whole number of
/// thresholds, so `delta == k*C` in exact arithmetic yields `k` events.
const CROSSING_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimulatorConfig {
    /// Log-intensity contrast threshold `C`.
    pub threshold_c: f64,
    /// Low-pass cutoff in Hz; `f64::INFINITY` disables filtering.
    pub cutoff_hz: f64,
    /// Spurious event rate per pixel in Hz.
    pub noise_rate_hz: f64,
    /// Minimum spacing between signal events at one pixel.
    pub refractory_s: f64,
}

impl Default for SimulatorConfig {
    fn default() -> Self {
        Self {
            threshold_c: 0.2,
            cutoff_hz: 15.0,
            noise_rate_hz: 1.0,
            refractory_s: 0.0,
        }
    }
}

impl SimulatorConfig {
    /// Ideal sensor: no filtering, no noise, no refractory period.
    pub fn ideal(threshold_c: f64) -> Self {
        Self {
            threshold_c,
            cutoff_hz: f64::INFINITY,
            noise_rate_hz: 0.0,
            refractory_s: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold_c > 0.0) || !self.threshold_c.is_finite() {
            return Err(Error::param("threshold_c", "contrast threshold must be positive"));
        }
        if !(self.cutoff_hz > 0.0) {
            return Err(Error::param("cutoff_hz", "cutoff must be positive"));
        }
        if !(self.noise_rate_hz >= 0.0) || !self.noise_rate_hz.is_finite() {
            return Err(Error::param(
                "noise_rate_hz",
                "noise rate must be finite and non-negative",
            ));
        }
        if !(self.refractory_s >= 0.0) {
            return Err(Error::param("refractory_s", "refractory period must be non-negative"));
        }
        Ok(())
    }

    /// IIR coefficient for a step of `dt` seconds.
    pub fn filter_coefficient(&self, dt: f64) -> f64 {
        if self.cutoff_hz.is_infinite() {
            1.0
        } else {
            1.0 - (-2.0 * std::f64::consts::PI * self.cutoff_hz * dt).exp()
        }
    }
}

/// Simulates the events produced while the sensor watches `seq`.
///
/// Colour frames are reduced to Rec.601 luma first. The stream spans
/// `[seq.start(), seq.end()]`; spurious events for pixel `(x, y)` use a
/// generator keyed by `(seed, x, y)`.
pub fn simulate_events(seq: &FrameSequence, cfg: &SimulatorConfig, seed: u64) -> Result<EventStream> {
    cfg.validate()?;
    if seq.len() < 2 {
        return Err(Error::param("seq", "event simulation needs at least 2 frames"));
    }
    let (_, h, w) = seq.frame_shape();
    if h > u16::MAX as usize || w > u16::MAX as usize {
        return Err(Error::Shape(format!("sensor {h}x{w} does not fit u16 coordinates")));
    }
    let logs: Vec<Vec<f64>> = crate::par::map_indices(seq.len(), |k| {
        seq.frames()[k]
            .luma()
            .data()
            .iter()
            .map(|&v| (v.max(0.0) + LOG_EPS).ln())
            .collect()
    });
    let ts = seq.timestamps();
    let coeffs: Vec<f64> = ts.windows(2).map(|s| cfg.filter_coefficient(s[1] - s[0])).collect();

    let max_step = (0..h * w)
        .flat_map(|i| logs.windows(2).map(move |l| (l[1][i] - l[0][i]).abs()))
        .fold(0.0, f64::max);
    if max_step > 3.0 * cfg.threshold_c {
        log::warn!(
            "log intensity changes by up to {:.2} thresholds between frames; \
             interpolate the clip more densely for accurate event timing",
            max_step / cfg.threshold_c
        );
    }

    let rows: Vec<Vec<Event>> = crate::par::map_indices(h, |y| {
        let mut out = Vec::new();
        for x in 0..w {
            let i = y * w + x;
            pixel_events(|k| logs[k][i], ts, &coeffs, cfg, x as u16, y as u16, &mut out);
            if cfg.noise_rate_hz > 0.0 {
                noise_events(seed, cfg.noise_rate_hz, ts[0], *ts.last().unwrap(), x, y, &mut out);
            }
        }
        out
    });
    let mut events: Vec<Event> = rows.into_iter().flatten().collect();
    events.sort_unstable_by(Event::order);
    Ok(EventStream::new_unchecked(events, h, w, seq.start(), seq.end()))
}

fn pixel_events(
    log_at: impl Fn(usize) -> f64,
    ts: &[f64],
    coeffs: &[f64],
    cfg: &SimulatorConfig,
    x: u16,
    y: u16,
    out: &mut Vec<Event>,
) {
    let c = cfg.threshold_c;
    let mut filtered = log_at(0);
    let mut reference = filtered;
    let mut last_emit = f64::NEG_INFINITY;
    for k in 0..coeffs.len() {
        let prev = filtered;
        filtered = prev + coeffs[k] * (log_at(k + 1) - prev);
        let delta = filtered - reference;
        let count = (delta.abs() / c + CROSSING_SLACK).floor();
        if count < 1.0 {
            continue;
        }
        let p: i8 = if delta > 0.0 { 1 } else { -1 };
        let sign = p as f64;
        let dt = ts[k + 1] - ts[k];
        let step = filtered - prev;
        for j in 1..=count as u64 {
            let level = reference + j as f64 * c * sign;
            let frac = if step != 0.0 {
                ((level - prev) / step).clamp(0.0, 1.0)
            } else {
                1.0
            };
            let t = ts[k] + frac * dt;
            if t - last_emit >= cfg.refractory_s {
                out.push(Event { t, x, y, p });
                last_emit = t;
            }
        }
        reference += count * c * sign;
    }
}

fn noise_events(seed: u64, rate: f64, t0: f64, t1: f64, x: usize, y: usize, out: &mut Vec<Event>) {
    let mut r = rng::pixel(seed, Stream::EventNoise, x, y);
    let gap = Exp::new(rate).expect("positive rate");
    let mut t = t0;
    loop {
        t += gap.sample(&mut r);
        if t > t1 {
            break;
        }
        let p = if r.random::<bool>() { 1 } else { -1 };
        out.push(Event {
            t,
            x: x as u16,
            y: y as u16,
            p,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::Frame;

    fn seq_from(values: &[f64], dt: f64) -> FrameSequence {
        let frames = values.iter().map(|&v| Frame::filled(1, 8, 8, v).unwrap()).collect();
        FrameSequence::uniform(frames, 1.0 / dt, 0.0).unwrap()
    }

    #[test]
    fn constant_video_is_silent() {
        let s = seq_from(&[0.3; 20], 0.01);
        let cfg = SimulatorConfig {
            noise_rate_hz: 0.0,
            ..Default::default()
        };
        assert!(simulate_events(&s, &cfg, 1).unwrap().is_empty());
    }

    #[test]
    fn exact_two_threshold_step() {
        let c: f64 = 0.2;
        let l0 = 0.2;
        let l1 = (l0 + LOG_EPS) * (2.0 * c).exp() - LOG_EPS;
        let a = Frame::filled(1, 8, 8, l0).unwrap().into_data();
        let mut b = a.clone();
        b[3 * 8 + 5] = l1;
        let seq = FrameSequence::new(
            vec![Frame::new(1, 8, 8, a).unwrap(), Frame::new(1, 8, 8, b).unwrap()],
            vec![0.0, 0.01],
        )
        .unwrap();
        let ev = simulate_events(&seq, &SimulatorConfig::ideal(c), 0).unwrap();
        assert_eq!(ev.len(), 2);
        assert!(ev.events().iter().all(|e| e.p == 1 && e.x == 5 && e.y == 3));
        // crossings at half and full step
        assert!((ev.events()[0].t - 0.005).abs() < 1e-9);
        assert!((ev.events()[1].t - 0.01).abs() < 1e-9);
    }

    #[test]
    fn non_positive_threshold_is_an_error() {
        let s = seq_from(&[0.3, 0.4], 0.01);
        assert!(simulate_events(&s, &SimulatorConfig::ideal(0.0), 0).is_err());
        assert!(simulate_events(&s, &SimulatorConfig::ideal(-0.1), 0).is_err());
    }

    #[test]
    fn noise_rate_is_respected() {
        let s = seq_from(&[0.3; 11], 0.1);
        let cfg = SimulatorConfig {
            noise_rate_hz: 5.0,
            ..SimulatorConfig::ideal(0.2)
        };
        let ev = simulate_events(&s, &cfg, 9).unwrap();
        // 64 pixels * 5 Hz * 1 s = 320 expected
        let n = ev.len() as f64;
        assert!((n - 320.0).abs() < 4.0 * 320f64.sqrt(), "{n}");
        assert!(ev.violations().is_empty());
    }

    #[test]
    fn low_pass_delays_response() {
        let mut v = vec![0.1; 5];
        v.extend(vec![0.8; 30]);
        let s = seq_from(&v, 0.001);
        let ideal = simulate_events(&s, &SimulatorConfig::ideal(0.2), 0).unwrap();
        let filtered = simulate_events(
            &s,
            &SimulatorConfig {
                cutoff_hz: 15.0,
                noise_rate_hz: 0.0,
                ..SimulatorConfig::ideal(0.2)
            },
            0,
        )
        .unwrap();
        assert!(filtered.len() < ideal.len());
        assert!(filtered.events()[0].t > ideal.events()[0].t);
    }

    #[test]
    fn refractory_period_drops_bursts() {
        let s = seq_from(&[0.05, 0.9], 0.01);
        let mut cfg = SimulatorConfig::ideal(0.2);
        let all = simulate_events(&s, &cfg, 0).unwrap().len();
        cfg.refractory_s = 0.01;
        let kept = simulate_events(&s, &cfg, 0).unwrap().len();
        assert_eq!(kept, 64);
        assert!(all > kept);
    }
}
