use crate::error::{Error, Result};
use crate::frame::{Frame, FrameSequence};
use crate::rng::{self, Stream};
use crate::sample::ExposureSample;
use crate::timing::ExposureTiming;

use super::degrade::{darken, synth_short};
use super::recipe::SynthesisRecipe;
use super::simulator::simulate_events;

/// Inserts `factor` linearly blended frames between each neighbouring pair.
///
/// The output has `(len - 1) * (factor + 1) + 1` frames; original frames are
/// kept bit-exactly and timestamps are spaced linearly between them.
pub fn interpolate(seq: &FrameSequence, factor: usize) -> Result<FrameSequence> {
    if seq.len() < 2 {
        return Err(Error::CannotInterpolate(seq.len()));
    }
    let step = factor + 1;
    let n = (seq.len() - 1) * step + 1;
    let frames = seq.frames();
    let ts = seq.timestamps();
    let out: Vec<(Frame, f64)> = crate::par::map_indices(n, |k| {
        let (i, j) = (k / step, k % step);
        if j == 0 {
            return (frames[i].clone(), ts[i]);
        }
        let w = j as f64 / step as f64;
        let f = frames[i]
            .lerp(&frames[i + 1], w)
            .expect("sequence frames share a shape");
        (f, ts[i] + w * (ts[i + 1] - ts[i]))
    });
    let (frames, ts) = out.into_iter().unzip();
    FrameSequence::new(frames, ts)
}

/// Long exposure: the pixel-wise mean of all frames stamped in `[t_b, t_e]`.
pub fn synth_long(seq: &FrameSequence, timing: &ExposureTiming) -> Result<Frame> {
    let range = seq.indices_in(timing.t_b, timing.t_e);
    if range.is_empty() {
        return Err(Error::NoFramesInExposure {
            start: timing.t_b,
            end: timing.t_e,
        });
    }
    let (c, h, w) = seq.frame_shape();
    let n = range.len() as f64;
    let mut acc = vec![0.0; c * h * w];
    for f in &seq.frames()[range] {
        for (a, v) in acc.iter_mut().zip(f.data()) {
            *a += v;
        }
    }
    acc.iter_mut().for_each(|a| *a /= n);
    Frame::new(c, h, w, acc)
}

/// Sample instants usable with `recipe` on `seq` (already upsampled).
pub fn sample_times(seq: &FrameSequence, recipe: &SynthesisRecipe) -> Vec<f64> {
    let before = recipe.frames_before();
    let after = recipe.frames_after();
    (before..seq.len())
        .step_by(recipe.sample_stride)
        .take_while(|&i| i + after < seq.len())
        .map(|i| seq.timestamps()[i])
        .collect()
}

/// Builds one sample whose short exposure is the frame stamped at `t_s`.
///
/// The long exposure averages `blur_count` frames starting `interval_frames`
/// after `t_s`; events are simulated from the darkened luminance over
/// `[t_s - delta_t, t_e]` and snapped to microseconds. `seq` must already be
/// temporally upsampled.
pub fn make_sample(seq: &FrameSequence, recipe: &SynthesisRecipe, t_s: f64) -> Result<ExposureSample> {
    recipe.validate()?;
    let ts = seq.timestamps();
    let dt = if seq.len() > 1 { ts[1] - ts[0] } else { 0.0 };
    let coverage = |i_s_time: f64| Error::Coverage {
        start: i_s_time - recipe.delta_t_ratio * recipe.interval_frames as f64 * dt,
        end: i_s_time + recipe.frames_after() as f64 * dt,
        have_start: seq.start(),
        have_end: seq.end(),
    };
    let i_s = seq.index_at(t_s).ok_or_else(|| coverage(t_s))?;
    let i_b = i_s + recipe.interval_frames;
    let i_e = i_b + recipe.blur_count - 1;
    if i_e >= seq.len() {
        return Err(coverage(t_s));
    }
    let t_s = ts[i_s];
    let delta_t = recipe.delta_t_ratio * (ts[i_b] - t_s);
    let timing = ExposureTiming::new(t_s, ts[i_b], ts[i_e], delta_t)?;
    let ev_start = t_s - delta_t;
    let tol = seq.time_tolerance();
    if ev_start < seq.start() - tol {
        return Err(coverage(t_s));
    }
    // first frame at or before the event window start
    let i0 = ts.partition_point(|&t| t <= ev_start + tol).saturating_sub(1);

    let seed = rng::mix(recipe.rng_seed, Stream::SampleSeed, i_s as u64, 0);
    let params = recipe.degradation.sample(seed);
    let gt = seq.frames()[i_s].clamped();
    let short = synth_short(&gt, &params, seed)?;
    let long = synth_long(seq, &timing)?;

    let dark = FrameSequence::new(
        seq.frames()[i0..=i_e]
            .iter()
            .map(|f| darken(&f.clamped(), &params).map(|d| d.luma()))
            .collect::<Result<Vec<_>>>()?,
        ts[i0..=i_e].to_vec(),
    )?;
    let events = simulate_events(&dark, &recipe.simulator, seed)?
        .clipped(ev_start, timing.t_e)
        .quantized_to_us();

    Ok(ExposureSample {
        short,
        long,
        events,
        gt,
        timing,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthesis::{DegradationParams, DegradationRanges, SimulatorConfig};

    fn constant(v: f64, n: usize) -> FrameSequence {
        let f = Frame::filled(3, 8, 8, v).unwrap();
        FrameSequence::uniform(vec![f; n], 960.0, 0.0).unwrap()
    }

    #[test]
    fn interpolation_identity_and_constant() {
        let a = Frame::filled(1, 8, 8, 0.2).unwrap();
        let b = Frame::filled(1, 8, 8, 0.7).unwrap();
        let s = FrameSequence::new(vec![a.clone(), b.clone()], vec![0.0, 1.0]).unwrap();
        assert_eq!(interpolate(&s, 0).unwrap(), s);
        let c = FrameSequence::new(vec![a.clone(), a.clone()], vec![0.0, 1.0]).unwrap();
        let up = interpolate(&c, 7).unwrap();
        assert_eq!(up.len(), 9);
        assert!(up.frames().iter().all(|f| f == &a));
    }

    #[test]
    fn interpolation_midpoint_and_times() {
        let a = Frame::filled(1, 8, 8, 0.0).unwrap();
        let b = Frame::filled(1, 8, 8, 0.8).unwrap();
        let s = FrameSequence::new(vec![a, b.clone()], vec![1.0, 2.0]).unwrap();
        let up = interpolate(&s, 3).unwrap();
        assert_eq!(up.len(), 5);
        assert!((up.frames()[2].at(0, 4, 4) - 0.4).abs() < 1e-15);
        assert_eq!(up.timestamps(), &[1.0, 1.25, 1.5, 1.75, 2.0]);
        assert_eq!(up.frames()[4], b);
    }

    #[test]
    fn single_frame_cannot_interpolate() {
        let s = constant(0.5, 1);
        assert!(matches!(interpolate(&s, 3), Err(Error::CannotInterpolate(1))));
    }

    #[test]
    fn long_exposure_means() {
        let s = constant(0.3, 60);
        let t = ExposureTiming::new(0.0, s.timestamps()[5], s.timestamps()[53], 0.001).unwrap();
        let l = synth_long(&s, &t).unwrap();
        assert!(l.data().iter().all(|&v| (v - 0.3).abs() < 1e-15));

        let frames = (0..10)
            .map(|i| Frame::filled(1, 8, 8, (i % 2) as f64).unwrap())
            .collect();
        let alt = FrameSequence::uniform(frames, 10.0, 0.0).unwrap();
        let t = ExposureTiming::new(-1.0, 0.0, 0.9, 0.1).unwrap();
        assert!(synth_long(&alt, &t).unwrap().data().iter().all(|&v| v == 0.5));

        let t = ExposureTiming::new(-1.0, 5.0, 6.0, 0.1).unwrap();
        assert!(matches!(synth_long(&alt, &t), Err(Error::NoFramesInExposure { .. })));
    }

    #[test]
    fn static_scene_is_degenerate() {
        let s = constant(0.4, 80);
        let recipe = SynthesisRecipe {
            degradation: DegradationRanges::fixed(DegradationParams::IDENTITY),
            simulator: SimulatorConfig {
                noise_rate_hz: 0.0,
                ..Default::default()
            },
            ..Default::default()
        };
        let t_s = sample_times(&s, &recipe)[0];
        let x = make_sample(&s, &recipe, t_s).unwrap();
        assert_eq!(x.short, x.gt);
        assert!(x
            .long
            .data()
            .iter()
            .zip(x.gt.data())
            .all(|(a, b)| (a - b).abs() < 1e-15));
        assert!(x.events.is_empty());
        assert!(crate::validate_sample(&x).is_empty());
    }

    #[test]
    fn coverage_failure_names_the_span() {
        let s = constant(0.4, 30);
        let recipe = SynthesisRecipe::default();
        let err = make_sample(&s, &recipe, s.timestamps()[10]).unwrap_err();
        assert!(matches!(err, Error::Coverage { .. }));
        assert!(err.to_string().contains("required"));
    }
}
