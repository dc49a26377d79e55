use edei_core::synthesis::{interpolate, make_sample, procedural_clip, sample_times, SceneConfig, SynthesisRecipe};
use edei_core::validate_sample;
use proptest::prelude::*;

fn recipe_strategy() -> impl Strategy<Value = SynthesisRecipe> {
    (
        3usize..9,
        2usize..25,
        2.0f64..10.0,
        1usize..6,
        0.2f64..1.0,
        any::<u64>(),
    )
        .prop_map(|(interp, blur, ratio, interval, dtr, seed)| SynthesisRecipe {
            interp_factor: interp,
            blur_count: blur,
            exposure_ratio: ratio,
            interval_frames: interval,
            delta_t_ratio: dtr,
            rng_seed: seed,
            ..Default::default()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn synthesized_samples_satisfy_every_invariant(recipe in recipe_strategy(), scene_seed in any::<u64>()) {
        let clip = procedural_clip(&SceneConfig { height: 12, width: 10, frames: 10, seed: scene_seed, ..Default::default() }).unwrap();
        let up = interpolate(&clip, recipe.interp_factor).unwrap();
        let times = sample_times(&up, &recipe);
        prop_assume!(!times.is_empty());
        for &t in times.iter().take(3) {
            let s = make_sample(&up, &recipe, t).unwrap();
            prop_assert!(validate_sample(&s).is_empty(), "{:?}", validate_sample(&s));
            prop_assert!(validate_sample(&s.quantized()).is_empty());
            prop_assert!(s.short.data().iter().all(|v| (0.0..=1.0).contains(v)));
            let i_s = up.index_at(s.timing.t_s).unwrap();
            prop_assert_eq!(&s.gt, &up.frames()[i_s].clamped());
            let i_b = up.index_at(s.timing.t_b).unwrap();
            let i_e = up.index_at(s.timing.t_e).unwrap();
            prop_assert_eq!(i_b - i_s, recipe.interval_frames);
            prop_assert_eq!(i_e + 1 - i_b, recipe.blur_count);
            let (a, b) = s.events.t_span();
            prop_assert!(a <= s.timing.t_s - s.timing.delta_t + 1e-12 && b >= s.timing.t_e - 1e-12);
            // the long exposure is a convex combination of the window frames
            for k in 0..s.long.len() {
                let vals: Vec<f64> = (i_b..=i_e).map(|i| up.frames()[i].data()[k]).collect();
                let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(s.long.data()[k] >= lo - 1e-12 && s.long.data()[k] <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn synthesis_is_a_function_of_the_seed(seed in any::<u64>()) {
        let clip = procedural_clip(&SceneConfig { height: 8, width: 8, frames: 12, ..Default::default() }).unwrap();
        let recipe = SynthesisRecipe { rng_seed: seed, ..Default::default() };
        let up = interpolate(&clip, recipe.interp_factor).unwrap();
        let t = sample_times(&up, &recipe)[0];
        let a = make_sample(&up, &recipe, t).unwrap();
        prop_assert_eq!(&a, &make_sample(&up, &recipe, t).unwrap());
        let other = SynthesisRecipe { rng_seed: seed ^ 1, ..recipe };
        prop_assert_ne!(a.short, make_sample(&up, &other, t).unwrap().short);
    }
}
