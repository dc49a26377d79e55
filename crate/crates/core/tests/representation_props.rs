use edei_core::{perturb_window, voxelize, Event, EventStream, ExposureTiming};
use proptest::prelude::*;

fn stream() -> impl Strategy<Value = EventStream> {
    prop::collection::vec((0.0f64..1.0, 0u16..9, 0u16..8, prop::bool::ANY), 0..120).prop_map(|raw| {
        let mut ev: Vec<Event> = raw
            .into_iter()
            .map(|(t, x, y, p)| Event::new(t, x, y, if p { 1 } else { -1 }))
            .collect();
        ev.sort_by(Event::order);
        EventStream::new(ev, 8, 9, 0.0, 1.0).unwrap()
    })
}

fn flipped(s: &EventStream) -> EventStream {
    let ev = s.events().iter().map(|e| Event { p: -e.p, ..*e }).collect();
    let (a, b) = s.t_span();
    EventStream::new(ev, 8, 9, a, b).unwrap()
}

proptest! {
    #[test]
    fn mass_is_conserved_per_pixel(s in stream(), a in 0.0f64..0.5, len in 0.01f64..0.5, bins in 1usize..12) {
        let b = a + len;
        let g = voxelize(&s, (a, b), bins).unwrap();
        let mut want = vec![0.0; 72];
        for e in s.events().iter().filter(|e| e.t >= a && e.t <= b) {
            want[e.y as usize * 9 + e.x as usize] += e.p as f64;
        }
        for (got, want) in g.pixel_totals().iter().zip(&want) {
            prop_assert!((got - want).abs() < 1e-9);
        }
    }

    #[test]
    fn shifting_events_and_window_together_changes_nothing(s in stream(), dt in -3.0f64..3.0, bins in 1usize..10) {
        let g = voxelize(&s, (0.1, 0.9), bins).unwrap();
        let h = voxelize(&s.shifted(dt), (0.1 + dt, 0.9 + dt), bins).unwrap();
        for (x, y) in g.data.iter().zip(&h.data) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn flipping_polarities_negates_the_grid(s in stream(), bins in 1usize..10) {
        let g = voxelize(&s, (0.0, 1.0), bins).unwrap();
        let f = voxelize(&flipped(&s), (0.0, 1.0), bins).unwrap();
        for (x, y) in g.data.iter().zip(&f.data) {
            prop_assert_eq!(*x, -*y);
        }
    }

    #[test]
    fn weights_stay_between_neighbouring_bins(s in stream(), bins in 2usize..10) {
        // each event touches at most two adjacent bins with weights in [0, 1]
        for e in s.events() {
            let one = EventStream::new(vec![*e], 8, 9, 0.0, 1.0).unwrap();
            let g = voxelize(&one, (0.0, 1.0), bins).unwrap();
            let touched: Vec<usize> = (0..bins).filter(|&b| g.at(b, e.y as usize, e.x as usize) != 0.0).collect();
            prop_assert!(touched.len() <= 2);
            if touched.len() == 2 {
                prop_assert_eq!(touched[1], touched[0] + 1);
            }
            prop_assert!(g.data.iter().all(|v| v.abs() <= 1.0 + 1e-12));
        }
    }

    #[test]
    fn perturbation_moves_only_the_start(t_s in 0.0f64..1.0, gap in 0.01f64..0.5, exp in 0.01f64..0.5, eps in -0.2f64..0.2) {
        let t = ExposureTiming::new(t_s, t_s + gap, t_s + gap + exp, gap / 2.0).unwrap();
        let (a, b) = perturb_window(&t, eps);
        prop_assert_eq!(b, t.t_e);
        prop_assert!((a - (t_s - eps * gap)).abs() < 1e-12);
    }
}
