use edei_core::io::dataset::{read_parts, read_sample, write_sample};
use edei_core::io::{evt, img};
use edei_core::kv::KvMap;
use edei_core::{Event, EventStream, ExposureSample, ExposureTiming, Frame};
use proptest::prelude::*;

fn frame_strategy(c: usize, h: usize, w: usize) -> impl Strategy<Value = Frame> {
    prop::collection::vec(-0.1f64..1.1, c * h * w).prop_map(move |v| Frame::new(c, h, w, v).unwrap())
}

fn events_strategy(h: usize, w: usize, t0: f64, t1: f64) -> impl Strategy<Value = EventStream> {
    prop::collection::vec((t0..t1, 0..w as u16, 0..h as u16, prop::bool::ANY), 0..80).prop_map(move |raw| {
        let mut ev: Vec<Event> = raw
            .into_iter()
            .map(|(t, x, y, p)| Event::new(t, x, y, if p { 1 } else { -1 }))
            .collect();
        ev.sort_by(Event::order);
        EventStream::new(ev, h, w, t0, t1).unwrap()
    })
}

fn sample_strategy() -> impl Strategy<Value = ExposureSample> {
    (
        prop_oneof![Just(1usize), Just(3usize)],
        8usize..14,
        8usize..14,
        0.1f64..1.0,
        1e-3f64..0.1,
        1e-3f64..0.2,
        any::<u64>(),
    )
        .prop_flat_map(|(c, h, w, t_s, gap, exposure, seed)| {
            let timing = ExposureTiming::new(t_s, t_s + gap, t_s + gap + exposure, gap / 2.0).unwrap();
            (
                frame_strategy(c, h, w),
                frame_strategy(c, h, w),
                frame_strategy(c, h, w),
                events_strategy(h, w, t_s - gap / 2.0, timing.t_e),
            )
                .prop_map(move |(short, long, gt, events)| ExposureSample {
                    short,
                    long,
                    gt,
                    events,
                    timing,
                    seed,
                })
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn samples_round_trip_at_storage_precision(s in sample_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        let mut extra = KvMap::new();
        extra.set("sequence", "x");
        write_sample(dir.path(), &s, &extra).unwrap();
        let back = read_sample(dir.path()).unwrap();
        prop_assert_eq!(&back, &s.quantized());
        let parts = read_parts(dir.path()).unwrap();
        prop_assert_eq!(parts.meta.raw("sequence"), Some("x"));
        // writing the read-back sample reproduces it bit for bit
        let dir2 = tempfile::tempdir().unwrap();
        write_sample(dir2.path(), &back, &extra).unwrap();
        prop_assert_eq!(read_sample(dir2.path()).unwrap(), back);
    }

    #[test]
    fn png16_is_exact_on_the_16_bit_grid(f in frame_strategy(3, 9, 11)) {
        let q = f.map(|v| (v.clamp(0.0, 1.0) * 65535.0).round() / 65535.0);
        let bytes = img::encode_png16(&q).unwrap();
        prop_assert_eq!(img::decode_png(&bytes, "mem".as_ref()).unwrap(), q);
    }

    #[test]
    fn evt_preserves_order_and_fields(s in events_strategy(10, 12, 0.5, 0.6)) {
        let q = s.quantized_to_us();
        let file = evt::decode(&evt::encode(&q).unwrap(), "mem".as_ref()).unwrap();
        prop_assert_eq!((file.height, file.width), (10, 12));
        prop_assert_eq!(&file.events[..], q.events());
    }
}

#[test]
fn missing_ground_truth_reads_as_unlabeled() {
    let f = Frame::filled(1, 8, 8, 0.5).unwrap();
    let s = ExposureSample {
        short: f.clone(),
        long: f.clone(),
        gt: f,
        events: EventStream::empty(8, 8, 0.0, 1.0),
        timing: ExposureTiming::new(0.25, 0.5, 1.0, 0.25).unwrap(),
        seed: 2,
    };
    let dir = tempfile::tempdir().unwrap();
    write_sample(dir.path(), &s, &KvMap::new()).unwrap();
    std::fs::remove_file(dir.path().join("gt.img")).unwrap();
    let parts = read_parts(dir.path()).unwrap();
    assert!(parts.gt.is_none());
    assert!(read_sample(dir.path()).is_err());
}
