use edei_core::metrics::{psnr, ratio_fusion_static, ssim, PSNR_CAP};
use edei_core::Frame;
use proptest::prelude::*;

fn frame() -> impl Strategy<Value = Frame> {
    prop::collection::vec(0.0f64..1.0, 3 * 12 * 12).prop_map(|v| Frame::new(3, 12, 12, v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn psnr_is_symmetric_and_capped(a in frame(), b in frame()) {
        let p = psnr(&a, &b).unwrap();
        prop_assert_eq!(p, psnr(&b, &a).unwrap());
        prop_assert!(p <= PSNR_CAP);
        prop_assert_eq!(psnr(&a, &a).unwrap(), PSNR_CAP);
    }

    #[test]
    fn ssim_is_symmetric_and_bounded(a in frame(), b in frame()) {
        let s = ssim(&a, &b).unwrap();
        prop_assert!((s - ssim(&b, &a).unwrap()).abs() < 1e-12);
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&s));
        prop_assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_offsets_follow_the_log_law(a in frame(), d in 0.001f64..0.2) {
        // PSNR of a constant offset d is -20 log10(d)
        let b = a.map(|v| v + d);
        prop_assert!((psnr(&a, &b).unwrap() + 20.0 * d.log10()).abs() < 1e-6);
    }

    #[test]
    fn static_ratio_fusion_recovers_the_long_exposure(long in frame(), k in 0.01f64..0.5) {
        let short = long.map(|v| v * k + 1e-3);
        let f = ratio_fusion_static(&short, &long).unwrap();
        for (x, y) in f.data().iter().zip(long.data()) {
            prop_assert!((x - y).abs() < 1e-6);
        }
    }
}
