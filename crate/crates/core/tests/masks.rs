use proptest::prelude::*;
use specmatch::mask::{dsm_loss, quadrant_downsample_check, spectral_filter, TriangularMask};
use specmatch::rng::Rng;
use specmatch::Field64;

fn field(seed: u64, c: usize, h: usize, w: usize) -> Field64 {
    let mut rng = Rng::new(seed);
    Field64::from_fn(c, h, w, |_, _, _| rng.normal()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn filter_is_an_idempotent_contraction(seed in any::<u64>(), n in 0u8..15) {
        let x = field(seed, 2, 16, 24);
        let m = TriangularMask::new(n).unwrap();
        let once = spectral_filter(&x, &m).unwrap();
        let twice = spectral_filter(&once, &m).unwrap();
        prop_assert!(once.max_abs_diff(&twice).unwrap() < 1e-10);
        prop_assert!(once.sum_squares() <= x.sum_squares() * (1.0 + 1e-12));
        prop_assert_eq!(dsm_loss(&x, &once, &m).unwrap(), 0.0);
    }

    #[test]
    fn masks_nest(seed in any::<u64>(), a in 0u8..15, b in 0u8..15) {
        let (lo, hi) = (a.min(b), a.max(b));
        let x = field(seed, 1, 16, 16);
        let m_lo = TriangularMask::new(lo).unwrap();
        let m_hi = TriangularMask::new(hi).unwrap();
        let composed = spectral_filter(&spectral_filter(&x, &m_lo).unwrap(), &m_hi).unwrap();
        let direct = spectral_filter(&x, &m_hi).unwrap();
        prop_assert!(composed.max_abs_diff(&direct).unwrap() < 1e-10);
    }

    #[test]
    fn empty_mask_dsm_is_plain_l1(seed in any::<u64>()) {
        let x = field(seed, 1, 8, 16);
        let y = field(seed ^ 1, 1, 8, 16);
        let plain: f64 = x.data().iter().zip(y.data()).map(|(a, b)| (a - b).abs()).sum::<f64>() / 128.0;
        let got = dsm_loss(&x, &y, &TriangularMask::empty()).unwrap();
        prop_assert!((got - plain).abs() < 1e-15);
    }
}

#[test]
fn downsample_paths_agree_on_a_hundred_fields() {
    for seed in 0..100 {
        let x = field(seed, 1 + (seed as usize % 3), 32, 48);
        let rep = quadrant_downsample_check(&x).unwrap();
        assert!(
            rep.max_abs_error < 1e-9,
            "seed {seed}: {}",
            rep.max_abs_error
        );
        assert_eq!(rep.downsampled.shape(), (x.channels(), 16, 24));
    }
}
