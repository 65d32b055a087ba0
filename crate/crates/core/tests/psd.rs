use proptest::prelude::*;
use specmatch::psd::*;
use specmatch::rng::Rng;
use specmatch::synth::{gen_power_law, PowerLawSpec};
use specmatch::{Field64, Psd64, Spectrum64};

fn power_law(alpha: f64, n: usize) -> Psd64 {
    let radius: Vec<f64> = (1..=n).map(|i| 0.7 * i as f64 / n as f64).collect();
    let power = radius.iter().map(|r| 0.5 * r.powf(-alpha)).collect();
    Psd64::new(radius, power, vec![1; n]).unwrap()
}

fn random_distribution(rng: &mut Rng, n: usize) -> Spectrum64 {
    let raw: Vec<f64> = (0..n).map(|_| rng.next_f64() + 1e-3).collect();
    let s: f64 = raw.iter().sum();
    Spectrum64::new(raw.iter().map(|v| v / s).collect()).unwrap()
}

/// Central differences of the full loss pipeline.
fn finite_difference(z: &Field64, target: &Spectrum64, bins: usize, h: f64) -> Vec<f64> {
    let loss = |f: &Field64| {
        let d = normalize_spectrum(&radial_psd(f, bins).unwrap(), DEFAULT_FLOOR).unwrap();
        esm_loss(target, &d).unwrap()
    };
    let (c, hh, w) = z.shape();
    let mut data = z.data().to_vec();
    (0..data.len())
        .map(|i| {
            let o = data[i];
            data[i] = o + h;
            let p = loss(&Field64::new(c, hh, w, data.clone()).unwrap());
            data[i] = o - h;
            let m = loss(&Field64::new(c, hh, w, data.clone()).unwrap());
            data[i] = o;
            (p - m) / (2.0 * h)
        })
        .collect()
}

#[test]
fn esm_gradient_on_twenty_latents() {
    let mut rng = Rng::new(314);
    let bins = default_bins(16, 16);
    let layout = RadialEstimator::<f64>::new(16, 16, bins).unwrap().layout();
    let target_psd =
        resample_psd(&flatten_psd(&power_law(2.0, 16), 1.0).unwrap(), &layout).unwrap();
    let target = normalize_spectrum(&target_psd, DEFAULT_FLOOR).unwrap();
    let mut checked = 0;
    for i in 0..20 {
        let c = 1 + i % 3;
        let z = Field64::from_fn(c, 16, 16, |_, _, _| rng.normal()).unwrap();
        let g = esm_loss_grad(&z, &target, bins, DEFAULT_FLOOR).unwrap();
        let fd = finite_difference(&z, &target, bins, 1e-4);
        for (a, n) in g.data().iter().zip(&fd) {
            if a.abs() > 1e-8 {
                assert!((a - n).abs() / a.abs() < 1e-4, "analytic {a}, numeric {n}");
                checked += 1;
            }
        }
    }
    assert!(checked > 1000);
}

#[test]
fn synthetic_ensemble_fit_and_flatten() {
    let spec = PowerLawSpec::square(2.0, 128, 1, 17).unwrap();
    let mut rng = spec.rng();
    let est = RadialEstimator::new(128, 128, default_bins(128, 128)).unwrap();
    let psds: Vec<Psd64> = (0..64)
        .map(|_| {
            est.radial_psd(&gen_power_law(&spec, &mut rng).unwrap())
                .unwrap()
        })
        .collect();
    let avg = Psd64::average(&psds).unwrap();
    let fit = fit_power_law(&avg, 0.0, 1.0).unwrap();
    assert!((1.9..=2.1).contains(&fit.alpha), "{}", fit.alpha);
    let flat = fit_power_law(&flatten_psd(&avg, 1.0).unwrap(), 0.0, 1.0).unwrap();
    assert!((0.9..=1.1).contains(&flat.alpha), "{}", flat.alpha);
}

#[test]
fn kl_is_non_negative_on_random_pairs() {
    let mut rng = Rng::new(1);
    for _ in 0..1000 {
        let n = 2 + rng.below(30) as usize;
        let a = random_distribution(&mut rng, n);
        let b = random_distribution(&mut rng, n);
        assert!(esm_loss(&a, &b).unwrap() >= 0.0);
        assert_eq!(esm_loss(&a, &a).unwrap(), 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn flatten_shifts_exponent_exactly(alpha in 0.0f64..4.0, delta in 0.0f64..3.0, n in 4usize..40) {
        let p = power_law(alpha, n);
        let fit = fit_power_law(&flatten_psd(&p, delta).unwrap(), 0.0, 1.0).unwrap();
        prop_assert!((fit.alpha - (alpha - delta)).abs() < 1e-9);
        prop_assert_eq!(flatten_psd(&p, 0.0).unwrap(), p);
    }

    #[test]
    fn normalized_spectra_are_distributions(
        powers in prop::collection::vec(0.0f64..10.0, 4..32), floor_frac in 1e-6f64..0.5
    ) {
        prop_assume!(powers.iter().any(|&p| p > 0.0));
        let n = powers.len();
        let radius: Vec<f64> = (1..=n).map(|i| 0.7 * i as f64 / n as f64).collect();
        let psd = Psd64::new(radius, powers, vec![1; n]).unwrap();
        let floor = floor_frac / n as f64;
        let d = normalize_spectrum(&psd, floor).unwrap();
        prop_assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let min = d.probs().iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert!(min >= floor / (1.0 + n as f64 * floor) * (1.0 - 1e-12));
    }

    #[test]
    fn radial_psd_ignores_constant_offsets(seed in any::<u64>(), offset in -100.0f64..100.0) {
        let mut rng = Rng::new(seed);
        let f = Field64::from_fn(2, 16, 16, |_, _, _| rng.normal()).unwrap();
        let a = radial_psd(&f, 8).unwrap();
        let b = radial_psd(&f.map(|v| v + offset).unwrap(), 8).unwrap();
        for (x, y) in a.power().iter().zip(b.power()) {
            prop_assert!((x - y).abs() < 1e-9 * x.max(1.0));
        }
    }
}
