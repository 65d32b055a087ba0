//! Self-checks run by `specmatch check`: each compares an implementation
//! against an independent oracle on fixed seeded inputs.

use specmatch::mask::quadrant_downsample_check;
use specmatch::psd::{
    default_bins, esm_loss, esm_loss_grad, flatten_psd, normalize_spectrum, radial_psd,
    resample_psd, RadialEstimator, DEFAULT_FLOOR,
};
use specmatch::repa::{mean_direction_norm_sq, normalize_tokens, rmsc};
use specmatch::train::jensen_check;
use specmatch::transform::dct1_tokens;
use specmatch::{Field64, Psd64, Rng, Spectrum64, Tokens64};

use crate::error::CliResult;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed deviation.
    pub worst: f64,
    pub tolerance: f64,
    pub cases: usize,
}

impl CheckOutcome {
    pub fn line(&self) -> String {
        format!(
            "{} {} cases={} worst={:.3e} tol={:.0e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.cases,
            self.worst,
            self.tolerance
        )
    }
}

fn outcome(name: &'static str, worst: f64, tolerance: f64, cases: usize) -> CheckOutcome {
    CheckOutcome {
        name,
        passed: worst < tolerance,
        worst,
        tolerance,
        cases,
    }
}

pub const CHECK_NAMES: [&str; 4] = ["jensen", "quadrant", "directional", "gradient"];

/// `sum log S <= B log(P/B)` on random equal-power spectra and equality on a
/// flat one.
pub fn jensen() -> CliResult<CheckOutcome> {
    let mut rng = Rng::new(0x1e5e);
    let (bins, total) = (32, 10.0);
    let spectra: Vec<Vec<f64>> = (0..1000)
        .map(|_| {
            let raw: Vec<f64> = (0..bins).map(|_| rng.next_f64() + 1e-6).collect();
            let s: f64 = raw.iter().sum();
            raw.iter().map(|v| v * total / s).collect()
        })
        .collect();
    let report = jensen_check(&spectra, 1e-12)?;
    let flat = jensen_check(&[vec![total / bins as f64; bins]], 1e-12)?;
    let worst = report.max_violation.max(flat.gaps[0].abs());
    Ok(outcome("jensen", worst, 1e-12, spectra.len() + 1))
}

/// Coefficient truncation against the explicit `(1/sqrt2) C4^T [I 0] C8` operator.
pub fn quadrant() -> CliResult<CheckOutcome> {
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let mut rng = Rng::new(seed);
        let c = 1 + (seed % 3) as usize;
        let h = 8 * (1 + rng.below(4) as usize);
        let w = 8 * (1 + rng.below(4) as usize);
        let x = Field64::from_fn(c, h, w, |_, _, _| rng.normal())?;
        worst = worst.max(quadrant_downsample_check(&x)?.max_abs_error);
    }
    Ok(outcome("quadrant", worst, 1e-9, 100))
}

/// Directional energy identity: `T RMSC^2 = sum_{k>=1} |U_k|^2` and `RMSC^2 = 1 - |u_bar|^2`.
pub fn directional() -> CliResult<CheckOutcome> {
    let mut worst = 0.0f64;
    for seed in 0..200u64 {
        let mut rng = Rng::new(0x9e37 + seed);
        let t = 1 + rng.below(64) as usize;
        let d = 1 + rng.below(32) as usize;
        let shift = rng.normal();
        let x = Tokens64::from_fn(t, d, |_, _| rng.normal() + shift)?;
        let r = rmsc(&x)?;
        let u = dct1_tokens(&normalize_tokens(&x)?)?;
        let non_dc: f64 = (1..t)
            .map(|k| u.token(k).iter().map(|v| v * v).sum::<f64>())
            .sum();
        worst = worst
            .max((t as f64 * r * r - non_dc).abs())
            .max((r * r - (1.0 - mean_direction_norm_sq(&x)?)).abs());
    }
    Ok(outcome("directional", worst, 1e-9, 200))
}

/// Analytic ESM gradient against central differences on 20 latents of 16x16.
pub fn gradient() -> CliResult<CheckOutcome> {
    let (h, w) = (16, 16);
    let bins = default_bins(h, w);
    let layout = RadialEstimator::<f64>::new(h, w, bins)?.layout();
    let radius: Vec<f64> = (1..=32).map(|i| i as f64 / 46.0).collect();
    let power = radius.iter().map(|r| r.powf(-2.0)).collect();
    let image = Psd64::new(radius, power, vec![1; 32])?;
    let target = normalize_spectrum(
        &resample_psd(&flatten_psd(&image, 1.0)?, &layout)?,
        DEFAULT_FLOOR,
    )?;
    let loss = |f: &Field64| -> CliResult<f64> {
        let d: Spectrum64 = normalize_spectrum(&radial_psd(f, bins)?, DEFAULT_FLOOR)?;
        Ok(esm_loss(&target, &d)?)
    };
    let mut rng = Rng::new(0x6ead);
    let step = 1e-4;
    let (mut worst, mut cases) = (0.0f64, 0);
    for i in 0..20 {
        let c = 1 + i % 2;
        let z = Field64::from_fn(c, h, w, |_, _, _| rng.normal())?;
        let g = esm_loss_grad(&z, &target, bins, DEFAULT_FLOOR)?;
        let mut data = z.data().to_vec();
        for (k, &a) in g.data().iter().enumerate() {
            let o = data[k];
            data[k] = o + step;
            let p = loss(&Field64::new(c, h, w, data.clone())?)?;
            data[k] = o - step;
            let m = loss(&Field64::new(c, h, w, data.clone())?)?;
            data[k] = o;
            if a.abs() > 1e-8 {
                let n = (p - m) / (2.0 * step);
                worst = worst.max((a - n).abs() / a.abs());
                cases += 1;
            }
        }
    }
    Ok(outcome("gradient", worst, 1e-4, cases))
}

pub fn run(name: &str) -> CliResult<CheckOutcome> {
    match name {
        "jensen" => jensen(),
        "quadrant" => quadrant(),
        "directional" => directional(),
        "gradient" => gradient(),
        other => Err(crate::error::CliError::Usage(format!(
            "unknown check {other:?} (known: {})",
            CHECK_NAMES.join(", ")
        ))),
    }
}
