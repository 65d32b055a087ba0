//! Seeded Gaussian test fields: white noise and isotropic power laws.

use rustfft::num_complex::Complex;

use crate::error::{domain_err, Result};
use crate::field::Field2D;
use crate::rng::Rng;
use crate::scalar::Real;
use crate::transform::Dft2;

/// Parameters of a power-law Gaussian random field with `S(w) ~ |w|^-alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawSpec {
    pub alpha: f64,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub seed: u64,
}

impl PowerLawSpec {
    pub fn new(
        alpha: f64,
        height: usize,
        width: usize,
        channels: usize,
        seed: u64,
    ) -> Result<Self> {
        let spec = Self {
            alpha,
            height,
            width,
            channels,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Square `size x size` field.
    pub fn square(alpha: f64, size: usize, channels: usize, seed: u64) -> Result<Self> {
        Self::new(alpha, size, size, channels, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return domain_err(format!("alpha must be finite and >= 0, got {}", self.alpha));
        }
        for (name, n) in [("height", self.height), ("width", self.width)] {
            if n < 16 || !n.is_power_of_two() {
                return domain_err(format!("{name} must be a power of two >= 16, got {n}"));
            }
        }
        if self.channels == 0 {
            return domain_err("at least one channel is required");
        }
        Ok(())
    }

    /// Generator stream derived from `seed`.
    pub fn rng(&self) -> Rng {
        Rng::new(self.seed)
    }
}

/// Folded frequency magnitude of lattice point `(ky, kx)` in cycles/sample.
fn frequency_radius(ky: usize, kx: usize, h: usize, w: usize) -> f64 {
    let fy = ky.min(h - ky) as f64 / h as f64;
    let fx = kx.min(w - kx) as f64 / w as f64;
    (fy * fy + fx * fx).sqrt()
}

/// Shapes white noise in the Fourier domain by `|w|^(-alpha/2)` with the DC
/// coefficient removed, then rescales each channel to zero mean and unit
/// variance. The amplitude depends only on `|w|`, so the Hermitian symmetry
/// of the noise spectrum, and hence a real field, is preserved.
pub fn gen_power_law<S: Real>(spec: &PowerLawSpec, rng: &mut Rng) -> Result<Field2D<S>> {
    spec.validate()?;
    let (c, h, w) = (spec.channels, spec.height, spec.width);
    let plan = Dft2::<f64>::new(h, w);
    let amp: Vec<f64> = (0..h * w)
        .map(|i| {
            let (ky, kx) = (i / w, i % w);
            if i == 0 {
                0.0
            } else {
                frequency_radius(ky, kx, h, w).powf(-spec.alpha / 2.0)
            }
        })
        .collect();
    let mut out = Vec::with_capacity(c * h * w);
    for _ in 0..c {
        let mut buf: Vec<Complex<f64>> = (0..h * w)
            .map(|_| Complex::new(rng.normal(), 0.0))
            .collect();
        plan.forward(&mut buf);
        for (v, &a) in buf.iter_mut().zip(&amp) {
            *v *= a;
        }
        plan.inverse(&mut buf);
        let n = (h * w) as f64;
        let mean = buf.iter().map(|z| z.re).sum::<f64>() / n;
        let var = buf
            .iter()
            .map(|z| (z.re - mean) * (z.re - mean))
            .sum::<f64>()
            / n;
        let scale = 1.0 / var.sqrt();
        out.extend(buf.iter().map(|z| S::lit((z.re - mean) * scale)));
    }
    Field2D::new(c, h, w, out)
}

/// IID standard normal samples.
pub fn gen_white<S: Real>(
    height: usize,
    width: usize,
    channels: usize,
    rng: &mut Rng,
) -> Result<Field2D<S>> {
    Field2D::from_fn(channels, height, width, |_, _, _| S::lit(rng.normal()))
}
