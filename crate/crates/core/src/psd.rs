//! Radially averaged power spectra and the encoding-side spectrum loss.
//!
//! Frequencies are measured in cycles/sample with each axis folded into
//! `[-1/2, 1/2]`, so radii lie in `[0, sqrt(2)/2]`. That interval is split
//! into `B` annuli of equal width; a lattice point with radius `r` goes to
//! annulus `floor(r / width)` (the outermost annulus also takes the corner
//! radius). The comparison is done in exact integer arithmetic so points that
//! sit on an annulus edge are always classified the same way. The DC term is
//! never binned and empty annuli are dropped, so a [`RadialPSD`] may hold
//! fewer than `B` bins.

use rustfft::num_complex::Complex;

use crate::error::{domain_err, size_err, Error, Result};
use crate::field::Field2D;
use crate::scalar::Real;
use crate::transform::Dft2;

/// Largest folded radius, `sqrt(2)/2` cycles/sample.
pub const MAX_RADIUS: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Default probability floor for [`normalize_spectrum`].
pub const DEFAULT_FLOOR: f64 = 1e-8;

/// Default flattening exponent.
pub const DEFAULT_DELTA: f64 = 1.0;

/// Default weight of the spectrum loss in the autoencoder objective.
pub const DEFAULT_BETA: f64 = 0.01;

/// `min(H, W) / 4` clamped to `[8, 128]`.
pub fn default_bins(height: usize, width: usize) -> usize {
    (height.min(width) / 4).clamp(8, 128)
}

/// Radially binned power spectrum.
///
/// `radius[b]` is the mean radius of the lattice points in bin `b` (cycles
/// per sample), `power[b]` the mean power over those points and all
/// channels, and `counts[b]` the number of lattice points per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialPSD<S> {
    radius: Vec<S>,
    power: Vec<S>,
    counts: Vec<usize>,
}

impl<S: Real> RadialPSD<S> {
    pub fn new(radius: Vec<S>, power: Vec<S>, counts: Vec<usize>) -> Result<Self> {
        if radius.is_empty() || radius.len() != power.len() || radius.len() != counts.len() {
            return size_err(format!(
                "radial psd columns disagree: {} radii, {} powers, {} counts",
                radius.len(),
                power.len(),
                counts.len()
            ));
        }
        let rmax = S::lit(MAX_RADIUS * (1.0 + 1e-6));
        for (b, &r) in radius.iter().enumerate() {
            if !(r > S::zero() && r <= rmax) {
                return domain_err(format!("bin {b}: radius {r} outside (0, sqrt(2)/2]"));
            }
            if b > 0 && r <= radius[b - 1] {
                return domain_err(format!("bin {b}: radii must be strictly increasing"));
            }
        }
        if let Some(b) = power
            .iter()
            .position(|p| !(p.is_finite() && *p >= S::zero()))
        {
            return domain_err(format!("bin {b}: power must be finite and non-negative"));
        }
        if let Some(b) = counts.iter().position(|&c| c == 0) {
            return domain_err(format!("bin {b}: count must be at least 1"));
        }
        Ok(Self {
            radius,
            power,
            counts,
        })
    }

    pub fn len(&self) -> usize {
        self.radius.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radius.is_empty()
    }

    pub fn radius(&self) -> &[S] {
        &self.radius
    }

    pub fn power(&self) -> &[S] {
        &self.power
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Elementwise mean of spectra sharing one bin layout.
    pub fn average(spectra: &[RadialPSD<S>]) -> Result<Self> {
        let first = spectra
            .first()
            .ok_or_else(|| Error::Size("cannot average zero spectra".into()))?;
        let mut power = vec![S::zero(); first.len()];
        for s in spectra {
            if s.radius != first.radius {
                return size_err("spectra to average use different bin layouts");
            }
            for (acc, &p) in power.iter_mut().zip(&s.power) {
                *acc += p;
            }
        }
        let n = S::from_count(spectra.len());
        power.iter_mut().for_each(|p| *p /= n);
        Ok(Self {
            radius: first.radius.clone(),
            power,
            counts: first.counts.clone(),
        })
    }
}

/// Result of a log-log least-squares fit `power = K * radius^(-alpha)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit<S> {
    pub alpha: S,
    pub log_k: S,
    pub r2: S,
}

/// Normalized radial spectrum: positive probabilities summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumDistribution<S> {
    probs: Vec<S>,
}

impl<S: Real> SpectrumDistribution<S> {
    /// Accepts strictly positive entries whose sum is one to within
    /// `sqrt(epsilon)`.
    pub fn new(probs: Vec<S>) -> Result<Self> {
        if probs.is_empty() {
            return size_err("empty distribution");
        }
        if let Some(b) = probs
            .iter()
            .position(|p| !(p.is_finite() && *p > S::zero()))
        {
            return domain_err(format!("probability {b} must be positive and finite"));
        }
        let sum: S = probs.iter().copied().sum();
        if (sum - S::one()).abs() > S::epsilon().sqrt() {
            return domain_err(format!("probabilities sum to {sum}, not 1"));
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[S] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Bin assignment of every lattice point for one grid size and bin count.
#[derive(Debug, Clone)]
pub struct RadialBinning {
    height: usize,
    width: usize,
    /// Compact bin index per lattice point (`None` for DC).
    assignment: Vec<Option<usize>>,
    counts: Vec<usize>,
    radius: Vec<f64>,
}

fn folded(k: usize, n: usize) -> u128 {
    let k = if k > n / 2 { n - k } else { k };
    k as u128
}

impl RadialBinning {
    pub fn new(height: usize, width: usize, bins: usize) -> Result<Self> {
        if bins < 4 {
            return size_err(format!("need at least 4 radial bins, got {bins}"));
        }
        if height < 8 || width < 8 {
            return size_err(format!(
                "radial spectra need at least 8x8 samples, got {height}x{width}"
            ));
        }
        let (h2, w2) = ((height * height) as u128, (width * width) as u128);
        let b2 = 2 * (bins as u128) * (bins as u128);
        let hw2 = h2 * w2;
        let mut raw = vec![usize::MAX; height * width];
        let mut raw_counts = vec![0usize; bins];
        let mut raw_radius = vec![0.0f64; bins];
        for y in 0..height {
            let ky = folded(y, height);
            for x in 0..width {
                let kx = folded(x, width);
                if kx == 0 && ky == 0 {
                    continue;
                }
                // r^2 = ky^2/H^2 + kx^2/W^2 and width^2 = 1/(2 B^2), so
                // b <= r/width  <=>  b^2 H^2 W^2 <= 2 B^2 (ky^2 W^2 + kx^2 H^2).
                let rhs = b2 * (ky * ky * w2 + kx * kx * h2);
                let r = ((ky * ky) as f64 / h2 as f64 + (kx * kx) as f64 / w2 as f64).sqrt();
                let mut b = ((r / MAX_RADIUS) * bins as f64).floor() as u128;
                while b > 0 && b * b * hw2 > rhs {
                    b -= 1;
                }
                while (b + 1) * (b + 1) * hw2 <= rhs {
                    b += 1;
                }
                let b = (b as usize).min(bins - 1);
                raw[y * width + x] = b;
                raw_counts[b] += 1;
                raw_radius[b] += r;
            }
        }
        let mut compact = vec![usize::MAX; bins];
        let mut counts = Vec::new();
        let mut radius = Vec::new();
        for b in 0..bins {
            if raw_counts[b] > 0 {
                compact[b] = counts.len();
                counts.push(raw_counts[b]);
                radius.push(raw_radius[b] / raw_counts[b] as f64);
            }
        }
        let assignment = raw
            .into_iter()
            .map(|b| {
                if b == usize::MAX {
                    None
                } else {
                    Some(compact[b])
                }
            })
            .collect();
        Ok(Self {
            height,
            width,
            assignment,
            counts,
            radius,
        })
    }

    /// Number of non-empty bins.
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn radius(&self) -> &[f64] {
        &self.radius
    }

    pub fn bin_of(&self, y: usize, x: usize) -> Option<usize> {
        self.assignment[y * self.width + x]
    }

    /// Bins a channel-averaged power grid (DC at index 0).
    fn reduce<S: Real>(&self, power: &[S]) -> Vec<S> {
        let mut acc = vec![S::zero(); self.len()];
        for (p, bin) in power.iter().zip(&self.assignment) {
            if let Some(b) = bin {
                acc[*b] += *p;
            }
        }
        for (a, &n) in acc.iter_mut().zip(&self.counts) {
            *a /= S::from_count(n);
        }
        acc
    }
}

/// Radial spectrum estimator for one grid size; reuse it across many fields.
pub struct RadialEstimator<S: Real> {
    binning: RadialBinning,
    plan: Dft2<S>,
}

impl<S: Real> RadialEstimator<S> {
    pub fn new(height: usize, width: usize, bins: usize) -> Result<Self> {
        Ok(Self {
            binning: RadialBinning::new(height, width, bins)?,
            plan: Dft2::new(height, width),
        })
    }

    pub fn binning(&self) -> &RadialBinning {
        &self.binning
    }

    /// Zero-power spectrum carrying this estimator's radii and counts, used as
    /// the `onto` argument of [`resample_psd`].
    pub fn layout(&self) -> RadialPSD<S> {
        self.psd_from_power(&vec![S::zero(); self.binning.height * self.binning.width])
    }

    fn check(&self, field: &Field2D<S>) -> Result<()> {
        if field.height() != self.binning.height || field.width() != self.binning.width {
            return size_err(format!(
                "estimator built for {}x{}, field is {}x{}",
                self.binning.height,
                self.binning.width,
                field.height(),
                field.width()
            ));
        }
        Ok(())
    }

    fn spectra(&self, field: &Field2D<S>) -> (Vec<Vec<Complex<S>>>, Vec<S>) {
        let n = field.height() * field.width();
        let inv_c = S::one() / S::from_count(field.channels());
        let mut power = vec![S::zero(); n];
        let mut spectra = Vec::with_capacity(field.channels());
        for c in 0..field.channels() {
            let y = self.plan.forward_real(field.channel(c));
            for (p, z) in power.iter_mut().zip(&y) {
                *p += z.norm_sqr() * inv_c;
            }
            spectra.push(y);
        }
        (spectra, power)
    }

    fn psd_from_power(&self, power: &[S]) -> RadialPSD<S> {
        RadialPSD {
            radius: self.binning.radius.iter().map(|&r| S::lit(r)).collect(),
            power: self.binning.reduce(power),
            counts: self.binning.counts.clone(),
        }
    }

    pub fn radial_psd(&self, field: &Field2D<S>) -> Result<RadialPSD<S>> {
        self.check(field)?;
        let (_, power) = self.spectra(field);
        Ok(self.psd_from_power(&power))
    }

    /// Spectrum loss `KL(target || normalize(radial_psd(field)))` and its
    /// gradient with respect to every sample of `field`.
    ///
    /// The backward pass runs through the probability normalization, the
    /// floor (zero gradient on floored bins), the annulus means, the channel
    /// mean and the squared DFT magnitudes. The last step reduces to
    /// `dL/dz_c = (2/C) Re(F^H (a . Y_c))` where `a` is the per-frequency
    /// sensitivity of the loss to the power grid.
    pub fn loss_and_grad(
        &self,
        field: &Field2D<S>,
        target: &SpectrumDistribution<S>,
        floor: S,
    ) -> Result<(S, Field2D<S>)> {
        self.check(field)?;
        if target.len() != self.binning.len() {
            return size_err(format!(
                "target has {} bins, latent spectrum has {}",
                target.len(),
                self.binning.len()
            ));
        }
        let (spectra, power) = self.spectra(field);
        let binned = self.binning.reduce(&power);
        let nb = binned.len();
        check_floor(floor, nb)?;

        let total: S = binned.iter().copied().sum();
        if total <= S::zero() {
            return domain_err("latent spectrum has no power outside DC");
        }
        let q: Vec<S> = binned.iter().map(|&w| w / total).collect();
        let q_floored: Vec<S> = q.iter().map(|&v| v.max(floor)).collect();
        let q_sum: S = q_floored.iter().copied().sum();
        let p: Vec<S> = q_floored.iter().map(|&v| v / q_sum).collect();
        let t = target.probs();
        let loss = kl(t, &p).max(S::zero());

        let g_p: Vec<S> = t.iter().zip(&p).map(|(&tb, &pb)| -tb / pb).collect();
        let dot_p: S = g_p.iter().zip(&p).map(|(&g, &pb)| g * pb).sum();
        let g_q: Vec<S> = (0..nb)
            .map(|j| {
                if q[j] > floor {
                    (g_p[j] - dot_p) / q_sum
                } else {
                    S::zero()
                }
            })
            .collect();
        let dot_q: S = g_q.iter().zip(&q).map(|(&g, &qb)| g * qb).sum();
        let g_w: Vec<S> = g_q.iter().map(|&g| (g - dot_q) / total).collect();
        let per_point: Vec<S> = g_w
            .iter()
            .zip(&self.binning.counts)
            .map(|(&g, &n)| g / S::from_count(n))
            .collect();

        let (c, h, w) = field.shape();
        let scale = S::lit(2.0) / S::from_count(c);
        let mut grad = Vec::with_capacity(c * h * w);
        for y in spectra {
            let mut buf: Vec<Complex<S>> = y
                .iter()
                .zip(&self.binning.assignment)
                .map(|(z, bin)| match bin {
                    Some(b) => *z * per_point[*b],
                    None => Complex::new(S::zero(), S::zero()),
                })
                .collect();
            self.plan.inverse(&mut buf);
            grad.extend(buf.iter().map(|z| z.re * scale));
        }
        Ok((loss, Field2D::from_parts_unchecked(c, h, w, grad)))
    }
}

/// Channel-averaged radial power spectrum with the DC term excluded.
pub fn radial_psd<S: Real>(field: &Field2D<S>, bins: usize) -> Result<RadialPSD<S>> {
    RadialEstimator::new(field.height(), field.width(), bins)?.radial_psd(field)
}

/// Ordinary least squares of `ln power` on `ln radius` over bins with
/// `rmin <= radius <= rmax`; `alpha` is the negated slope.
pub fn fit_power_law<S: Real>(psd: &RadialPSD<S>, rmin: S, rmax: S) -> Result<PowerLawFit<S>> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&r, &p) in psd.radius.iter().zip(&psd.power) {
        if r < rmin || r > rmax {
            continue;
        }
        if p <= S::zero() {
            return domain_err(format!("non-positive power {p} at radius {r}"));
        }
        xs.push(r.ln());
        ys.push(p.ln());
    }
    if xs.len() < 4 {
        return size_err(format!(
            "power-law fit needs at least 4 bins in [{rmin}, {rmax}], found {}",
            xs.len()
        ));
    }
    let n = S::from_count(xs.len());
    let mx = xs.iter().copied().sum::<S>() / n;
    let my = ys.iter().copied().sum::<S>() / n;
    let mut sxx = S::zero();
    let mut sxy = S::zero();
    let mut syy = S::zero();
    for (&x, &y) in xs.iter().zip(&ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: S = xs
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    // A flat line in log-log leaves nothing to explain.
    let r2 = if syy <= S::epsilon() * S::epsilon() {
        S::one()
    } else {
        (S::one() - ss_res / syy).max(S::zero()).min(S::one())
    };
    Ok(PowerLawFit {
        alpha: -slope,
        log_k: intercept,
        r2,
    })
}

/// Tilts the spectrum by `(radius / radius_max)^delta`, lowering a power-law
/// exponent by `delta` while leaving the outermost bin unchanged.
pub fn flatten_psd<S: Real>(psd: &RadialPSD<S>, delta: S) -> Result<RadialPSD<S>> {
    if !(delta >= S::zero()) || !delta.is_finite() {
        return domain_err(format!(
            "flatten exponent must be non-negative, got {delta}"
        ));
    }
    if delta == S::zero() {
        return Ok(psd.clone());
    }
    let r_ref = *psd.radius.last().expect("non-empty psd");
    let power = psd
        .radius
        .iter()
        .zip(&psd.power)
        .map(|(&r, &p)| p * (r / r_ref).powf(delta))
        .collect();
    Ok(RadialPSD {
        radius: psd.radius.clone(),
        power,
        counts: psd.counts.clone(),
    })
}

fn check_floor<S: Real>(floor: S, bins: usize) -> Result<()> {
    if !(floor > S::zero() && floor < S::one() / S::from_count(bins)) {
        return domain_err(format!(
            "probability floor must lie in (0, 1/{bins}), got {floor}"
        ));
    }
    Ok(())
}

/// Proportional probabilities, floored at `floor` and renormalized.
pub fn normalize_spectrum<S: Real>(
    psd: &RadialPSD<S>,
    floor: S,
) -> Result<SpectrumDistribution<S>> {
    check_floor(floor, psd.len())?;
    let total: S = psd.power.iter().copied().sum();
    if total <= S::zero() {
        return domain_err("cannot normalize an all-zero spectrum");
    }
    let floored: Vec<S> = psd.power.iter().map(|&p| (p / total).max(floor)).collect();
    let sum: S = floored.iter().copied().sum();
    Ok(SpectrumDistribution {
        probs: floored.into_iter().map(|v| v / sum).collect(),
    })
}

fn kl<S: Real>(t: &[S], p: &[S]) -> S {
    t.iter()
        .zip(p)
        .map(|(&tb, &pb)| {
            if tb > S::zero() {
                tb * (tb / pb).ln()
            } else {
                S::zero()
            }
        })
        .sum()
}

/// `KL(target || latent) = sum_b target[b] ln(target[b] / latent[b])`.
pub fn esm_loss<S: Real>(
    target: &SpectrumDistribution<S>,
    latent: &SpectrumDistribution<S>,
) -> Result<S> {
    if target.len() != latent.len() {
        return size_err(format!(
            "distributions have {} and {} bins",
            target.len(),
            latent.len()
        ));
    }
    // Rounding can leave a hair below zero when the two are equal.
    Ok(kl(&target.probs, &latent.probs).max(S::zero()))
}

/// Gradient of `esm_loss(target, normalize_spectrum(radial_psd(field, bins), floor))`
/// with respect to the field samples.
pub fn esm_loss_grad<S: Real>(
    field: &Field2D<S>,
    target: &SpectrumDistribution<S>,
    bins: usize,
    floor: S,
) -> Result<Field2D<S>> {
    let est = RadialEstimator::new(field.height(), field.width(), bins)?;
    Ok(est.loss_and_grad(field, target, floor)?.1)
}

/// Re-expresses `psd` on the radii (and counts) of `onto` by linear
/// interpolation of `ln power` against `ln radius`, extending the end
/// segments linearly outside the source range.
pub fn resample_psd<S: Real>(psd: &RadialPSD<S>, onto: &RadialPSD<S>) -> Result<RadialPSD<S>> {
    if psd.len() < 2 {
        return size_err("resampling needs at least two source bins");
    }
    if let Some(b) = psd.power.iter().position(|&p| p <= S::zero()) {
        return domain_err(format!("log-log resampling needs positive power (bin {b})"));
    }
    let lx: Vec<S> = psd.radius.iter().map(|r| r.ln()).collect();
    let ly: Vec<S> = psd.power.iter().map(|p| p.ln()).collect();
    let n = lx.len();
    let power = onto
        .radius
        .iter()
        .map(|&r| {
            let x = r.ln();
            let seg = match lx.iter().position(|&v| v > x) {
                Some(0) => 0,
                Some(i) => i - 1,
                None => n - 2,
            }
            .min(n - 2);
            let t = (x - lx[seg]) / (lx[seg + 1] - lx[seg]);
            (ly[seg] + t * (ly[seg + 1] - ly[seg])).exp()
        })
        .collect();
    Ok(RadialPSD {
        radius: onto.radius.clone(),
        power,
        counts: onto.counts.clone(),
    })
}
