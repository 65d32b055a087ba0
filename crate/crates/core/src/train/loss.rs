use crate::error::{size_err, Result};
use crate::field::Field2D;
use crate::mask::{sample_mask, spectral_filter, MaskFamily};
use crate::psd::{
    default_bins, flatten_psd, normalize_spectrum, resample_psd, RadialEstimator, RadialPSD,
    SpectrumDistribution, DEFAULT_BETA, DEFAULT_DELTA, DEFAULT_FLOOR,
};
use crate::rng::Rng;
use crate::scalar::Real;

use super::model::{Gradients, LinearAE};

/// Mean absolute error and its subgradient `sign(a - b) / N`.
pub(crate) fn l1_with_grad<S: Real>(a: &Field2D<S>, b: &Field2D<S>) -> (S, Field2D<S>) {
    let n = S::from_count(a.len());
    let mut sum = S::zero();
    let grad = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let r = x - y;
            sum += r.abs();
            if r > S::zero() {
                S::one() / n
            } else if r < S::zero() {
                -S::one() / n
            } else {
                S::zero()
            }
        })
        .collect();
    let (c, h, w) = a.shape();
    (sum / n, Field2D::from_parts_unchecked(c, h, w, grad))
}

pub(crate) fn mean_l1<S: Real>(a: &Field2D<S>, b: &Field2D<S>) -> S {
    let sum: S = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (x - y).abs())
        .sum();
    sum / S::from_count(a.len())
}

fn check_batch<S: Real>(model: &LinearAE<S>, batch: &[Field2D<S>]) -> Result<()> {
    let Some(first) = batch.first() else {
        return size_err("empty batch");
    };
    model.check_input(first)?;
    if batch.iter().any(|x| !x.same_shape(first)) {
        return size_err("batch fields differ in shape");
    }
    Ok(())
}

/// Spectrum-matching objective state: estimators for the image and latent
/// grids plus the optional dataset-level target.
pub struct EsmObjective<S: Real> {
    beta: S,
    delta: S,
    floor: S,
    image: RadialEstimator<S>,
    latent: RadialEstimator<S>,
    latent_layout: RadialPSD<S>,
    fixed_target: Option<SpectrumDistribution<S>>,
}

impl<S: Real> EsmObjective<S> {
    /// Objective for `height x width` inputs to `model`, with default bin
    /// counts on both grids and per-image targets.
    pub fn new(
        model: &LinearAE<S>,
        height: usize,
        width: usize,
        beta: S,
        delta: S,
    ) -> Result<Self> {
        let (lh, lw) = model.latent_shape(height, width)?;
        let latent = RadialEstimator::new(lh, lw, default_bins(lh, lw))?;
        Ok(Self {
            beta,
            delta,
            floor: S::lit(DEFAULT_FLOOR),
            image: RadialEstimator::new(height, width, default_bins(height, width))?,
            latent_layout: latent.layout(),
            latent,
            fixed_target: None,
        })
    }

    pub fn with_defaults(model: &LinearAE<S>, height: usize, width: usize) -> Result<Self> {
        Self::new(
            model,
            height,
            width,
            S::lit(DEFAULT_BETA),
            S::lit(DEFAULT_DELTA),
        )
    }

    /// Replaces per-image targets by the target of the mean image spectrum.
    pub fn with_dataset_target(mut self, images: &[Field2D<S>]) -> Result<Self> {
        let psds = images
            .iter()
            .map(|x| self.image.radial_psd(x))
            .collect::<Result<Vec<_>>>()?;
        self.fixed_target = Some(self.target_from_image_psd(&RadialPSD::average(&psds)?)?);
        Ok(self)
    }

    pub fn beta(&self) -> S {
        self.beta
    }

    pub fn floor(&self) -> S {
        self.floor
    }

    pub fn latent_estimator(&self) -> &RadialEstimator<S> {
        &self.latent
    }

    pub fn image_estimator(&self) -> &RadialEstimator<S> {
        &self.image
    }

    /// Flattened image spectrum moved onto the latent bins and normalized.
    pub fn target_from_image_psd(&self, psd: &RadialPSD<S>) -> Result<SpectrumDistribution<S>> {
        let flat = flatten_psd(psd, self.delta)?;
        normalize_spectrum(&resample_psd(&flat, &self.latent_layout)?, self.floor)
    }

    pub fn target_for(&self, x: &Field2D<S>) -> Result<SpectrumDistribution<S>> {
        match &self.fixed_target {
            Some(t) => Ok(t.clone()),
            None => self.target_from_image_psd(&self.image.radial_psd(x)?),
        }
    }
}

/// Batch mean of `L1(D(E x), x) + beta KL(target(x) || spectrum(E x))`.
pub fn loss_esm_ae<S: Real>(
    model: &LinearAE<S>,
    batch: &[Field2D<S>],
    objective: &EsmObjective<S>,
) -> Result<(S, Gradients<S>)> {
    check_batch(model, batch)?;
    let mut grads = Gradients::zeros_like(model);
    let mut total = S::zero();
    for x in batch {
        let z = model.encode(x)?;
        let (l1, g_out) = l1_with_grad(&model.decode(&z)?, x);
        let mut loss = l1;
        let extra = if objective.beta > S::zero() {
            let target = objective.target_for(x)?;
            let (kl, g_z) = objective
                .latent
                .loss_and_grad(&z, &target, objective.floor)?;
            loss += objective.beta * kl;
            Some(g_z.map(|g| g * objective.beta)?)
        } else {
            None
        };
        model.backward(x, &z, &g_out, Ok, extra.as_ref(), &mut grads)?;
        total += loss;
    }
    let inv = S::one() / S::from_count(batch.len());
    grads.scale(inv);
    Ok((total * inv, grads))
}

/// Batch mean of the plain reconstruction loss `L1(D(E x), x)`.
pub fn loss_plain_ae<S: Real>(
    model: &LinearAE<S>,
    batch: &[Field2D<S>],
) -> Result<(S, Gradients<S>)> {
    check_batch(model, batch)?;
    let mut grads = Gradients::zeros_like(model);
    let mut total = S::zero();
    for x in batch {
        let z = model.encode(x)?;
        let (l1, g_out) = l1_with_grad(&model.decode(&z)?, x);
        model.backward(x, &z, &g_out, Ok, None, &mut grads)?;
        total += l1;
    }
    let inv = S::one() / S::from_count(batch.len());
    grads.scale(inv);
    Ok((total * inv, grads))
}

/// Batch mean of `L1(D(filter(E x, M)), filter(x, M))` with one mask drawn
/// per batch element. The filter is an orthogonal projection, so its adjoint
/// is itself.
pub fn loss_dsm_ae<S: Real>(
    model: &LinearAE<S>,
    batch: &[Field2D<S>],
    family: &MaskFamily,
    rng: &mut Rng,
) -> Result<(S, Gradients<S>)> {
    check_batch(model, batch)?;
    let mut grads = Gradients::zeros_like(model);
    let mut total = S::zero();
    for x in batch {
        let mask = sample_mask(family, rng);
        let z = spectral_filter(&model.encode(x)?, &mask)?;
        let x_m = spectral_filter(x, &mask)?;
        let (l1, g_out) = l1_with_grad(&model.decode(&z)?, &x_m);
        model.backward(
            x,
            &z,
            &g_out,
            |g| spectral_filter(&g, &mask),
            None,
            &mut grads,
        )?;
        total += l1;
    }
    let inv = S::one() / S::from_count(batch.len());
    grads.scale(inv);
    Ok((total * inv, grads))
}
