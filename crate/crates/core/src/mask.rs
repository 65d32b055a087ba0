//! Blockwise DCT low-pass masks and the decoding-side spectrum loss.
//!
//! An 8x8 DCT block has 15 anti-diagonals `i + j = 0..=14`. A
//! [`TriangularMask`] with parameter `n` drops the `n` highest ones, keeping
//! coefficient `(i, j)` iff `i + j <= 14 - n`. `n = 0` keeps everything and
//! `n = 14` keeps only DC.

use crate::error::{domain_err, size_err, Error, Result};
use crate::field::Field2D;
use crate::rng::Rng;
use crate::scalar::Real;
use crate::transform::{dct_matrix, Block, BlockDct, BLOCK};

/// Number of anti-diagonals in an 8x8 block.
pub const DIAGONALS: u8 = 15;

/// Mask family with the best diffusability in the DSM ablation.
pub const DEFAULT_FAMILY: [u8; 4] = [0, 8, 10, 12];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TriangularMask {
    n: u8,
    keep: [bool; BLOCK * BLOCK],
}

impl TriangularMask {
    pub fn new(n: u8) -> Result<Self> {
        if n >= DIAGONALS {
            return domain_err(format!("mask removes at most 14 anti-diagonals, got {n}"));
        }
        let limit = (DIAGONALS - 1 - n) as usize;
        let mut keep = [false; BLOCK * BLOCK];
        for i in 0..BLOCK {
            for j in 0..BLOCK {
                keep[i * BLOCK + j] = i + j <= limit;
            }
        }
        Ok(Self { n, keep })
    }

    /// The identity mask.
    pub fn empty() -> Self {
        Self::new(0).expect("n = 0 is valid")
    }

    /// Number of removed anti-diagonals.
    pub fn removed(&self) -> u8 {
        self.n
    }

    pub fn keeps(&self, i: usize, j: usize) -> bool {
        self.keep[i * BLOCK + j]
    }

    pub fn kept_count(&self) -> usize {
        self.keep.iter().filter(|&&k| k).count()
    }

    /// Row-major string of `1` (kept) and `0` (dropped).
    pub fn to_bit_string(&self) -> String {
        self.keep
            .iter()
            .map(|&k| if k { '1' } else { '0' })
            .collect()
    }

    /// Parses [`Self::to_bit_string`] output; the pattern must be triangular.
    pub fn from_bit_string(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.len() != BLOCK * BLOCK {
            return Err(Error::Format(format!(
                "mask string must have 64 characters, got {}",
                s.len()
            )));
        }
        if let Some(c) = s.chars().find(|c| *c != '0' && *c != '1') {
            return Err(Error::Format(format!("unexpected mask character {c:?}")));
        }
        (0..DIAGONALS)
            .map(|n| Self::new(n).expect("n < 15"))
            .find(|m| m.to_bit_string() == s)
            .ok_or_else(|| Error::Format("mask string is not a triangular low-pass mask".into()))
    }

    fn apply<S: Real>(&self, coeffs: &mut Block<S>) {
        for (c, &k) in coeffs.iter_mut().zip(&self.keep) {
            if !k {
                *c = S::zero();
            }
        }
    }
}

/// Set of masks to sample from, with sampling weights.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskFamily {
    members: Vec<TriangularMask>,
    weights: Option<Vec<f64>>,
}

impl MaskFamily {
    /// Uniformly weighted family; must be non-empty, distinct and contain `n = 0`.
    pub fn new(ns: &[u8]) -> Result<Self> {
        if ns.is_empty() {
            return size_err("mask family must not be empty");
        }
        if !ns.contains(&0) {
            return domain_err("mask family must contain the empty mask n = 0");
        }
        for (i, n) in ns.iter().enumerate() {
            if ns[..i].contains(n) {
                return domain_err(format!("mask n = {n} listed twice"));
            }
        }
        let members = ns
            .iter()
            .map(|&n| TriangularMask::new(n))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            members,
            weights: None,
        })
    }

    pub fn with_weights(ns: &[u8], weights: &[f64]) -> Result<Self> {
        let mut fam = Self::new(ns)?;
        if weights.len() != ns.len() {
            return size_err(format!("{} weights for {} masks", weights.len(), ns.len()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return domain_err("mask weights must be positive and finite");
        }
        fam.weights = Some(weights.to_vec());
        Ok(fam)
    }

    pub fn members(&self) -> &[TriangularMask] {
        &self.members
    }

    pub fn removed(&self) -> Vec<u8> {
        self.members.iter().map(|m| m.removed()).collect()
    }
}

impl Default for MaskFamily {
    fn default() -> Self {
        Self::new(&DEFAULT_FAMILY).expect("default family is valid")
    }
}

/// Draws one member; uniform unless the family carries weights.
pub fn sample_mask(family: &MaskFamily, rng: &mut Rng) -> TriangularMask {
    let idx = match &family.weights {
        None => rng.below(family.members.len() as u64) as usize,
        Some(w) => {
            let total: f64 = w.iter().sum();
            let mut u = rng.next_f64() * total;
            let mut pick = w.len() - 1;
            for (i, &wi) in w.iter().enumerate() {
                if u < wi {
                    pick = i;
                    break;
                }
                u -= wi;
            }
            pick
        }
    };
    family.members[idx]
}

fn check_blocks<S: Real>(field: &Field2D<S>) -> Result<()> {
    if !field.height().is_multiple_of(BLOCK) || !field.width().is_multiple_of(BLOCK) {
        return size_err(format!(
            "blockwise DCT needs dimensions divisible by 8, got {}x{}",
            field.height(),
            field.width()
        ));
    }
    Ok(())
}

fn for_each_block<S: Real>(
    field: &Field2D<S>,
    out: &mut [S],
    mut f: impl FnMut(&Block<S>) -> Block<S>,
) {
    let (c, h, w) = field.shape();
    let mut block = [S::zero(); BLOCK * BLOCK];
    for ch in 0..c {
        let src = field.channel(ch);
        let dst = &mut out[ch * h * w..(ch + 1) * h * w];
        for by in (0..h).step_by(BLOCK) {
            for bx in (0..w).step_by(BLOCK) {
                for i in 0..BLOCK {
                    let row = (by + i) * w + bx;
                    block[i * BLOCK..(i + 1) * BLOCK].copy_from_slice(&src[row..row + BLOCK]);
                }
                let res = f(&block);
                for i in 0..BLOCK {
                    let row = (by + i) * w + bx;
                    dst[row..row + BLOCK].copy_from_slice(&res[i * BLOCK..(i + 1) * BLOCK]);
                }
            }
        }
    }
}

/// Per channel and per non-overlapping 8x8 block: DCT, zero the dropped
/// coefficients, inverse DCT. This is an orthogonal projection, so it is
/// also its own adjoint.
pub fn spectral_filter<S: Real>(field: &Field2D<S>, mask: &TriangularMask) -> Result<Field2D<S>> {
    check_blocks(field)?;
    let (c, h, w) = field.shape();
    let mut out = vec![S::zero(); c * h * w];
    if mask.removed() == 0 {
        out.copy_from_slice(field.data());
    } else {
        let dct = BlockDct::new();
        for_each_block(field, &mut out, |b| {
            let mut coeffs = dct.forward(b);
            mask.apply(&mut coeffs);
            dct.inverse(&coeffs)
        });
    }
    Ok(Field2D::from_parts_unchecked(c, h, w, out))
}

/// Mean absolute difference between `spectral_filter(x, mask)` and `x_hat_masked`.
pub fn dsm_loss<S: Real>(
    x: &Field2D<S>,
    x_hat_masked: &Field2D<S>,
    mask: &TriangularMask,
) -> Result<S> {
    if !x.same_shape(x_hat_masked) {
        return size_err(format!(
            "dsm_loss shapes differ: {:?} vs {:?}",
            x.shape(),
            x_hat_masked.shape()
        ));
    }
    let target = spectral_filter(x, mask)?;
    let sum: S = target
        .data()
        .iter()
        .zip(x_hat_masked.data())
        .map(|(&a, &b)| (a - b).abs())
        .sum();
    Ok(sum / S::from_count(x.len()))
}

/// Outcome of [`quadrant_downsample_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct DownsampleReport<S> {
    /// Largest discrepancy between the two downsampling routes.
    pub max_abs_error: S,
    /// Result of the coefficient-truncation route.
    pub downsampled: Field2D<S>,
}

/// 2x downsampling by keeping the top-left 4x4 DCT coefficients of each 8x8
/// block and inverting them with a 4x4 orthonormal DCT scaled by 1/2.
pub fn dct_downsample_2x<S: Real>(field: &Field2D<S>) -> Result<Field2D<S>> {
    check_blocks(field)?;
    let (c, h, w) = field.shape();
    let (ho, wo) = (h / 2, w / 2);
    let dct = BlockDct::new();
    let c4 = dct_matrix::<S>(4);
    let half = S::lit(0.5);
    let mut out = vec![S::zero(); c * ho * wo];
    let mut block = [S::zero(); BLOCK * BLOCK];
    for ch in 0..c {
        let src = field.channel(ch);
        for by in (0..h).step_by(BLOCK) {
            for bx in (0..w).step_by(BLOCK) {
                for i in 0..BLOCK {
                    let row = (by + i) * w + bx;
                    block[i * BLOCK..(i + 1) * BLOCK].copy_from_slice(&src[row..row + BLOCK]);
                }
                let coeffs = dct.forward(&block);
                // x4 = C4^T Q C4 with Q the retained quadrant
                for m in 0..4 {
                    for n in 0..4 {
                        let mut acc = S::zero();
                        for k in 0..4 {
                            for l in 0..4 {
                                acc += c4[k * 4 + m] * coeffs[k * BLOCK + l] * c4[l * 4 + n];
                            }
                        }
                        let (oy, ox) = (by / 2 + m, bx / 2 + n);
                        out[(ch * ho + oy) * wo + ox] = acc * half;
                    }
                }
            }
        }
    }
    Ok(Field2D::from_parts_unchecked(c, ho, wo, out))
}

/// Spatial-domain 4x8 operator equivalent to quadrant truncation:
/// `R[m][n] = (1/sqrt 2) sum_{k<4} C4[k][m] C8[k][n]`, built from the cosine
/// basis functions directly.
fn quadrant_resampler() -> [[f64; BLOCK]; 4] {
    use std::f64::consts::PI;
    let s = |k: usize, len: f64| {
        if k == 0 {
            (1.0 / len).sqrt()
        } else {
            (2.0 / len).sqrt()
        }
    };
    let mut r = [[0.0; BLOCK]; 4];
    for (m, row) in r.iter_mut().enumerate() {
        for (n, v) in row.iter_mut().enumerate() {
            *v = (0..4)
                .map(|k| {
                    s(k, 4.0)
                        * (PI * (2 * m + 1) as f64 * k as f64 / 8.0).cos()
                        * s(k, 8.0)
                        * (PI * (2 * n + 1) as f64 * k as f64 / 16.0).cos()
                })
                .sum::<f64>()
                * std::f64::consts::FRAC_1_SQRT_2;
        }
    }
    r
}

/// Compares [`dct_downsample_2x`] against the separable spatial operator
/// `R X R^T` applied to each block and reports the largest discrepancy.
pub fn quadrant_downsample_check<S: Real>(field: &Field2D<S>) -> Result<DownsampleReport<S>> {
    let downsampled = dct_downsample_2x(field)?;
    let r = quadrant_resampler();
    let (c, h, w) = field.shape();
    let (ho, wo) = (h / 2, w / 2);
    let mut max_err = S::zero();
    for ch in 0..c {
        let src = field.channel(ch);
        for by in (0..h).step_by(BLOCK) {
            for bx in (0..w).step_by(BLOCK) {
                // t = R X (4x8)
                let mut t = [[0.0f64; BLOCK]; 4];
                for (m, trow) in t.iter_mut().enumerate() {
                    for (j, tv) in trow.iter_mut().enumerate() {
                        *tv = (0..BLOCK)
                            .map(|i| r[m][i] * src[(by + i) * w + bx + j].as_f64())
                            .sum();
                    }
                }
                for m in 0..4 {
                    for n in 0..4 {
                        let v: f64 = (0..BLOCK).map(|j| t[m][j] * r[n][j]).sum();
                        let got = downsampled.data()[(ch * ho + by / 2 + m) * wo + bx / 2 + n];
                        max_err = max_err.max((got - S::lit(v)).abs());
                    }
                }
            }
        }
    }
    Ok(DownsampleReport {
        max_abs_error: max_err,
        downsampled,
    })
}
