//! Orthonormal DCT-II and unitary DFT.
//!
//! The DCT matrix is `C[k][n] = s_k cos(pi (2n + 1) k / (2N))` with
//! `s_0 = sqrt(1/N)` and `s_k = sqrt(2/N)`, so `C^T C = I`. The 2-D DFT is
//! scaled by `1/sqrt(HW)` in both directions and power grids keep the DC term
//! at index `(0, 0)` (no shift).

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlannerScalar};

use crate::error::{size_err, Result};
use crate::field::Field2D;
use crate::scalar::Real;
use crate::tokens::TokenMatrix;

/// Side of a DCT block.
pub const BLOCK: usize = 8;

/// An 8x8 block in row-major order.
pub type Block<S> = [S; BLOCK * BLOCK];

/// Orthonormal DCT-II matrix of size `n x n`, row `k` holding frequency `k`.
pub fn dct_matrix<S: Real>(n: usize) -> Vec<S> {
    let nf = n as f64;
    let mut m = Vec::with_capacity(n * n);
    for k in 0..n {
        let scale = if k == 0 {
            (1.0 / nf).sqrt()
        } else {
            (2.0 / nf).sqrt()
        };
        for i in 0..n {
            let angle = std::f64::consts::PI * (2 * i + 1) as f64 * k as f64 / (2.0 * nf);
            m.push(S::lit(scale * angle.cos()));
        }
    }
    m
}

/// Separable 8x8 DCT with a cached basis; reuse one instance across blocks.
#[derive(Debug, Clone)]
pub struct BlockDct<S> {
    basis: Block<S>,
}

impl<S: Real> Default for BlockDct<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Real> BlockDct<S> {
    pub fn new() -> Self {
        let m = dct_matrix::<S>(BLOCK);
        let mut basis = [S::zero(); BLOCK * BLOCK];
        basis.copy_from_slice(&m);
        Self { basis }
    }

    /// `C X C^T`.
    pub fn forward(&self, x: &Block<S>) -> Block<S> {
        let c = &self.basis;
        let mut tmp = [S::zero(); BLOCK * BLOCK];
        // tmp = C X
        for k in 0..BLOCK {
            for j in 0..BLOCK {
                let mut acc = S::zero();
                for i in 0..BLOCK {
                    acc += c[k * BLOCK + i] * x[i * BLOCK + j];
                }
                tmp[k * BLOCK + j] = acc;
            }
        }
        let mut out = [S::zero(); BLOCK * BLOCK];
        // out = tmp C^T
        for k in 0..BLOCK {
            for l in 0..BLOCK {
                let mut acc = S::zero();
                for j in 0..BLOCK {
                    acc += tmp[k * BLOCK + j] * c[l * BLOCK + j];
                }
                out[k * BLOCK + l] = acc;
            }
        }
        out
    }

    /// `C^T Y C`.
    pub fn inverse(&self, y: &Block<S>) -> Block<S> {
        let c = &self.basis;
        let mut tmp = [S::zero(); BLOCK * BLOCK];
        // tmp = C^T Y
        for i in 0..BLOCK {
            for l in 0..BLOCK {
                let mut acc = S::zero();
                for k in 0..BLOCK {
                    acc += c[k * BLOCK + i] * y[k * BLOCK + l];
                }
                tmp[i * BLOCK + l] = acc;
            }
        }
        let mut out = [S::zero(); BLOCK * BLOCK];
        // out = tmp C
        for i in 0..BLOCK {
            for j in 0..BLOCK {
                let mut acc = S::zero();
                for l in 0..BLOCK {
                    acc += tmp[i * BLOCK + l] * c[l * BLOCK + j];
                }
                out[i * BLOCK + j] = acc;
            }
        }
        out
    }
}

fn as_block<S: Real>(values: &[S], what: &str) -> Result<Block<S>> {
    if values.len() != BLOCK * BLOCK {
        return size_err(format!(
            "{what} expects an 8x8 block (64 values), got {}",
            values.len()
        ));
    }
    let mut b = [S::zero(); BLOCK * BLOCK];
    b.copy_from_slice(values);
    Ok(b)
}

/// Orthonormal 2-D DCT-II of one 8x8 block (row-major input).
pub fn dct2_block<S: Real>(block: &[S]) -> Result<Block<S>> {
    Ok(BlockDct::new().forward(&as_block(block, "dct2_block")?))
}

/// Inverse of [`dct2_block`].
pub fn idct2_block<S: Real>(coeffs: &[S]) -> Result<Block<S>> {
    Ok(BlockDct::new().inverse(&as_block(coeffs, "idct2_block")?))
}

/// Orthonormal DCT-II along the token axis, independently per feature.
/// Output row `k` holds the frequency-`k` coefficient vector.
pub fn dct1_tokens<S: Real>(tokens: &TokenMatrix<S>) -> Result<TokenMatrix<S>> {
    let t = tokens.tokens();
    let d = tokens.dim();
    if t == 0 {
        return size_err("dct1_tokens needs at least one token");
    }
    let c = dct_matrix::<S>(t);
    let mut out = vec![S::zero(); t * d];
    for k in 0..t {
        let row = &c[k * t..(k + 1) * t];
        let dst = &mut out[k * d..(k + 1) * d];
        for (n, &ckn) in row.iter().enumerate() {
            for (o, &v) in dst.iter_mut().zip(tokens.token(n)) {
                *o += ckn * v;
            }
        }
    }
    Ok(TokenMatrix::from_parts_unchecked(t, d, None, out))
}

/// Unitary 2-D DFT plans for one grid size.
pub(crate) struct Dft2<S: Real> {
    height: usize,
    width: usize,
    row_fwd: Arc<dyn Fft<S>>,
    row_inv: Arc<dyn Fft<S>>,
    col_fwd: Arc<dyn Fft<S>>,
    col_inv: Arc<dyn Fft<S>>,
}

impl<S: Real> Dft2<S> {
    pub(crate) fn new(height: usize, width: usize) -> Self {
        // The scalar planner avoids CPU-dependent SIMD kernels.
        let mut planner = FftPlannerScalar::<S>::new();
        Self {
            height,
            width,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    fn run(&self, data: &mut [Complex<S>], row: &Arc<dyn Fft<S>>, col: &Arc<dyn Fft<S>>) {
        let (h, w) = (self.height, self.width);
        debug_assert_eq!(data.len(), h * w);
        for r in data.chunks_exact_mut(w) {
            row.process(r);
        }
        let mut column = vec![Complex::new(S::zero(), S::zero()); h];
        for x in 0..w {
            for y in 0..h {
                column[y] = data[y * w + x];
            }
            col.process(&mut column);
            for y in 0..h {
                data[y * w + x] = column[y];
            }
        }
        let scale = S::one() / S::from_count(h * w).sqrt();
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    pub(crate) fn forward(&self, data: &mut [Complex<S>]) {
        self.run(data, &self.row_fwd, &self.col_fwd);
    }

    pub(crate) fn inverse(&self, data: &mut [Complex<S>]) {
        self.run(data, &self.row_inv, &self.col_inv);
    }

    /// Forward transform of a real plane.
    pub(crate) fn forward_real(&self, plane: &[S]) -> Vec<Complex<S>> {
        let mut buf: Vec<Complex<S>> = plane.iter().map(|&v| Complex::new(v, S::zero())).collect();
        self.forward(&mut buf);
        buf
    }
}

/// Squared magnitudes of the unitary 2-D DFT, per channel, DC at `(0, 0)`.
pub fn dft2_power<S: Real>(field: &Field2D<S>) -> Result<Field2D<S>> {
    let (c, h, w) = field.shape();
    if h < 2 || w < 2 {
        return size_err(format!(
            "dft2_power needs at least 2x2 samples, got {h}x{w}"
        ));
    }
    let plan = Dft2::new(h, w);
    let mut out = Vec::with_capacity(c * h * w);
    for ch in 0..c {
        let spec = plan.forward_real(field.channel(ch));
        out.extend(spec.iter().map(|z| z.norm_sqr()));
    }
    Ok(Field2D::from_parts_unchecked(c, h, w, out))
}

/// Direct-summation reference transforms, kept as the ground truth the fast
/// paths are tested against.
pub mod reference {
    use super::*;

    fn twiddles(n: usize, sign: f64) -> Vec<Complex<f64>> {
        (0..n)
            .map(|k| {
                let a = sign * std::f64::consts::TAU * k as f64 / n as f64;
                Complex::new(a.cos(), a.sin())
            })
            .collect()
    }

    /// Unitary forward DFT of a real plane by separable direct summation.
    pub fn dft2_naive(plane: &[f64], height: usize, width: usize) -> Vec<Complex<f64>> {
        let tw_w = twiddles(width, -1.0);
        let tw_h = twiddles(height, -1.0);
        let mut rows = vec![Complex::new(0.0, 0.0); height * width];
        for y in 0..height {
            for u in 0..width {
                let mut acc = Complex::new(0.0, 0.0);
                for x in 0..width {
                    acc += tw_w[(u * x) % width] * plane[y * width + x];
                }
                rows[y * width + u] = acc;
            }
        }
        let mut out = vec![Complex::new(0.0, 0.0); height * width];
        let scale = 1.0 / ((height * width) as f64).sqrt();
        for v in 0..height {
            for u in 0..width {
                let mut acc = Complex::new(0.0, 0.0);
                for y in 0..height {
                    acc += tw_h[(v * y) % height] * rows[y * width + u];
                }
                out[v * width + u] = acc * scale;
            }
        }
        out
    }

    /// [`dft2_power`] computed with [`dft2_naive`].
    pub fn dft2_power_naive(field: &Field2D<f64>) -> Field2D<f64> {
        let (c, h, w) = field.shape();
        let mut out = Vec::with_capacity(c * h * w);
        for ch in 0..c {
            out.extend(
                dft2_naive(field.channel(ch), h, w)
                    .iter()
                    .map(|z| z.norm_sqr()),
            );
        }
        Field2D::from_parts_unchecked(c, h, w, out)
    }
}
