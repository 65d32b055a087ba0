use crate::error::{size_err, Error, Result};
use crate::field::Field2D;
use crate::rng::Rng;
use crate::scalar::Real;
use crate::spmt::Tensor;

/// Linear patch autoencoder.
///
/// Each non-overlapping `f x f` patch of a `C`-channel input is flattened to
/// a vector of length `P = C f f` (index `c f f + i f + j`). The encoder maps
/// it to `d` latent values at the patch's grid position; the decoder maps
/// them back. Weights are row-major: `enc` is `d x P`, `dec` is `P x d`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearAE<S> {
    channels: usize,
    factor: usize,
    depth: usize,
    pub(crate) enc: Vec<S>,
    pub(crate) dec: Vec<S>,
}

/// Gradients with the same layout as the model weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<S> {
    pub enc: Vec<S>,
    pub dec: Vec<S>,
}

impl<S: Real> Gradients<S> {
    pub(crate) fn zeros_like(model: &LinearAE<S>) -> Self {
        Self {
            enc: vec![S::zero(); model.enc.len()],
            dec: vec![S::zero(); model.dec.len()],
        }
    }

    pub(crate) fn scale(&mut self, s: S) {
        self.enc
            .iter_mut()
            .chain(self.dec.iter_mut())
            .for_each(|g| *g *= s);
    }
}

impl<S: Real> LinearAE<S> {
    fn check_dims(channels: usize, factor: usize, depth: usize) -> Result<()> {
        if channels == 0 || factor == 0 || depth == 0 {
            return size_err(format!(
                "model dimensions must be positive, got C={channels} f={factor} d={depth}"
            ));
        }
        Ok(())
    }

    pub fn from_weights(
        channels: usize,
        factor: usize,
        depth: usize,
        enc: Vec<S>,
        dec: Vec<S>,
    ) -> Result<Self> {
        Self::check_dims(channels, factor, depth)?;
        let p = channels * factor * factor;
        if enc.len() != depth * p || dec.len() != depth * p {
            return size_err(format!(
                "weights need {} values each, got {} and {}",
                depth * p,
                enc.len(),
                dec.len()
            ));
        }
        if enc.iter().chain(&dec).any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite model weight".into()));
        }
        Ok(Self {
            channels,
            factor,
            depth,
            enc,
            dec,
        })
    }

    /// Gaussian initialization with variance `1/P` for the encoder and
    /// `1/d` for the decoder.
    pub fn random(channels: usize, factor: usize, depth: usize, rng: &mut Rng) -> Result<Self> {
        Self::check_dims(channels, factor, depth)?;
        let p = channels * factor * factor;
        let se = 1.0 / (p as f64).sqrt();
        let sd = 1.0 / (depth as f64).sqrt();
        let enc = (0..depth * p).map(|_| S::lit(se * rng.normal())).collect();
        let dec = (0..depth * p).map(|_| S::lit(sd * rng.normal())).collect();
        Self::from_weights(channels, factor, depth, enc, dec)
    }

    /// `f = 1`, `d = C`, both maps the identity.
    pub fn identity(channels: usize) -> Result<Self> {
        Self::check_dims(channels, 1, channels)?;
        let eye: Vec<S> = (0..channels * channels)
            .map(|i| {
                if i / channels == i % channels {
                    S::one()
                } else {
                    S::zero()
                }
            })
            .collect();
        Self::from_weights(channels, 1, channels, eye.clone(), eye)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn factor(&self) -> usize {
        self.factor
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn patch_len(&self) -> usize {
        self.channels * self.factor * self.factor
    }

    pub fn encoder(&self) -> &[S] {
        &self.enc
    }

    pub fn decoder(&self) -> &[S] {
        &self.dec
    }

    pub fn param_count(&self) -> usize {
        self.enc.len() + self.dec.len()
    }

    /// Latent grid for an `h x w` input.
    pub fn latent_shape(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        if !h.is_multiple_of(self.factor) || !w.is_multiple_of(self.factor) {
            return size_err(format!(
                "input {h}x{w} is not divisible by the patch size {}",
                self.factor
            ));
        }
        Ok((h / self.factor, w / self.factor))
    }

    pub(crate) fn check_input(&self, x: &Field2D<S>) -> Result<(usize, usize)> {
        if x.channels() != self.channels {
            return size_err(format!(
                "model expects {} channels, input has {}",
                self.channels,
                x.channels()
            ));
        }
        self.latent_shape(x.height(), x.width())
    }

    pub(crate) fn patch(&self, x: &Field2D<S>, py: usize, px: usize, out: &mut [S]) {
        let f = self.factor;
        for c in 0..self.channels {
            let plane = x.channel(c);
            for i in 0..f {
                let row = (py * f + i) * x.width() + px * f;
                out[c * f * f + i * f..c * f * f + (i + 1) * f]
                    .copy_from_slice(&plane[row..row + f]);
            }
        }
    }

    pub fn encode(&self, x: &Field2D<S>) -> Result<Field2D<S>> {
        let (lh, lw) = self.check_input(x)?;
        let (p, d) = (self.patch_len(), self.depth);
        let mut v = vec![S::zero(); p];
        let mut z = vec![S::zero(); d * lh * lw];
        for py in 0..lh {
            for px in 0..lw {
                self.patch(x, py, px, &mut v);
                for k in 0..d {
                    let row = &self.enc[k * p..(k + 1) * p];
                    z[(k * lh + py) * lw + px] = row.iter().zip(&v).map(|(&a, &b)| a * b).sum();
                }
            }
        }
        Ok(Field2D::from_parts_unchecked(d, lh, lw, z))
    }

    pub fn decode(&self, z: &Field2D<S>) -> Result<Field2D<S>> {
        if z.channels() != self.depth {
            return size_err(format!(
                "decoder expects {} latent channels, got {}",
                self.depth,
                z.channels()
            ));
        }
        let (lh, lw) = (z.height(), z.width());
        let (f, d) = (self.factor, self.depth);
        let (h, w) = (lh * f, lw * f);
        let mut out = vec![S::zero(); self.channels * h * w];
        let mut zk = vec![S::zero(); d];
        for py in 0..lh {
            for px in 0..lw {
                for (k, v) in zk.iter_mut().enumerate() {
                    *v = z.data()[(k * lh + py) * lw + px];
                }
                for c in 0..self.channels {
                    for i in 0..f {
                        for j in 0..f {
                            let p = c * f * f + i * f + j;
                            let row = &self.dec[p * d..(p + 1) * d];
                            out[(c * h + py * f + i) * w + px * f + j] =
                                row.iter().zip(&zk).map(|(&a, &b)| a * b).sum();
                        }
                    }
                }
            }
        }
        Ok(Field2D::from_parts_unchecked(self.channels, h, w, out))
    }

    pub fn reconstruct(&self, x: &Field2D<S>) -> Result<Field2D<S>> {
        self.decode(&self.encode(x)?)
    }

    /// Accumulates weight gradients given the upstream gradient `g_out` on
    /// the decoder output for latent `z` and input `x`.
    ///
    /// `g_latent_extra` is an additional gradient arriving directly at the
    /// encoder output, and `latent_adjoint` maps the decoder-input gradient
    /// back to the encoder output (identity unless the latent is filtered).
    pub(crate) fn backward(
        &self,
        x: &Field2D<S>,
        z_dec: &Field2D<S>,
        g_out: &Field2D<S>,
        latent_adjoint: impl FnOnce(Field2D<S>) -> Result<Field2D<S>>,
        g_latent_extra: Option<&Field2D<S>>,
        grads: &mut Gradients<S>,
    ) -> Result<()> {
        let (lh, lw) = (z_dec.height(), z_dec.width());
        let (f, d, p) = (self.factor, self.depth, self.patch_len());
        let (h, w) = (lh * f, lw * f);
        let mut g_z = vec![S::zero(); d * lh * lw];
        let mut gv = vec![S::zero(); p];
        for py in 0..lh {
            for px in 0..lw {
                for c in 0..self.channels {
                    for i in 0..f {
                        for j in 0..f {
                            gv[c * f * f + i * f + j] =
                                g_out.data()[(c * h + py * f + i) * w + px * f + j];
                        }
                    }
                }
                for (pi, &g) in gv.iter().enumerate() {
                    if g == S::zero() {
                        continue;
                    }
                    let row = &self.dec[pi * d..(pi + 1) * d];
                    let grow = &mut grads.dec[pi * d..(pi + 1) * d];
                    for k in 0..d {
                        let zi = (k * lh + py) * lw + px;
                        grow[k] += g * z_dec.data()[zi];
                        g_z[zi] += g * row[k];
                    }
                }
            }
        }
        let mut g_enc_out = latent_adjoint(Field2D::from_parts_unchecked(d, lh, lw, g_z))?;
        if let Some(extra) = g_latent_extra {
            for (a, &b) in g_enc_out.data_mut().iter_mut().zip(extra.data()) {
                *a += b;
            }
        }
        let mut v = vec![S::zero(); p];
        for py in 0..lh {
            for px in 0..lw {
                self.patch(x, py, px, &mut v);
                for k in 0..d {
                    let g = g_enc_out.data()[(k * lh + py) * lw + px];
                    let grow = &mut grads.enc[k * p..(k + 1) * p];
                    for (a, &b) in grow.iter_mut().zip(&v) {
                        *a += g * b;
                    }
                }
            }
        }
        Ok(())
    }

    pub(crate) fn apply(&mut self, grads: &Gradients<S>, lr: S) {
        for (w, &g) in self.enc.iter_mut().zip(&grads.enc) {
            *w -= lr * g;
        }
        for (w, &g) in self.dec.iter_mut().zip(&grads.dec) {
            *w -= lr * g;
        }
    }

    /// Weights as an SPMT tensor of dims `(2, d, C, f, f)`: slice 0 is the
    /// encoder, slice 1 the transposed decoder.
    pub fn to_tensor(&self) -> Tensor {
        let (d, p) = (self.depth, self.patch_len());
        let mut data: Vec<f32> = self.enc.iter().map(|v| v.as_f64() as f32).collect();
        for k in 0..d {
            for pi in 0..p {
                data.push(self.dec[pi * d + k].as_f64() as f32);
            }
        }
        Tensor {
            dims: vec![2, d, self.channels, self.factor, self.factor],
            data,
        }
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let [two, d, c, f, f2] = t.dims[..] else {
            return Err(Error::Format(format!(
                "model tensor needs 5 dims, got {:?}",
                t.dims
            )));
        };
        if two != 2 || f != f2 {
            return Err(Error::Format(format!("bad model tensor dims {:?}", t.dims)));
        }
        let p = c * f * f;
        let enc: Vec<S> = t.data[..d * p].iter().map(|&v| S::lit(v as f64)).collect();
        let mut dec = vec![S::zero(); d * p];
        for k in 0..d {
            for pi in 0..p {
                dec[pi * d + k] = S::lit(t.data[d * p + k * p + pi] as f64);
            }
        }
        Self::from_weights(c, f, d, enc, dec)
    }
}
