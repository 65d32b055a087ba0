//! Direction-field contrast of token features, spatial normalization and
//! the difference-of-Gaussians band-pass.

use crate::error::{domain_err, Error, Result};
use crate::field::Field2D;
use crate::scalar::Real;
use crate::tokens::TokenMatrix;
use crate::transform::dct1_tokens;

pub const DEFAULT_EPSILON: f64 = 1e-6;
pub const DEFAULT_SPATIAL_ALPHA: f64 = 1.0;

/// Unit-norm copy of every token.
pub fn normalize_tokens<S: Real>(x: &TokenMatrix<S>) -> Result<TokenMatrix<S>> {
    let d = x.dim();
    let mut out = Vec::with_capacity(x.values().len());
    for t in 0..x.tokens() {
        let norm = x.token_norm(t);
        if norm <= S::zero() {
            return domain_err(format!("token {t} has zero norm"));
        }
        out.extend(x.token(t).iter().map(|&v| v / norm));
    }
    Ok(TokenMatrix::from_parts_unchecked(
        x.tokens(),
        d,
        x.grid(),
        out,
    ))
}

fn mean_direction<S: Real>(u: &TokenMatrix<S>) -> Vec<S> {
    let mut mean = vec![S::zero(); u.dim()];
    for t in 0..u.tokens() {
        for (m, &v) in mean.iter_mut().zip(u.token(t)) {
            *m += v;
        }
    }
    let n = S::from_count(u.tokens());
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}

/// Root-mean-square deviation of token directions from their mean.
pub fn rmsc<S: Real>(x: &TokenMatrix<S>) -> Result<S> {
    let u = normalize_tokens(x)?;
    let mean = mean_direction(&u);
    let total: S = (0..u.tokens())
        .map(|t| {
            u.token(t)
                .iter()
                .zip(&mean)
                .map(|(&a, &m)| (a - m) * (a - m))
                .sum::<S>()
        })
        .sum();
    Ok((total / S::from_count(u.tokens())).sqrt())
}

/// Squared norm of the mean token direction.
pub fn mean_direction_norm_sq<S: Real>(x: &TokenMatrix<S>) -> Result<S> {
    let u = normalize_tokens(x)?;
    Ok(mean_direction(&u).iter().map(|&m| m * m).sum())
}

/// `(1/T) sum_{k >= 1} |U_k|^2` with `U` the token-axis DCT of the direction field.
pub fn directional_energy<S: Real>(x: &TokenMatrix<S>) -> Result<S> {
    let u = dct1_tokens(&normalize_tokens(x)?)?;
    let total: S = (1..u.tokens())
        .map(|k| u.token(k).iter().map(|&v| v * v).sum::<S>())
        .sum();
    Ok(total / S::from_count(u.tokens()))
}

fn grid_of<S: Real>(z: &TokenMatrix<S>) -> Result<(usize, usize)> {
    z.grid()
        .ok_or_else(|| Error::Shape("operation needs tokens laid out on a spatial grid".into()))
}

fn plane_stats<S: Real>(plane: &[S]) -> (S, S) {
    let n = S::from_count(plane.len());
    let mean = plane.iter().copied().sum::<S>() / n;
    let var = plane.iter().map(|&v| (v - mean) * (v - mean)).sum::<S>() / n;
    (mean, var.sqrt())
}

fn rebuild<S: Real>(z: &TokenMatrix<S>, planes: &[Vec<S>]) -> TokenMatrix<S> {
    let (t, d) = (z.tokens(), z.dim());
    let mut out = vec![S::zero(); t * d];
    for (k, plane) in planes.iter().enumerate() {
        for (i, &v) in plane.iter().enumerate() {
            out[i * d + k] = v;
        }
    }
    TokenMatrix::from_parts_unchecked(t, d, z.grid(), out)
}

/// `(Z - alpha mean(Z)) / (std(Z) + epsilon)` per feature channel, with
/// spatial (population) statistics.
pub fn spatial_normalize<S: Real>(
    z: &TokenMatrix<S>,
    alpha: S,
    epsilon: S,
) -> Result<TokenMatrix<S>> {
    grid_of(z)?;
    if !(epsilon > S::zero()) {
        return domain_err(format!("epsilon must be positive, got {epsilon}"));
    }
    let planes: Vec<Vec<S>> = (0..z.dim())
        .map(|d| {
            let plane = z.feature_plane(d);
            let (mean, std) = plane_stats(&plane);
            let denom = std + epsilon;
            plane.iter().map(|&v| (v - alpha * mean) / denom).collect()
        })
        .collect();
    Ok(rebuild(z, &planes))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoGParams<S> {
    sigma1: S,
    sigma2: S,
    epsilon: S,
}

impl<S: Real> DoGParams<S> {
    pub fn new(sigma1: S, sigma2: S, epsilon: S) -> Result<Self> {
        if !(sigma1 > S::zero() && sigma2 > sigma1 && sigma2.is_finite()) {
            return domain_err(format!(
                "DoG needs 0 < sigma1 < sigma2, got {sigma1} and {sigma2}"
            ));
        }
        if !(epsilon > S::zero()) {
            return domain_err(format!("epsilon must be positive, got {epsilon}"));
        }
        Ok(Self {
            sigma1,
            sigma2,
            epsilon,
        })
    }

    pub fn sigma1(&self) -> S {
        self.sigma1
    }

    pub fn sigma2(&self) -> S {
        self.sigma2
    }

    pub fn epsilon(&self) -> S {
        self.epsilon
    }
}

impl<S: Real> Default for DoGParams<S> {
    fn default() -> Self {
        Self::new(S::one(), S::lit(2.0), S::lit(DEFAULT_EPSILON)).expect("defaults are valid")
    }
}

/// Normalized 1-D Gaussian truncated at radius `ceil(3 sigma)`.
pub fn gaussian_kernel<S: Real>(sigma: S) -> Vec<S> {
    let radius = (S::lit(3.0) * sigma).ceil().to_usize().unwrap_or(0);
    let two_s2 = S::lit(2.0) * sigma * sigma;
    let raw: Vec<S> = (0..=2 * radius)
        .map(|i| {
            let x = S::from_count(i) - S::from_count(radius);
            (-(x * x) / two_s2).exp()
        })
        .collect();
    let sum: S = raw.iter().copied().sum();
    raw.into_iter().map(|v| v / sum).collect()
}

/// Mirror index without repeating the edge sample.
fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

fn blur<S: Real>(plane: &[S], h: usize, w: usize, kernel: &[S]) -> Vec<S> {
    let r = (kernel.len() / 2) as isize;
    let mut tmp = vec![S::zero(); h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = S::zero();
            for (k, &g) in kernel.iter().enumerate() {
                acc += g * plane[y * w + reflect(x as isize + k as isize - r, w)];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![S::zero(); h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = S::zero();
            for (k, &g) in kernel.iter().enumerate() {
                acc += g * tmp[reflect(y as isize + k as isize - r, h) * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// `(G_sigma1 * Z - G_sigma2 * Z) / (std(Z) + epsilon)` per feature channel,
/// reflect-padded, with `std` taken over the unfiltered channel.
pub fn dog_filter<S: Real>(z: &TokenMatrix<S>, params: &DoGParams<S>) -> Result<TokenMatrix<S>> {
    let (h, w) = grid_of(z)?;
    let g1 = gaussian_kernel(params.sigma1);
    let g2 = gaussian_kernel(params.sigma2);
    let planes: Vec<Vec<S>> = (0..z.dim())
        .map(|d| {
            let plane = z.feature_plane(d);
            let (mean, std) = plane_stats(&plane);
            // both blurs preserve constants, so removing the mean first is exact
            let centered: Vec<S> = plane.iter().map(|&v| v - mean).collect();
            let a = blur(&centered, h, w, &g1);
            let b = blur(&centered, h, w, &g2);
            let denom = std + params.epsilon;
            a.iter().zip(&b).map(|(&p, &q)| (p - q) / denom).collect()
        })
        .collect();
    Ok(rebuild(z, &planes))
}

/// The 2-D difference kernel `G_sigma1 - G_sigma2` on a square support of
/// radius `ceil(3 sigma2)`.
pub fn dog_kernel<S: Real>(params: &DoGParams<S>) -> Field2D<S> {
    let g1 = gaussian_kernel(params.sigma1);
    let g2 = gaussian_kernel(params.sigma2);
    let n = g2.len();
    let off = (g2.len() - g1.len()) / 2;
    let at = |g: &[S], i: usize| {
        if i >= off && i - off < g.len() {
            g[i - off]
        } else {
            S::zero()
        }
    };
    let data = (0..n * n)
        .map(|p| {
            let (y, x) = (p / n, p % n);
            at(&g1, y) * at(&g1, x) - g2[y] * g2[x]
        })
        .collect();
    Field2D::from_parts_unchecked(1, n, n, data)
}

/// Cosine similarity of every token direction with token `reference`,
/// shaped as a one-channel field over the grid (or `1 x T` without one).
pub fn cosine_similarity_map<S: Real>(z: &TokenMatrix<S>, reference: usize) -> Result<Field2D<S>> {
    if reference >= z.tokens() {
        return domain_err(format!(
            "reference token {reference} outside 0..{}",
            z.tokens()
        ));
    }
    let u = normalize_tokens(z)?;
    let r = u.token(reference);
    let sims = (0..u.tokens())
        .map(|t| {
            if t == reference {
                S::one()
            } else {
                let dot: S = r.iter().zip(u.token(t)).map(|(&a, &b)| a * b).sum();
                dot.max(-S::one()).min(S::one())
            }
        })
        .collect();
    let (h, w) = z.grid().unwrap_or((1, z.tokens()));
    Ok(Field2D::from_parts_unchecked(1, h, w, sims))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn random_tokens(rng: &mut Rng, t: usize, d: usize) -> TokenMatrix<f64> {
        TokenMatrix::from_fn(t, d, |_, _| rng.normal()).unwrap()
    }

    #[test]
    fn normalize_examples() {
        let x = TokenMatrix::new(2, 2, vec![3.0f64, 4.0, 0.0, 1.0]).unwrap();
        let u = normalize_tokens(&x).unwrap();
        assert!((u.get(0, 0) - 0.6).abs() < 1e-15 && (u.get(0, 1) - 0.8).abs() < 1e-15);
        assert_eq!(u.token(1), &[0.0, 1.0]);
        let z = TokenMatrix::new(3, 2, vec![1.0, 0.0, 0.0, 0.0, 1.0, 1.0]).unwrap();
        match normalize_tokens(&z) {
            Err(Error::Domain(m)) => assert!(m.contains("token 1")),
            other => panic!("{other:?}"),
        }
        let mut rng = Rng::new(1);
        let r = normalize_tokens(&random_tokens(&mut rng, 50, 7)).unwrap();
        assert!((0..50).all(|t| (r.token_norm(t) - 1.0).abs() < 1e-12));
    }

    #[test]
    fn rmsc_examples() {
        let same = TokenMatrix::new(3, 2, vec![1.0f64, 2.0, 1.0, 2.0, 1.0, 2.0]).unwrap();
        assert!(rmsc(&same).unwrap() < 1e-15);
        let pair = TokenMatrix::new(2, 2, vec![1.0f64, 0.0, 0.0, 1.0]).unwrap();
        assert!((rmsc(&pair).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((mean_direction_norm_sq(&pair).unwrap() - 0.5).abs() < 1e-15);

        let mut rng = Rng::new(2);
        let x = random_tokens(&mut rng, 10, 4);
        let scaled = TokenMatrix::from_fn(10, 4, |t, d| x.get(t, d) * (t as f64 + 0.5)).unwrap();
        assert!((rmsc(&x).unwrap() - rmsc(&scaled).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn alternating_directions_have_unit_energy() {
        let x = TokenMatrix::from_fn(6, 3, |t, d| {
            let v = [1.0f64, -2.0, 0.5][d];
            if t % 2 == 0 {
                v
            } else {
                -v
            }
        })
        .unwrap();
        assert!((rmsc(&x).unwrap() - 1.0).abs() < 1e-12);
        assert!((directional_energy(&x).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn energy_equals_rmsc_squared() {
        let mut rng = Rng::new(3);
        for _ in 0..200 {
            let t = 1 + rng.below(64) as usize;
            let d = 1 + rng.below(32) as usize;
            let x = random_tokens(&mut rng, t, d);
            let r = rmsc(&x).unwrap();
            assert!((directional_energy(&x).unwrap() - r * r).abs() < 1e-10);
            assert!((r * r - (1.0 - mean_direction_norm_sq(&x).unwrap())).abs() < 1e-10);
        }
    }

    #[test]
    fn spatial_normalize_examples() {
        let mut rng = Rng::new(4);
        let z =
            TokenMatrix::with_grid(4, 5, 3, (0..60).map(|_| rng.normal() + 2.0).collect()).unwrap();
        let n = spatial_normalize(&z, 1.0, 1e-6).unwrap();
        for d in 0..3 {
            let plane = n.feature_plane(d);
            assert!((plane.iter().sum::<f64>() / 20.0).abs() < 1e-10);
        }
        let c = TokenMatrix::with_grid(2, 2, 1, vec![5.0; 4]).unwrap();
        assert!(spatial_normalize(&c, 1.0, 1e-6)
            .unwrap()
            .values()
            .iter()
            .all(|&v| v == 0.0));

        // std = 1 - eps, alpha = 0 leaves values unchanged
        let eps = 1e-3;
        let s = 1.0 - eps;
        let v = TokenMatrix::with_grid(1, 2, 1, vec![3.0 + s, 3.0 - s]).unwrap();
        let out = spatial_normalize(&v, 0.0, eps).unwrap();
        assert!(out.max_abs_diff(&v) < 1e-12);

        let flat = TokenMatrix::new(4, 1, vec![1.0; 4]).unwrap();
        assert!(matches!(
            spatial_normalize(&flat, 1.0, 1e-6),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn dog_params_validation() {
        assert!(DoGParams::new(2.0, 1.0, 1e-6).is_err());
        assert!(DoGParams::new(1.0, 1.0, 1e-6).is_err());
        assert!(DoGParams::new(0.0, 1.0, 1e-6).is_err());
        assert!(DoGParams::new(1.0, 2.0, 0.0).is_err());
        let d = DoGParams::<f64>::default();
        assert_eq!((d.sigma1(), d.sigma2()), (1.0, 2.0));
    }

    #[test]
    fn gaussian_kernel_shape() {
        let g = gaussian_kernel(1.0f64);
        assert_eq!(g.len(), 7);
        assert!((g.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((g[0] - g[6]).abs() < 1e-18 && g[3] > g[2]);
        assert_eq!(gaussian_kernel(2.0f64).len(), 13);
        assert_eq!(gaussian_kernel(0.5f64).len(), 5);
    }

    #[test]
    fn reflect_indices() {
        let n = 4;
        let got: Vec<usize> = (-3..7).map(|i| reflect(i, n)).collect();
        assert_eq!(got, vec![3, 2, 1, 0, 1, 2, 3, 2, 1, 0]);
        assert_eq!(reflect(-5, 1), 0);
    }

    #[test]
    fn dog_constant_and_impulse() {
        let p = DoGParams::<f64>::default();
        let c = TokenMatrix::with_grid(9, 11, 2, vec![4.5; 198]).unwrap();
        assert!(dog_filter(&c, &p)
            .unwrap()
            .values()
            .iter()
            .all(|&v| v.abs() < 1e-10));

        let n = 31;
        let mut vals = vec![0.0; n * n];
        vals[15 * n + 15] = 1.0;
        let z = TokenMatrix::with_grid(n, n, 1, vals.clone()).unwrap();
        let out = dog_filter(&z, &p).unwrap();
        let (_, std) = plane_stats(&vals);
        let k = dog_kernel(&p);
        let r = k.height() / 2;
        for y in 0..n {
            for x in 0..n {
                let (dy, dx) = (y as isize - 15, x as isize - 15);
                let expect = if dy.unsigned_abs() <= r && dx.unsigned_abs() <= r {
                    k.get(0, (dy + r as isize) as usize, (dx + r as isize) as usize)
                } else {
                    0.0
                };
                assert!((out.get(y * n + x, 0) * (std + p.epsilon()) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dog_needs_grid() {
        let z = TokenMatrix::new(4, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(matches!(
            dog_filter(&z, &DoGParams::default()),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn similarity_map_properties() {
        let z = TokenMatrix::with_grid(1, 3, 2, vec![1.0, 0.0, 0.0, 2.0, -1.0, 0.0]).unwrap();
        let m = cosine_similarity_map(&z, 0).unwrap();
        assert_eq!(m.data(), &[1.0, 0.0, -1.0]);
        let mut rng = Rng::new(5);
        let r = TokenMatrix::with_grid(4, 4, 5, (0..80).map(|_| rng.normal()).collect()).unwrap();
        let maps: Vec<_> = (0..16)
            .map(|i| cosine_similarity_map(&r, i).unwrap())
            .collect();
        for a in 0..16 {
            assert_eq!(maps[a].data()[a], 1.0);
            for b in 0..16 {
                let v = maps[a].data()[b];
                assert!((-1.0..=1.0).contains(&v));
                if a != b {
                    assert_eq!(v, maps[b].data()[a]);
                }
            }
        }
        assert!(cosine_similarity_map(&r, 16).is_err());
    }
}
