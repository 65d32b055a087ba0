use crate::error::{size_err, Error, Result};
use crate::scalar::Real;

/// `T` tokens of dimension `D`, stored token-major (`values[t * D + d]`).
///
/// An optional `(h, w)` grid with `h * w == T` records the spatial layout;
/// tokens are then ordered row-major over the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenMatrix<S> {
    tokens: usize,
    dim: usize,
    grid: Option<(usize, usize)>,
    values: Vec<S>,
}

impl<S: Real> TokenMatrix<S> {
    pub fn new(tokens: usize, dim: usize, values: Vec<S>) -> Result<Self> {
        if tokens == 0 || dim == 0 {
            return size_err(format!(
                "token matrix needs at least one token and one dimension, got {tokens}x{dim}"
            ));
        }
        if values.len() != tokens * dim {
            return size_err(format!(
                "token matrix has {} values, expected {}",
                values.len(),
                tokens * dim
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite value at index {i}")));
        }
        Ok(Self {
            tokens,
            dim,
            grid: None,
            values,
        })
    }

    /// Token matrix laid out on an `h x w` grid.
    pub fn with_grid(h: usize, w: usize, dim: usize, values: Vec<S>) -> Result<Self> {
        let mut m = Self::new(h * w, dim, values)?;
        m.grid = Some((h, w));
        Ok(m)
    }

    pub fn from_fn(
        tokens: usize,
        dim: usize,
        mut f: impl FnMut(usize, usize) -> S,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(tokens * dim);
        for t in 0..tokens {
            for d in 0..dim {
                values.push(f(t, d));
            }
        }
        Self::new(tokens, dim, values)
    }

    pub(crate) fn from_parts_unchecked(
        tokens: usize,
        dim: usize,
        grid: Option<(usize, usize)>,
        values: Vec<S>,
    ) -> Self {
        debug_assert_eq!(values.len(), tokens * dim);
        Self {
            tokens,
            dim,
            grid,
            values,
        }
    }

    pub fn tokens(&self) -> usize {
        self.tokens
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid(&self) -> Option<(usize, usize)> {
        self.grid
    }

    /// Attaches or replaces the spatial grid.
    pub fn set_grid(&mut self, h: usize, w: usize) -> Result<()> {
        if h * w != self.tokens {
            return Err(Error::Shape(format!(
                "grid {h}x{w} does not cover {} tokens",
                self.tokens
            )));
        }
        self.grid = Some((h, w));
        Ok(())
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn token(&self, t: usize) -> &[S] {
        &self.values[t * self.dim..(t + 1) * self.dim]
    }

    pub fn get(&self, t: usize, d: usize) -> S {
        self.values[t * self.dim + d]
    }

    pub fn token_norm(&self, t: usize) -> S {
        self.token(t).iter().map(|&v| v * v).sum::<S>().sqrt()
    }

    /// Spatial plane of feature `d` (row-major over the grid).
    pub fn feature_plane(&self, d: usize) -> Vec<S> {
        (0..self.tokens).map(|t| self.get(t, d)).collect()
    }

    pub fn max_abs_diff(&self, other: &Self) -> S {
        self.values
            .iter()
            .zip(&other.values)
            .fold(S::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }
}
