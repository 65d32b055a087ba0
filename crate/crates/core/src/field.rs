use crate::error::{size_err, Error, Result};
use crate::scalar::Real;

/// Multi-channel 2-D real signal (image, latent or feature map).
///
/// Samples are stored channel-major, then row-major:
/// index `(c * height + y) * width + x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field2D<S> {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<S>,
}

impl<S: Real> Field2D<S> {
    /// Builds a field, rejecting zero dimensions, length mismatches and
    /// non-finite samples.
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<S>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return size_err(format!(
                "field dimensions must be positive, got {channels}x{height}x{width}"
            ));
        }
        let expected = channels * height * width;
        if data.len() != expected {
            return size_err(format!(
                "field data has {} samples, expected {expected} ({channels}x{height}x{width})",
                data.len()
            ));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Result<Self> {
        Self::new(
            channels,
            height,
            width,
            vec![S::zero(); channels * height * width],
        )
    }

    pub fn constant(channels: usize, height: usize, width: usize, value: S) -> Result<Self> {
        Self::new(
            channels,
            height,
            width,
            vec![value; channels * height * width],
        )
    }

    /// Builds a field from `f(channel, y, x)`.
    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> S,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        Self::new(channels, height, width, data)
    }

    /// Wraps data produced by internal arithmetic on finite inputs.
    pub(crate) fn from_parts_unchecked(
        channels: usize,
        height: usize,
        width: usize,
        data: Vec<S>,
    ) -> Self {
        debug_assert_eq!(data.len(), channels * height * width);
        Self {
            channels,
            height,
            width,
            data,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// `(channels, height, width)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn into_data(self) -> Vec<S> {
        self.data
    }

    #[inline]
    pub fn index(&self, c: usize, y: usize, x: usize) -> usize {
        (c * self.height + y) * self.width + x
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> S {
        self.data[self.index(c, y, x)]
    }

    /// Sets one sample. Panics on a non-finite value.
    pub fn set(&mut self, c: usize, y: usize, x: usize, value: S) {
        assert!(value.is_finite(), "non-finite sample");
        let i = self.index(c, y, x);
        self.data[i] = value;
    }

    pub fn channel(&self, c: usize) -> &[S] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub(crate) fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    /// Applies `f` elementwise; the result must stay finite.
    pub fn map(&self, f: impl Fn(S) -> S) -> Result<Self> {
        Self::new(
            self.channels,
            self.height,
            self.width,
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.shape() == other.shape()
    }

    pub fn sum_squares(&self) -> S {
        self.data.iter().map(|&v| v * v).sum()
    }

    pub fn mean(&self) -> S {
        self.data.iter().copied().sum::<S>() / S::from_count(self.data.len())
    }

    /// Largest absolute elementwise difference; shapes must agree.
    pub fn max_abs_diff(&self, other: &Self) -> Result<S> {
        if !self.same_shape(other) {
            return size_err(format!(
                "shape mismatch {:?} vs {:?}",
                self.shape(),
                other.shape()
            ));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(S::zero(), |m, (&a, &b)| m.max((a - b).abs())))
    }

    /// Converts to another scalar precision.
    pub fn cast<T: Real>(&self) -> Field2D<T> {
        Field2D::from_parts_unchecked(
            self.channels,
            self.height,
            self.width,
            self.data.iter().map(|v| T::lit(v.as_f64())).collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_length_and_non_finite() {
        assert!(matches!(
            Field2D::<f64>::new(1, 2, 2, vec![0.0; 3]),
            Err(Error::Size(_))
        ));
        assert!(matches!(
            Field2D::<f64>::new(1, 1, 2, vec![0.0, f64::NAN]),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            Field2D::<f64>::new(1, 1, 2, vec![f64::INFINITY, 0.0]),
            Err(Error::Domain(_))
        ));
        assert!(Field2D::<f64>::new(0, 1, 1, vec![]).is_err());
    }

    #[test]
    fn channel_major_layout() {
        let f = Field2D::<f64>::from_fn(2, 2, 3, |c, y, x| (100 * c + 10 * y + x) as f64).unwrap();
        assert_eq!(f.get(1, 1, 2), 112.0);
        assert_eq!(f.data()[f.index(1, 0, 1)], 101.0);
        assert_eq!(f.channel(1)[0], 100.0);
    }
}
