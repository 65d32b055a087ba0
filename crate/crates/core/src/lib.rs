//! Spectral analysis and spectrum-matching regularizers for latent
//! representations.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar for the common cases.

pub mod diffusion;
pub mod error;
pub mod field;
pub mod mask;
pub mod psd;
pub mod repa;
pub mod rng;
pub mod scalar;
pub mod spmt;
pub mod synth;
pub mod tokens;
pub mod train;
pub mod transform;

pub use error::{Error, Result};
pub use field::Field2D;
pub use mask::{MaskFamily, TriangularMask};
pub use psd::{PowerLawFit, RadialPSD, SpectrumDistribution};
pub use repa::DoGParams;
pub use rng::Rng;
pub use scalar::Real;
pub use tokens::TokenMatrix;

pub type Field64 = Field2D<f64>;
pub type Field32 = Field2D<f32>;
pub type Tokens64 = TokenMatrix<f64>;
pub type Tokens32 = TokenMatrix<f32>;
pub type Psd64 = RadialPSD<f64>;
pub type Psd32 = RadialPSD<f32>;
pub type Spectrum64 = SpectrumDistribution<f64>;
pub type Spectrum32 = SpectrumDistribution<f32>;
pub type LinearAE64 = train::LinearAE<f64>;
pub type LinearAE32 = train::LinearAE<f32>;
