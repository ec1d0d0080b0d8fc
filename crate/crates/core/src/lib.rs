//! Spectral analysis of balanced stochastic block models.
//!
//! The crate samples stochastic block models (and their centered and
//! low-rank deformed variants), computes spectra and linear spectral
//! statistics, evaluates the limiting Gaussian predictions for those
//! statistics, and runs the community-count test built on them. The
//! [`harness`] module drives reproducible Monte Carlo experiments.
//!
//! Numerical routines are generic over [`Real`] (`f32` or `f64`); the
//! aliases below pin the common `f64` instantiations.

pub mod chebstats;
pub mod detect;
mod error;
pub mod harness;
pub mod io;
mod matrix;
pub mod model;
mod scalar;
pub mod special;
pub mod spectral;

pub use error::{Error, Result};
pub use matrix::SymMatrix;
pub use num_complex::Complex;
pub use scalar::Real;

pub use chebstats::{ChebCoeffs, CltPrediction, SparsePrediction, TestFunction};
pub use detect::{Decision, TestConfig, TestOutcome};
pub use model::{DeformationSpec, ParamsSpec, SbmParams, SpikeBasis};
pub use spectral::{ResolventProbe, Spectrum};

/// Double-precision symmetric matrix.
pub type SymMatrix64 = SymMatrix<f64>;
/// Single-precision symmetric matrix.
pub type SymMatrix32 = SymMatrix<f32>;
/// Double-precision spectrum.
pub type Spectrum64 = Spectrum<f64>;
/// Single-precision spectrum.
pub type Spectrum32 = Spectrum<f32>;
/// Double-precision spike basis.
pub type SpikeBasis64 = SpikeBasis<f64>;
/// Double-precision CLT prediction.
pub type CltPrediction64 = CltPrediction<f64>;
/// Double-precision test outcome.
pub type TestOutcome64 = TestOutcome<f64>;
/// Double-precision Chebyshev coefficients.
pub type ChebCoeffs64 = ChebCoeffs<f64>;
/// Double-precision complex number.
pub type C64 = Complex<f64>;
