//! Simulation engine for depth-coded imaging through all-spherical lens systems.
//!
//! The crate is organized as a pipeline of four stages plus an operational
//! shell:
//!
//! - [`optics`] — sequential geometric ray tracing over spherical and
//!   even-asphere surfaces, producing fine-pitch PSF grids for any
//!   (depth, field angle, wavelength), with a paraxial reduction as a
//!   validation oracle.
//! - [`psfmap`] — synthesis of the full spatially-varying RGB PSF map from a
//!   characterized PSF tensor via inverse-square field interpolation,
//!   azimuthal rotation, and pitch resizing, backed by a binary on-disk cache.
//! - [`formation`] — occlusion-aware layered image formation with tiled FFT
//!   convolution, the patch-wise baseline simulator, and additive Gaussian
//!   noise.
//! - [`quality`] — depth metrics, image metrics, the artifact score, and the
//!   training-loss formulas as standalone numerical operations.
//! - [`pipeline`] — configuration, dataset ingestion, batch orchestration,
//!   and the command implementations behind the CLI.

pub mod error;
pub mod formation;
pub mod optics;
pub mod pipeline;
pub mod psfmap;
pub mod quality;

pub use error::{Error, Result};
