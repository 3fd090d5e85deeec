//! Spatially-varying PSF map synthesis.
//!
//! A characterized [`PsfTensor`] holds traced PSFs on a (channel, field
//! angle, depth) grid. For any sensor pixel, [`psf_at`] produces the local
//! kernel at sensor pitch by inverse-square interpolation between the
//! bracketing field samples, rotation to the pixel's azimuth, and box-filter
//! resizing from the fine trace pitch to the sensor pixel pitch. A binary
//! on-disk cache stores the resized kernels for every render tile.

mod cache;
mod interp;
mod tensor;
mod transform;

pub use cache::{build_psf_map_cache, PsfCache, PsfCacheHeader, CACHE_MAGIC};
pub use interp::interp_weights;
pub use tensor::{
    default_depth_grid, default_theta_samples, psf_at, Channel, PsfTensor, SensorGeometry,
};
pub use transform::{resize_psf, rotate_psf};
