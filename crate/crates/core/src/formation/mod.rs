//! Occlusion-aware layered image formation.
//!
//! A scene (RGB + depth) is discretized onto the render depth grid
//! ([`layerize`]), each layer is blurred with its local depth-dependent PSF,
//! normalized by the blurred cumulative occupancy, and over-composited back
//! to front ([`composite_occlusion`]). Convolution runs tile-wise through
//! the FFT with linear-ramp overlap-add blending. [`render_patchwise`] is
//! the conventional fixed-patch baseline without occlusion handling, and
//! [`add_gaussian_noise`] applies the sensor noise term.

mod composite;
mod convolve;
mod noise;
mod patchwise;
mod provider;
mod stack;

pub use composite::{composite_occlusion, ENERGY_EPS};
pub use convolve::{fft_convolve, TileConvolver};
pub use noise::{add_gaussian_noise, standard_normal};
pub use patchwise::render_patchwise;
pub use provider::{PsfProvider, UniformPsfs};
pub use stack::{layerize, CodedImage, DepthLayerStack, Provenance, Rect, RenderConfig};
