//! Sequential geometric ray tracer over spherical and even-asphere surfaces.
//!
//! The tracer propagates rays surface by surface through a lens prescription
//! (sphere/asphere intersection, semi-diameter clipping, refraction, stop
//! clipping) and bins survivor landing positions on the curved sensor into
//! fine-pitch PSF grids. A small-angle paraxial reduction of the same
//! prescription serves as an independent validation oracle for the trace.

mod material;
mod paraxial;
mod prescription;
mod psf;
mod trace;
mod vec3;

pub use material::{GlassMaterial, MaterialCatalog, DESIGN_WAVELENGTHS_NM};
pub use paraxial::{paraxial_efl, paraxial_reduction, ParaxialSummary};
pub use prescription::{
    load_prescription, LensPrescription, SensorSurface, Surface, SurfaceKind, TraceModel,
};
pub use psf::{compute_psf, compute_psf_with_entrance, PsfGrid, PSF_GRID_SIDE, PSF_PITCH_UM};
pub use trace::{chief_ray_landing, refract, trace_ray, DeadReason, DeadRay, Ray, SensorHit};
pub use vec3::Vec3;
