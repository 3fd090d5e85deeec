use crate::error::Result;
use crate::optics::material::MaterialCatalog;
use crate::optics::prescription::{LensPrescription, TraceModel};

/// Result of the small-angle surface-by-surface reduction.
#[derive(Copy, Clone, Debug)]
pub struct ParaxialSummary {
    /// Effective focal length (mm); `f64::INFINITY` for an afocal system.
    pub efl: f64,
    /// Back focal distance from the last surface vertex (mm).
    pub bfd: f64,
}

/// Runs the paraxial (y, n·u) reduction of a resolved model for a marginal
/// ray from infinity at unit height.
pub fn paraxial_reduction(model: &TraceModel) -> ParaxialSummary {
    let mut y = 1.0;
    let mut omega = 0.0; // reduced angle n*u
    let mut y_last = y;
    for (i, s) in model.surfaces.iter().enumerate() {
        let power = match s.radius {
            Some(r) => (s.n_after - s.n_before) / r,
            None => 0.0,
        };
        omega -= y * power;
        y_last = y;
        let z_next = if i + 1 < model.surfaces.len() {
            model.surfaces[i + 1].z_vertex
        } else {
            model.sensor_z
        };
        y += omega * (z_next - s.z_vertex) / s.n_after;
    }
    if omega.abs() < 1e-12 {
        return ParaxialSummary { efl: f64::INFINITY, bfd: f64::INFINITY };
    }
    ParaxialSummary { efl: -1.0 / omega, bfd: -y_last / omega }
}

/// Effective focal length of a prescription at one wavelength, from the
/// paraxial reduction. Afocal systems return the infinity sentinel.
pub fn paraxial_efl(
    prescription: &LensPrescription,
    catalog: &MaterialCatalog,
    wavelength_nm: f64,
) -> Result<f64> {
    let model = prescription.resolve(catalog, wavelength_nm)?;
    Ok(paraxial_reduction(&model).efl)
}
