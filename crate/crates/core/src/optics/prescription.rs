use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::material::MaterialCatalog;

/// Geometry class of a refractive surface.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceKind {
    Sphere,
    Stop,
    EvenAsphere,
}

/// One row of a lens prescription table.
///
/// `radius_mm` is signed; `None` encodes a planar (infinite-radius) surface.
/// `material` names the medium *after* the surface (`"air"` for air gaps), and
/// `thickness_mm` is the axial gap to the next surface (or to the sensor for
/// the last row). Asphere coefficients are the r^4, r^6, r^8, r^10 terms.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Surface {
    pub kind: SurfaceKind,
    pub radius_mm: Option<f64>,
    pub thickness_mm: f64,
    pub material: String,
    pub semi_diameter_mm: f64,
    #[serde(default)]
    pub asphere: [f64; 4],
}

/// Curved (or planar) image surface.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SensorSurface {
    pub radius_mm: Option<f64>,
    pub semi_diameter_mm: f64,
}

/// An ordered, validated lens prescription: refractive surfaces followed by
/// the sensor, plus the entrance aperture radius used for pupil sampling.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LensPrescription {
    pub name: String,
    pub surfaces: Vec<Surface>,
    pub sensor: SensorSurface,
    pub entrance_semi_diameter_mm: f64,
}

impl LensPrescription {
    /// Structural validation: non-empty, at least one stop, strictly
    /// increasing axial positions, positive apertures, stop continuity.
    pub fn validate(&self) -> Result<()> {
        if self.surfaces.is_empty() {
            return Err(Error::Prescription(format!(
                "`{}` has zero surfaces",
                self.name
            )));
        }
        if !self.surfaces.iter().any(|s| s.kind == SurfaceKind::Stop) {
            return Err(Error::Prescription(format!(
                "`{}` has no stop surface",
                self.name
            )));
        }
        if self.entrance_semi_diameter_mm <= 0.0 {
            return Err(Error::Prescription(
                "entrance semi-diameter must be positive".into(),
            ));
        }
        let mut medium = String::from("air");
        for (i, s) in self.surfaces.iter().enumerate() {
            if !(s.thickness_mm > 0.0) {
                return Err(Error::Prescription(format!(
                    "surface {}: thickness {} mm does not advance the axial position",
                    i + 1,
                    s.thickness_mm
                )));
            }
            if !(s.semi_diameter_mm > 0.0) {
                return Err(Error::Prescription(format!(
                    "surface {}: semi-diameter must be positive",
                    i + 1
                )));
            }
            if let Some(r) = s.radius_mm {
                if r == 0.0 {
                    return Err(Error::Prescription(format!(
                        "surface {}: zero radius",
                        i + 1
                    )));
                }
            }
            if s.kind == SurfaceKind::Stop && !s.material.eq_ignore_ascii_case(&medium) {
                return Err(Error::Prescription(format!(
                    "surface {}: stop changes medium (`{}` -> `{}`)",
                    i + 1,
                    medium,
                    s.material
                )));
            }
            medium = s.material.clone();
        }
        if self.sensor.semi_diameter_mm <= 0.0 {
            return Err(Error::Prescription(
                "sensor semi-diameter must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Checks that every referenced material exists in the catalog and covers
    /// the three design wavelengths.
    pub fn validate_materials(&self, catalog: &MaterialCatalog) -> Result<()> {
        for s in &self.surfaces {
            if s.material.is_empty() || s.material.eq_ignore_ascii_case("air") {
                continue;
            }
            let glass = catalog.get(&s.material)?;
            if !glass.covers_design_wavelengths() {
                return Err(Error::InvalidInput(format!(
                    "material `{}` does not cover all design wavelengths",
                    s.material
                )));
            }
        }
        Ok(())
    }

    /// Axial position (mm from the first surface vertex) of each surface and
    /// finally the sensor vertex.
    pub fn axial_positions(&self) -> Vec<f64> {
        let mut z = 0.0;
        let mut out = Vec::with_capacity(self.surfaces.len() + 1);
        for s in &self.surfaces {
            out.push(z);
            z += s.thickness_mm;
        }
        out.push(z);
        out
    }

    /// Index of the first stop surface.
    pub fn stop_index(&self) -> usize {
        self.surfaces
            .iter()
            .position(|s| s.kind == SurfaceKind::Stop)
            .expect("validated prescription has a stop")
    }

    /// Resolves material names to numeric indices at one wavelength,
    /// producing the flat structure the tracer consumes.
    pub fn resolve(&self, catalog: &MaterialCatalog, wavelength_nm: f64) -> Result<TraceModel> {
        self.validate()?;
        let positions = self.axial_positions();
        let mut surfaces = Vec::with_capacity(self.surfaces.len());
        let mut n_before = 1.0;
        for (i, s) in self.surfaces.iter().enumerate() {
            let n_after = catalog.index_of(&s.material, wavelength_nm)?;
            surfaces.push(TraceSurface {
                kind: s.kind,
                z_vertex: positions[i],
                radius: s.radius_mm,
                semi_diameter: s.semi_diameter_mm,
                asphere: s.asphere,
                n_before,
                n_after,
            });
            n_before = n_after;
        }
        Ok(TraceModel {
            surfaces,
            sensor_z: *positions.last().expect("non-empty"),
            sensor_radius: self.sensor.radius_mm,
            stop_index: self.stop_index(),
            wavelength_nm,
        })
    }
}

/// Prescription with resolved indices, ready for tracing at one wavelength.
#[derive(Clone, Debug)]
pub struct TraceModel {
    pub surfaces: Vec<TraceSurface>,
    pub sensor_z: f64,
    pub sensor_radius: Option<f64>,
    pub stop_index: usize,
    pub wavelength_nm: f64,
}

#[derive(Clone, Debug)]
pub struct TraceSurface {
    pub kind: SurfaceKind,
    pub z_vertex: f64,
    pub radius: Option<f64>,
    pub semi_diameter: f64,
    pub asphere: [f64; 4],
    pub n_before: f64,
    pub n_after: f64,
}

impl TraceSurface {
    pub fn is_planar(&self) -> bool {
        self.radius.is_none() && self.asphere == [0.0; 4]
    }

    /// Surface sag z(r) relative to the vertex plane.
    pub fn sag(&self, r: f64) -> f64 {
        let mut z = 0.0;
        if let Some(radius) = self.radius {
            let rr = r / radius;
            z += r * rr / (1.0 + (1.0 - rr * rr).max(0.0).sqrt());
        }
        let r2 = r * r;
        let r4 = r2 * r2;
        let [a4, a6, a8, a10] = self.asphere;
        z + a4 * r4 + a6 * r4 * r2 + a8 * r4 * r4 + a10 * r4 * r4 * r2
    }

    /// d(sag)/dr.
    pub fn sag_derivative(&self, r: f64) -> f64 {
        let mut d = 0.0;
        if let Some(radius) = self.radius {
            let rr = r / radius;
            d += r / (radius * (1.0 - rr * rr).max(1e-15).sqrt());
        }
        let r2 = r * r;
        let r3 = r2 * r;
        let r5 = r3 * r2;
        let r7 = r5 * r2;
        let r9 = r7 * r2;
        let [a4, a6, a8, a10] = self.asphere;
        d + 4.0 * a4 * r3 + 6.0 * a6 * r5 + 8.0 * a8 * r7 + 10.0 * a10 * r9
    }
}

/// Loads and validates a prescription from its JSON document.
pub fn load_prescription(path: impl AsRef<Path>) -> Result<LensPrescription> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let prescription: LensPrescription = serde_json::from_str(&text)
        .map_err(|e| Error::Json { path: path.into(), source: e })?;
    prescription.validate()?;
    Ok(prescription)
}
