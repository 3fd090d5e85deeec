use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

/// The three principal wavelengths (nm) used for the R, G, and B channels.
pub const DESIGN_WAVELENGTHS_NM: [f64; 3] = [656.3, 587.6, 486.1];

/// Tolerance when matching a requested wavelength against catalog entries.
const WAVELENGTH_MATCH_NM: f64 = 0.05;

/// A named glass with refractive indices tabulated per wavelength.
#[derive(Clone, Debug)]
pub struct GlassMaterial {
    pub name: String,
    /// Keys are wavelengths in nm scaled by 10 and rounded, so 587.6 nm is
    /// stored as 5876. This keeps the map ordered and hashable.
    index_by_wavelength: BTreeMap<i64, f64>,
}

impl GlassMaterial {
    pub fn new(name: impl Into<String>, entries: &[(f64, f64)]) -> Result<Self> {
        let name = name.into();
        let mut index_by_wavelength = BTreeMap::new();
        for &(wavelength_nm, n) in entries {
            if !(n > 1.0 && n < 3.0) {
                return Err(Error::InvalidInput(format!(
                    "material `{name}`: index {n} at {wavelength_nm} nm outside (1, 3)"
                )));
            }
            index_by_wavelength.insert(Self::key(wavelength_nm), n);
        }
        Ok(GlassMaterial { name, index_by_wavelength })
    }

    fn key(wavelength_nm: f64) -> i64 {
        (wavelength_nm * 10.0).round() as i64
    }

    /// Refractive index at the given wavelength, matched within 0.05 nm.
    pub fn index_at(&self, wavelength_nm: f64) -> Result<f64> {
        let key = Self::key(wavelength_nm);
        for probe in [key, key - 1, key + 1] {
            if let Some(&n) = self.index_by_wavelength.get(&probe) {
                if (probe as f64 / 10.0 - wavelength_nm).abs() <= WAVELENGTH_MATCH_NM {
                    return Ok(n);
                }
            }
        }
        Err(Error::MissingIndex { material: self.name.clone(), wavelength_nm })
    }

    /// True if all three design wavelengths are tabulated.
    pub fn covers_design_wavelengths(&self) -> bool {
        DESIGN_WAVELENGTHS_NM.iter().all(|&w| self.index_at(w).is_ok())
    }
}

/// Catalog of glasses, loaded from a JSON map
/// `{ name: { "486.1": n, "587.6": n, "656.3": n } }`.
#[derive(Clone, Debug, Default)]
pub struct MaterialCatalog {
    materials: BTreeMap<String, GlassMaterial>,
}

impl MaterialCatalog {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let raw: BTreeMap<String, BTreeMap<String, f64>> = serde_json::from_str(&text)
            .map_err(|e| Error::Json { path: path.into(), source: e })?;
        let mut materials = BTreeMap::new();
        for (name, table) in raw {
            let mut entries = Vec::with_capacity(table.len());
            for (wl, n) in table {
                let wavelength: f64 = wl.parse().map_err(|_| {
                    Error::InvalidInput(format!(
                        "material `{name}`: bad wavelength key `{wl}`"
                    ))
                })?;
                entries.push((wavelength, n));
            }
            materials.insert(name.clone(), GlassMaterial::new(name, &entries)?);
        }
        Ok(MaterialCatalog { materials })
    }

    pub fn insert(&mut self, material: GlassMaterial) {
        self.materials.insert(material.name.clone(), material);
    }

    pub fn get(&self, name: &str) -> Result<&GlassMaterial> {
        self.materials
            .get(name)
            .ok_or_else(|| Error::UnknownMaterial(name.to_string()))
    }

    /// Index of a medium name at a wavelength; `"air"` (or empty) is 1.0.
    pub fn index_of(&self, medium: &str, wavelength_nm: f64) -> Result<f64> {
        if medium.is_empty() || medium.eq_ignore_ascii_case("air") {
            return Ok(1.0);
        }
        self.get(medium)?.index_at(wavelength_nm)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.materials.keys().map(|s| s.as_str())
    }
}
