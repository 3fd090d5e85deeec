use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formation::RenderConfig;
use crate::optics::{load_prescription, LensPrescription, MaterialCatalog};
use crate::psfmap::{default_theta_samples, SensorGeometry};
use crate::quality::{ArtifactParams, LossWeights};

fn default_pupil_samples() -> usize {
    512
}
fn default_cache_path() -> PathBuf {
    PathBuf::from("psf.cache")
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// PSF characterization settings.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PsfSettings {
    /// Field-angle samples of the PSF tensor, degrees.
    #[serde(default = "default_theta_samples")]
    pub theta_samples_deg: Vec<f64>,
    /// Pupil lattice side; the trace uses this many squared rays.
    #[serde(default = "default_pupil_samples")]
    pub pupil_samples: usize,
    #[serde(default = "default_cache_path")]
    pub cache_path: PathBuf,
}

impl Default for PsfSettings {
    fn default() -> Self {
        PsfSettings {
            theta_samples_deg: default_theta_samples(),
            pupil_samples: default_pupil_samples(),
            cache_path: default_cache_path(),
        }
    }
}

/// Metric parameters echoed into every report.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct MetricsSettings {
    #[serde(default)]
    pub artifact: ArtifactParams,
    #[serde(default)]
    pub loss_weights: LossWeights,
}

/// The single configuration document binding optics, PSF map, formation,
/// and evaluation together.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub prescription: PathBuf,
    pub materials: PathBuf,
    #[serde(default)]
    pub sensor: SensorGeometry,
    #[serde(default)]
    pub render: RenderConfig,
    #[serde(default)]
    pub psf: PsfSettings,
    #[serde(default)]
    pub metrics: MetricsSettings,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// When true, 8-bit RGB inputs are sRGB-decoded to linear; by default
    /// values are treated as linear after division by 255.
    #[serde(default)]
    pub gamma_decode: bool,
}

impl PipelineConfig {
    /// Loads a config document; relative paths resolve against the config
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: PipelineConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Json { path: path.into(), source: e })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        for p in [
            &mut config.prescription,
            &mut config.materials,
            &mut config.psf.cache_path,
            &mut config.output_dir,
        ] {
            if p.is_relative() {
                *p = base.join(&p);
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.prescription.exists() {
            return Err(Error::Config(format!(
                "prescription file not found: {}",
                self.prescription.display()
            )));
        }
        if !self.materials.exists() {
            return Err(Error::Config(format!(
                "material catalog not found: {}",
                self.materials.display()
            )));
        }
        self.sensor.validate()?;
        self.render.validate()?;
        self.metrics.loss_weights.validate()?;
        if self.psf.pupil_samples < 64 {
            return Err(Error::Config("pupil_samples must be at least 64".into()));
        }
        let thetas = &self.psf.theta_samples_deg;
        if thetas.len() < 2 || !thetas.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config(
                "theta_samples_deg must be at least two ascending values".into(),
            ));
        }
        if thetas[0] > 0.0 || *thetas.last().unwrap() < self.sensor.max_field_deg {
            return Err(Error::Config(format!(
                "theta samples must span [0, {}] deg",
                self.sensor.max_field_deg
            )));
        }
        Ok(())
    }

    /// Loads and cross-validates the prescription and material catalog.
    pub fn load_optics(&self) -> Result<(LensPrescription, MaterialCatalog)> {
        let prescription = load_prescription(&self.prescription)?;
        let catalog = MaterialCatalog::load(&self.materials)?;
        prescription.validate_materials(&catalog)?;
        Ok((prescription, catalog))
    }

    /// The shared render/cache depth grid.
    pub fn depth_grid(&self) -> Vec<f64> {
        self.render.depth_grid()
    }
}
