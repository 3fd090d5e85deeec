use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::{compute_psf, LensPrescription, MaterialCatalog, PsfGrid};
use crate::psfmap::interp::interp_weights;
use crate::psfmap::transform::{resize_psf, rotate_psf};

/// Color channel, tied to its principal wavelength.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    R,
    G,
    B,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::R, Channel::G, Channel::B];

    pub fn wavelength_nm(self) -> f64 {
        match self {
            Channel::R => 656.3,
            Channel::G => 587.6,
            Channel::B => 486.1,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Channel::R => 0,
            Channel::G => 1,
            Channel::B => 2,
        }
    }

    pub fn from_index(i: usize) -> Channel {
        Channel::ALL[i]
    }
}

/// Sensor raster and field extent.
#[derive(Copy, Clone, Debug, Serialize, Deserialize)]
pub struct SensorGeometry {
    pub width_px: usize,
    pub height_px: usize,
    pub pixel_pitch_um: f64,
    pub max_field_deg: f64,
}

impl Default for SensorGeometry {
    fn default() -> Self {
        SensorGeometry {
            width_px: 640,
            height_px: 480,
            pixel_pitch_um: 2.0,
            max_field_deg: 6.0,
        }
    }
}

impl SensorGeometry {
    pub fn validate(&self) -> Result<()> {
        if self.width_px == 0 || self.height_px == 0 {
            return Err(Error::Config("sensor dimensions must be positive".into()));
        }
        if !(self.pixel_pitch_um > 0.0) || !(self.max_field_deg > 0.0) {
            return Err(Error::Config(
                "pixel pitch and max field must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Half-diagonal in pixels; the linear f-theta mapping sends it to
    /// `max_field_deg`.
    pub fn half_diagonal_px(&self) -> f64 {
        (self.width_px as f64 / 2.0).hypot(self.height_px as f64 / 2.0)
    }

    /// Field angle and azimuth (degrees) of a pixel under the linear
    /// f-theta approximation. Azimuth is atan2(dh, dw) with rows as +y.
    pub fn pixel_field(&self, h: f64, w: f64) -> (f64, f64) {
        let dh = h - self.height_px as f64 / 2.0;
        let dw = w - self.width_px as f64 / 2.0;
        let r = dh.hypot(dw);
        let theta = self.max_field_deg * r / self.half_diagonal_px();
        let phi = dh.atan2(dw).to_degrees();
        (theta, phi)
    }
}

/// The default 0.7..10.0 m depth grid at 0.1 m spacing (94 entries).
pub fn default_depth_grid() -> Vec<f64> {
    depth_grid(0.7, 10.0, 0.1)
}

/// Regular depth grid; endpoints inclusive.
pub fn depth_grid(min_m: f64, max_m: f64, step_m: f64) -> Vec<f64> {
    let count = ((max_m - min_m) / step_m).round() as usize + 1;
    (0..count).map(|k| min_m + step_m * k as f64).collect()
}

/// Default field sampling: 0.0..6.0 degrees in 0.5-degree steps.
pub fn default_theta_samples() -> Vec<f64> {
    (0..=12).map(|i| i as f64 * 0.5).collect()
}

/// PSF grids indexed by (channel, field sample, depth sample).
#[derive(Clone, Debug)]
pub struct PsfTensor {
    grids: Vec<PsfGrid>,
    pub theta_samples: Vec<f64>,
    pub depth_samples: Vec<f64>,
}

impl PsfTensor {
    /// Wraps pre-computed grids laid out channel-major, then field, then
    /// depth. Every cell must be present and unit-sum.
    pub fn new(
        theta_samples: Vec<f64>,
        depth_samples: Vec<f64>,
        grids: Vec<PsfGrid>,
    ) -> Result<Self> {
        let expected = 3 * theta_samples.len() * depth_samples.len();
        if grids.len() != expected {
            return Err(Error::InvalidInput(format!(
                "tensor needs {expected} grids, got {}",
                grids.len()
            )));
        }
        if !theta_samples.windows(2).all(|w| w[0] < w[1])
            || !depth_samples.windows(2).all(|w| w[0] < w[1])
        {
            return Err(Error::InvalidInput(
                "field and depth samples must be sorted ascending".into(),
            ));
        }
        for g in &grids {
            let sum = g.samples.sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidInput(format!(
                    "tensor grid not unit-sum ({sum})"
                )));
            }
        }
        Ok(PsfTensor { grids, theta_samples, depth_samples })
    }

    /// Traces the full tensor for a prescription: one PSF per (channel,
    /// field sample, depth sample), in parallel.
    pub fn trace(
        prescription: &LensPrescription,
        catalog: &MaterialCatalog,
        theta_samples: Vec<f64>,
        depth_samples: Vec<f64>,
        pupil_samples: usize,
    ) -> Result<Self> {
        let mut cells = Vec::with_capacity(3 * theta_samples.len() * depth_samples.len());
        for c in Channel::ALL {
            for &t in &theta_samples {
                for &d in &depth_samples {
                    cells.push((c, t, d));
                }
            }
        }
        let grids = cells
            .par_iter()
            .map(|&(c, t, d)| {
                compute_psf(prescription, catalog, d, t, c.wavelength_nm(), pupil_samples)
            })
            .collect::<Result<Vec<_>>>()?;
        PsfTensor::new(theta_samples, depth_samples, grids)
    }

    fn flat_index(&self, channel: Channel, theta_idx: usize, depth_idx: usize) -> usize {
        (channel.index() * self.theta_samples.len() + theta_idx) * self.depth_samples.len()
            + depth_idx
    }

    pub fn grid(&self, channel: Channel, theta_idx: usize, depth_idx: usize) -> &PsfGrid {
        &self.grids[self.flat_index(channel, theta_idx, depth_idx)]
    }

    /// Nearest depth sample; exact sample values resolve to their own index
    /// and midpoints round toward the farther (larger-index) sample.
    pub fn nearest_depth_index(&self, depth_m: f64) -> usize {
        let d = &self.depth_samples;
        let hi = d.partition_point(|&v| v < depth_m);
        if hi == 0 {
            return 0;
        }
        if hi == d.len() {
            return d.len() - 1;
        }
        let lo = hi - 1;
        if depth_m - d[lo] >= d[hi] - depth_m {
            hi
        } else {
            lo
        }
    }

    pub fn fine_pitch_um(&self) -> f64 {
        self.grids[0].pitch_um
    }
}

/// Synthesizes the local PSF for one sensor pixel at one depth, at sensor
/// pitch: inverse-square blend of the bracketing field samples, rotation by
/// the pixel azimuth, box resize to the sensor pixel pitch, unit sum.
pub fn psf_at(
    tensor: &PsfTensor,
    geometry: &SensorGeometry,
    channel: Channel,
    pixel: (usize, usize),
    depth_m: f64,
) -> Result<PsfGrid> {
    let (h, w) = pixel;
    if h >= geometry.height_px || w >= geometry.width_px {
        return Err(Error::OutOfRange(format!(
            "pixel ({h}, {w}) outside {}x{} sensor",
            geometry.height_px, geometry.width_px
        )));
    }
    let (theta, phi) = geometry.pixel_field(h as f64, w as f64);
    let weights = interp_weights(theta, &tensor.theta_samples)?;
    let depth_idx = tensor.nearest_depth_index(depth_m);

    let side = tensor.grid(channel, 0, 0).side();
    let mut blended = Array2::<f64>::zeros((side, side));
    for &(idx, weight) in &weights {
        blended.scaled_add(weight, &tensor.grid(channel, idx, depth_idx).samples);
    }
    let blended = PsfGrid::from_samples(
        blended,
        tensor.fine_pitch_um(),
        (0.0, 0.0),
        channel.wavelength_nm(),
        tensor.depth_samples[depth_idx],
        theta,
    )?;
    let rotated = rotate_psf(&blended, phi);
    resize_psf(&rotated, geometry.pixel_pitch_um)
}
