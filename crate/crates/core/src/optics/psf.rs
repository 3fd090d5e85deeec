use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::optics::material::MaterialCatalog;
use crate::optics::prescription::LensPrescription;
use crate::optics::trace::{chief_ray_landing, trace_ray, Ray};
use crate::optics::vec3::Vec3;

/// Fine PSF sampling grid: 128 x 128 at 0.4 um pitch.
pub const PSF_GRID_SIDE: usize = 128;
pub const PSF_PITCH_UM: f64 = 0.4;

const DEPTH_RANGE_M: (f64, f64) = (0.7, 10.0);
const FIELD_RANGE_DEG: (f64, f64) = (0.0, 6.0);
const MIN_PUPIL_SIDE: usize = 64;

/// A binned point-spread function on the sensor.
///
/// `samples` is nonnegative and normalized to unit sum; the grid is centered
/// on the chief-ray landing point, with columns along sensor +x and rows
/// along sensor +y.
#[derive(Clone, Debug)]
pub struct PsfGrid {
    pub samples: Array2<f64>,
    /// Sample pitch in micrometers.
    pub pitch_um: f64,
    /// Chief-ray landing point on the sensor (mm).
    pub center_mm: (f64, f64),
    pub wavelength_nm: f64,
    pub depth_m: f64,
    pub field_angle_deg: f64,
    /// (rays landing inside the grid) / (rays surviving to the sensor).
    pub captured_energy_fraction: f64,
    pub rays_surviving: u64,
    pub rays_in_grid: u64,
}

impl PsfGrid {
    /// Builds a grid directly from samples, renormalizing to unit sum.
    /// Intended for synthetic kernels and transforms; traced PSFs come from
    /// [`compute_psf`].
    pub fn from_samples(
        samples: Array2<f64>,
        pitch_um: f64,
        center_mm: (f64, f64),
        wavelength_nm: f64,
        depth_m: f64,
        field_angle_deg: f64,
    ) -> Result<Self> {
        let sum: f64 = samples.sum();
        if !(sum > 0.0) || samples.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidInput(
                "PSF samples must be nonnegative with positive sum".into(),
            ));
        }
        Ok(PsfGrid {
            samples: samples / sum,
            pitch_um,
            center_mm,
            wavelength_nm,
            depth_m,
            field_angle_deg,
            captured_energy_fraction: 1.0,
            rays_surviving: 0,
            rays_in_grid: 0,
        })
    }

    pub fn side(&self) -> usize {
        self.samples.nrows()
    }

    /// Intensity-weighted centroid relative to the grid center, in um.
    pub fn centroid_um(&self) -> (f64, f64) {
        let n = self.side();
        let half = (n as f64 - 1.0) / 2.0;
        let mut cx = 0.0;
        let mut cy = 0.0;
        for ((r, c), &p) in self.samples.indexed_iter() {
            cx += p * (c as f64 - half);
            cy += p * (r as f64 - half);
        }
        (cx * self.pitch_um, cy * self.pitch_um)
    }

    /// RMS radius about the centroid, in um.
    pub fn rms_radius_um(&self) -> f64 {
        let n = self.side();
        let half = (n as f64 - 1.0) / 2.0;
        let (cx, cy) = self.centroid_um();
        let mut acc = 0.0;
        for ((r, c), &p) in self.samples.indexed_iter() {
            let dx = (c as f64 - half) * self.pitch_um - cx;
            let dy = (r as f64 - half) * self.pitch_um - cy;
            acc += p * (dx * dx + dy * dy);
        }
        acc.sqrt()
    }
}

/// Shirley-Chiu concentric square-to-disc map; preserves fractional area, so
/// a uniform lattice on the square becomes a uniform sampling of the disc.
fn concentric_disc(a: f64, b: f64) -> (f64, f64) {
    if a == 0.0 && b == 0.0 {
        return (0.0, 0.0);
    }
    let (r, phi) = if a.abs() > b.abs() {
        (a, std::f64::consts::FRAC_PI_4 * (b / a))
    } else {
        (b, std::f64::consts::FRAC_PI_2 - std::f64::consts::FRAC_PI_4 * (a / b))
    };
    (r * phi.cos(), r * phi.sin())
}

/// Traces a uniform disc-sampled bundle from an object point and bins the
/// survivors into a 128 x 128 grid at 0.4 um pitch centered on the chief ray.
///
/// `pupil_samples` is the lattice side: the bundle contains
/// `pupil_samples^2` rays. Depth is the axial (z) distance in meters; the
/// object point sits at x = -depth * tan(theta) so the image lands on +x.
pub fn compute_psf(
    prescription: &LensPrescription,
    catalog: &MaterialCatalog,
    depth_m: f64,
    field_angle_deg: f64,
    wavelength_nm: f64,
    pupil_samples: usize,
) -> Result<PsfGrid> {
    compute_psf_with_entrance(
        prescription,
        catalog,
        depth_m,
        field_angle_deg,
        wavelength_nm,
        pupil_samples,
        prescription.entrance_semi_diameter_mm,
    )
}

/// [`compute_psf`] with an explicit pupil sampling radius, for convergence
/// and small-pupil consistency checks.
pub fn compute_psf_with_entrance(
    prescription: &LensPrescription,
    catalog: &MaterialCatalog,
    depth_m: f64,
    field_angle_deg: f64,
    wavelength_nm: f64,
    pupil_samples: usize,
    entrance_semi_diameter_mm: f64,
) -> Result<PsfGrid> {
    if !(DEPTH_RANGE_M.0..=DEPTH_RANGE_M.1).contains(&depth_m) {
        return Err(Error::OutOfRange(format!(
            "depth {depth_m} m outside [{}, {}]",
            DEPTH_RANGE_M.0, DEPTH_RANGE_M.1
        )));
    }
    if !(FIELD_RANGE_DEG.0..=FIELD_RANGE_DEG.1).contains(&field_angle_deg) {
        return Err(Error::OutOfRange(format!(
            "field angle {field_angle_deg} deg outside [{}, {}]",
            FIELD_RANGE_DEG.0, FIELD_RANGE_DEG.1
        )));
    }
    if pupil_samples < MIN_PUPIL_SIDE {
        return Err(Error::InvalidInput(format!(
            "pupil lattice side {pupil_samples} below minimum {MIN_PUPIL_SIDE}"
        )));
    }

    let model = prescription.resolve(catalog, wavelength_nm)?;
    let distance_mm = depth_m * 1000.0;
    let object = Vec3::new(
        -distance_mm * field_angle_deg.to_radians().tan(),
        0.0,
        -distance_mm,
    );
    let center = chief_ray_landing(&model, object)?;

    let n = pupil_samples;
    let pitch_mm = PSF_PITCH_UM * 1e-3;
    let half = PSF_GRID_SIDE as f64 / 2.0;

    let (bins, survived, in_grid) = (0..n)
        .into_par_iter()
        .fold(
            || (vec![0u32; PSF_GRID_SIDE * PSF_GRID_SIDE], 0u64, 0u64),
            |(mut bins, mut survived, mut in_grid), i| {
                let a = 2.0 * (i as f64 + 0.5) / n as f64 - 1.0;
                for j in 0..n {
                    let b = 2.0 * (j as f64 + 0.5) / n as f64 - 1.0;
                    let (dx, dy) = concentric_disc(a, b);
                    let aim = Vec3::new(
                        dx * entrance_semi_diameter_mm,
                        dy * entrance_semi_diameter_mm,
                        0.0,
                    );
                    let ray = Ray::new(object, (aim - object).normalized(), wavelength_nm);
                    if let Ok(hit) = trace_ray(&model, ray) {
                        survived += 1;
                        let u = (hit.position.x - center.x) / pitch_mm + half;
                        let v = (hit.position.y - center.y) / pitch_mm + half;
                        let col = u.floor();
                        let row = v.floor();
                        if (0.0..PSF_GRID_SIDE as f64).contains(&col)
                            && (0.0..PSF_GRID_SIDE as f64).contains(&row)
                        {
                            in_grid += 1;
                            bins[row as usize * PSF_GRID_SIDE + col as usize] += 1;
                        }
                    }
                }
                (bins, survived, in_grid)
            },
        )
        .reduce(
            || (vec![0u32; PSF_GRID_SIDE * PSF_GRID_SIDE], 0u64, 0u64),
            |(mut a, s1, g1), (b, s2, g2)| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                (a, s1 + s2, g1 + g2)
            },
        );

    if survived == 0 || in_grid == 0 {
        return Err(Error::DeadBundle);
    }

    let scale = 1.0 / in_grid as f64;
    let samples = Array2::from_shape_fn((PSF_GRID_SIDE, PSF_GRID_SIDE), |(r, c)| {
        bins[r * PSF_GRID_SIDE + c] as f64 * scale
    });

    Ok(PsfGrid {
        samples,
        pitch_um: PSF_PITCH_UM,
        center_mm: (center.x, center.y),
        wavelength_nm,
        depth_m,
        field_angle_deg,
        captured_energy_fraction: in_grid as f64 / survived as f64,
        rays_surviving: survived,
        rays_in_grid: in_grid,
    })
}
