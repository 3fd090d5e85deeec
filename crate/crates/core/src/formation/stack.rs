use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn default_tile_size() -> usize {
    40
}
fn default_patch_size() -> usize {
    16
}
fn default_noise_sigma() -> f64 {
    0.005
}
fn default_depth_min() -> f64 {
    0.7
}
fn default_depth_max() -> f64 {
    10.0
}
fn default_depth_step() -> f64 {
    0.1
}

/// Rendering parameters; the depth grid here is the one the PSF cache and
/// the layered formation share.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RenderConfig {
    #[serde(default = "default_tile_size")]
    pub tile_size_px: usize,
    #[serde(default = "default_patch_size")]
    pub patch_size_px: usize,
    #[serde(default = "default_noise_sigma")]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_depth_min")]
    pub depth_min_m: f64,
    #[serde(default = "default_depth_max")]
    pub depth_max_m: f64,
    #[serde(default = "default_depth_step")]
    pub depth_step_m: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            tile_size_px: default_tile_size(),
            patch_size_px: default_patch_size(),
            noise_sigma: default_noise_sigma(),
            seed: 0,
            depth_min_m: default_depth_min(),
            depth_max_m: default_depth_max(),
            depth_step_m: default_depth_step(),
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tile_size_px == 0 || self.patch_size_px == 0 {
            return Err(Error::Config("tile and patch sizes must be positive".into()));
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::Config("noise sigma must be nonnegative".into()));
        }
        if !(self.depth_step_m > 0.0) || self.depth_max_m <= self.depth_min_m {
            return Err(Error::Config("bad depth grid".into()));
        }
        Ok(())
    }

    /// Number of depth layers (94 for the default 0.7..10.0 m at 0.1 m).
    pub fn layer_count(&self) -> usize {
        ((self.depth_max_m - self.depth_min_m) / self.depth_step_m).round() as usize + 1
    }

    /// Center depth of layer k.
    pub fn depth_of_layer(&self, k: usize) -> f64 {
        self.depth_min_m + self.depth_step_m * k as f64
    }

    /// Layer index for a depth: clamp to the grid, then round half up.
    pub fn layer_index(&self, depth_m: f64) -> usize {
        let d = depth_m.clamp(self.depth_min_m, self.depth_max_m);
        let k = ((d - self.depth_min_m) / self.depth_step_m + 0.5).floor() as usize;
        k.min(self.layer_count() - 1)
    }

    pub fn depth_grid(&self) -> Vec<f64> {
        (0..self.layer_count()).map(|k| self.depth_of_layer(k)).collect()
    }
}

/// A scene discretized into depth layers.
///
/// Layer k sits at depth `depth_min + k * depth_step` (k = 0 nearest); the
/// compositor walks the layers far-to-near. Every pixel belongs to exactly
/// one layer, so the masks are pairwise disjoint by construction and
/// I_k = rgb * alpha_k.
#[derive(Clone, Debug)]
pub struct DepthLayerStack {
    rgb: Array3<f64>,
    layer_of: Array2<usize>,
    depths: Vec<f64>,
}

/// A rectangle of pixels that may extend beyond the image; out-of-image
/// samples read as zero.
#[derive(Copy, Clone, Debug)]
pub struct Rect {
    pub h0: isize,
    pub w0: isize,
    pub height: usize,
    pub width: usize,
}

/// Discretizes an RGB-D input into depth layers: depth is clamped to the
/// grid range and assigned to the nearest layer with halves rounding up.
pub fn layerize(
    rgb: &Array3<f64>,
    depth_map: &Array2<f64>,
    config: &RenderConfig,
) -> Result<DepthLayerStack> {
    config.validate()?;
    let (h, w, ch) = rgb.dim();
    if ch != 3 {
        return Err(Error::ShapeMismatch(format!("rgb has {ch} channels, expected 3")));
    }
    if depth_map.dim() != (h, w) {
        return Err(Error::ShapeMismatch(format!(
            "depth map {:?} does not match rgb {:?}",
            depth_map.dim(),
            (h, w)
        )));
    }
    for &d in depth_map.iter() {
        if !d.is_finite() || d <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "depth values must be positive and finite, got {d}"
            )));
        }
    }
    let layer_of = depth_map.mapv(|d| config.layer_index(d));
    Ok(DepthLayerStack {
        rgb: rgb.clone(),
        layer_of,
        depths: config.depth_grid(),
    })
}

impl DepthLayerStack {
    pub fn height(&self) -> usize {
        self.rgb.dim().0
    }

    pub fn width(&self) -> usize {
        self.rgb.dim().1
    }

    pub fn layer_count(&self) -> usize {
        self.depths.len()
    }

    pub fn depth_of_layer(&self, k: usize) -> f64 {
        self.depths[k]
    }

    pub fn layer_index_at(&self, h: usize, w: usize) -> usize {
        self.layer_of[[h, w]]
    }

    /// Binary alpha mask of layer k over the whole image.
    pub fn alpha(&self, k: usize) -> Array2<f64> {
        self.layer_of.mapv(|v| if v == k { 1.0 } else { 0.0 })
    }

    /// Masked image content of layer k for one channel.
    pub fn image_channel(&self, k: usize, channel: usize) -> Array2<f64> {
        Array2::from_shape_fn((self.height(), self.width()), |(r, c)| {
            if self.layer_of[[r, c]] == k {
                self.rgb[[r, c, channel]]
            } else {
                0.0
            }
        })
    }

    /// Distinct layer indices present within a rect (clipped to the image),
    /// ascending.
    pub fn layers_in_rect(&self, rect: Rect) -> Vec<usize> {
        let mut seen = vec![false; self.layer_count()];
        let (h, w) = (self.height() as isize, self.width() as isize);
        for r in rect.h0.max(0)..(rect.h0 + rect.height as isize).min(h) {
            for c in rect.w0.max(0)..(rect.w0 + rect.width as isize).min(w) {
                seen[self.layer_of[[r as usize, c as usize]]] = true;
            }
        }
        (0..self.layer_count()).filter(|&k| seen[k]).collect()
    }

    /// Alpha mask of layer k over a rect, zero-padded outside the image.
    pub fn alpha_rect(&self, k: usize, rect: Rect) -> Array2<f64> {
        let (h, w) = (self.height() as isize, self.width() as isize);
        Array2::from_shape_fn((rect.height, rect.width), |(r, c)| {
            let hr = rect.h0 + r as isize;
            let wc = rect.w0 + c as isize;
            if hr >= 0 && hr < h && wc >= 0 && wc < w
                && self.layer_of[[hr as usize, wc as usize]] == k
            {
                1.0
            } else {
                0.0
            }
        })
    }

    /// Masked channel content of layer k over a rect, zero-padded outside
    /// the image.
    pub fn image_rect(&self, k: usize, channel: usize, rect: Rect) -> Array2<f64> {
        let (h, w) = (self.height() as isize, self.width() as isize);
        Array2::from_shape_fn((rect.height, rect.width), |(r, c)| {
            let hr = rect.h0 + r as isize;
            let wc = rect.w0 + c as isize;
            if hr >= 0 && hr < h && wc >= 0 && wc < w
                && self.layer_of[[hr as usize, wc as usize]] == k
            {
                self.rgb[[hr as usize, wc as usize, channel]]
            } else {
                0.0
            }
        })
    }
}

/// Rendered image plus the inputs that determine it.
#[derive(Clone, Debug)]
pub struct CodedImage {
    pub pixels: Array3<f64>,
    pub provenance: Provenance,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub prescription: String,
    pub config_hash: String,
    pub seed: u64,
}
