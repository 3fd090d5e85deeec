use ndarray::Array2;

use crate::error::{Error, Result};
use crate::psfmap::{Channel, PsfCache};

/// Source of per-tile, per-depth-layer convolution kernels for rendering.
///
/// Depth index k corresponds to layer k of the stack (the shared render
/// depth grid). Kernels are square and unit-sum, with the convolution origin
/// at (side/2, side/2).
pub trait PsfProvider: Sync {
    fn kernel_side(&self) -> usize;
    fn depth_count(&self) -> usize;
    fn kernel(&self, channel: Channel, depth_idx: usize, tile: (usize, usize)) -> Array2<f64>;

    /// Providers sampled on a fixed tile grid reject renders whose tiling
    /// disagrees; spatially-uniform providers accept any tiling.
    fn check_tile_grid(&self, _tile_rows: usize, _tile_cols: usize) -> Result<()> {
        Ok(())
    }
}

impl PsfProvider for PsfCache {
    fn kernel_side(&self) -> usize {
        self.header.psf_side as usize
    }

    fn depth_count(&self) -> usize {
        self.header.depths as usize
    }

    fn kernel(&self, channel: Channel, depth_idx: usize, tile: (usize, usize)) -> Array2<f64> {
        PsfCache::kernel(self, channel, depth_idx, tile)
    }

    fn check_tile_grid(&self, tile_rows: usize, tile_cols: usize) -> Result<()> {
        let have = (self.header.tile_rows as usize, self.header.tile_cols as usize);
        if have != (tile_rows, tile_cols) {
            return Err(Error::Config(format!(
                "cache tile grid {have:?} does not match render tiling ({tile_rows}, {tile_cols})"
            )));
        }
        Ok(())
    }
}

/// Spatially-uniform kernels: every tile shares the same per-(channel,
/// depth) kernel. Used for synthetic scenes and oracle comparisons.
#[derive(Clone, Debug)]
pub struct UniformPsfs {
    kernels: Vec<Array2<f64>>,
    depths: usize,
}

impl UniformPsfs {
    /// One kernel per depth layer, shared by all channels. Kernels are
    /// renormalized to unit sum.
    pub fn per_depth(kernels: Vec<Array2<f64>>) -> Self {
        let depths = kernels.len();
        let normalized: Vec<Array2<f64>> = kernels
            .into_iter()
            .map(|k| {
                let sum = k.sum();
                if sum > 0.0 {
                    k / sum
                } else {
                    k
                }
            })
            .collect();
        let mut all = Vec::with_capacity(3 * depths);
        for _ in 0..3 {
            all.extend(normalized.iter().cloned());
        }
        UniformPsfs { kernels: all, depths }
    }

    /// Distinct kernels per channel and depth, channel-major.
    pub fn per_channel_depth(kernels: Vec<Array2<f64>>, depths: usize) -> Self {
        assert_eq!(kernels.len(), 3 * depths);
        UniformPsfs { kernels, depths }
    }
}

impl PsfProvider for UniformPsfs {
    fn kernel_side(&self) -> usize {
        self.kernels[0].nrows()
    }

    fn depth_count(&self) -> usize {
        self.depths
    }

    fn kernel(&self, channel: Channel, depth_idx: usize, _tile: (usize, usize)) -> Array2<f64> {
        self.kernels[channel.index() * self.depths + depth_idx].clone()
    }
}
