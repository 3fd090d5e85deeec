use ndarray::{Array2, Array3};
use rayon::prelude::*;

use crate::error::Result;
use crate::formation::convolve::TileConvolver;
use crate::formation::provider::PsfProvider;
use crate::formation::stack::{layerize, RenderConfig};
use crate::psfmap::Channel;

/// Conventional patch-wise baseline: the image is divided into fixed
/// patches, and each patch is convolved with the single PSF of its center
/// pixel at the patch's median depth. No occlusion modeling; patch
/// contributions are summed by plain overlap-add.
pub fn render_patchwise(
    rgb: &Array3<f64>,
    depth_map: &Array2<f64>,
    provider: &dyn PsfProvider,
    config: &RenderConfig,
) -> Result<Array3<f64>> {
    let stack = layerize(rgb, depth_map, config)?;
    let (height, width) = (stack.height(), stack.width());
    let patch = config.patch_size_px;
    let tile = config.tile_size_px;
    let tile_rows = height.div_ceil(tile);
    let tile_cols = width.div_ceil(tile);
    provider.check_tile_grid(tile_rows, tile_cols)?;

    let side = provider.kernel_side();
    let off = side / 2;

    let patches: Vec<(usize, usize)> = (0..height.div_ceil(patch))
        .flat_map(|pr| (0..width.div_ceil(patch)).map(move |pc| (pr, pc)))
        .collect();

    let pieces: Vec<(usize, usize, [Array2<f64>; 3])> = patches
        .par_iter()
        .map(|&(pr, pc)| {
            let h0 = pr * patch;
            let w0 = pc * patch;
            let h1 = (h0 + patch).min(height);
            let w1 = (w0 + patch).min(width);

            // Median depth of the patch (lower median), quantized to the
            // shared layer grid.
            let mut depths: Vec<f64> = (h0..h1)
                .flat_map(|r| (w0..w1).map(move |c| depth_map[[r, c]]))
                .collect();
            depths.sort_by(|a, b| a.total_cmp(b));
            let median = depths[(depths.len() - 1) / 2];
            let layer = config.layer_index(median);

            // Kernel of the render tile containing the patch center.
            let center = ((h0 + h1) / 2, (w0 + w1) / 2);
            let tile_idx = ((center.0 / tile).min(tile_rows - 1), (center.1 / tile).min(tile_cols - 1));

            let out = Channel::ALL.map(|channel| {
                let kernel = provider.kernel(channel, layer, tile_idx);
                // Patches may be smaller than the kernel; pad the content.
                let (th, tw) = (side.max(h1 - h0), side.max(w1 - w0));
                let conv =
                    TileConvolver::new(th, tw, &kernel).expect("kernel fits padded patch");
                let mut content = Array2::<f64>::zeros((th, tw));
                for r in h0..h1 {
                    for c in w0..w1 {
                        content[[r - h0, c - w0]] = rgb[[r, c, channel.index()]];
                    }
                }
                conv.full(&content).expect("shape prepared above")
            });
            (h0, w0, out)
        })
        .collect();

    // Overlap-add in canonical patch order; each full convolution starts at
    // (h0 - off, w0 - off) on the canvas.
    let mut canvas = Array3::<f64>::zeros((height, width, 3));
    for (h0, w0, channels) in &pieces {
        for (ci, piece) in channels.iter().enumerate() {
            for ((r, c), &v) in piece.indexed_iter() {
                let hr = *h0 as isize + r as isize - off as isize;
                let wc = *w0 as isize + c as isize - off as isize;
                if hr >= 0 && (hr as usize) < height && wc >= 0 && (wc as usize) < width {
                    canvas[[hr as usize, wc as usize, ci]] += v;
                }
            }
        }
    }
    Ok(canvas)
}
