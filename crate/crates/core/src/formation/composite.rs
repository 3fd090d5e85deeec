use ndarray::{s, Array2, Array3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::formation::convolve::SpectrumPlan;
use crate::formation::provider::PsfProvider;
use crate::formation::stack::{DepthLayerStack, Rect, RenderConfig};
use crate::psfmap::Channel;

/// Starvation floor for the energy normalizer: where PSF * (cumulative
/// occupancy) falls below this, the layer's normalized image and alpha are
/// zeroed. This is the unique choice that preserves the telescoping energy
/// identity in covered regions.
pub const ENERGY_EPS: f64 = 1e-8;

/// Occlusion-aware layered formation, tiled.
///
/// Per channel and per tile: each depth layer present in the tile's support
/// is blurred with the tile-center kernel for that layer, normalized by the
/// blurred cumulative occupancy E_k, and over-composited back to front. Tile
/// results are merged by overlap-add with linear ramps across the pad
/// region. Returns linear intensities before noise, unclipped.
pub fn composite_occlusion(
    stack: &DepthLayerStack,
    provider: &dyn PsfProvider,
    config: &RenderConfig,
) -> Result<Array3<f64>> {
    config.validate()?;
    if provider.depth_count() != stack.layer_count() {
        return Err(Error::ShapeMismatch(format!(
            "provider has {} depth samples, stack has {} layers",
            provider.depth_count(),
            stack.layer_count()
        )));
    }
    let (height, width) = (stack.height(), stack.width());
    let tile = config.tile_size_px;
    let tile_rows = height.div_ceil(tile);
    let tile_cols = width.div_ceil(tile);
    provider.check_tile_grid(tile_rows, tile_cols)?;

    let side = provider.kernel_side();
    let pad = side / 2;
    if side > 1 && tile < 2 * pad {
        return Err(Error::Config(format!(
            "tile size {tile} px too small for kernel side {side} (needs >= {})",
            2 * pad
        )));
    }

    let tiles: Vec<(usize, usize)> = (0..tile_rows)
        .flat_map(|tr| (0..tile_cols).map(move |tc| (tr, tc)))
        .collect();

    let rendered: Vec<TilePatch> = tiles
        .par_iter()
        .map(|&(tr, tc)| render_tile(stack, provider, config, (tr, tc), pad))
        .collect::<Result<Vec<_>>>()?;

    // Deterministic merge in canonical tile order.
    let mut canvas = Array3::<f64>::zeros((height, width, 3));
    for patch in &rendered {
        patch.accumulate(&mut canvas);
    }
    Ok(canvas)
}

/// One rendered tile: composited values over its clipped extended region,
/// pre-multiplied by the blending window.
struct TilePatch {
    h0: usize,
    w0: usize,
    values: Array3<f64>,
}

impl TilePatch {
    fn accumulate(&self, canvas: &mut Array3<f64>) {
        let (h, w, _) = self.values.dim();
        let mut view = canvas.slice_mut(s![
            self.h0..self.h0 + h,
            self.w0..self.w0 + w,
            ..
        ]);
        view += &self.values;
    }
}

/// Linear crossfade weight for one axis of the extended tile region.
///
/// Interior tile boundaries ramp from 0 to 1 across [boundary - pad,
/// boundary + pad) so adjacent tiles always sum to one; image-border sides
/// stay at weight 1.
fn axis_weights(
    core_start: usize,
    core_end: usize,
    out_start: usize,
    out_end: usize,
    pad: usize,
    has_prev: bool,
    has_next: bool,
) -> Vec<f64> {
    let two_pad = (2 * pad) as f64;
    (out_start..out_end)
        .map(|x| {
            let xc = x as f64 + 0.5;
            let mut w = 1.0;
            if has_prev {
                let lo = core_start as f64 - pad as f64;
                w *= ((xc - lo) / two_pad).clamp(0.0, 1.0);
            }
            if has_next {
                let hi = core_end as f64 + pad as f64;
                w *= ((hi - xc) / two_pad).clamp(0.0, 1.0);
            }
            w
        })
        .collect()
}

fn render_tile(
    stack: &DepthLayerStack,
    provider: &dyn PsfProvider,
    config: &RenderConfig,
    tile: (usize, usize),
    pad: usize,
) -> Result<TilePatch> {
    let (height, width) = (stack.height(), stack.width());
    let t = config.tile_size_px;
    let (tr, tc) = tile;
    let tile_rows = height.div_ceil(t);
    let tile_cols = width.div_ceil(t);

    let core_h0 = tr * t;
    let core_w0 = tc * t;
    let core_h1 = (core_h0 + t).min(height);
    let core_w1 = (core_w0 + t).min(width);

    // Output region: core extended by the blend pad, clipped to the image.
    let out_h0 = core_h0.saturating_sub(pad);
    let out_w0 = core_w0.saturating_sub(pad);
    let out_h1 = (core_h1 + pad).min(height);
    let out_w1 = (core_w1 + pad).min(width);

    // Input support: the output region extended by the kernel radius.
    let in_rect = Rect {
        h0: out_h0 as isize - pad as isize,
        w0: out_w0 as isize - pad as isize,
        height: out_h1 - out_h0 + 2 * pad,
        width: out_w1 - out_w0 + 2 * pad,
    };

    let layers = stack.layers_in_rect(in_rect);
    let side = provider.kernel_side();
    let delta_kernels = side == 1;
    let plan = if delta_kernels {
        None
    } else {
        Some(SpectrumPlan::new(in_rect.height, in_rect.width, side, side))
    };

    // Composite each channel over the input buffer, far to near.
    let (bh, bw) = (in_rect.height, in_rect.width);
    let mut composited = [
        Array2::<f64>::zeros((bh, bw)),
        Array2::<f64>::zeros((bh, bw)),
        Array2::<f64>::zeros((bh, bw)),
    ];
    let mut cumulative = Array2::<f64>::zeros((bh, bw));

    // Over-composite one layer's blurred terms into the running result.
    fn over(
        acc: &mut Array2<f64>,
        energy: &Array2<f64>,
        blurred_alpha: &Array2<f64>,
        blurred_image: &Array2<f64>,
        off: usize,
    ) {
        let (bh, bw) = acc.dim();
        for r in 0..bh {
            for c in 0..bw {
                let e = energy[[r + off, c + off]];
                let (i_norm, a_norm) = if e >= ENERGY_EPS {
                    (
                        blurred_image[[r + off, c + off]] / e,
                        blurred_alpha[[r + off, c + off]] / e,
                    )
                } else {
                    (0.0, 0.0)
                };
                acc[[r, c]] = acc[[r, c]] * (1.0 - a_norm) + i_norm;
            }
        }
    }

    for &k in layers.iter().rev() {
        let alpha = stack.alpha_rect(k, in_rect);
        cumulative += &alpha;

        match &plan {
            // 1x1 kernels convolve to a pure scale; keeping this path exact
            // makes the delta-cache render the identity bit for bit.
            None => {
                for (ci, channel) in Channel::ALL.into_iter().enumerate() {
                    let v = provider.kernel(channel, k, tile)[[0, 0]];
                    let image = stack.image_rect(k, ci, in_rect);
                    over(&mut composited[ci], &(&cumulative * v), &(&alpha * v), &(&image * v), 0);
                }
            }
            Some(plan) => {
                let alpha_spec = plan.forward(&alpha);
                let cum_spec = plan.forward(&cumulative);
                for (ci, channel) in Channel::ALL.into_iter().enumerate() {
                    let kernel_spec = plan.forward(&provider.kernel(channel, k, tile));
                    let image_spec = plan.forward(&stack.image_rect(k, ci, in_rect));
                    over(
                        &mut composited[ci],
                        &plan.convolve_full(&cum_spec, &kernel_spec),
                        &plan.convolve_full(&alpha_spec, &kernel_spec),
                        &plan.convolve_full(&image_spec, &kernel_spec),
                        side / 2,
                    );
                }
            }
        }
    }

    // Crop to the output region and apply the blending window.
    let wy = axis_weights(core_h0, core_h1, out_h0, out_h1, pad, tr > 0, tr + 1 < tile_rows);
    let wx = axis_weights(core_w0, core_w1, out_w0, out_w1, pad, tc > 0, tc + 1 < tile_cols);
    let crop_h = out_h0 as isize - in_rect.h0;
    let crop_w = out_w0 as isize - in_rect.w0;
    let mut values = Array3::<f64>::zeros((out_h1 - out_h0, out_w1 - out_w0, 3));
    for r in 0..out_h1 - out_h0 {
        for c in 0..out_w1 - out_w0 {
            let weight = wy[r] * wx[c];
            for ci in 0..3 {
                values[[r, c, ci]] =
                    composited[ci][[(r as isize + crop_h) as usize, (c as isize + crop_w) as usize]]
                        * weight;
            }
        }
    }
    Ok(TilePatch { h0: out_h0, w0: out_w0, values })
}
