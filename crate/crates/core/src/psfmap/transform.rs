use ndarray::Array2;

use crate::error::{Error, Result};
use crate::optics::PsfGrid;

/// Rotates a PSF about its grid center by `phi_deg` (from the +x/column axis
/// toward the +y/row axis) using bilinear resampling, then renormalizes to
/// unit sum. Samples falling outside the source grid read as zero.
pub fn rotate_psf(grid: &PsfGrid, phi_deg: f64) -> PsfGrid {
    if phi_deg == 0.0 {
        return grid.clone();
    }
    let n = grid.side();
    let center = (n as f64 - 1.0) / 2.0;
    let phi = phi_deg.to_radians();
    let (sin, cos) = phi.sin_cos();
    let src = &grid.samples;
    let mut out = Array2::zeros((n, n));
    for r in 0..n {
        let y = r as f64 - center;
        for c in 0..n {
            let x = c as f64 - center;
            // Inverse rotation into source coordinates.
            let sx = cos * x + sin * y + center;
            let sy = -sin * x + cos * y + center;
            let x0 = sx.floor();
            let y0 = sy.floor();
            let fx = sx - x0;
            let fy = sy - y0;
            let mut acc = 0.0;
            for (dy, wy) in [(0i64, 1.0 - fy), (1, fy)] {
                for (dx, wx) in [(0i64, 1.0 - fx), (1, fx)] {
                    let si = y0 as i64 + dy;
                    let sj = x0 as i64 + dx;
                    if (0..n as i64).contains(&si) && (0..n as i64).contains(&sj) {
                        acc += wy * wx * src[[si as usize, sj as usize]];
                    }
                }
            }
            out[[r, c]] = acc;
        }
    }
    let sum = out.sum();
    if sum > 0.0 {
        out /= sum;
    }
    let mut rotated = grid.clone();
    rotated.samples = out;
    rotated
}

/// Sum of the rotated grid before renormalization; exposed so energy loss at
/// the borders can be inspected.
#[cfg(test)]
fn rotated_sum(grid: &PsfGrid, phi_deg: f64) -> f64 {
    let n = grid.side();
    let center = (n as f64 - 1.0) / 2.0;
    let phi = phi_deg.to_radians();
    let (sin, cos) = phi.sin_cos();
    let mut total = 0.0;
    for r in 0..n {
        let y = r as f64 - center;
        for c in 0..n {
            let x = c as f64 - center;
            let sx = cos * x + sin * y + center;
            let sy = -sin * x + cos * y + center;
            let x0 = sx.floor();
            let y0 = sy.floor();
            let fx = sx - x0;
            let fy = sy - y0;
            for (dy, wy) in [(0i64, 1.0 - fy), (1, fy)] {
                for (dx, wx) in [(0i64, 1.0 - fx), (1, fx)] {
                    let si = y0 as i64 + dy;
                    let sj = x0 as i64 + dx;
                    if (0..n as i64).contains(&si) && (0..n as i64).contains(&sj) {
                        total += wy * wx * grid.samples[[si as usize, sj as usize]];
                    }
                }
            }
        }
    }
    total
}

/// Downsamples a PSF to a coarser pitch by zero-padding to the nearest
/// multiple of the integer pitch ratio and box-filtering (block sums), then
/// renormalizing. Only integer ratios are supported: 0.4 um -> 2.0 um gives
/// ratio 5, so 128 pads to 130 and resizes to 26 x 26.
pub fn resize_psf(grid: &PsfGrid, target_pitch_um: f64) -> Result<PsfGrid> {
    if (target_pitch_um - grid.pitch_um).abs() < 1e-12 {
        return Ok(grid.clone());
    }
    if target_pitch_um < grid.pitch_um {
        return Err(Error::Config(format!(
            "target pitch {target_pitch_um} um finer than grid pitch {} um",
            grid.pitch_um
        )));
    }
    let ratio = target_pitch_um / grid.pitch_um;
    let k = ratio.round();
    if (ratio - k).abs() > 1e-9 || k < 1.0 {
        return Err(Error::Config(format!(
            "pitch ratio {ratio} is not an integer; only integer ratios are supported"
        )));
    }
    let k = k as usize;
    let n = grid.side();
    let padded = n.div_ceil(k) * k;
    let pad_before = (padded - n) / 2;
    let m = padded / k;
    let mut out = Array2::zeros((m, m));
    for ((r, c), &v) in grid.samples.indexed_iter() {
        out[[(r + pad_before) / k, (c + pad_before) / k]] += v;
    }
    let sum = out.sum();
    if sum > 0.0 {
        out /= sum;
    }
    let mut resized = grid.clone();
    resized.samples = out;
    resized.pitch_um = target_pitch_um;
    Ok(resized)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn grid_from(samples: Array2<f64>, pitch_um: f64) -> PsfGrid {
        PsfGrid::from_samples(samples, pitch_um, (0.0, 0.0), 587.6, 1.0, 0.0).unwrap()
    }

    fn asymmetric_grid(n: usize) -> PsfGrid {
        let samples = Array2::from_shape_fn((n, n), |(r, c)| {
            1.0 + (3 * r + 7 * c + r * c) as f64 % 13.0
        });
        grid_from(samples, 0.4)
    }

    #[test]
    fn zero_rotation_is_identity() {
        let g = asymmetric_grid(16);
        let rotated = rotate_psf(&g, 0.0);
        assert_eq!(g.samples, rotated.samples);
    }

    #[test]
    fn quarter_turn_equals_index_permutation() {
        let g = asymmetric_grid(32);
        let rotated = rotate_psf(&g, 90.0);
        let n = 32;
        // Renormalization of the permuted source mirrors rotate_psf.
        let mut expected = Array2::zeros((n, n));
        for r in 0..n {
            for c in 0..n {
                expected[[r, c]] = g.samples[[n - 1 - c, r]];
            }
        }
        let sum = expected.sum();
        expected /= sum;
        for r in 0..n {
            for c in 0..n {
                assert!(
                    (rotated.samples[[r, c]] - expected[[r, c]]).abs() < 1e-12,
                    "mismatch at ({r},{c})"
                );
            }
        }
    }

    #[test]
    fn interior_psf_keeps_its_energy_under_diagonal_rotation() {
        // Gaussian blob well inside the border: pre-renormalization sum
        // stays within 1e-3 of unity at 45 degrees.
        let n = 64;
        let sigma = 4.0;
        let c0 = (n as f64 - 1.0) / 2.0;
        let samples = Array2::from_shape_fn((n, n), |(r, c)| {
            let dr = r as f64 - c0;
            let dc = c as f64 - c0;
            (-(dr * dr + dc * dc) / (2.0 * sigma * sigma)).exp()
        });
        let g = grid_from(samples, 0.4);
        let sum = rotated_sum(&g, 45.0);
        assert!((sum - 1.0).abs() < 1e-3, "pre-renormalization sum {sum}");
    }

    #[test]
    fn unit_ratio_resize_is_identity() {
        let g = asymmetric_grid(16);
        let resized = resize_psf(&g, 0.4).unwrap();
        assert_eq!(g.samples, resized.samples);
    }

    #[test]
    fn delta_resizes_to_delta() {
        let n = 128;
        let mut samples = Array2::zeros((n, n));
        samples[[37, 101]] = 1.0;
        let g = grid_from(samples, 0.4);
        let resized = resize_psf(&g, 2.0).unwrap();
        assert_eq!(resized.side(), 26);
        // Padding shifts indices by 1 before the block division.
        assert_eq!(resized.samples[[(37 + 1) / 5, (101 + 1) / 5]], 1.0);
        assert!((resized.samples.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_grid_box_filters_to_uniform_interior() {
        let n = 128;
        let fine_value = 1.0 / (n * n) as f64;
        let g = grid_from(Array2::from_elem((n, n), 1.0), 0.4);
        let k = 5;
        let padded = 130;
        let m = padded / k;
        // Interior coarse samples hold exactly 25 fine samples each.
        let mut raw = Array2::<f64>::zeros((m, m));
        for r in 0..n {
            for c in 0..n {
                raw[[(r + 1) / k, (c + 1) / k]] += fine_value;
            }
        }
        for r in 1..m - 1 {
            for c in 1..m - 1 {
                assert!(
                    (raw[[r, c]] - 25.0 * fine_value).abs() < 1e-15,
                    "interior coarse sample should be 25x the fine sample"
                );
            }
        }
        let resized = resize_psf(&g, 2.0).unwrap();
        let expected = raw.clone() / raw.sum();
        assert!(resized
            .samples
            .iter()
            .zip(expected.iter())
            .all(|(a, b)| (a - b).abs() < 1e-15));
    }

    #[test]
    fn non_integer_ratio_is_rejected() {
        let g = asymmetric_grid(16);
        assert!(resize_psf(&g, 1.0).is_err(), "ratio 2.5 must be rejected");
        assert!(resize_psf(&g, 0.2).is_err(), "upsampling must be rejected");
    }
}
