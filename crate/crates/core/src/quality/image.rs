use ndarray::{Array2, Array3};

use crate::error::{Error, Result};

/// Peak signal-to-noise ratio in dB with peak 1.0. Identical inputs return
/// the infinity sentinel.
pub fn psnr(pred: &Array3<f64>, gt: &Array3<f64>) -> Result<f64> {
    if pred.dim() != gt.dim() {
        return Err(Error::ShapeMismatch(format!(
            "pred {:?} vs gt {:?}",
            pred.dim(),
            gt.dim()
        )));
    }
    let n = pred.len() as f64;
    let mse: f64 = pred
        .iter()
        .zip(gt.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn gaussian_window() -> [f64; SSIM_WINDOW * SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW * SSIM_WINDOW];
    let c = (SSIM_WINDOW as f64 - 1.0) / 2.0;
    let mut sum = 0.0;
    for r in 0..SSIM_WINDOW {
        for col in 0..SSIM_WINDOW {
            let dr = r as f64 - c;
            let dc = col as f64 - c;
            let v = (-(dr * dr + dc * dc) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
            w[r * SSIM_WINDOW + col] = v;
            sum += v;
        }
    }
    for v in &mut w {
        *v /= sum;
    }
    w
}

/// Structural similarity over an 11x11 Gaussian window (sigma 1.5,
/// K1 = 0.01, K2 = 0.03, dynamic range 1), averaged over all fully contained
/// window positions.
pub fn ssim(pred: &Array2<f64>, gt: &Array2<f64>) -> Result<f64> {
    if pred.dim() != gt.dim() {
        return Err(Error::ShapeMismatch(format!(
            "pred {:?} vs gt {:?}",
            pred.dim(),
            gt.dim()
        )));
    }
    let (h, w) = pred.dim();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::InvalidInput(format!(
            "image {h}x{w} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
        )));
    }
    let window = gaussian_window();
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;

    let mut total = 0.0;
    let mut count = 0usize;
    for r0 in 0..=h - SSIM_WINDOW {
        for c0 in 0..=w - SSIM_WINDOW {
            let mut mu_x = 0.0;
            let mut mu_y = 0.0;
            for r in 0..SSIM_WINDOW {
                for c in 0..SSIM_WINDOW {
                    let wv = window[r * SSIM_WINDOW + c];
                    mu_x += wv * pred[[r0 + r, c0 + c]];
                    mu_y += wv * gt[[r0 + r, c0 + c]];
                }
            }
            let mut var_x = 0.0;
            let mut var_y = 0.0;
            let mut cov = 0.0;
            for r in 0..SSIM_WINDOW {
                for c in 0..SSIM_WINDOW {
                    let wv = window[r * SSIM_WINDOW + c];
                    let dx = pred[[r0 + r, c0 + c]] - mu_x;
                    let dy = gt[[r0 + r, c0 + c]] - mu_y;
                    var_x += wv * dx * dx;
                    var_y += wv * dy * dy;
                    cov += wv * dx * dy;
                }
            }
            total += ((2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2))
                / ((mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2));
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// RGB SSIM as the mean of the per-channel scores.
pub fn ssim_rgb(pred: &Array3<f64>, gt: &Array3<f64>) -> Result<f64> {
    if pred.dim() != gt.dim() {
        return Err(Error::ShapeMismatch(format!(
            "pred {:?} vs gt {:?}",
            pred.dim(),
            gt.dim()
        )));
    }
    let mut total = 0.0;
    for ch in 0..3 {
        let p = pred.index_axis(ndarray::Axis(2), ch).to_owned();
        let g = gt.index_axis(ndarray::Axis(2), ch).to_owned();
        total += ssim(&p, &g)?;
    }
    Ok(total / 3.0)
}
