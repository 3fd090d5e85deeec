use ndarray::{Array2, Array3};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn default_gamma_cont() -> f64 {
    1.0
}
fn default_gamma_msfr() -> f64 {
    0.1
}
fn default_gamma_silog() -> f64 {
    0.1
}
fn default_silog_lambda() -> f64 {
    1.0
}

/// Weights of the combined training loss.
#[derive(Copy, Clone, Debug, Serialize, Deserialize)]
pub struct LossWeights {
    #[serde(default = "default_gamma_cont")]
    pub gamma_cont: f64,
    #[serde(default = "default_gamma_msfr")]
    pub gamma_msfr: f64,
    #[serde(default = "default_gamma_silog")]
    pub gamma_silog: f64,
    #[serde(default = "default_silog_lambda")]
    pub silog_lambda: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            gamma_cont: default_gamma_cont(),
            gamma_msfr: default_gamma_msfr(),
            gamma_silog: default_gamma_silog(),
            silog_lambda: default_silog_lambda(),
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if self.gamma_cont < 0.0 || self.gamma_msfr < 0.0 || self.gamma_silog < 0.0 {
            return Err(Error::Config("loss weights must be nonnegative".into()));
        }
        Ok(())
    }

    /// The weighted sum of the three component losses.
    pub fn combine(&self, content: f64, msfr: f64, silog: f64) -> f64 {
        self.gamma_cont * content + self.gamma_msfr * msfr + self.gamma_silog * silog
    }
}

fn check_scales(pred: &[Array3<f64>], gt: &[Array3<f64>]) -> Result<()> {
    if pred.len() != gt.len() || pred.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "{} predicted scales vs {} ground-truth scales",
            pred.len(),
            gt.len()
        )));
    }
    for (i, (p, g)) in pred.iter().zip(gt).enumerate() {
        if p.dim() != g.dim() {
            return Err(Error::ShapeMismatch(format!(
                "scale {i}: {:?} vs {:?}",
                p.dim(),
                g.dim()
            )));
        }
    }
    Ok(())
}

/// Multi-scale content loss: the mean absolute difference summed over
/// scales (each scale normalized by its own element count).
pub fn content_loss(pred_scales: &[Array3<f64>], gt_scales: &[Array3<f64>]) -> Result<f64> {
    check_scales(pred_scales, gt_scales)?;
    let mut total = 0.0;
    for (p, g) in pred_scales.iter().zip(gt_scales) {
        let l1: f64 = p.iter().zip(g.iter()).map(|(a, b)| (a - b).abs()).sum();
        total += l1 / p.len() as f64;
    }
    Ok(total)
}

fn fft2_unnormalized(field: &Array2<f64>) -> Vec<Complex<f64>> {
    let (h, w) = field.dim();
    let mut planner = FftPlanner::new();
    let row_fft = planner.plan_fft_forward(w);
    let col_fft = planner.plan_fft_forward(h);
    let mut buf: Vec<Complex<f64>> =
        field.iter().map(|&v| Complex::new(v, 0.0)).collect();
    for r in 0..h {
        row_fft.process(&mut buf[r * w..(r + 1) * w]);
    }
    let mut column = vec![Complex::default(); h];
    for c in 0..w {
        for r in 0..h {
            column[r] = buf[r * w + c];
        }
        col_fft.process(&mut column);
        for r in 0..h {
            buf[r * w + c] = column[r];
        }
    }
    buf
}

/// Multi-scale frequency reconstruction loss: the L1 distance between
/// unnormalized forward Fourier transforms, measured over concatenated real
/// and imaginary parts, per scale normalized by the element count.
pub fn msfr_loss(pred_scales: &[Array3<f64>], gt_scales: &[Array3<f64>]) -> Result<f64> {
    check_scales(pred_scales, gt_scales)?;
    let mut total = 0.0;
    for (p, g) in pred_scales.iter().zip(gt_scales) {
        let (_, _, channels) = p.dim();
        let mut l1 = 0.0;
        for ch in 0..channels {
            let ps = fft2_unnormalized(&p.index_axis(ndarray::Axis(2), ch).to_owned());
            let gs = fft2_unnormalized(&g.index_axis(ndarray::Axis(2), ch).to_owned());
            l1 += ps
                .iter()
                .zip(&gs)
                .map(|(a, b)| (a.re - b.re).abs() + (a.im - b.im).abs())
                .sum::<f64>();
        }
        total += l1 / p.len() as f64;
    }
    Ok(total)
}

fn log_residuals(pred: &Array2<f64>, gt: &Array2<f64>) -> Result<Vec<f64>> {
    if pred.dim() != gt.dim() {
        return Err(Error::ShapeMismatch(format!(
            "pred {:?} vs gt {:?}",
            pred.dim(),
            gt.dim()
        )));
    }
    pred.iter()
        .zip(gt.iter())
        .map(|(&p, &g)| {
            if !(p > 0.0) || !(g > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "depths must be positive: pred {p}, gt {g}"
                )));
            }
            Ok(g.ln() - p.ln())
        })
        .collect()
}

/// Scale-invariant logarithmic depth loss in the standard squared-first
/// form: mean(g^2) - lambda * mean(g)^2 with g = ln(gt) - ln(pred). With
/// lambda = 1 the loss is invariant to a global positive scaling of the
/// prediction.
pub fn silog_loss(pred: &Array2<f64>, gt: &Array2<f64>, lambda: f64) -> Result<f64> {
    let g = log_residuals(pred, gt)?;
    let n = g.len() as f64;
    let mean_sq = g.iter().map(|v| v * v).sum::<f64>() / n;
    let mean = g.iter().sum::<f64>() / n;
    Ok(mean_sq - lambda * mean * mean)
}

/// The literal printed variant with the squares transposed: mean(g) -
/// (1/N^2) * sum(g^2). Kept for comparison; not scale-invariant.
pub fn silog_loss_printed(pred: &Array2<f64>, gt: &Array2<f64>) -> Result<f64> {
    let g = log_residuals(pred, gt)?;
    let n = g.len() as f64;
    let mean = g.iter().sum::<f64>() / n;
    let sum_sq = g.iter().map(|v| v * v).sum::<f64>();
    Ok(mean - sum_sq / (n * n))
}

/// A joint prediction: multi-scale restored images plus a depth map.
#[derive(Clone, Debug)]
pub struct JointPrediction {
    pub image_scales: Vec<Array3<f64>>,
    pub depth: Array2<f64>,
}

/// Combined training loss over a joint prediction and its target.
pub fn total_loss(
    pred: &JointPrediction,
    target: &JointPrediction,
    weights: &LossWeights,
) -> Result<f64> {
    weights.validate()?;
    let content = content_loss(&pred.image_scales, &target.image_scales)?;
    let msfr = msfr_loss(&pred.image_scales, &target.image_scales)?;
    let silog = silog_loss(&pred.depth, &target.depth, weights.silog_lambda)?;
    Ok(weights.combine(content, msfr, silog))
}
