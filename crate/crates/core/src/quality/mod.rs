//! Scalar evaluators: depth metrics, image metrics, the artifact score, and
//! the training losses as standalone numerical operations.

mod artifact;
mod depth;
mod image;
mod loss;

pub use artifact::{artifact_score, canny_edges, ArtifactParams, SmoothMask};
pub use depth::{depth_metrics, DepthMetrics};
pub use image::{psnr, ssim, ssim_rgb};
pub use loss::{
    content_loss, msfr_loss, silog_loss, silog_loss_printed, total_loss, JointPrediction,
    LossWeights,
};

use serde::Serialize;

/// Aggregated evaluation scalars with the parameters that produced them.
///
/// `psnr_db` uses `f64::INFINITY` as the zero-MSE sentinel, which serializes
/// to JSON null.
#[derive(Clone, Debug, Serialize)]
pub struct MetricsReport {
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    pub abs_rel: f64,
    pub rmse: f64,
    pub psnr_db: f64,
    pub ssim: f64,
    pub artifact_score: f64,
    pub valid_pixel_count: usize,
}
