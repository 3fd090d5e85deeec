use ndarray::Array2;

use crate::error::{Error, Result};

/// Depth-estimation accuracy and error scalars over the valid pixels.
#[derive(Copy, Clone, Debug, serde::Serialize)]
pub struct DepthMetrics {
    /// Fraction with max(pred/gt, gt/pred) < 1.25.
    pub delta1: f64,
    /// Fraction with the ratio below 1.25^2.
    pub delta2: f64,
    /// Fraction with the ratio below 1.25^3.
    pub delta3: f64,
    /// Mean |pred - gt| / gt.
    pub abs_rel: f64,
    /// sqrt(mean (pred - gt)^2).
    pub rmse: f64,
    pub valid_pixel_count: usize,
}

/// Threshold accuracies, absolute relative error, and RMSE between a
/// predicted and ground-truth depth map. Only pixels where `valid` is true
/// (or all pixels when no mask is given) participate; depths must be
/// positive there.
pub fn depth_metrics(
    pred: &Array2<f64>,
    gt: &Array2<f64>,
    valid: Option<&Array2<bool>>,
) -> Result<DepthMetrics> {
    if pred.dim() != gt.dim() {
        return Err(Error::ShapeMismatch(format!(
            "pred {:?} vs gt {:?}",
            pred.dim(),
            gt.dim()
        )));
    }
    if let Some(mask) = valid {
        if mask.dim() != pred.dim() {
            return Err(Error::ShapeMismatch("valid mask shape".into()));
        }
    }

    let thresholds = [1.25, 1.25 * 1.25, 1.25 * 1.25 * 1.25];
    let mut counts = [0usize; 3];
    let mut abs_rel = 0.0;
    let mut sq_err = 0.0;
    let mut n = 0usize;

    for ((r, c), &p) in pred.indexed_iter() {
        let g = gt[[r, c]];
        if let Some(mask) = valid {
            if !mask[[r, c]] {
                continue;
            }
        }
        if !(p > 0.0) || !(g > 0.0) || !p.is_finite() || !g.is_finite() {
            return Err(Error::InvalidInput(format!(
                "non-positive depth at ({r}, {c}): pred {p}, gt {g}"
            )));
        }
        let ratio = (p / g).max(g / p);
        for (i, &t) in thresholds.iter().enumerate() {
            if ratio < t {
                counts[i] += 1;
            }
        }
        abs_rel += (p - g).abs() / g;
        sq_err += (p - g) * (p - g);
        n += 1;
    }

    if n == 0 {
        return Err(Error::EmptyMask);
    }
    let nf = n as f64;
    Ok(DepthMetrics {
        delta1: counts[0] as f64 / nf,
        delta2: counts[1] as f64 / nf,
        delta3: counts[2] as f64 / nf,
        abs_rel: abs_rel / nf,
        rmse: (sq_err / nf).sqrt(),
        valid_pixel_count: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_prediction_scores_perfectly() {
        let gt = Array2::from_shape_fn((8, 8), |(r, c)| 1.0 + 0.1 * (r + c) as f64);
        let m = depth_metrics(&gt, &gt, None).unwrap();
        assert_eq!(m.delta1, 1.0);
        assert_eq!(m.delta2, 1.0);
        assert_eq!(m.delta3, 1.0);
        assert_eq!(m.abs_rel, 0.0);
        assert_eq!(m.rmse, 0.0);
        assert_eq!(m.valid_pixel_count, 64);
    }

    #[test]
    fn uniform_thirty_percent_overshoot() {
        // ratio 1.3 fails the 1.25 threshold, passes 1.5625 and beyond.
        let gt = Array2::from_elem((4, 4), 2.0);
        let pred = gt.mapv(|v| 1.3 * v);
        let m = depth_metrics(&pred, &gt, None).unwrap();
        assert_eq!(m.delta1, 0.0);
        assert_eq!(m.delta2, 1.0);
        assert_eq!(m.delta3, 1.0);
        assert!((m.abs_rel - 0.3).abs() < 1e-12);
        assert!((m.rmse - 0.6).abs() < 1e-12, "rmse of uniform 0.6 m error");
    }

    #[test]
    fn deltas_are_monotone() {
        let gt = Array2::from_shape_fn((16, 16), |(r, c)| 0.5 + (r * 16 + c) as f64 * 0.03);
        let pred = gt.mapv(|v| v * (1.0 + 0.4 * (v.sin())));
        let m = depth_metrics(&pred, &gt, None).unwrap();
        assert!(m.delta1 <= m.delta2 && m.delta2 <= m.delta3);
    }

    #[test]
    fn empty_mask_is_an_error() {
        let gt = Array2::from_elem((4, 4), 1.0);
        let mask = Array2::from_elem((4, 4), false);
        assert!(matches!(
            depth_metrics(&gt, &gt, Some(&mask)),
            Err(Error::EmptyMask)
        ));
    }

    #[test]
    fn invalid_pixels_are_skipped_by_the_mask() {
        let gt = Array2::from_elem((2, 2), 1.0);
        let mut pred = gt.clone();
        pred[[0, 0]] = -5.0;
        let mut mask = Array2::from_elem((2, 2), true);
        mask[[0, 0]] = false;
        let m = depth_metrics(&pred, &gt, Some(&mask)).unwrap();
        assert_eq!(m.valid_pixel_count, 3);
        assert_eq!(m.delta1, 1.0);
    }
}
