use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn default_canny_sigma() -> f64 {
    1.4
}
fn default_canny_low() -> f64 {
    0.1
}
fn default_canny_high() -> f64 {
    0.2
}
fn default_dilate_size() -> usize {
    5
}
fn default_dilate_iterations() -> usize {
    2
}

/// Parameters of the smooth-region mask construction, echoed in reports.
#[derive(Copy, Clone, Debug, Serialize, Deserialize)]
pub struct ArtifactParams {
    #[serde(default = "default_canny_sigma")]
    pub canny_sigma: f64,
    /// Hysteresis thresholds on the Sobel magnitude normalized to [0, 1]
    /// grayscale (a unit step edge has magnitude ~1).
    #[serde(default = "default_canny_low")]
    pub canny_low: f64,
    #[serde(default = "default_canny_high")]
    pub canny_high: f64,
    #[serde(default = "default_dilate_size")]
    pub dilate_size: usize,
    #[serde(default = "default_dilate_iterations")]
    pub dilate_iterations: usize,
}

impl Default for ArtifactParams {
    fn default() -> Self {
        ArtifactParams {
            canny_sigma: default_canny_sigma(),
            canny_low: default_canny_low(),
            canny_high: default_canny_high(),
            dilate_size: default_dilate_size(),
            dilate_iterations: default_dilate_iterations(),
        }
    }
}

/// Binary smooth-region mask (true = smooth) with its parameters.
#[derive(Clone, Debug)]
pub struct SmoothMask {
    pub mask: Array2<bool>,
    pub params: ArtifactParams,
}

impl SmoothMask {
    pub fn smooth_pixel_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// Rec. 601 luma.
pub fn luma(rgb: &Array3<f64>) -> Array2<f64> {
    let (h, w, _) = rgb.dim();
    Array2::from_shape_fn((h, w), |(r, c)| {
        0.299 * rgb[[r, c, 0]] + 0.587 * rgb[[r, c, 1]] + 0.114 * rgb[[r, c, 2]]
    })
}

/// Separable Gaussian blur with edge replication.
fn gaussian_blur(img: &Array2<f64>, sigma: f64) -> Array2<f64> {
    if sigma <= 0.0 {
        return img.clone();
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    let (h, w) = img.dim();
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;

    let mut rows = Array2::zeros((h, w));
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            for (i, k) in kernel.iter().enumerate() {
                let cc = clamp(c as isize + i as isize - radius, w);
                acc += k * img[[r, cc]];
            }
            rows[[r, c]] = acc / norm;
        }
    }
    let mut out = Array2::zeros((h, w));
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            for (i, k) in kernel.iter().enumerate() {
                let rr = clamp(r as isize + i as isize - radius, h);
                acc += k * rows[[rr, c]];
            }
            out[[r, c]] = acc / norm;
        }
    }
    out
}

/// Canny edge detector: Gaussian smoothing, Sobel gradients, non-maximum
/// suppression, and double-threshold hysteresis. Magnitudes are normalized
/// so a unit step edge reads ~1.
pub fn canny_edges(gray: &Array2<f64>, params: &ArtifactParams) -> Array2<bool> {
    let (h, w) = gray.dim();
    let smoothed = gaussian_blur(gray, params.canny_sigma);
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;

    let mut gx = Array2::zeros((h, w));
    let mut gy = Array2::zeros((h, w));
    for r in 0..h {
        for c in 0..w {
            let s = |dr: isize, dc: isize| {
                smoothed[[clamp(r as isize + dr, h), clamp(c as isize + dc, w)]]
            };
            gx[[r, c]] = (s(-1, 1) + 2.0 * s(0, 1) + s(1, 1))
                - (s(-1, -1) + 2.0 * s(0, -1) + s(1, -1));
            gy[[r, c]] = (s(1, -1) + 2.0 * s(1, 0) + s(1, 1))
                - (s(-1, -1) + 2.0 * s(-1, 0) + s(-1, 1));
        }
    }
    let magnitude = Array2::from_shape_fn((h, w), |(r, c)| {
        gx[[r, c]].hypot(gy[[r, c]]) / 4.0
    });

    // Non-maximum suppression along the quantized gradient direction.
    let mut thin = Array2::from_elem((h, w), 0.0);
    for r in 0..h {
        for c in 0..w {
            let m = magnitude[[r, c]];
            if m == 0.0 {
                continue;
            }
            let angle = gy[[r, c]].atan2(gx[[r, c]]).to_degrees();
            let a = ((angle % 180.0) + 180.0) % 180.0;
            let (d1, d2): ((isize, isize), (isize, isize)) = if !(22.5..157.5).contains(&a) {
                ((0, 1), (0, -1))
            } else if a < 67.5 {
                ((1, 1), (-1, -1))
            } else if a < 112.5 {
                ((1, 0), (-1, 0))
            } else {
                ((1, -1), (-1, 1))
            };
            let n1 = magnitude[[clamp(r as isize + d1.0, h), clamp(c as isize + d1.1, w)]];
            let n2 = magnitude[[clamp(r as isize + d2.0, h), clamp(c as isize + d2.1, w)]];
            if m >= n1 && m >= n2 {
                thin[[r, c]] = m;
            }
        }
    }

    // Hysteresis: grow weak edges 8-connected from strong seeds.
    let mut edges = Array2::from_elem((h, w), false);
    let mut stack = Vec::new();
    for r in 0..h {
        for c in 0..w {
            if thin[[r, c]] >= params.canny_high && !edges[[r, c]] {
                edges[[r, c]] = true;
                stack.push((r, c));
                while let Some((er, ec)) = stack.pop() {
                    for dr in -1isize..=1 {
                        for dc in -1isize..=1 {
                            let nr = er as isize + dr;
                            let nc = ec as isize + dc;
                            if nr < 0 || nr >= h as isize || nc < 0 || nc >= w as isize {
                                continue;
                            }
                            let (nr, nc) = (nr as usize, nc as usize);
                            if !edges[[nr, nc]] && thin[[nr, nc]] >= params.canny_low {
                                edges[[nr, nc]] = true;
                                stack.push((nr, nc));
                            }
                        }
                    }
                }
            }
        }
    }
    edges
}

/// Morphological dilation by a square structuring element, iterated.
fn dilate(mask: &Array2<bool>, size: usize, iterations: usize) -> Array2<bool> {
    let radius = (size / 2) as isize;
    let (h, w) = mask.dim();
    let mut current = mask.clone();
    for _ in 0..iterations {
        let mut next = Array2::from_elem((h, w), false);
        for r in 0..h {
            for c in 0..w {
                if !current[[r, c]] {
                    continue;
                }
                for dr in -radius..=radius {
                    for dc in -radius..=radius {
                        let nr = r as isize + dr;
                        let nc = c as isize + dc;
                        if nr >= 0 && nr < h as isize && nc >= 0 && nc < w as isize {
                            next[[nr as usize, nc as usize]] = true;
                        }
                    }
                }
            }
        }
        current = next;
    }
    current
}

/// Absolute response of the 3x3 4-neighbor Laplacian, zero-padded.
fn laplacian_abs(gray: &Array2<f64>) -> Array2<f64> {
    let (h, w) = gray.dim();
    Array2::from_shape_fn((h, w), |(r, c)| {
        let at = |rr: isize, cc: isize| {
            if rr < 0 || rr >= h as isize || cc < 0 || cc >= w as isize {
                0.0
            } else {
                gray[[rr as usize, cc as usize]]
            }
        };
        let (r, c) = (r as isize, c as isize);
        (at(r - 1, c) + at(r + 1, c) + at(r, c - 1) + at(r, c + 1) - 4.0 * at(r, c)).abs()
    })
}

/// Artifact score: mean absolute Laplacian of the simulated image over the
/// smooth regions of the reference.
///
/// The smooth mask is the complement of the dilated Canny edge map of the
/// reference; the one-pixel border (where the zero-padded Laplacian is not
/// meaningful) is excluded from the mask.
pub fn artifact_score(
    sim: &Array3<f64>,
    gt_reference: &Array3<f64>,
    params: &ArtifactParams,
) -> Result<(f64, SmoothMask)> {
    if sim.dim() != gt_reference.dim() {
        return Err(Error::ShapeMismatch(format!(
            "sim {:?} vs reference {:?}",
            sim.dim(),
            gt_reference.dim()
        )));
    }
    let (h, w, _) = sim.dim();
    let edges = canny_edges(&luma(gt_reference), params);
    let dilated = dilate(&edges, params.dilate_size, params.dilate_iterations);
    let mut mask = dilated.mapv(|e| !e);
    for r in 0..h {
        mask[[r, 0]] = false;
        mask[[r, w - 1]] = false;
    }
    for c in 0..w {
        mask[[0, c]] = false;
        mask[[h - 1, c]] = false;
    }

    let response = laplacian_abs(&luma(sim));
    let mut total = 0.0;
    let mut count = 0usize;
    for ((r, c), &m) in mask.indexed_iter() {
        if m {
            total += response[[r, c]];
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    Ok((total / count as f64, SmoothMask { mask, params: *params }))
}
