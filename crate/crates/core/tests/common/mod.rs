//! Oracles and fixtures shared between the integration suites. Everything
//! here is deliberately independent of the library's computation paths:
//! direct spatial convolution, per-pixel formation, scalar paraxial algebra.

#![allow(dead_code)]

use monoptic::formation::{layerize, PsfProvider, RenderConfig, UniformPsfs, ENERGY_EPS};
use monoptic::optics::{
    load_prescription, trace_ray, LensPrescription, MaterialCatalog, Ray, Vec3,
};
use monoptic::psfmap::Channel;
use ndarray::{Array2, Array3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn data(file: &str) -> String {
    format!("{}/../../data/{}", env!("CARGO_MANIFEST_DIR"), file)
}

pub fn catalog() -> MaterialCatalog {
    MaterialCatalog::load(data("materials.json")).expect("material catalog loads")
}

pub fn monocentric() -> LensPrescription {
    load_prescription(data("monocentric.json")).expect("monocentric prescription loads")
}

pub fn doublegauss() -> LensPrescription {
    load_prescription(data("doublegauss.json")).expect("doublegauss prescription loads")
}

/// Direct sliding-window linear convolution, cropped to "same" with the
/// kernel origin at (kh/2, kw/2). The spatial-domain oracle for the FFT path.
pub fn direct_convolve_same(field: &Array2<f64>, kernel: &Array2<f64>) -> Array2<f64> {
    let (fh, fw) = field.dim();
    let (kh, kw) = kernel.dim();
    let (oh, ow) = (kh / 2, kw / 2);
    Array2::from_shape_fn((fh, fw), |(r, c)| {
        let mut acc = 0.0;
        for kr in 0..kh {
            for kc in 0..kw {
                let fr = r as isize + oh as isize - kr as isize;
                let fc = c as isize + ow as isize - kc as isize;
                if fr >= 0 && (fr as usize) < fh && fc >= 0 && (fc as usize) < fw {
                    acc += kernel[[kr, kc]] * field[[fr as usize, fc as usize]];
                }
            }
        }
        acc
    })
}

pub fn gaussian_kernel(side: usize, sigma: f64) -> Array2<f64> {
    let c0 = (side as f64 - 1.0) / 2.0;
    let mut k = Array2::from_shape_fn((side, side), |(r, c)| {
        let dr = r as f64 - c0;
        let dc = c as f64 - c0;
        (-(dr * dr + dc * dc) / (2.0 * sigma * sigma)).exp()
    });
    let sum = k.sum();
    k /= sum;
    k
}

pub fn random_unit_kernel(rng: &mut ChaCha8Rng, side: usize) -> Array2<f64> {
    let mut k = Array2::from_shape_fn((side, side), |_| rng.random_range(0.0..1.0));
    let sum = k.sum();
    k /= sum;
    k
}

/// Foreground square at 1.0 m over a background at 1.5 m, random content.
pub fn two_layer_scene(
    h: usize,
    w: usize,
    square: (usize, usize, usize),
    rng: &mut ChaCha8Rng,
) -> (Array3<f64>, Array2<f64>) {
    let rgb = Array3::from_shape_fn((h, w, 3), |_| rng.random_range(0.05..0.95));
    let (r0, c0, side) = square;
    let depth = Array2::from_shape_fn((h, w), |(r, c)| {
        if r >= r0 && r < r0 + side && c >= c0 && c < c0 + side {
            1.0
        } else {
            1.5
        }
    });
    (rgb, depth)
}

/// Per-pixel brute-force evaluation of the occlusion formation model with
/// one spatially-uniform kernel set: every term computed by direct
/// convolution over the whole image, layers composited back to front.
pub fn brute_force_formation(
    rgb: &Array3<f64>,
    depth: &Array2<f64>,
    provider: &UniformPsfs,
    config: &RenderConfig,
) -> Array3<f64> {
    let stack = layerize(rgb, depth, config).unwrap();
    let (h, w) = (stack.height(), stack.width());
    let mut out = Array3::<f64>::zeros((h, w, 3));
    for channel in Channel::ALL {
        let mut acc = Array2::<f64>::zeros((h, w));
        let mut cumulative = Array2::<f64>::zeros((h, w));
        for k in (0..stack.layer_count()).rev() {
            let alpha = stack.alpha(k);
            if alpha.sum() == 0.0 {
                continue;
            }
            cumulative += &alpha;
            let kernel = provider.kernel(channel, k, (0, 0));
            let energy = direct_convolve_same(&cumulative, &kernel);
            let blurred_alpha = direct_convolve_same(&alpha, &kernel);
            let blurred_image =
                direct_convolve_same(&stack.image_channel(k, channel.index()), &kernel);
            for r in 0..h {
                for c in 0..w {
                    let e = energy[[r, c]];
                    let (i_n, a_n) = if e >= ENERGY_EPS {
                        (blurred_image[[r, c]] / e, blurred_alpha[[r, c]] / e)
                    } else {
                        (0.0, 0.0)
                    };
                    acc[[r, c]] = acc[[r, c]] * (1.0 - a_n) + i_n;
                }
            }
        }
        for ((r, c), &v) in acc.indexed_iter() {
            out[[r, c, channel.index()]] = v;
        }
    }
    out
}

/// Independent ABCD oracle: multiplies per-surface refraction and transfer
/// matrices in (y, n*u) convention and reads EFL = -1/C.
pub fn abcd_efl(p: &LensPrescription, c: &MaterialCatalog, wavelength_nm: f64) -> f64 {
    let mut m = [[1.0f64, 0.0], [0.0, 1.0]];
    let mul = |a: [[f64; 2]; 2], b: [[f64; 2]; 2]| {
        [
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ]
    };
    let mut n_before = 1.0;
    for s in &p.surfaces {
        let n_after = c.index_of(&s.material, wavelength_nm).unwrap();
        let power = match s.radius_mm {
            Some(r) => (n_after - n_before) / r,
            None => 0.0,
        };
        m = mul([[1.0, 0.0], [-power, 1.0]], m);
        m = mul([[1.0, s.thickness_mm / n_after], [0.0, 1.0]], m);
        n_before = n_after;
    }
    -1.0 / m[1][0]
}

/// EFL measured from an actual near-axis trace: a parallel ray at small
/// height h exits with slope u, and f = -h/u.
pub fn traced_efl(p: &LensPrescription, c: &MaterialCatalog, wavelength_nm: f64) -> f64 {
    let model = p.resolve(c, wavelength_nm).unwrap();
    let h = 1e-3;
    let hit = trace_ray(
        &model,
        Ray::new(Vec3::new(0.0, h, -10.0), Vec3::new(0.0, 0.0, 1.0), wavelength_nm),
    )
    .unwrap();
    let u = hit.direction.y / hit.direction.z;
    -h / u
}
