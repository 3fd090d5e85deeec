use std::sync::Arc;

use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Smallest length >= n whose prime factors are all in {2, 3, 5}.
fn next_fast_len(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut k = m;
        for p in [2, 3, 5] {
            while k % p == 0 {
                k /= p;
            }
        }
        if k == 1 {
            return m;
        }
        m += 1;
    }
}

/// Frequency-domain workspace for linear convolutions of `field_h x field_w`
/// inputs with `kernel_h x kernel_w` kernels: forward transforms are padded
/// to the full linear-convolution size so circular wrap-around never aliases
/// into the result.
pub(crate) struct SpectrumPlan {
    field_h: usize,
    field_w: usize,
    full_h: usize,
    full_w: usize,
    nr: usize,
    nc: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

pub(crate) struct Spectrum(Vec<Complex<f64>>);

impl SpectrumPlan {
    pub fn new(field_h: usize, field_w: usize, kernel_h: usize, kernel_w: usize) -> Self {
        let full_h = field_h + kernel_h - 1;
        let full_w = field_w + kernel_w - 1;
        let nr = next_fast_len(full_h);
        let nc = next_fast_len(full_w);
        let mut planner = FftPlanner::new();
        SpectrumPlan {
            field_h,
            field_w,
            full_h,
            full_w,
            nr,
            nc,
            row_fwd: planner.plan_fft_forward(nc),
            row_inv: planner.plan_fft_inverse(nc),
            col_fwd: planner.plan_fft_forward(nr),
            col_inv: planner.plan_fft_inverse(nr),
        }
    }

    fn fft_2d(&self, buf: &mut [Complex<f64>], inverse: bool) {
        let (row, col) = if inverse {
            (&self.row_inv, &self.col_inv)
        } else {
            (&self.row_fwd, &self.col_fwd)
        };
        for r in 0..self.nr {
            row.process(&mut buf[r * self.nc..(r + 1) * self.nc]);
        }
        let mut column = vec![Complex::default(); self.nr];
        for c in 0..self.nc {
            for r in 0..self.nr {
                column[r] = buf[r * self.nc + c];
            }
            col.process(&mut column);
            for r in 0..self.nr {
                buf[r * self.nc + c] = column[r];
            }
        }
    }

    /// Forward transform of a zero-padded field (any shape up to the padded
    /// size).
    pub fn forward(&self, field: &Array2<f64>) -> Spectrum {
        let mut buf = vec![Complex::default(); self.nr * self.nc];
        for ((r, c), &v) in field.indexed_iter() {
            buf[r * self.nc + c] = Complex::new(v, 0.0);
        }
        self.fft_2d(&mut buf, false);
        Spectrum(buf)
    }

    /// Inverse transform of the spectrum product: the full linear
    /// convolution of the two originating fields.
    pub fn convolve_full(&self, a: &Spectrum, b: &Spectrum) -> Array2<f64> {
        let mut buf: Vec<Complex<f64>> =
            a.0.iter().zip(&b.0).map(|(x, y)| x * y).collect();
        self.fft_2d(&mut buf, true);
        let scale = 1.0 / (self.nr * self.nc) as f64;
        Array2::from_shape_fn((self.full_h, self.full_w), |(r, c)| {
            buf[r * self.nc + c].re * scale
        })
    }

    pub fn field_shape(&self) -> (usize, usize) {
        (self.field_h, self.field_w)
    }
}

/// Linear FFT convolution of a tile with a kernel.
///
/// The tile is expected to be pre-padded by the kernel radius; the "same"
/// output places the kernel origin at (kernel_h/2, kernel_w/2), so the
/// result is exactly the valid sliding-window convolution of the padded
/// input. A kernel larger than the tile is a configuration error.
pub struct TileConvolver {
    plan: SpectrumPlan,
    kernel_spec: Spectrum,
    kernel_h: usize,
    kernel_w: usize,
    kernel_value: f64,
}

impl TileConvolver {
    pub fn new(tile_h: usize, tile_w: usize, kernel: &Array2<f64>) -> Result<Self> {
        let (kernel_h, kernel_w) = kernel.dim();
        if kernel_h == 0 || kernel_w == 0 || tile_h == 0 || tile_w == 0 {
            return Err(Error::Config("empty tile or kernel".into()));
        }
        if kernel_h > tile_h || kernel_w > tile_w {
            return Err(Error::Config(format!(
                "kernel {kernel_h}x{kernel_w} larger than padded tile {tile_h}x{tile_w}"
            )));
        }
        let plan = SpectrumPlan::new(tile_h, tile_w, kernel_h, kernel_w);
        let kernel_spec = plan.forward(kernel);
        Ok(TileConvolver {
            plan,
            kernel_spec,
            kernel_h,
            kernel_w,
            kernel_value: kernel[[0, 0]],
        })
    }

    fn check_shape(&self, tile: &Array2<f64>) -> Result<()> {
        if tile.dim() != self.plan.field_shape() {
            return Err(Error::ShapeMismatch(format!(
                "tile {:?} does not match convolver shape {:?}",
                tile.dim(),
                self.plan.field_shape()
            )));
        }
        Ok(())
    }

    /// Full linear convolution: (tile_h + kernel_h - 1, tile_w + kernel_w - 1).
    pub fn full(&self, tile: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_shape(tile)?;
        if self.kernel_h == 1 && self.kernel_w == 1 {
            // A 1x1 kernel is a pure scale; keep it exact.
            return Ok(tile * self.kernel_value);
        }
        let spec = self.plan.forward(tile);
        Ok(self.plan.convolve_full(&spec, &self.kernel_spec))
    }

    /// Same-size linear convolution with the kernel origin at
    /// (kernel_h/2, kernel_w/2).
    pub fn same(&self, tile: &Array2<f64>) -> Result<Array2<f64>> {
        let full = self.full(tile)?;
        let (h0, w0) = (self.kernel_h / 2, self.kernel_w / 2);
        let (th, tw) = self.plan.field_shape();
        Ok(full.slice(ndarray::s![h0..h0 + th, w0..w0 + tw]).to_owned())
    }
}

/// One-shot same-size FFT convolution of a padded tile with a unit-sum
/// kernel; equivalent to direct spatial convolution on the valid region.
pub fn fft_convolve(tile: &Array2<f64>, kernel: &Array2<f64>) -> Result<Array2<f64>> {
    TileConvolver::new(tile.nrows(), tile.ncols(), kernel)?.same(tile)
}
