use std::io::{Read, Write};
use std::path::Path;

use image::{ImageBuffer, Luma, Rgb};
use ndarray::{Array2, Array3};

use crate::error::{Error, Result};

/// Loads an 8-bit RGB PNG as linear [0, 1] intensities (plain division by
/// 255; optional sRGB decode).
pub fn load_rgb_png(path: impl AsRef<Path>, gamma_decode: bool) -> Result<Array3<f64>> {
    let path = path.as_ref();
    let img = image::open(path)
        .map_err(|e| Error::Image { path: path.into(), source: e })?
        .to_rgb8();
    let (w, h) = img.dimensions();
    let mut out = Array3::zeros((h as usize, w as usize, 3));
    for (x, y, pixel) in img.enumerate_pixels() {
        for ch in 0..3 {
            let mut v = pixel[ch] as f64 / 255.0;
            if gamma_decode {
                v = srgb_to_linear(v);
            }
            out[[y as usize, x as usize, ch]] = v;
        }
    }
    Ok(out)
}

fn srgb_to_linear(v: f64) -> f64 {
    if v <= 0.04045 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

/// Writes linear intensities as an 8-bit PNG, clipping to [0, 1].
pub fn save_rgb_png(path: impl AsRef<Path>, pixels: &Array3<f64>) -> Result<()> {
    let path = path.as_ref();
    let (h, w, _) = pixels.dim();
    let img = ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
        let px = |ch: usize| {
            (pixels[[y as usize, x as usize, ch]].clamp(0.0, 1.0) * 255.0).round() as u8
        };
        Rgb([px(0), px(1), px(2)])
    });
    img.save(path).map_err(|e| Error::Image { path: path.into(), source: e })
}

/// Writes a single-channel field as a peak-scaled 16-bit PNG.
pub fn save_peak_scaled_png16(path: impl AsRef<Path>, field: &Array2<f64>) -> Result<()> {
    let path = path.as_ref();
    let peak = field.iter().fold(0.0f64, |m, &v| m.max(v));
    let scale = if peak > 0.0 { 65535.0 / peak } else { 0.0 };
    let (h, w) = field.dim();
    let img = ImageBuffer::<Luma<u16>, Vec<u16>>::from_fn(w as u32, h as u32, |x, y| {
        Luma([(field[[y as usize, x as usize]] * scale).round().clamp(0.0, 65535.0) as u16])
    });
    img.save(path).map_err(|e| Error::Image { path: path.into(), source: e })
}

/// Writes a depth map as a 16-bit PNG in millimeters.
pub fn save_depth_png16(path: impl AsRef<Path>, depth_m: &Array2<f64>) -> Result<()> {
    let path = path.as_ref();
    let (h, w) = depth_m.dim();
    let img = ImageBuffer::<Luma<u16>, Vec<u16>>::from_fn(w as u32, h as u32, |x, y| {
        let mm = depth_m[[y as usize, x as usize]] * 1000.0;
        Luma([mm.round().clamp(0.0, 65535.0) as u16])
    });
    img.save(path).map_err(|e| Error::Image { path: path.into(), source: e })
}

/// Loads a depth map: 16-bit (or 8-bit) grayscale PNG in millimeters, or the
/// raw float32 format (8-byte header with width and height as little-endian
/// u32, then row-major f32 meters).
pub fn load_depth(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some("png") => {
            let img = image::open(path)
                .map_err(|e| Error::Image { path: path.into(), source: e })?
                .to_luma16();
            let (w, h) = img.dimensions();
            Ok(Array2::from_shape_fn((h as usize, w as usize), |(r, c)| {
                img.get_pixel(c as u32, r as u32)[0] as f64 / 1000.0
            }))
        }
        _ => {
            let (w, h, data) = read_raw_f32(path)?;
            if data.len() != w * h {
                return Err(Error::InvalidInput(format!(
                    "{}: raw depth holds {} samples for {w}x{h}",
                    path.display(),
                    data.len()
                )));
            }
            Ok(Array2::from_shape_fn((h, w), |(r, c)| data[r * w + c] as f64))
        }
    }
}

/// Raw float32 file: width and height as little-endian u32, then f32
/// little-endian samples (row-major, channel-interleaved when multi-channel).
pub fn write_raw_f32(path: impl AsRef<Path>, width: usize, height: usize, data: &[f64]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let write = |out: &mut std::io::BufWriter<std::fs::File>, bytes: &[u8]| {
        out.write_all(bytes).map_err(|e| Error::io(path, e))
    };
    write(&mut out, &(width as u32).to_le_bytes())?;
    write(&mut out, &(height as u32).to_le_bytes())?;
    for &v in data {
        write(&mut out, &(v as f32).to_le_bytes())?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_raw_f32(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<f32>)> {
    let path = path.as_ref();
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut header = [0u8; 8];
    file.read_exact(&mut header).map_err(|e| Error::io(path, e))?;
    let w = u32::from_le_bytes([header[0], header[1], header[2], header[3]]) as usize;
    let h = u32::from_le_bytes([header[4], header[5], header[6], header[7]]) as usize;
    let mut payload = Vec::new();
    file.read_to_end(&mut payload).map_err(|e| Error::io(path, e))?;
    if payload.len() % 4 != 0 {
        return Err(Error::InvalidInput(format!(
            "{}: raw payload not a multiple of 4 bytes",
            path.display()
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    Ok((w, h, data))
}

/// Splits a raw depth map into a render-ready map and a validity mask:
/// non-positive or non-finite samples are excluded from the mask and filled
/// with the far limit so the renderer can treat them as background.
pub fn ingest_depth(raw: &Array2<f64>, far_m: f64) -> (Array2<f64>, Array2<bool>) {
    let filled = raw.mapv(|d| if d.is_finite() && d > 0.0 { d } else { far_m });
    let valid = raw.mapv(|d| d.is_finite() && d > 0.0);
    (filled, valid)
}
