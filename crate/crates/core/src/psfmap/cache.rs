use std::io::{BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::psfmap::tensor::{psf_at, Channel, PsfTensor, SensorGeometry};

/// Magic bytes identifying a PSF map cache file.
pub const CACHE_MAGIC: &[u8; 8] = b"BMIPSF1\0";

/// Cache header: little-endian u32 fields following the magic.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct PsfCacheHeader {
    pub channels: u32,
    pub depths: u32,
    pub tile_rows: u32,
    pub tile_cols: u32,
    pub psf_side: u32,
    pub pitch_nm: u32,
}

impl PsfCacheHeader {
    pub fn record_count(&self) -> usize {
        self.channels as usize * self.depths as usize * self.tile_count()
    }

    pub fn tile_count(&self) -> usize {
        self.tile_rows as usize * self.tile_cols as usize
    }
}

/// Tile grid covering a sensor: `ceil` division so partial edge tiles count.
pub(crate) fn tile_grid(geometry: &SensorGeometry, tile_size_px: usize) -> (usize, usize) {
    (
        geometry.height_px.div_ceil(tile_size_px),
        geometry.width_px.div_ceil(tile_size_px),
    )
}

/// Center pixel of a tile, clipped to the sensor for partial edge tiles.
pub(crate) fn tile_center_pixel(
    geometry: &SensorGeometry,
    tile_size_px: usize,
    tile: (usize, usize),
) -> (usize, usize) {
    let (tr, tc) = tile;
    let h0 = tr * tile_size_px;
    let w0 = tc * tile_size_px;
    let th = tile_size_px.min(geometry.height_px - h0);
    let tw = tile_size_px.min(geometry.width_px - w0);
    (h0 + th / 2, w0 + tw / 2)
}

/// Builds the per-tile PSF cache: one resized kernel per (channel, depth
/// sample, tile), written in (channel-major, depth, tile-row, tile-col)
/// order. Rebuilding from the same inputs produces a byte-identical file.
pub fn build_psf_map_cache(
    tensor: &PsfTensor,
    geometry: &SensorGeometry,
    tile_size_px: usize,
    path: impl AsRef<Path>,
) -> Result<PsfCacheHeader> {
    geometry.validate()?;
    if tile_size_px == 0 {
        return Err(Error::Config("tile size must be positive".into()));
    }
    let (tile_rows, tile_cols) = tile_grid(geometry, tile_size_px);
    let depths = tensor.depth_samples.len();

    let cells: Vec<(Channel, usize, usize, usize)> = Channel::ALL
        .iter()
        .flat_map(|&c| {
            (0..depths).flat_map(move |d| {
                (0..tile_rows).flat_map(move |tr| (0..tile_cols).map(move |tc| (c, d, tr, tc)))
            })
        })
        .collect();

    let records = cells
        .par_iter()
        .map(|&(c, d, tr, tc)| {
            let pixel = tile_center_pixel(geometry, tile_size_px, (tr, tc));
            let grid = psf_at(tensor, geometry, c, pixel, tensor.depth_samples[d])?;
            Ok(grid.samples.iter().map(|&v| v as f32).collect::<Vec<f32>>())
        })
        .collect::<Result<Vec<_>>>()?;

    let psf_side = (records[0].len() as f64).sqrt() as u32;
    let header = PsfCacheHeader {
        channels: 3,
        depths: depths as u32,
        tile_rows: tile_rows as u32,
        tile_cols: tile_cols as u32,
        psf_side,
        pitch_nm: (geometry.pixel_pitch_um * 1000.0).round() as u32,
    };

    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_header(&mut out, &header).map_err(|e| Error::io(path, e))?;
    for record in &records {
        for &v in record {
            out.write_all(&v.to_le_bytes()).map_err(|e| Error::io(path, e))?;
        }
    }
    out.flush().map_err(|e| Error::io(path, e))?;
    Ok(header)
}

fn write_header(out: &mut impl Write, header: &PsfCacheHeader) -> std::io::Result<()> {
    out.write_all(CACHE_MAGIC)?;
    for v in [
        header.channels,
        header.depths,
        header.tile_rows,
        header.tile_cols,
        header.psf_side,
        header.pitch_nm,
    ] {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// An in-memory PSF map cache; the render-time kernel source.
#[derive(Clone, Debug)]
pub struct PsfCache {
    pub header: PsfCacheHeader,
    records: Vec<Vec<f32>>,
}

impl PsfCache {
    /// Reads and validates a cache file.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut magic = [0u8; 8];
        file.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
        if &magic != CACHE_MAGIC {
            return Err(Error::Cache(format!("{}: bad magic", path.display())));
        }
        let mut word = [0u8; 4];
        let mut fields = [0u32; 6];
        for f in &mut fields {
            file.read_exact(&mut word).map_err(|e| Error::io(path, e))?;
            *f = u32::from_le_bytes(word);
        }
        let header = PsfCacheHeader {
            channels: fields[0],
            depths: fields[1],
            tile_rows: fields[2],
            tile_cols: fields[3],
            psf_side: fields[4],
            pitch_nm: fields[5],
        };
        if header.channels != 3 || header.psf_side == 0 {
            return Err(Error::Cache(format!("{}: bad header {header:?}", path.display())));
        }
        let record_len = (header.psf_side * header.psf_side) as usize;
        let mut payload = Vec::new();
        file.read_to_end(&mut payload).map_err(|e| Error::io(path, e))?;
        let expected = header.record_count() * record_len * 4;
        if payload.len() != expected {
            return Err(Error::Cache(format!(
                "{}: payload {} bytes, expected {expected}",
                path.display(),
                payload.len()
            )));
        }
        let records = payload
            .chunks_exact(record_len * 4)
            .map(|chunk| {
                chunk
                    .chunks_exact(4)
                    .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                    .collect()
            })
            .collect();
        Ok(PsfCache { header, records })
    }

    /// A debug cache of identity (delta) kernels.
    pub fn delta(depths: usize, tile_rows: usize, tile_cols: usize, pitch_nm: u32) -> Self {
        let header = PsfCacheHeader {
            channels: 3,
            depths: depths as u32,
            tile_rows: tile_rows as u32,
            tile_cols: tile_cols as u32,
            psf_side: 1,
            pitch_nm,
        };
        let records = vec![vec![1.0f32]; header.record_count()];
        PsfCache { header, records }
    }

    /// Builds a cache in memory from per-(channel, depth, tile) kernels in
    /// canonical order.
    pub fn from_kernels(header: PsfCacheHeader, kernels: Vec<Vec<f32>>) -> Result<Self> {
        if kernels.len() != header.record_count() {
            return Err(Error::Cache(format!(
                "kernel count {} != header record count {}",
                kernels.len(),
                header.record_count()
            )));
        }
        Ok(PsfCache { header, records: kernels })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        write_header(&mut out, &self.header).map_err(|e| Error::io(path, e))?;
        for record in &self.records {
            for &v in record {
                out.write_all(&v.to_le_bytes()).map_err(|e| Error::io(path, e))?;
            }
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    fn record_index(&self, channel: Channel, depth_idx: usize, tile: (usize, usize)) -> usize {
        let h = &self.header;
        ((channel.index() * h.depths as usize + depth_idx) * h.tile_rows as usize + tile.0)
            * h.tile_cols as usize
            + tile.1
    }

    /// The kernel for one (channel, depth sample, tile), renormalized to
    /// unit sum in f64.
    pub fn kernel(&self, channel: Channel, depth_idx: usize, tile: (usize, usize)) -> Array2<f64> {
        let side = self.header.psf_side as usize;
        let record = &self.records[self.record_index(channel, depth_idx, tile)];
        let mut k = Array2::from_shape_fn((side, side), |(r, c)| record[r * side + c] as f64);
        let sum = k.sum();
        if sum > 0.0 {
            k /= sum;
        }
        k
    }
}
