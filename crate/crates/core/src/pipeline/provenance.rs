use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::pipeline::config::PipelineConfig;

/// Hash over everything that determines output pixels except the seed:
/// prescription and catalog file contents, sensor geometry, render
/// parameters, PSF settings, and the gamma flag. Cosmetic fields (output
/// directory, cache path) are excluded.
pub fn config_hash(config: &PipelineConfig) -> Result<String> {
    let mut hasher = Sha256::new();
    let prescription = std::fs::read(&config.prescription)
        .map_err(|e| Error::io(&config.prescription, e))?;
    let materials =
        std::fs::read(&config.materials).map_err(|e| Error::io(&config.materials, e))?;
    hasher.update(&prescription);
    hasher.update(&materials);

    let pixel_affecting = serde_json::json!({
        "sensor": config.sensor,
        "render": {
            "tile_size_px": config.render.tile_size_px,
            "patch_size_px": config.render.patch_size_px,
            "noise_sigma": config.render.noise_sigma,
            "depth_min_m": config.render.depth_min_m,
            "depth_max_m": config.render.depth_max_m,
            "depth_step_m": config.render.depth_step_m,
        },
        "theta_samples_deg": config.psf.theta_samples_deg,
        "pupil_samples": config.psf.pupil_samples,
        "gamma_decode": config.gamma_decode,
    });
    hasher.update(pixel_affecting.to_string().as_bytes());
    Ok(hex_prefix(&hasher.finalize(), 16))
}

/// Hash of raw file bytes, for dataset indexing and resume keys.
pub fn file_hash(path: impl AsRef<std::path::Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex_prefix(&Sha256::digest(&bytes), 16))
}

/// Resume key for one batch item: config hash, seed, and both input hashes.
pub fn item_hash(config_hash: &str, seed: u64, rgb_hash: &str, depth_hash: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(config_hash.as_bytes());
    hasher.update(seed.to_le_bytes());
    hasher.update(rgb_hash.as_bytes());
    hasher.update(depth_hash.as_bytes());
    hex_prefix(&hasher.finalize(), 12)
}

fn hex_prefix(digest: &[u8], chars: usize) -> String {
    let mut s = String::with_capacity(digest.len() * 2);
    for b in digest {
        s.push_str(&format!("{b:02x}"));
    }
    s.truncate(chars);
    s
}
