use std::path::{Path, PathBuf};

use ndarray::{Array2, Array3};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::formation::{
    add_gaussian_noise, composite_occlusion, layerize, render_patchwise, CodedImage, Provenance,
    PsfProvider,
};
use crate::optics::compute_psf;
use crate::pipeline::config::PipelineConfig;
use crate::pipeline::io;
use crate::pipeline::manifest::DatasetManifest;
use crate::pipeline::provenance::{config_hash, file_hash, item_hash};
use crate::psfmap::{build_psf_map_cache, PsfCache, PsfCacheHeader, PsfTensor};
use crate::quality::{artifact_score, depth_metrics, psnr, ssim_rgb};

/// Which formation model renders the coded image.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum RenderMode {
    Occlusion,
    Patchwise,
}

impl RenderMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RenderMode::Occlusion => "occlusion",
            RenderMode::Patchwise => "patchwise",
        }
    }
}

impl std::str::FromStr for RenderMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "occlusion" => Ok(RenderMode::Occlusion),
            "patchwise" => Ok(RenderMode::Patchwise),
            other => Err(Error::Config(format!(
                "unknown render mode `{other}` (expected occlusion|patchwise)"
            ))),
        }
    }
}

/// Which evaluation family `evaluate` runs.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum EvaluateKind {
    Depth,
    Image,
    Artifact,
}

impl EvaluateKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EvaluateKind::Depth => "depth",
            EvaluateKind::Image => "image",
            EvaluateKind::Artifact => "artifact",
        }
    }
}

impl std::str::FromStr for EvaluateKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "depth" => Ok(EvaluateKind::Depth),
            "image" => Ok(EvaluateKind::Image),
            "artifact" => Ok(EvaluateKind::Artifact),
            other => Err(Error::Config(format!(
                "unknown evaluation kind `{other}` (expected depth|image|artifact)"
            ))),
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

// ---------------------------------------------------------------------------
// trace-psf
// ---------------------------------------------------------------------------

/// Stats record emitted next to every traced PSF image.
#[derive(Clone, Debug, Serialize)]
pub struct PsfStats {
    pub depth_m: f64,
    pub field_angle_deg: f64,
    pub wavelength_nm: f64,
    pub captured_energy_fraction: f64,
    pub centroid_um: (f64, f64),
    pub rms_radius_um: f64,
    pub center_mm: (f64, f64),
    pub rays_surviving: u64,
    pub rays_in_grid: u64,
}

pub struct TracePsfOutput {
    pub png_path: PathBuf,
    pub stats_path: PathBuf,
    pub stats: PsfStats,
}

/// Traces one PSF and writes it as a peak-scaled 16-bit PNG plus a stats
/// JSON record.
pub fn trace_psf(
    config: &PipelineConfig,
    depth_m: f64,
    theta_deg: f64,
    wavelength_nm: f64,
) -> Result<TracePsfOutput> {
    let (prescription, catalog) = config.load_optics()?;
    let grid = compute_psf(
        &prescription,
        &catalog,
        depth_m,
        theta_deg,
        wavelength_nm,
        config.psf.pupil_samples,
    )?;
    ensure_dir(&config.output_dir)?;
    let stem = format!(
        "psf_d{:.2}m_t{:.2}deg_w{:.1}nm",
        depth_m, theta_deg, wavelength_nm
    );
    let png_path = config.output_dir.join(format!("{stem}.png"));
    let stats_path = config.output_dir.join(format!("{stem}.json"));
    io::save_peak_scaled_png16(&png_path, &grid.samples)?;
    let stats = PsfStats {
        depth_m,
        field_angle_deg: theta_deg,
        wavelength_nm,
        captured_energy_fraction: grid.captured_energy_fraction,
        centroid_um: grid.centroid_um(),
        rms_radius_um: grid.rms_radius_um(),
        center_mm: grid.center_mm,
        rays_surviving: grid.rays_surviving,
        rays_in_grid: grid.rays_in_grid,
    };
    let text = serde_json::to_string_pretty(&stats).expect("stats serialize");
    std::fs::write(&stats_path, text).map_err(|e| Error::io(&stats_path, e))?;
    Ok(TracePsfOutput { png_path, stats_path, stats })
}

// ---------------------------------------------------------------------------
// build-cache
// ---------------------------------------------------------------------------

/// Builds the PSF map cache at the configured path. With `delta` the cache
/// holds 1x1 identity kernels, which turns rendering into a pass-through;
/// useful for pipeline debugging.
pub fn build_cache(config: &PipelineConfig, delta: bool) -> Result<(PsfCacheHeaderInfo, PathBuf)> {
    let path = config.psf.cache_path.clone();
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    let tile = config.render.tile_size_px;
    let rows = config.sensor.height_px.div_ceil(tile);
    let cols = config.sensor.width_px.div_ceil(tile);
    let header = if delta {
        let cache = PsfCache::delta(
            config.render.layer_count(),
            rows,
            cols,
            (config.sensor.pixel_pitch_um * 1000.0).round() as u32,
        );
        cache.write(&path)?;
        cache.header
    } else {
        let (prescription, catalog) = config.load_optics()?;
        let tensor = PsfTensor::trace(
            &prescription,
            &catalog,
            config.psf.theta_samples_deg.clone(),
            config.depth_grid(),
            config.psf.pupil_samples,
        )?;
        build_psf_map_cache(&tensor, &config.sensor, tile, &path)?
    };
    Ok((PsfCacheHeaderInfo::from(header), path))
}

/// Header summary with the record count, for CLI reporting.
#[derive(Copy, Clone, Debug, Serialize)]
pub struct PsfCacheHeaderInfo {
    pub channels: u32,
    pub depths: u32,
    pub tile_rows: u32,
    pub tile_cols: u32,
    pub psf_side: u32,
    pub pitch_nm: u32,
    pub records: usize,
}

impl From<PsfCacheHeader> for PsfCacheHeaderInfo {
    fn from(h: PsfCacheHeader) -> Self {
        PsfCacheHeaderInfo {
            channels: h.channels,
            depths: h.depths,
            tile_rows: h.tile_rows,
            tile_cols: h.tile_cols,
            psf_side: h.psf_side,
            pitch_nm: h.pitch_nm,
            records: h.record_count(),
        }
    }
}

/// Opens the configured cache, building it on demand, and validates it
/// against the sensor and render settings.
pub fn open_cache(config: &PipelineConfig) -> Result<PsfCache> {
    if !config.psf.cache_path.exists() {
        build_cache(config, false)?;
    }
    let cache = PsfCache::read(&config.psf.cache_path)?;
    let expected_pitch = (config.sensor.pixel_pitch_um * 1000.0).round() as u32;
    if cache.header.pitch_nm != expected_pitch {
        return Err(Error::Config(format!(
            "cache pitch {} nm != sensor pitch {} nm",
            cache.header.pitch_nm, expected_pitch
        )));
    }
    if cache.header.depths as usize != config.render.layer_count() {
        return Err(Error::Config(format!(
            "cache has {} depth samples, render grid has {} layers",
            cache.header.depths,
            config.render.layer_count()
        )));
    }
    Ok(cache)
}

// ---------------------------------------------------------------------------
// render
// ---------------------------------------------------------------------------

pub struct RenderOutput {
    pub coded: CodedImage,
    pub valid_mask: Array2<bool>,
    pub png_path: PathBuf,
    pub raw_path: PathBuf,
    pub provenance_path: PathBuf,
}

/// Renders the coded image for one RGB-D pair through the configured
/// formation model plus sensor noise.
fn render_arrays(
    config: &PipelineConfig,
    provider: &dyn PsfProvider,
    rgb: &Array3<f64>,
    depth_filled: &Array2<f64>,
    mode: RenderMode,
    seed: u64,
) -> Result<Array3<f64>> {
    let pre_noise = match mode {
        RenderMode::Occlusion => {
            let stack = layerize(rgb, depth_filled, &config.render)?;
            composite_occlusion(&stack, provider, &config.render)?
        }
        RenderMode::Patchwise => render_patchwise(rgb, depth_filled, provider, &config.render)?,
    };
    Ok(add_gaussian_noise(&pre_noise, config.render.noise_sigma, seed))
}

pub fn render(
    config: &PipelineConfig,
    rgb_path: &Path,
    depth_path: &Path,
    mode: RenderMode,
) -> Result<RenderOutput> {
    let cache = open_cache(config)?;
    let rgb = io::load_rgb_png(rgb_path, config.gamma_decode)?;
    let raw_depth = io::load_depth(depth_path)?;
    if raw_depth.dim() != (rgb.dim().0, rgb.dim().1) {
        return Err(Error::ShapeMismatch(format!(
            "rgb {:?} vs depth {:?}",
            (rgb.dim().0, rgb.dim().1),
            raw_depth.dim()
        )));
    }
    let (depth_filled, valid_mask) = io::ingest_depth(&raw_depth, config.render.depth_max_m);
    let seed = config.render.seed;
    let pixels = render_arrays(config, &cache, &rgb, &depth_filled, mode, seed)?;

    let hash = config_hash(config)?;
    let provenance = Provenance {
        prescription: config.prescription.display().to_string(),
        config_hash: hash,
        seed,
    };

    ensure_dir(&config.output_dir)?;
    let stem = rgb_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("render")
        .to_string();
    let png_path = config.output_dir.join(format!("{stem}_{}.png", mode.as_str()));
    let raw_path = config.output_dir.join(format!("{stem}_{}.raw", mode.as_str()));
    let provenance_path = config
        .output_dir
        .join(format!("{stem}_{}.provenance.json", mode.as_str()));

    io::save_rgb_png(&png_path, &pixels)?;
    let (h, w, _) = pixels.dim();
    let flat: Vec<f64> = pixels.iter().copied().collect();
    io::write_raw_f32(&raw_path, w, h, &flat)?;
    let text = serde_json::to_string_pretty(&provenance).expect("provenance serialize");
    std::fs::write(&provenance_path, text).map_err(|e| Error::io(&provenance_path, e))?;

    Ok(RenderOutput {
        coded: CodedImage { pixels, provenance },
        valid_mask,
        png_path,
        raw_path,
        provenance_path,
    })
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct EvaluationReport {
    pub kind: String,
    pub pairs: Vec<serde_json::Value>,
    pub aggregate: serde_json::Value,
    pub failures: Vec<String>,
    pub params: serde_json::Value,
}

impl EvaluationReport {
    /// Plain-text table, one row per pair plus the aggregate mean.
    pub fn table(&self) -> String {
        let mut columns: Vec<String> = Vec::new();
        if let Some(first) = self.pairs.first() {
            if let Some(map) = first.as_object() {
                columns = map.keys().filter(|k| *k != "name").cloned().collect();
            }
        } else if let Some(map) = self.aggregate.as_object() {
            columns = map.keys().cloned().collect();
        }
        let mut out = String::new();
        out.push_str(&format!("{:<24}", "name"));
        for c in &columns {
            out.push_str(&format!(" {c:>12}"));
        }
        out.push('\n');
        let fmt = |v: &serde_json::Value| -> String {
            match v.as_f64() {
                Some(x) => format!("{x:>12.4}"),
                None => format!("{:>12}", "inf"),
            }
        };
        for pair in &self.pairs {
            let map = pair.as_object().expect("pair rows are objects");
            let name = map.get("name").and_then(|v| v.as_str()).unwrap_or("?");
            out.push_str(&format!("{name:<24}"));
            for c in &columns {
                out.push_str(&format!(" {}", fmt(&map[c])));
            }
            out.push('\n');
        }
        if let Some(map) = self.aggregate.as_object() {
            out.push_str(&format!("{:<24}", "mean"));
            for c in &columns {
                let v = map.get(c).cloned().unwrap_or(serde_json::Value::Null);
                out.push_str(&format!(" {}", fmt(&v)));
            }
            out.push('\n');
        }
        out
    }
}

fn matched_pairs(pred_dir: &Path, gt_dir: &Path) -> Result<(Vec<(String, PathBuf, PathBuf)>, Vec<String>)> {
    let mut names: Vec<String> = std::fs::read_dir(pred_dir)
        .map_err(|e| Error::io(pred_dir, e))?
        .filter_map(|entry| entry.ok())
        .filter(|entry| entry.path().is_file())
        .filter_map(|entry| entry.file_name().to_str().map(String::from))
        .collect();
    names.sort();
    let mut pairs = Vec::new();
    let mut failures = Vec::new();
    for name in names {
        let gt = gt_dir.join(&name);
        if gt.exists() {
            pairs.push((name.clone(), pred_dir.join(&name), gt));
        } else {
            failures.push(format!("{name}: no ground-truth counterpart"));
        }
    }
    Ok((pairs, failures))
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len().max(1) as f64
}

/// Evaluates matched prediction/ground-truth file pairs and writes a JSON
/// report; unreadable or unmatched pairs are listed and skipped.
pub fn evaluate(
    config: &PipelineConfig,
    pred_dir: &Path,
    gt_dir: &Path,
    kind: EvaluateKind,
) -> Result<EvaluationReport> {
    let (pairs, mut failures) = matched_pairs(pred_dir, gt_dir)?;
    let mut rows = Vec::new();
    let mut accum: std::collections::BTreeMap<&str, Vec<f64>> = Default::default();

    for (name, pred, gt) in &pairs {
        let result = evaluate_pair(config, pred, gt, kind);
        match result {
            Ok(row) => {
                let mut object = serde_json::Map::new();
                object.insert("name".into(), json!(name));
                for (k, v) in row {
                    accum.entry(k).or_default().push(v);
                    object.insert(k.into(), json!(v));
                }
                rows.push(serde_json::Value::Object(object));
            }
            Err(e) => failures.push(format!("{name}: {e}")),
        }
    }

    if rows.is_empty() && !pairs.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no pair could be evaluated; first failure: {}",
            failures.first().cloned().unwrap_or_default()
        )));
    }

    let aggregate = serde_json::Value::Object(
        accum
            .iter()
            .map(|(k, vals)| ((*k).to_string(), json!(mean(vals))))
            .collect(),
    );
    let report = EvaluationReport {
        kind: kind.as_str().to_string(),
        pairs: rows,
        aggregate,
        failures,
        params: json!({
            "artifact": config.metrics.artifact,
            "loss_weights": config.metrics.loss_weights,
        }),
    };
    ensure_dir(&config.output_dir)?;
    let path = config
        .output_dir
        .join(format!("evaluation_{}.json", kind.as_str()));
    let text = serde_json::to_string_pretty(&report).expect("report serialize");
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(report)
}

fn evaluate_pair(
    config: &PipelineConfig,
    pred: &Path,
    gt: &Path,
    kind: EvaluateKind,
) -> Result<Vec<(&'static str, f64)>> {
    match kind {
        EvaluateKind::Depth => {
            let p = io::load_depth(pred)?;
            let g = io::load_depth(gt)?;
            if p.dim() != g.dim() {
                return Err(Error::ShapeMismatch("depth pair".into()));
            }
            let valid = Array2::from_shape_fn(p.dim(), |idx| {
                let (a, b) = (p[idx], g[idx]);
                a.is_finite() && a > 0.0 && b.is_finite() && b > 0.0
            });
            let m = depth_metrics(&p, &g, Some(&valid))?;
            Ok(vec![
                ("delta1", m.delta1),
                ("delta2", m.delta2),
                ("delta3", m.delta3),
                ("rmse", m.rmse),
                ("abs_rel", m.abs_rel),
                ("valid_px", m.valid_pixel_count as f64),
            ])
        }
        EvaluateKind::Image => {
            let p = io::load_rgb_png(pred, config.gamma_decode)?;
            let g = io::load_rgb_png(gt, config.gamma_decode)?;
            Ok(vec![
                ("psnr_db", psnr(&p, &g)?),
                ("ssim", ssim_rgb(&p, &g)?),
            ])
        }
        EvaluateKind::Artifact => {
            let p = io::load_rgb_png(pred, config.gamma_decode)?;
            let g = io::load_rgb_png(gt, config.gamma_decode)?;
            let (score, mask) = artifact_score(&p, &g, &config.metrics.artifact)?;
            Ok(vec![
                ("artifact_score", score),
                ("smooth_px", mask.smooth_pixel_count() as f64),
            ])
        }
    }
}

// ---------------------------------------------------------------------------
// batch
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub struct BatchSummary {
    pub completed: usize,
    pub skipped: usize,
    pub failures: Vec<(String, String)>,
    pub index_path: PathBuf,
}

/// Derives the per-scene noise seed from the run seed and scene id.
fn scene_seed(seed: u64, scene_id: &str) -> u64 {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(scene_id.as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    seed ^ u64::from_le_bytes(bytes)
}

/// Renders every manifest item, writing coded images and depth targets plus
/// a JSON-lines index. Items whose outputs already exist (keyed by the
/// provenance hash in the file names) are skipped, so interrupted runs
/// resume to the identical dataset.
pub fn batch(
    config: &PipelineConfig,
    manifest: &DatasetManifest,
    mode: RenderMode,
    workers: Option<usize>,
) -> Result<BatchSummary> {
    let cache = open_cache(config)?;
    ensure_dir(&config.output_dir)?;
    let run_hash = config_hash(config)?;

    let process = |item: &crate::pipeline::manifest::ManifestItem| -> Result<(serde_json::Value, bool)> {
        let rgb_hash = file_hash(&item.rgb)?;
        let depth_hash = file_hash(&item.depth)?;
        let seed = scene_seed(config.render.seed, &item.scene_id);
        let key = item_hash(&run_hash, seed, &rgb_hash, &depth_hash);
        let stem = format!("{}_{key}", item.scene_id);

        let coded_png = config.output_dir.join(format!("{stem}_coded.png"));
        let coded_raw = config.output_dir.join(format!("{stem}_coded.raw"));
        let depth_q = config.output_dir.join(format!("{stem}_depth_q.png"));
        let depth_raw = config.output_dir.join(format!("{stem}_depth.raw"));

        let record = json!({
            "scene_id": item.scene_id,
            "rgb_sha256": rgb_hash,
            "depth_sha256": depth_hash,
            "seed": seed,
            "config_hash": run_hash,
            "outputs": {
                "coded_png": coded_png,
                "coded_raw": coded_raw,
                "depth_quantized_png": depth_q,
                "depth_raw": depth_raw,
            },
        });

        let all_exist = [&coded_png, &coded_raw, &depth_q, &depth_raw]
            .iter()
            .all(|p| p.exists());
        if all_exist {
            return Ok((record, true));
        }

        let rgb = io::load_rgb_png(&item.rgb, config.gamma_decode)?;
        let raw_depth = io::load_depth(&item.depth)?;
        if raw_depth.dim() != (rgb.dim().0, rgb.dim().1) {
            return Err(Error::ShapeMismatch(format!(
                "rgb {:?} vs depth {:?}",
                (rgb.dim().0, rgb.dim().1),
                raw_depth.dim()
            )));
        }
        let (depth_filled, _valid) = io::ingest_depth(&raw_depth, config.render.depth_max_m);
        let pixels = render_arrays(config, &cache, &rgb, &depth_filled, mode, seed)?;

        io::save_rgb_png(&coded_png, &pixels)?;
        let (h, w, _) = pixels.dim();
        let flat: Vec<f64> = pixels.iter().copied().collect();
        io::write_raw_f32(&coded_raw, w, h, &flat)?;

        // Depth targets: the quantized layer-center grid and the raw depth.
        let quantized = depth_filled.mapv(|d| config.render.depth_of_layer(config.render.layer_index(d)));
        io::save_depth_png16(&depth_q, &quantized)?;
        let depth_flat: Vec<f64> = raw_depth.iter().copied().collect();
        io::write_raw_f32(&depth_raw, raw_depth.dim().1, raw_depth.dim().0, &depth_flat)?;

        Ok((record, false))
    };

    let run = || -> Vec<(String, Result<(serde_json::Value, bool)>)> {
        manifest
            .items
            .par_iter()
            .map(|item| (item.scene_id.clone(), process(item)))
            .collect()
    };
    let results = match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?
            .install(run),
        None => run(),
    };

    let mut completed = 0;
    let mut skipped = 0;
    let mut failures = Vec::new();
    let mut records = Vec::new();
    for (scene, result) in results {
        match result {
            Ok((record, was_skipped)) => {
                records.push(record);
                if was_skipped {
                    skipped += 1;
                } else {
                    completed += 1;
                }
            }
            Err(e) => failures.push((scene, e.to_string())),
        }
    }

    let index_path = config.output_dir.join(format!("index_{}.jsonl", manifest.split));
    let mut text = String::new();
    for record in &records {
        text.push_str(&record.to_string());
        text.push('\n');
    }
    std::fs::write(&index_path, text).map_err(|e| Error::io(&index_path, e))?;

    Ok(BatchSummary { completed, skipped, failures, index_path })
}
