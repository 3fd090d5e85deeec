//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its measured numbers. Run with `cargo test -p monoptic --test acceptance
//! -- --nocapture` to see the lines.

mod common;

use std::time::Instant;

use common::{
    abcd_efl, brute_force_formation, catalog, data, direct_convolve_same, doublegauss,
    gaussian_kernel, monocentric, random_unit_kernel, traced_efl, two_layer_scene,
};
use monoptic::formation::{
    add_gaussian_noise, composite_occlusion, fft_convolve, layerize, render_patchwise,
    RenderConfig, UniformPsfs,
};
use monoptic::optics::compute_psf;
use monoptic::pipeline::{
    self, batch, build_cache, render, DatasetManifest, PipelineConfig, RenderMode,
};
use monoptic::psfmap::{PsfCache, SensorGeometry};
use monoptic::quality::{
    artifact_score, depth_metrics, psnr, silog_loss, ssim, ArtifactParams, LossWeights,
};
use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn criterion_01_psf_energy_capture() {
    let start = Instant::now();
    let (p, c) = (monocentric(), catalog());
    let mut fractions = Vec::new();
    for depth in [1.0, 2.0, 5.0, 10.0] {
        let grid = compute_psf(&p, &c, depth, 0.0, 587.6, 512).unwrap();
        assert!(
            grid.captured_energy_fraction >= 0.999,
            "depth {depth} m: captured {}",
            grid.captured_energy_fraction
        );
        fractions.push(grid.captured_energy_fraction);
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    println!(
        "ACCEPTANCE 1 PASS - on-axis capture >= 0.999 at 1/2/5/10 m (got {fractions:?}) in {elapsed:.2?}"
    );
}

#[test]
fn criterion_02_depth_coding_trend() {
    let (p, c) = (monocentric(), catalog());
    let depths = [0.8, 1.0, 1.3, 1.8, 2.5, 3.5, 5.0, 6.5, 8.0, 10.0];
    let radii: Vec<f64> = depths
        .iter()
        .map(|&d| {
            compute_psf(&p, &c, d, 0.0, 587.6, 512)
                .unwrap()
                .rms_radius_um()
        })
        .collect();
    for w in radii.windows(2) {
        assert!(
            w[0] > w[1],
            "second-moment radius must strictly decrease: {radii:?}"
        );
    }
    println!(
        "ACCEPTANCE 2 PASS - ring-to-point: RMS radius strictly decreasing over 10 depths ({:.2} -> {:.2} um)",
        radii[0],
        radii[9]
    );
}

#[test]
fn criterion_03_fft_direct_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let h = rng.random_range(16..64);
        let w = rng.random_range(16..64);
        let side = [1usize, 3, 5, 9, 13][rng.random_range(0..5)];
        let tile = Array2::from_shape_fn((h, w), |_| rng.random_range(-1.0..1.0));
        let kernel = random_unit_kernel(&mut rng, side);
        let fast = fft_convolve(&tile, &kernel).unwrap();
        let slow = direct_convolve_same(&tile, &kernel);
        let scale = slow.iter().fold(0.0f64, |m, &v| m.max(v.abs())).max(1e-30);
        let rel = fast
            .iter()
            .zip(slow.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max)
            / scale;
        assert!(rel < 1e-6, "relative Linf {rel}");
        worst = worst.max(rel);
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    println!(
        "ACCEPTANCE 3 PASS - 200 FFT/direct pairs within 1e-6 (worst {worst:.2e}) in {elapsed:.2?}"
    );
}

fn ten_layer_config(tile: usize) -> RenderConfig {
    RenderConfig {
        tile_size_px: tile,
        noise_sigma: 0.0,
        depth_min_m: 0.7,
        depth_max_m: 1.6,
        depth_step_m: 0.1,
        ..RenderConfig::default()
    }
}

#[test]
fn criterion_04_telescoping_energy_conservation() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let config = ten_layer_config(64);
    let mut worst = 0.0f64;
    for trial in 0..50 {
        let rgb = Array3::from_elem((64, 64, 3), 1.0);
        let depth = Array2::from_shape_fn((64, 64), |_| rng.random_range(0.7..1.6));
        let stack = layerize(&rgb, &depth, &config).unwrap();
        let kernels: Vec<Array2<f64>> =
            (0..10).map(|_| random_unit_kernel(&mut rng, 9)).collect();
        let provider = UniformPsfs::per_depth(kernels);
        let out = composite_occlusion(&stack, &provider, &config).unwrap();
        let deviation = out.iter().map(|&v| (v - 1.0).abs()).fold(0.0f64, f64::max);
        assert!(deviation < 1e-5, "trial {trial}: deviation {deviation}");
        worst = worst.max(deviation);
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 120.0, "took {elapsed:?}");
    println!(
        "ACCEPTANCE 4 PASS - 50 full-coverage stacks composite to 1 +/- 1e-5 (worst {worst:.2e}) in {elapsed:.2?}"
    );
}

#[test]
fn criterion_05_brute_force_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let config = ten_layer_config(32);
    let mut worst = 0.0f64;
    for trial in 0..20 {
        let r0 = rng.random_range(4..16);
        let c0 = rng.random_range(4..16);
        let side = rng.random_range(6..14);
        let (rgb, depth) = two_layer_scene(32, 32, (r0, c0, side), &mut rng);
        let kernels: Vec<Array2<f64>> =
            (0..10).map(|_| random_unit_kernel(&mut rng, 9)).collect();
        let provider = UniformPsfs::per_depth(kernels);
        let stack = layerize(&rgb, &depth, &config).unwrap();
        let fast = composite_occlusion(&stack, &provider, &config).unwrap();
        let slow = brute_force_formation(&rgb, &depth, &provider, &config);
        let deviation = fast
            .iter()
            .zip(slow.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(deviation < 1e-6, "trial {trial}: deviation {deviation}");
        worst = worst.max(deviation);
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 120.0, "took {elapsed:?}");
    println!(
        "ACCEPTANCE 5 PASS - 20 two-layer scenes match the per-pixel oracle within 1e-6 (worst {worst:.2e}) in {elapsed:.2?}"
    );
}

#[test]
fn criterion_06_artifact_score_ordering() {
    let start = Instant::now();
    let config = ten_layer_config(64);
    // Depth-coded kernels: near layers blur strongly, far layers stay sharp,
    // so patches that straddle the boundary pick a visibly wrong kernel.
    let kernels: Vec<Array2<f64>> = (0..10)
        .map(|k| gaussian_kernel(13, 2.6 - 0.22 * k as f64))
        .collect();
    let provider = UniformPsfs::per_depth(kernels);
    let params = ArtifactParams::default();

    let mut results = Vec::new();
    for (i, &(r0, c0, side)) in [
        (18usize, 22usize, 20usize),
        (10, 30, 24),
        (26, 12, 18),
        (22, 22, 26),
        (14, 18, 30),
    ]
    .iter()
    .enumerate()
    {
        // Smooth content with a bright foreground over a dim background.
        let rgb = Array3::from_shape_fn((64, 64, 3), |(r, c, ch)| {
            let base = 0.25 + 0.1 * ((r as f64 / 17.0).sin() + (c as f64 / 23.0).cos()) / 2.0
                + 0.02 * ch as f64;
            let in_fg = r >= r0 && r < r0 + side && c >= c0 && c < c0 + side;
            if in_fg {
                base + 0.45
            } else {
                base
            }
        });
        let depth = Array2::from_shape_fn((64, 64), |(r, c)| {
            let in_fg = r >= r0 && r < r0 + side && c >= c0 && c < c0 + side;
            if in_fg {
                0.8
            } else {
                1.5
            }
        });

        let stack = layerize(&rgb, &depth, &config).unwrap();
        let occlusion = composite_occlusion(&stack, &provider, &config).unwrap();
        let patchwise = render_patchwise(&rgb, &depth, &provider, &config).unwrap();

        let (score_occlusion, _) = artifact_score(&occlusion, &rgb, &params).unwrap();
        let (score_patchwise, _) = artifact_score(&patchwise, &rgb, &params).unwrap();
        assert!(
            score_occlusion < score_patchwise,
            "scene {i}: AS(occlusion) {score_occlusion} !< AS(patchwise) {score_patchwise}"
        );
        results.push((score_occlusion, score_patchwise));
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 120.0, "took {elapsed:?}");
    println!(
        "ACCEPTANCE 6 PASS - AS(occlusion) < AS(patchwise) on all {} boundary scenes {results:?} in {elapsed:.2?}",
        results.len()
    );
}

#[test]
fn criterion_07_paraxial_consistency() {
    let c = catalog();
    let mut reports = Vec::new();
    for p in [monocentric(), doublegauss()] {
        let traced = traced_efl(&p, &c, 587.6);
        let oracle = abcd_efl(&p, &c, 587.6);
        let rel = ((traced - oracle) / oracle).abs();
        assert!(
            rel < 1e-3,
            "{}: traced EFL {traced} vs matrix oracle {oracle} ({rel:.2e})",
            p.name
        );
        reports.push((p.name.clone(), traced, oracle));
    }
    println!("ACCEPTANCE 7 PASS - traced EFL matches the transfer-matrix oracle within 0.1%: {reports:?}");
}

#[test]
fn criterion_08_metric_closed_forms() {
    // Depth metrics at a uniform 1.3x overshoot.
    let gt = Array2::from_elem((8, 8), 2.0);
    let pred = gt.mapv(|v| 1.3 * v);
    let m = depth_metrics(&pred, &gt, None).unwrap();
    assert!(m.delta1.abs() < 1e-9 && (m.delta2 - 1.0).abs() < 1e-9);
    assert!((m.abs_rel - 0.3).abs() < 1e-9);
    assert!((m.rmse - 0.6).abs() < 1e-9);

    // PSNR of a uniform 0.1 offset: 10 log10(1/0.01) = 20 dB.
    let img = Array3::from_elem((8, 8, 3), 0.4);
    let off = img.mapv(|v| v + 0.1);
    assert!((psnr(&off, &img).unwrap() - 20.0).abs() < 1e-9);

    // SSIM degenerate closed form: C1 / (1 + C1).
    let zero = Array2::from_elem((16, 16), 0.0);
    let one = Array2::from_elem((16, 16), 1.0);
    let s = ssim(&zero, &one).unwrap();
    assert!((s - 1e-4 / 1.0001).abs() < 1e-6, "ssim {s}");

    // SiLog two-pixel case: mean g^2 = ln(2)^2.
    let gt2 = Array2::from_shape_vec((1, 2), vec![2.0, 0.5]).unwrap();
    let pred2 = Array2::from_elem((1, 2), 1.0);
    let l = silog_loss(&pred2, &gt2, 1.0).unwrap();
    assert!((l - 2f64.ln().powi(2)).abs() < 1e-9);

    println!("ACCEPTANCE 8 PASS - delta/abs-rel/rmse, PSNR, SSIM, SiLog closed forms reproduced");
}

#[test]
fn criterion_09_loss_properties() {
    // SiLog scale invariance at lambda 1.
    let gt = Array2::from_shape_fn((12, 12), |(r, c)| 0.8 + 0.07 * (r * 12 + c) as f64);
    for scale in [0.3, 2.0, 7.5] {
        let pred = gt.mapv(|v| scale * v);
        let l = silog_loss(&pred, &gt, 1.0).unwrap();
        assert!(l.abs() < 1e-9, "scale {scale}: loss {l}");
    }
    // Default weights reproduce the weighted-sum example.
    let w = LossWeights::default();
    assert!((w.gamma_cont, w.gamma_msfr, w.gamma_silog) == (1.0, 0.1, 0.1));
    let total = w.combine(0.5, 0.2, 0.3);
    assert!((total - 0.55).abs() < 1e-15, "combine -> {total}");
    println!("ACCEPTANCE 9 PASS - SiLog scale invariance (lambda 1) and default loss weights (1.0, 0.1, 0.1)");
}

fn acceptance_config(dir: &std::path::Path, seed: u64) -> PipelineConfig {
    let path = dir.join("config.json");
    let text = format!(
        r#"{{
  "prescription": "{prescription}",
  "materials": "{materials}",
  "sensor": {{ "width_px": 64, "height_px": 48, "pixel_pitch_um": 2.0, "max_field_deg": 6.0 }},
  "render": {{
    "tile_size_px": 40, "patch_size_px": 16, "noise_sigma": 0.005, "seed": {seed},
    "depth_min_m": 0.7, "depth_max_m": 1.6, "depth_step_m": 0.1
  }},
  "psf": {{ "theta_samples_deg": [0.0, 3.0, 6.0], "pupil_samples": 64, "cache_path": "cache.psfcache" }},
  "output_dir": "out"
}}"#,
        prescription = data("monocentric.json"),
        materials = data("materials.json"),
    );
    std::fs::write(&path, text).unwrap();
    PipelineConfig::load(&path).unwrap()
}

fn write_scene(dir: &std::path::Path, stem: &str, seed: u64) -> (std::path::PathBuf, std::path::PathBuf) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rgb = Array3::from_shape_fn((48, 64, 3), |_| rng.random_range(0.0..1.0));
    let depth: Vec<f64> = (0..48 * 64).map(|_| rng.random_range(0.7..1.6)).collect();
    let rgb_path = dir.join(format!("{stem}.png"));
    let depth_path = dir.join(format!("{stem}.raw"));
    pipeline::io::save_rgb_png(&rgb_path, &rgb).unwrap();
    pipeline::io::write_raw_f32(&depth_path, 64, 48, &depth).unwrap();
    (rgb_path, depth_path)
}

#[test]
fn criterion_10_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let config = acceptance_config(dir.path(), 77);
    build_cache(&config, false).unwrap();

    // Render twice: byte-identical PNG and sidecar.
    let (rgb, depth) = write_scene(dir.path(), "scene", 1);
    let a = render(&config, &rgb, &depth, RenderMode::Occlusion).unwrap();
    let png_a = std::fs::read(&a.png_path).unwrap();
    let raw_a = std::fs::read(&a.raw_path).unwrap();
    let b = render(&config, &rgb, &depth, RenderMode::Occlusion).unwrap();
    assert_eq!(png_a, std::fs::read(&b.png_path).unwrap(), "PNG must be byte-identical");
    assert_eq!(raw_a, std::fs::read(&b.raw_path).unwrap(), "sidecar must be byte-identical");

    // Batch resume equals the uninterrupted batch.
    let scenes = dir.path().join("scenes");
    std::fs::create_dir_all(&scenes).unwrap();
    let mut items = Vec::new();
    for (i, stem) in ["s0", "s1", "s2"].iter().enumerate() {
        let (rgb, depth) = write_scene(&scenes, stem, 10 + i as u64);
        items.push(format!(
            r#"{{ "scene_id": "{stem}", "rgb": "{}", "depth": "{}" }}"#,
            rgb.display(),
            depth.display()
        ));
    }
    let manifest_path = dir.path().join("manifest.json");
    std::fs::write(
        &manifest_path,
        format!(r#"{{ "split": "test", "items": [{}] }}"#, items.join(",")),
    )
    .unwrap();
    let manifest = DatasetManifest::load(&manifest_path).unwrap();
    let summary = batch(&config, &manifest, RenderMode::Occlusion, None).unwrap();
    assert_eq!(summary.completed, 3);

    let mut outputs: Vec<std::path::PathBuf> = std::fs::read_dir(&config.output_dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| {
            p.file_name()
                .unwrap()
                .to_str()
                .unwrap()
                .starts_with("s")
        })
        .collect();
    outputs.sort();
    let snapshot: Vec<Vec<u8>> = outputs.iter().map(|p| std::fs::read(p).unwrap()).collect();
    std::fs::remove_file(&outputs[0]).unwrap();
    let resumed = batch(&config, &manifest, RenderMode::Occlusion, None).unwrap();
    assert_eq!(resumed.completed + resumed.skipped, 3);
    for (path, bytes) in outputs.iter().zip(&snapshot) {
        assert_eq!(
            &std::fs::read(path).unwrap(),
            bytes,
            "resume diverged at {}",
            path.display()
        );
    }
    println!("ACCEPTANCE 10 PASS - byte-identical repeat renders and resume-equal batches");
}

#[test]
fn criterion_11_throughput() {
    // Full-size render: 640x480, 94 layers, 3 channels, warm traced cache.
    let dir = tempfile::tempdir().unwrap();
    let geometry = SensorGeometry::default();
    let config = RenderConfig { seed: 5, ..RenderConfig::default() };
    let depths = config.layer_count();
    assert_eq!(depths, 94);

    // Build the real per-tile cache from a traced tensor (reduced pupil
    // sampling keeps the untimed warm-up short), then load it back.
    let (prescription, materials) = (monocentric(), catalog());
    let tensor = monoptic::psfmap::PsfTensor::trace(
        &prescription,
        &materials,
        monoptic::psfmap::default_theta_samples(),
        config.depth_grid(),
        128,
    )
    .unwrap();
    let cache_path = dir.path().join("full.psfcache");
    let header =
        monoptic::psfmap::build_psf_map_cache(&tensor, &geometry, config.tile_size_px, &cache_path)
            .unwrap();
    assert_eq!(header.record_count(), 54_144);
    assert_eq!(header.psf_side, 26);
    let cache = PsfCache::read(&cache_path).unwrap();

    // A plausible scene: smooth depth ramp front-to-back plus occluders.
    let rgb = Array3::from_shape_fn((480, 640, 3), |(r, c, ch)| {
        0.5 + 0.4 * ((r as f64 / 37.0).sin() * (c as f64 / 53.0).cos()) + 0.03 * ch as f64
    })
    .mapv(|v| v.clamp(0.0, 1.0));
    let depth = Array2::from_shape_fn((480, 640), |(r, c)| {
        let ramp = 0.8 + 8.7 * r as f64 / 479.0;
        let boxes = [(100usize, 150usize, 120usize, 1.2), (300, 400, 90, 3.0)];
        for &(br, bc, side, d) in &boxes {
            if r >= br && r < br + side && c >= bc && c < bc + side {
                return d;
            }
        }
        ramp
    });

    let start = Instant::now();
    let stack = layerize(&rgb, &depth, &config).unwrap();
    let composited = composite_occlusion(&stack, &cache, &config).unwrap();
    let noisy = add_gaussian_noise(&composited, config.noise_sigma, config.seed);
    let elapsed = start.elapsed();
    assert!(noisy.iter().all(|v| v.is_finite()));
    assert!(
        elapsed.as_secs_f64() < 60.0,
        "full-frame render took {elapsed:?} (target < 60 s)"
    );
    println!(
        "ACCEPTANCE 11 PASS - 640x480, 94-layer, 3-channel occlusion render in {elapsed:.2?} (< 60 s)"
    );
}
