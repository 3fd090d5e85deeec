use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use monoptic::pipeline::{
    batch, build_cache, evaluate, render, trace_psf, DatasetManifest, EvaluateKind,
    PipelineConfig, RenderMode,
};

/// Depth-coded imaging simulator: traces lens PSFs, builds the per-tile PSF
/// cache, renders occlusion-aware coded images from RGB-D inputs, and
/// evaluates them.
#[derive(Parser)]
#[command(name = "monoptic", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pipeline configuration JSON (or set MONOPTIC_CONFIG).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the configured noise seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, ValueEnum)]
enum ModeArg {
    Occlusion,
    Patchwise,
}

impl From<ModeArg> for RenderMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Occlusion => RenderMode::Occlusion,
            ModeArg::Patchwise => RenderMode::Patchwise,
        }
    }
}

#[derive(Copy, Clone, ValueEnum)]
enum KindArg {
    Depth,
    Image,
    Artifact,
}

impl From<KindArg> for EvaluateKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Depth => EvaluateKind::Depth,
            KindArg::Image => EvaluateKind::Image,
            KindArg::Artifact => EvaluateKind::Artifact,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Trace one PSF and write it as a 16-bit PNG plus a stats record.
    TracePsf {
        #[command(flatten)]
        common: Common,
        /// Object depth in meters (0.7 to 10.0).
        #[arg(long)]
        depth: f64,
        /// Field angle in degrees (0 to 6).
        #[arg(long)]
        theta: f64,
        /// Wavelength in nanometers (656.3, 587.6, or 486.1).
        #[arg(long)]
        wavelength: f64,
    },
    /// Build the per-tile PSF map cache for the configured prescription.
    BuildCache {
        #[command(flatten)]
        common: Common,
        /// Write identity kernels instead of traced PSFs (debug).
        #[arg(long)]
        delta: bool,
    },
    /// Render a coded image from an RGB PNG and a depth map.
    Render {
        #[command(flatten)]
        common: Common,
        /// Input RGB PNG.
        #[arg(long)]
        rgb: PathBuf,
        /// Input depth map (16-bit PNG in mm, or raw f32 meters).
        #[arg(long)]
        depth: PathBuf,
        #[arg(long, value_enum, default_value = "occlusion")]
        mode: ModeArg,
    },
    /// Evaluate matched prediction/ground-truth directories.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, value_enum)]
        kind: KindArg,
    },
    /// Render every item of a dataset manifest (resumable).
    Batch {
        #[command(flatten)]
        common: Common,
        /// Dataset manifest JSON.
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum, default_value = "occlusion")]
        mode: ModeArg,
        /// Worker thread count (defaults to all cores).
        #[arg(long)]
        workers: Option<usize>,
    },
}

fn load_config(common: &Common) -> anyhow::Result<PipelineConfig> {
    let path = match &common.config {
        Some(p) => p.clone(),
        None => match std::env::var_os("MONOPTIC_CONFIG") {
            Some(v) => PathBuf::from(v),
            None => bail!("no --config given and MONOPTIC_CONFIG is not set"),
        },
    };
    let mut config = PipelineConfig::load(&path)
        .with_context(|| format!("loading config {}", path.display()))?;
    if let Some(seed) = common.seed {
        config.render.seed = seed;
    }
    if let Some(out) = &common.out {
        config.output_dir = out.clone();
    }
    Ok(config)
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::TracePsf { common, depth, theta, wavelength } => {
            let config = load_config(&common)?;
            let output = trace_psf(&config, depth, theta, wavelength)?;
            println!(
                "wrote {} and {}",
                output.png_path.display(),
                output.stats_path.display()
            );
            println!(
                "energy fraction {:.6}, rms radius {:.3} um, centroid ({:.3}, {:.3}) um",
                output.stats.captured_energy_fraction,
                output.stats.rms_radius_um,
                output.stats.centroid_um.0,
                output.stats.centroid_um.1
            );
        }
        Command::BuildCache { common, delta } => {
            let config = load_config(&common)?;
            let (header, path) = build_cache(&config, delta)?;
            println!(
                "wrote {} ({} records: {} channels x {} depths x {}x{} tiles, {}x{} kernels)",
                path.display(),
                header.records,
                header.channels,
                header.depths,
                header.tile_rows,
                header.tile_cols,
                header.psf_side,
                header.psf_side
            );
        }
        Command::Render { common, rgb, depth, mode } => {
            let config = load_config(&common)?;
            let output = render(&config, &rgb, &depth, RenderMode::from(mode))?;
            println!("wrote {}", output.png_path.display());
            println!("wrote {}", output.raw_path.display());
            println!("wrote {}", output.provenance_path.display());
        }
        Command::Evaluate { common, pred, gt, kind } => {
            let config = load_config(&common)?;
            let report = evaluate(&config, &pred, &gt, EvaluateKind::from(kind))?;
            print!("{}", report.table());
            if !report.failures.is_empty() {
                eprintln!("{} pair(s) skipped:", report.failures.len());
                for f in &report.failures {
                    eprintln!("  {f}");
                }
            }
        }
        Command::Batch { common, manifest, mode, workers } => {
            let config = load_config(&common)?;
            let manifest = DatasetManifest::load(&manifest)?;
            let summary = batch(&config, &manifest, RenderMode::from(mode), workers)?;
            println!(
                "batch: {} rendered, {} skipped, {} failed; index at {}",
                summary.completed,
                summary.skipped,
                summary.failures.len(),
                summary.index_path.display()
            );
            if !summary.failures.is_empty() {
                for (scene, err) in &summary.failures {
                    eprintln!("  {scene}: {err}");
                }
                bail!("{} item(s) failed", summary.failures.len());
            }
        }
    }
    Ok(())
}
