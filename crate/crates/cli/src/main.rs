use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use illusion_cli::commands::{self, RunOverrides, Turntable};
use illusion_cli::imageio::load_png;
use illusion_cli::RunManifest;

#[derive(Parser)]
#[command(name = "illusion", version, about = "Multiview texture illusion optimizer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize a texture as described by a manifest.
    Run {
        #[arg(long)]
        manifest: PathBuf,
        /// Resume from this checkpoint (its `.state.json` sidecar must sit next to it).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Output directory; overrides the manifest's.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Force bit-reproducible gradient accumulation.
        #[arg(long)]
        deterministic: bool,
    },
    /// Render a turntable from a checkpoint.
    Render {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// View whose base camera starts the turntable.
        #[arg(long, default_value_t = 0)]
        view: u32,
        #[arg(long, default_value_t = 36)]
        frames: usize,
        /// Azimuth offsets from the view, degrees.
        #[arg(long, default_value_t = 0.0)]
        azimuth_start: f32,
        #[arg(long, default_value_t = 360.0)]
        azimuth_end: f32,
        #[arg(long, default_value_t = 512)]
        size: usize,
    },
    /// PSNR of a checkpoint's render of one view against a target image.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        view: u32,
        #[arg(long)]
        target: PathBuf,
        /// Directory for the render and the per-pixel error image.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bake the manifest's l2 targets onto a plain grid by inverse projection.
    Bake {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Texels per side of each surface.
        #[arg(long, default_value_t = 512)]
        resolution: usize,
    },
    /// Serve the scorer protocol from a local provider, for protocol tests.
    ServeStub {
        /// Use this manifest's provider; a procedural grey provider otherwise.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8765")]
        addr: SocketAddr,
    },
}

fn load(path: &Path) -> anyhow::Result<RunManifest> {
    RunManifest::load(path).with_context(|| format!("loading {}", path.display()))
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run { manifest, checkpoint, out, seed, deterministic } => {
            let mut m = load(&manifest)?;
            RunOverrides { out, seed, deterministic }.apply(&mut m);
            let report = commands::run(&m, checkpoint.as_deref())?;
            let tail = report.tail_loss(100).map_or("n/a".into(), |l| format!("{l:.6}"));
            println!("{} steps recorded, recent loss {tail}, outputs in {}", report.records.len(), m.output_dir.display());
        }
        Command::Render { manifest, checkpoint, out, view, frames, azimuth_start, azimuth_end, size } => {
            let m = load(&manifest)?;
            let spec = Turntable { view, frames, azimuth_start, azimuth_end, size };
            let paths = commands::render_turntable(&m, &checkpoint, &spec, &out)?;
            println!("wrote {} frames to {}", paths.len(), out.display());
        }
        Command::Eval { manifest, checkpoint, view, target, out } => {
            let m = load(&manifest)?;
            let target = load_png(&target)?;
            let report = commands::eval(&m, &checkpoint, view, &target, out.as_deref())?;
            println!("{}", serde_json::to_string(&report)?);
        }
        Command::Bake { manifest, out, resolution } => {
            let m = load(&manifest)?;
            let path = commands::bake(&m, resolution, &out)?;
            println!("wrote {}", path.display());
        }
        Command::ServeStub { manifest, addr } => {
            let m = manifest.as_deref().map(load).transpose()?;
            commands::serve_stub(m.as_ref(), addr)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
