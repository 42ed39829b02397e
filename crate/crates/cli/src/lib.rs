//! Command-line front end. Every command prints one JSON object on stdout on
//! success; failures print `{"error": kind, "message": ...}` on stderr and exit 1.

use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use lumisplat::brdf::BrdfError;
use lumisplat::eval::MetricError;
use lumisplat::pipeline::RenderError;
use lumisplat::sceneio::{LayerError, PfmError, SceneError};
use lumisplat::ssr::SettingsError;
use lumisplat_service::{ServiceConfig, SessionError};
use serde_json::{json, Value};

pub mod args;
pub mod render;
pub mod tools;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(
        "lut differs from a fresh integration: max {} (tolerance {}), mean {} (tolerance {}), {} entries outside energy bounds",
        .0["max_abs_error"], .0["tolerance"], .0["mean_abs_error"], .0["mean_tolerance"], .0["energy_violations"]
    )]
    LutMismatch(Value),
}

#[derive(Parser, Debug)]
#[command(name = "lumisplat", version, about = "Relightable Gaussian splat renderer with screen-space reflections")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Render a scene to PNG, optionally dumping HDR and G-buffer channels.
    Render(render::RenderCmd),
    #[command(subcommand)]
    Lut(tools::LutCmd),
    /// PSNR, SSIM and losses between two images.
    Metrics(tools::MetricsCmd),
    /// Apply material overrides, an environment swap or insertions, then render.
    Edit(render::EditCmd),
    /// Reflection hit mask and origin-to-hit point pairs.
    TraceDebug(render::TraceCmd),
    /// Run the editing service.
    Serve(ServeCmd),
}

#[derive(Args, Debug)]
pub struct ServeCmd {
    #[arg(long, env = "LUMISPLAT_SCENE")]
    pub scene: PathBuf,
    #[arg(long, env = "LUMISPLAT_HOST", default_value = "127.0.0.1")]
    pub host: IpAddr,
    #[arg(long, env = "LUMISPLAT_PORT", default_value_t = 8080)]
    pub port: u16,
    /// Root for environment and insertion assets; defaults to the scene's directory.
    #[arg(long, env = "LUMISPLAT_ASSETS")]
    pub assets: Option<PathBuf>,
    #[arg(long)]
    pub lut: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub camera: usize,
}

fn serve(cmd: &ServeCmd) -> Result<Value> {
    let config = ServiceConfig {
        addr: SocketAddr::new(cmd.host, cmd.port),
        scene: cmd.scene.clone(),
        asset_dir: cmd.assets.clone(),
        lut: cmd.lut.clone(),
        camera: cmd.camera,
    };
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(lumisplat_service::serve(config))?;
    Ok(json!({"stopped": true}))
}

pub fn run(cli: &Cli) -> Result<Value> {
    match &cli.command {
        Command::Render(c) => render::run_render(c),
        Command::Lut(c) => tools::run_lut(c),
        Command::Metrics(c) => tools::run_metrics(c),
        Command::Edit(c) => render::run_edit(c),
        Command::TraceDebug(c) => render::run_trace(c),
        Command::Serve(c) => serve(c),
    }
}

/// Stable error class for scripts.
pub fn error_kind(err: &anyhow::Error) -> &'static str {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<CliError>() {
            return match e {
                CliError::Usage(_) => "usage",
                CliError::LutMismatch(_) => "lut_mismatch",
            };
        }
        if let Some(e) = cause.downcast_ref::<SessionError>() {
            return if e.is_not_found() { "not_found" } else { "invalid_edit" };
        }
        if cause.is::<SettingsError>() {
            return "settings";
        }
        if cause.is::<SceneError>() {
            return "scene";
        }
        if cause.is::<BrdfError>() {
            return "lut";
        }
        if cause.is::<MetricError>() {
            return "metrics";
        }
        if cause.is::<PfmError>() || cause.is::<LayerError>() {
            return "image";
        }
        if cause.is::<RenderError>() {
            return "render";
        }
        if cause.is::<serde_json::Error>() {
            return "json";
        }
        if cause.is::<std::io::Error>() {
            return "io";
        }
    }
    "error"
}

/// Cause chain joined with `: `, skipping causes their parent already quotes.
fn message(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

pub fn error_line(err: &anyhow::Error) -> Value {
    let mut v = json!({"error": error_kind(err), "message": message(err)});
    if let Some(CliError::LutMismatch(report)) = err.downcast_ref::<CliError>() {
        v["report"] = report.clone();
    }
    v
}
