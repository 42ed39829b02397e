use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand};
use lumisplat::brdf::{integrate_split_sum, lut_axis_value, precompute_brdf_lut, BrdfLut, LUT_DEFAULT_RESOLUTION, LUT_DEFAULT_SAMPLES};
use lumisplat::eval::{l1, loss_rgb, mse, psnr, ssim, total_loss, LossWeights};
use lumisplat::imagebuf::RadianceImage;
use lumisplat::math::Vec3;
use lumisplat::sceneio::{decode_png, read_gbuffer_manifest, read_pfm};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::CliError;

#[derive(Subcommand, Debug)]
pub enum LutCmd {
    /// Precompute the split-sum table.
    Build(LutBuild),
    /// Re-integrate a subset of entries and compare against a table file.
    Verify(LutVerify),
}

#[derive(Args, Debug)]
pub struct LutBuild {
    #[arg(short, long, default_value = "brdf_lut.bin")]
    pub output: PathBuf,
    #[arg(long, default_value_t = LUT_DEFAULT_RESOLUTION)]
    pub resolution: usize,
    /// Samples per entry.
    #[arg(long, default_value_t = LUT_DEFAULT_SAMPLES)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct LutVerify {
    pub lut: PathBuf,
    /// Samples per re-integrated entry.
    #[arg(long, default_value_t = 4096)]
    pub samples: usize,
    /// Check every n-th row and column.
    #[arg(long, default_value_t = 4)]
    pub stride: usize,
    /// Largest accepted absolute difference per term.
    #[arg(long, default_value_t = 0.05)]
    pub tolerance: f64,
    /// Largest accepted mean absolute difference over checked entries.
    #[arg(long, default_value_t = 0.002)]
    pub mean_tolerance: f64,
    /// Seed for the reference integration.
    #[arg(long, default_value_t = 0x5eed)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct MetricsCmd {
    /// Rendered image (PNG or PFM).
    pub render: PathBuf,
    /// Reference image (PNG or PFM).
    pub reference: PathBuf,
    #[arg(long = "lambda-1", default_value_t = LossWeights::default().lambda_1)]
    pub lambda_1: f64,
    /// G-buffer manifest of the render, enabling the full weighted loss.
    #[arg(long)]
    pub gbuffer: Option<PathBuf>,
    /// Reference normals PFM for the normal term; requires `--gbuffer`.
    #[arg(long, requires = "gbuffer")]
    pub reference_normals: Option<PathBuf>,
}

pub fn run_lut(cmd: &LutCmd) -> Result<Value> {
    match cmd {
        LutCmd::Build(b) => {
            let lut = precompute_brdf_lut(b.resolution, b.samples, b.seed)?;
            lut.write_to(&b.output)?;
            Ok(json!({"output": b.output, "resolution": b.resolution, "samples": b.samples, "seed": b.seed}))
        }
        LutCmd::Verify(v) => verify(v),
    }
}

fn verify(v: &LutVerify) -> Result<Value> {
    if v.stride == 0 {
        bail!(CliError::Usage("--stride must be positive".into()));
    }
    let lut = BrdfLut::read_from(&v.lut).with_context(|| format!("reading {}", v.lut.display()))?;
    let res = lut.resolution();
    let mut worst: f64 = 0.0;
    let mut worst_at = (0, 0);
    let mut checked = 0;
    let mut sum = 0.0;
    let mut energy_violations = 0;
    for (row, col) in (0..res).flat_map(|r| (0..res).map(move |c| (r, c))) {
        let (s, b) = lut.entry(row, col);
        if s + b > 1.0 + 1e-3 || s < 0.0 || b < 0.0 {
            energy_violations += 1;
        }
        if row % v.stride != 0 || col % v.stride != 0 {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(v.seed);
        rng.set_stream((row * res + col) as u64);
        let (rs, rb) = integrate_split_sum(lut_axis_value(row, res), lut_axis_value(col, res), v.samples, &mut rng);
        let d = (s - rs).abs().max((b - rb).abs());
        sum += d;
        if d > worst {
            worst = d;
            worst_at = (row, col);
        }
        checked += 1;
    }
    let report = json!({
        "lut": v.lut,
        "resolution": res,
        "checked": checked,
        "max_abs_error": worst,
        "mean_abs_error": sum / checked.max(1) as f64,
        "worst_entry": {"cos_row": worst_at.0, "roughness_col": worst_at.1},
        "energy_violations": energy_violations,
        "tolerance": v.tolerance,
        "mean_tolerance": v.mean_tolerance,
    });
    if worst > v.tolerance || sum / checked.max(1) as f64 > v.mean_tolerance || energy_violations > 0 {
        bail!(CliError::LutMismatch(report));
    }
    Ok(report)
}

/// PFM as linear radiance, anything else decoded as an 8-bit image scaled to [0, 1].
pub fn read_image(path: &Path) -> Result<RadianceImage> {
    let is_pfm = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pfm"));
    if is_pfm {
        return Ok(read_pfm(path)?);
    }
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let img = decode_png(&bytes).with_context(|| format!("decoding {}", path.display()))?;
    Ok(RadianceImage {
        width: img.width,
        height: img.height,
        pixels: img.pixels.iter().map(|p| Vec3::new(p[0] as f64, p[1] as f64, p[2] as f64) / 255.0).collect(),
    })
}

pub fn run_metrics(cmd: &MetricsCmd) -> Result<Value> {
    let a = read_image(&cmd.render)?;
    let b = read_image(&cmd.reference)?;
    let mut out = json!({
        "psnr": psnr(&a, &b)?,
        "ssim": ssim(&a, &b)?,
        "l1": l1(&a, &b)?,
        "mse": mse(&a, &b)?,
        "loss_rgb": loss_rgb(&a, &b, cmd.lambda_1)?,
    });
    if let Some(m) = &cmd.gbuffer {
        let gb = read_gbuffer_manifest(m)?;
        let normals = cmd.reference_normals.as_deref().map(read_pfm).transpose()?;
        if let Some(n) = &normals {
            if (n.width, n.height) != (gb.width, gb.height) {
                bail!(CliError::Usage(format!("reference normals are {}x{} but the G-buffer is {}x{}", n.width, n.height, gb.width, gb.height)));
            }
        }
        let weights = LossWeights {
            lambda_1: cmd.lambda_1,
            ..Default::default()
        };
        let report = total_loss(&a, &b, &gb, normals.as_ref().map(|n| &n.pixels[..]), &weights)?;
        out["loss"] = serde_json::to_value(report)?;
    }
    Ok(out)
}
