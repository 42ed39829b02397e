use std::path::PathBuf;

use clap::{Args, ValueEnum};
use lumisplat::splat::NormalSource;
use lumisplat::ssr::RenderSettings;

#[derive(Args, Debug, Clone)]
pub struct SceneArgs {
    /// Scene JSON file.
    pub scene: PathBuf,
    /// Index into the scene's cameras.
    #[arg(long, default_value_t = 0)]
    pub camera: usize,
    /// Precomputed BRDF table; computed on the fly when absent.
    #[arg(long)]
    pub lut: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum NormalsArg {
    Depth,
    PerGaussian,
}

/// Overrides for the scene's render settings.
#[derive(Args, Debug, Clone, Default)]
pub struct SettingsArgs {
    /// Reflection samples per pixel.
    #[arg(long = "ns")]
    pub n_samples: Option<usize>,
    /// Ray-march step, meters.
    #[arg(long)]
    pub step: Option<f64>,
    /// Longest marched ray, meters.
    #[arg(long)]
    pub max_len: Option<f64>,
    /// Depth overshoot still accepted as a hit, meters.
    #[arg(long)]
    pub thickness: Option<f64>,
    /// Direct split-sum shading only.
    #[arg(long)]
    pub no_ssr: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub exposure: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, value_enum)]
    pub normals: Option<NormalsArg>,
}

impl SettingsArgs {
    pub fn apply(&self, mut s: RenderSettings) -> RenderSettings {
        if let Some(v) = self.n_samples {
            s.n_samples = v;
        }
        if let Some(v) = self.step {
            s.step_size = v;
        }
        if let Some(v) = self.max_len {
            s.max_ray_length = v;
        }
        if let Some(v) = self.thickness {
            s.thickness = v;
        }
        if self.no_ssr {
            s.ssr_enabled = false;
        }
        if let Some(v) = self.seed {
            s.seed = v;
        }
        if let Some(v) = self.exposure {
            s.exposure = v;
        }
        if let Some(v) = self.gamma {
            s.gamma = v;
        }
        if let Some(n) = self.normals {
            s.normal_source = match n {
                NormalsArg::Depth => NormalSource::Depth,
                NormalsArg::PerGaussian => NormalSource::PerGaussian,
            };
        }
        s
    }
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    /// Tone-mapped frame.
    #[arg(short, long, default_value = "frame.png")]
    pub output: PathBuf,
    /// Linear HDR frame as PFM.
    #[arg(long)]
    pub hdr: Option<PathBuf>,
    /// Channel views to write as PNG: albedo, normal, depth, roughness,
    /// metallic, accum_alpha, hit_mask, or `all`. Comma separated or repeated.
    #[arg(long, value_delimiter = ',')]
    pub dump: Vec<String>,
    /// Directory for `--dump` views; defaults to the output's directory.
    #[arg(long)]
    pub dump_dir: Option<PathBuf>,
    /// Write every G-buffer channel as PFM plus a manifest into this directory.
    #[arg(long)]
    pub gbuffer: Option<PathBuf>,
    /// Report render time.
    #[arg(long)]
    pub time: bool,
}
