//! G-buffer layers on disk, depth-tested merging and 8-bit channel views.
//!
//! A layer is a directory of PFM files plus a JSON manifest:
//!
//! ```json
//! { "version": 1, "width": 64, "height": 48,
//!   "channels": { "albedo": "albedo.pfm", "roughness": "roughness.pfm",
//!                 "metallic": "metallic.pfm", "gamma": "gamma.pfm",
//!                 "depth": "depth.pfm", "normal": "normal.pfm",
//!                 "accum_alpha": "accum_alpha.pfm" } }
//! ```
//!
//! Paths are relative to the manifest. `albedo` and `normal` are `PF` files
//! (normals raw, world space, zero where undefined); the scalar channels are `Pf`.
//! `gamma` may be omitted and reads as zero.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use image::{ImageBuffer, Rgb as PxRgb};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::pfm::{read_pfm_raw, PfmError, PfmImage};
use crate::imagebuf::LdrImage;
use crate::math::Vec3;
use crate::splat::{Camera, GBuffer};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LayerError {
    #[error("G-buffer size mismatch: {base:?} vs {layer:?}")]
    DimensionMismatch { base: (usize, usize), layer: (usize, usize) },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("channel `{channel}`: {source}")]
    Channel {
        channel: String,
        #[source]
        source: PfmError,
    },
    #[error("channel `{channel}` is {found:?}, manifest says {expected:?}")]
    ChannelSize {
        channel: String,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Depth-tested composite of an inserted layer over a base G-buffer.
///
/// A pixel takes every channel from `layer` when the layer covers it and is
/// nearer than the base (or the base is empty there).
pub fn merge_gbuffers(base: &GBuffer, layer: &GBuffer) -> Result<GBuffer, LayerError> {
    if (base.width, base.height) != (layer.width, layer.height) {
        return Err(LayerError::DimensionMismatch {
            base: (base.width, base.height),
            layer: (layer.width, layer.height),
        });
    }
    let mut out = base.clone();
    for i in 0..base.len() {
        if layer_wins(base, layer, i) {
            out.copy_pixel_from(layer, i);
        }
    }
    Ok(out)
}

pub fn layer_wins(base: &GBuffer, layer: &GBuffer, i: usize) -> bool {
    layer.covered(i) && (base.depth[i] == 0.0 || layer.depth[i] < base.depth[i])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GBufferManifest {
    pub version: u32,
    pub width: usize,
    pub height: usize,
    pub channels: BTreeMap<String, String>,
}

const CHANNELS: [&str; 7] = ["albedo", "roughness", "metallic", "gamma", "depth", "normal", "accum_alpha"];

/// Writes every channel plus `manifest.json` into `dir`; returns the manifest path.
pub fn write_gbuffer(gb: &GBuffer, dir: impl AsRef<Path>) -> Result<PathBuf, LayerError> {
    let dir = dir.as_ref();
    let io = |path: &Path, source| LayerError::Io {
        path: path.to_path_buf(),
        source,
    };
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut channels = BTreeMap::new();
    for name in CHANNELS {
        let file = format!("{name}.pfm");
        let img = channel_pfm(gb, name);
        let path = dir.join(&file);
        fs::write(&path, img.encode()).map_err(|e| io(&path, e))?;
        channels.insert(name.to_string(), file);
    }
    let manifest = GBufferManifest {
        version: MANIFEST_VERSION,
        width: gb.width,
        height: gb.height,
        channels,
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text).map_err(|e| io(&path, e))?;
    Ok(path)
}

fn channel_pfm(gb: &GBuffer, name: &str) -> PfmImage {
    let (w, h) = (gb.width, gb.height);
    let rgb = |v: &[Vec3]| PfmImage {
        width: w,
        height: h,
        channels: 3,
        data: v.iter().flat_map(|p| [p.x as f32, p.y as f32, p.z as f32]).collect(),
    };
    match name {
        "albedo" => rgb(&gb.albedo),
        "normal" => rgb(&gb.normal),
        "roughness" => PfmImage::from_scalar(w, h, &gb.roughness),
        "metallic" => PfmImage::from_scalar(w, h, &gb.metallic),
        "gamma" => PfmImage::from_scalar(w, h, &gb.gamma),
        "depth" => PfmImage::from_scalar(w, h, &gb.depth),
        "accum_alpha" => PfmImage::from_scalar(w, h, &gb.accum_alpha),
        _ => unreachable!("unknown channel {name}"),
    }
}

pub fn read_gbuffer_manifest(path: impl AsRef<Path>) -> Result<GBuffer, LayerError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| LayerError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let manifest: GBufferManifest = serde_json::from_str(&text).map_err(|e| LayerError::Manifest(format!("line {} column {}: {e}", e.line(), e.column())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    load_gbuffer(&manifest, |file| read_pfm_raw(base.join(file)))
}

/// Assembles a G-buffer from a manifest, loading each referenced file with `load`.
pub fn load_gbuffer(manifest: &GBufferManifest, mut load: impl FnMut(&str) -> Result<PfmImage, PfmError>) -> Result<GBuffer, LayerError> {
    if manifest.version != MANIFEST_VERSION {
        return Err(LayerError::Manifest(format!("unsupported version {}", manifest.version)));
    }
    if manifest.width == 0 || manifest.height == 0 {
        return Err(LayerError::Manifest("zero-sized layer".into()));
    }
    if let Some(extra) = manifest.channels.keys().find(|k| !CHANNELS.contains(&k.as_str())) {
        return Err(LayerError::Manifest(format!("unknown channel `{extra}`")));
    }
    let dims = (manifest.width, manifest.height);
    let mut gb = GBuffer::new(manifest.width, manifest.height);
    for name in CHANNELS {
        let Some(file) = manifest.channels.get(name) else {
            if name == "gamma" {
                continue;
            }
            return Err(LayerError::Manifest(format!("missing channel `{name}`")));
        };
        let img = load(file).map_err(|source| LayerError::Channel {
            channel: name.into(),
            source,
        })?;
        if (img.width, img.height) != dims {
            return Err(LayerError::ChannelSize {
                channel: name.into(),
                expected: dims,
                found: (img.width, img.height),
            });
        }
        match name {
            "albedo" => gb.albedo = img.to_radiance().pixels,
            "normal" => gb.normal = img.to_radiance().pixels,
            "roughness" => gb.roughness = img.to_scalar(),
            "metallic" => gb.metallic = img.to_scalar(),
            "gamma" => gb.gamma = img.to_scalar(),
            "depth" => gb.depth = img.to_scalar(),
            "accum_alpha" => gb.accum_alpha = img.to_scalar(),
            _ => unreachable!(),
        }
    }
    if gb.depth.iter().any(|&d| d < 0.0) {
        return Err(LayerError::Manifest("negative depth".into()));
    }
    Ok(gb)
}

/// Displayable G-buffer channels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Albedo,
    Normal,
    Depth,
    Roughness,
    Metallic,
    AccumAlpha,
}

impl Channel {
    pub const ALL: [Channel; 6] = [Channel::Albedo, Channel::Normal, Channel::Depth, Channel::Roughness, Channel::Metallic, Channel::AccumAlpha];

    pub fn name(self) -> &'static str {
        match self {
            Channel::Albedo => "albedo",
            Channel::Normal => "normal",
            Channel::Depth => "depth",
            Channel::Roughness => "roughness",
            Channel::Metallic => "metallic",
            Channel::AccumAlpha => "accum_alpha",
        }
    }

    pub fn parse(name: &str) -> Option<Channel> {
        Channel::ALL.into_iter().find(|c| c.name() == name)
    }
}

/// `round(clamp(v, 0, 1)·255)` with no gamma.
pub fn unit_to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// 8-bit view of one channel.
///
/// Albedo and scalar channels are stored linearly, normals as `(n + 1) / 2`,
/// depth as `(z − near) / (far − near)` with empty pixels black.
pub fn channel_image(gb: &GBuffer, channel: Channel, camera: &Camera) -> LdrImage {
    let grey = |v: f64| [unit_to_byte(v); 3];
    let pixels = (0..gb.len())
        .map(|i| match channel {
            Channel::Albedo => gb.albedo[i].map(unit_to_byte).into(),
            Channel::Normal => (gb.normal[i].add_scalar(1.0) * 0.5).map(unit_to_byte).into(),
            Channel::Depth => {
                let z = gb.depth[i];
                if z <= 0.0 {
                    [0; 3]
                } else {
                    grey((z - camera.near) / (camera.far - camera.near))
                }
            }
            Channel::Roughness => grey(gb.roughness[i]),
            Channel::Metallic => grey(gb.metallic[i]),
            Channel::AccumAlpha => grey(gb.accum_alpha[i]),
        })
        .collect();
    LdrImage {
        width: gb.width,
        height: gb.height,
        pixels,
    }
}

pub fn encode_png(img: &LdrImage) -> Vec<u8> {
    let buf: ImageBuffer<PxRgb<u8>, Vec<u8>> = ImageBuffer::from_raw(img.width as u32, img.height as u32, img.as_bytes()).expect("pixel count matches");
    let mut out = std::io::Cursor::new(Vec::new());
    buf.write_to(&mut out, image::ImageFormat::Png).expect("in-memory PNG encoding");
    out.into_inner()
}

pub fn write_png(img: &LdrImage, path: impl AsRef<Path>) -> std::io::Result<()> {
    fs::write(path, encode_png(img))
}

pub fn decode_png(bytes: &[u8]) -> Result<LdrImage, image::ImageError> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)?.to_rgb8();
    let (w, h) = img.dimensions();
    let pixels = img.pixels().map(|p| p.0).collect();
    Ok(LdrImage {
        width: w as usize,
        height: h as usize,
        pixels,
    })
}

/// Grey 8-bit PNG from per-pixel bytes.
pub fn mask_image(width: usize, height: usize, mask: &[u8]) -> LdrImage {
    LdrImage {
        width,
        height,
        pixels: mask.iter().map(|&m| [m; 3]).collect(),
    }
}
