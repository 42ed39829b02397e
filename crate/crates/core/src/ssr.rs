//! Screen-space ray marching against the composited depth buffer and the
//! one-bounce Monte-Carlo specular estimator built on it.

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::brdf::{eval_brdf, sample_ggx, GgxSample};
use crate::envlight::Environment;
use crate::imagebuf::{LdrImage, RadianceImage};
use crate::math::{Rgb, Vec3};
use crate::shading::DirectPass;
use crate::splat::{Camera, GBuffer, NormalSource};

#[derive(Debug, Error, PartialEq)]
pub enum SettingsError {
    #[error("n_samples must be at least 1")]
    NoSamples,
    #[error("{0} must be positive")]
    NonPositive(&'static str),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderSettings {
    pub n_samples: usize,
    /// March step, meters.
    pub step_size: f64,
    pub max_ray_length: f64,
    /// Largest depth overshoot still accepted as a hit, meters.
    pub thickness: f64,
    pub ssr_enabled: bool,
    pub exposure: f64,
    pub gamma: f64,
    pub seed: u64,
    pub normal_source: NormalSource,
}

impl Default for RenderSettings {
    fn default() -> Self {
        Self {
            n_samples: 8,
            step_size: 0.05,
            max_ray_length: 20.0,
            thickness: 0.15,
            ssr_enabled: true,
            exposure: 1.0,
            gamma: 2.2,
            seed: 0,
            normal_source: NormalSource::Depth,
        }
    }
}

impl RenderSettings {
    pub fn validate(&self) -> Result<(), SettingsError> {
        if self.n_samples == 0 {
            return Err(SettingsError::NoSamples);
        }
        for (name, v) in [
            ("step_size", self.step_size),
            ("thickness", self.thickness),
            ("max_ray_length", self.max_ray_length),
            ("exposure", self.exposure),
            ("gamma", self.gamma),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SettingsError::NonPositive(name));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MissReason {
    OffScreen,
    EmptyPixel,
    Exhausted,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HitResult {
    Hit {
        /// Continuous pixel coordinates of the crossing step.
        uv: Vector2<f64>,
        /// Marched distance, meters.
        distance: f64,
    },
    Miss(MissReason),
}

impl HitResult {
    pub fn is_hit(&self) -> bool {
        matches!(self, HitResult::Hit { .. })
    }
}

/// Depth channel view used for marching; `0` marks an empty pixel.
#[derive(Clone, Copy, Debug)]
pub struct DepthView<'a> {
    pub width: usize,
    pub height: usize,
    pub depth: &'a [f64],
}

impl<'a> DepthView<'a> {
    pub fn new(width: usize, height: usize, depth: &'a [f64]) -> Self {
        assert_eq!(depth.len(), width * height);
        Self { width, height, depth }
    }
}

/// Depth of covered pixels, zero elsewhere.
pub fn surface_depth(gbuffer: &GBuffer) -> Vec<f64> {
    (0..gbuffer.len())
        .map(|i| if gbuffer.covered(i) { gbuffer.depth[i] } else { 0.0 })
        .collect()
}

/// Marches `origin + t·dir` for `t = Δs, 2Δs, …` and reports the first step
/// whose depth difference crosses from in front (`≤ 0`) to behind (`> 0`)
/// by at most `thickness`.
///
/// Steps that stay in the origin pixel within `thickness` of the origin depth
/// are ignored so a surface cannot hit itself.
pub fn trace_screen_ray(depth: &DepthView<'_>, camera: &Camera, origin_world: &Vec3, dir: &Vec3, settings: &RenderSettings) -> HitResult {
    let oc = camera.to_camera(origin_world);
    let dc = camera.rotate_to_camera(dir);
    let o_uv = camera.project_camera(&oc);
    let origin_pixel = (o_uv.x.floor() as i64, o_uv.y.floor() as i64);
    let step = settings.step_size;
    let steps = (settings.max_ray_length / step + 1e-9).floor() as usize;
    let mut prev_dz = 0.0_f64;
    for k in 1..=steps {
        let t = k as f64 * step;
        let p = oc + dc * t;
        if p.z <= camera.near {
            return HitResult::Miss(MissReason::OffScreen);
        }
        let uv = camera.project_camera(&p);
        if !camera.in_viewport(&uv) {
            return HitResult::Miss(MissReason::OffScreen);
        }
        let (px, py) = (uv.x.floor() as i64, uv.y.floor() as i64);
        if (px, py) == origin_pixel && (p.z - oc.z).abs() <= settings.thickness {
            continue;
        }
        let scene = depth.depth[py as usize * depth.width + px as usize];
        if scene <= 0.0 {
            return HitResult::Miss(MissReason::EmptyPixel);
        }
        let dz = p.z - scene;
        if prev_dz <= 0.0 && dz > 0.0 && dz <= settings.thickness {
            return HitResult::Hit { uv, distance: t };
        }
        prev_dz = dz;
    }
    HitResult::Miss(MissReason::Exhausted)
}

/// Indirect specular estimate plus per-pixel diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct IndirectPass {
    pub specular: RadianceImage,
    /// Fraction of drawn samples that hit on screen.
    pub hit_fraction: Vec<f64>,
}

impl IndirectPass {
    /// 8-bit hit mask, 255 where every sample hit.
    pub fn hit_mask(&self, width: usize, height: usize) -> Vec<u8> {
        assert_eq!(self.hit_fraction.len(), width * height);
        self.hit_fraction.iter().map(|f| (f * 255.0).round() as u8).collect()
    }
}

/// Per-pixel RNG: one ChaCha stream per pixel, samples drawn in order.
pub fn pixel_rng(seed: u64, pixel: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(pixel as u64);
    rng
}

/// Reflection samples drawn for one pixel, in draw order.
#[derive(Clone, Debug, PartialEq)]
pub struct PixelTrace {
    pub origin: Vec3,
    pub normal: Vec3,
    /// `None` for a draw that fell below the horizon.
    pub samples: Vec<Option<(GgxSample, HitResult)>>,
}

/// Draws and marches the reflection samples of pixel `i`; `None` for pixels
/// that are not shaded or face away from the camera.
pub fn trace_pixel(gbuffer: &GBuffer, depth: &DepthView<'_>, camera: &Camera, settings: &RenderSettings, i: usize) -> Option<PixelTrace> {
    if !gbuffer.shadeable(i) {
        return None;
    }
    let w = gbuffer.width;
    let (px, py) = ((i % w) as f64 + 0.5, (i / w) as f64 + 0.5);
    let w_o = -camera.view_dir(px, py);
    let n = gbuffer.normal[i];
    if n.dot(&w_o) <= 0.0 {
        return None;
    }
    let origin = camera.unproject(px, py, gbuffer.depth[i]);
    let rough = gbuffer.material(i).roughness;
    let mut rng = pixel_rng(settings.seed, i);
    let samples = (0..settings.n_samples.max(1))
        .map(|_| {
            let (u1, u2): (f64, f64) = (rng.random(), rng.random());
            let s = sample_ggx(&w_o, &n, rough, u1, u2)?;
            let hit = trace_screen_ray(depth, camera, &origin, &s.w_i, settings);
            Some((s, hit))
        })
        .collect();
    Some(PixelTrace { origin, normal: n, samples })
}

/// `c_s' = 1/N Σ f_s c₁ (ωᵢ·n) / p(ωᵢ)` with `c₁` read from the direct pass at
/// the screen-space hit and from the environment on a miss.
///
/// Below-horizon draws count toward `N` with zero contribution; a pixel with no
/// usable draw keeps its direct specular.
pub fn integrate_indirect_specular(gbuffer: &GBuffer, direct: &DirectPass, env: &Environment, camera: &Camera, settings: &RenderSettings) -> IndirectPass {
    let c1 = direct.radiance();
    let depth = surface_depth(gbuffer);
    let view = DepthView::new(gbuffer.width, gbuffer.height, &depth);
    let w = gbuffer.width;
    let results: Vec<(Rgb, f64)> = (0..gbuffer.len())
        .into_par_iter()
        .map(|i| {
            let Some(trace) = trace_pixel(gbuffer, &view, camera, settings, i) else {
                let keep = if gbuffer.shadeable(i) { direct.specular.pixels[i] } else { Rgb::zeros() };
                return (keep, 0.0);
            };
            let (px, py) = ((i % w) as f64 + 0.5, (i / w) as f64 + 0.5);
            let w_o = -camera.view_dir(px, py);
            let mat = gbuffer.material(i);
            let n_samples = trace.samples.len();
            let mut sum = Rgb::zeros();
            let (mut valid, mut hits) = (0usize, 0usize);
            for (s, hit) in trace.samples.iter().flatten() {
                valid += 1;
                let incoming = match hit {
                    HitResult::Hit { uv, .. } => {
                        hits += 1;
                        c1.sample_bilinear(uv.x, uv.y)
                    }
                    HitResult::Miss(_) => env.sample(&s.w_i, 0.0),
                };
                let f_s = eval_brdf(&s.w_i, &w_o, &trace.normal, &mat).specular;
                sum += f_s.component_mul(&incoming) * (trace.normal.dot(&s.w_i) / s.pdf);
            }
            if valid == 0 {
                return (direct.specular.pixels[i], 0.0);
            }
            (sum / n_samples as f64, hits as f64 / n_samples as f64)
        })
        .collect();
    let (specular, hit_fraction) = results.into_iter().unzip();
    IndirectPass {
        specular: RadianceImage {
            width: w,
            height: gbuffer.height,
            pixels: specular,
        },
        hit_fraction,
    }
}

/// Exposure, clamp to `[0, 1]`, gamma encode, round to 8 bits.
pub fn tonemap_channel(hdr: f64, exposure: f64, gamma: f64) -> u8 {
    let x = (exposure * hdr).clamp(0.0, 1.0).powf(1.0 / gamma);
    (x * 255.0).round() as u8
}

pub fn composite_final(c_d: &RadianceImage, c_spec: &RadianceImage, settings: &RenderSettings) -> LdrImage {
    assert!(c_d.same_size(c_spec), "diffuse and specular images differ in size");
    let pixels = c_d
        .pixels
        .iter()
        .zip(&c_spec.pixels)
        .map(|(d, s)| {
            let hdr = d + s;
            [0, 1, 2].map(|c| tonemap_channel(hdr[c], settings.exposure, settings.gamma))
        })
        .collect();
    LdrImage {
        width: c_d.width,
        height: c_d.height,
        pixels,
    }
}
