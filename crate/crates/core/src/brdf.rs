//! Microfacet BRDF: GGX normal distribution, Schlick Fresnel, separable Smith
//! masking, half-vector importance sampling and the split-sum lookup table.
//!
//! Roughness enters the distribution directly as the GGX width (no perceptual
//! squaring). Everything here is a pure function of its inputs.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::math::{orthonormal_basis, splat3, Rgb, Vec3};

/// Roughness floor applied wherever the distribution is evaluated or sampled.
pub const ROUGHNESS_MIN: f64 = 0.01;

/// Dielectric base reflectance.
pub const DIELECTRIC_F0: f64 = 0.04;

/// Smallest `n·v` represented in the lookup table; shading clamps to it.
pub const LUT_COS_MIN: f64 = 0.01;

pub const LUT_DEFAULT_RESOLUTION: usize = 64;
pub const LUT_DEFAULT_SAMPLES: usize = 1024;

const LUT_MAGIC: &[u8; 6] = b"SSLUT1";

#[derive(Debug, Error)]
pub enum BrdfError {
    #[error("lut resolution {0} is below the minimum of 16")]
    ResolutionTooSmall(usize),
    #[error("{0} samples per lut entry is below the minimum of 256")]
    TooFewSamples(usize),
    #[error("lut file does not start with the SSLUT1 magic")]
    BadMagic,
    #[error("lut payload truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("lut entry {index} is not finite")]
    NonFinite { index: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Surface material as stored per Gaussian and per G-buffer pixel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaterialParams {
    pub albedo: Rgb,
    pub roughness: f64,
    pub metallic: f64,
}

impl MaterialParams {
    /// Builds a material with every component clamped to `[0, 1]`.
    pub fn new(albedo: Rgb, roughness: f64, metallic: f64) -> Self {
        Self {
            albedo,
            roughness,
            metallic,
        }
        .clamped()
    }

    pub fn clamped(self) -> Self {
        Self {
            albedo: self.albedo.map(|c| c.clamp(0.0, 1.0)),
            roughness: self.roughness.clamp(0.0, 1.0),
            metallic: self.metallic.clamp(0.0, 1.0),
        }
    }

    /// Roughness with the evaluation floor applied.
    pub fn eval_roughness(&self) -> f64 {
        self.roughness.max(ROUGHNESS_MIN)
    }

    pub fn f0(&self) -> Rgb {
        f0_from_material(&self.albedo, self.metallic)
    }
}

impl Default for MaterialParams {
    fn default() -> Self {
        Self::new(splat3(0.5), 0.5, 0.0)
    }
}

/// GGX / Trowbridge-Reitz normal distribution.
pub fn ggx_ndf(cos_hn: f64, roughness: f64) -> f64 {
    let a2 = roughness * roughness;
    let c = cos_hn.clamp(0.0, 1.0);
    let denom = c * c * (a2 - 1.0) + 1.0;
    a2 / (PI * denom * denom)
}

pub fn fresnel_schlick(cos_vh: f64, f0: &Rgb) -> Rgb {
    let grazing = (1.0 - cos_vh.clamp(0.0, 1.0)).powi(5);
    f0.map(|f| f + (1.0 - f) * grazing)
}

pub fn f0_from_material(albedo: &Rgb, metallic: f64) -> Rgb {
    albedo.map(|a| DIELECTRIC_F0 + (a - DIELECTRIC_F0) * metallic)
}

/// Single-direction Smith masking term for GGX.
pub fn smith_g1(cos_n: f64, roughness: f64) -> f64 {
    let a2 = roughness * roughness;
    let z = cos_n;
    2.0 * z / (z + (a2 + (1.0 - a2) * z * z).sqrt())
}

/// Separable shadowing-masking `G1(n·wi) G1(n·wo)`.
pub fn smith_geometry(cos_in: f64, cos_on: f64, roughness: f64) -> f64 {
    smith_g1(cos_in, roughness) * smith_g1(cos_on, roughness)
}

/// Diffuse and specular lobes of the BRDF evaluated for one direction pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BrdfValue {
    pub diffuse: Rgb,
    pub specular: Rgb,
}

pub fn eval_brdf(w_i: &Vec3, w_o: &Vec3, n: &Vec3, mat: &MaterialParams) -> BrdfValue {
    let mat = mat.clamped();
    let diffuse = mat.albedo * ((1.0 - mat.metallic) / PI);
    let zero = BrdfValue {
        diffuse,
        specular: Rgb::zeros(),
    };

    let cos_i = n.dot(w_i);
    let cos_o = n.dot(w_o);
    if cos_i <= 0.0 || cos_o <= 0.0 {
        return zero;
    }
    let half = w_i + w_o;
    let len = half.norm();
    if len < 1e-12 {
        return zero;
    }
    let h = half / len;
    let rough = mat.eval_roughness();
    let d = ggx_ndf(n.dot(&h), rough);
    let f = fresnel_schlick(w_o.dot(&h), &mat.f0());
    let g = smith_geometry(cos_i, cos_o, rough);
    BrdfValue {
        diffuse,
        specular: f * (d * g / (4.0 * cos_i * cos_o)),
    }
}

/// One importance-sampled incident direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GgxSample {
    pub w_i: Vec3,
    pub half: Vec3,
    /// Solid-angle density of `w_i`.
    pub pdf: f64,
}

/// Samples a half vector proportional to `D(h)(n·h)` and reflects `w_o` about it.
///
/// Returns `None` when the reflected direction falls below the horizon; callers
/// count that sample as a zero contribution.
pub fn sample_ggx(w_o: &Vec3, n: &Vec3, roughness: f64, u1: f64, u2: f64) -> Option<GgxSample> {
    let rough = roughness.max(ROUGHNESS_MIN);
    let a2 = rough * rough;
    let cos2 = ((1.0 - u1) / (1.0 + u1 * (a2 - 1.0))).clamp(0.0, 1.0);
    let cos_t = cos2.sqrt();
    let sin_t = (1.0 - cos2).max(0.0).sqrt();
    let phi = 2.0 * PI * u2;
    let (t, b) = orthonormal_basis(n);
    let h = (t * (sin_t * phi.cos()) + b * (sin_t * phi.sin()) + n * cos_t).normalize();

    let o_h = w_o.dot(&h);
    if o_h <= 0.0 {
        return None;
    }
    let w_i = (h * (2.0 * o_h) - w_o).normalize();
    if n.dot(&w_i) <= 0.0 {
        return None;
    }
    let pdf = ggx_ndf(cos_t, rough) * cos_t / (4.0 * o_h);
    if !(pdf > 0.0 && pdf.is_finite()) {
        return None;
    }
    Some(GgxSample { w_i, half: h, pdf })
}

/// Density `sample_ggx` assigns to `w_i`.
pub fn ggx_pdf(w_o: &Vec3, w_i: &Vec3, n: &Vec3, roughness: f64) -> f64 {
    let half = w_i + w_o;
    let len = half.norm();
    if len < 1e-12 {
        return 0.0;
    }
    let h = half / len;
    let o_h = w_o.dot(&h);
    if o_h <= 0.0 {
        return 0.0;
    }
    let cos_h = n.dot(&h).max(0.0);
    ggx_ndf(cos_h, roughness.max(ROUGHNESS_MIN)) * cos_h / (4.0 * o_h)
}

/// Split-sum table of `(scale, bias)` so that `F_s = f0 * scale + bias`.
///
/// Rows index `n·v`, columns index roughness; both axes place node `0` at
/// `0.01` and node `N-1` at `1.0`, uniformly spaced in between.
#[derive(Clone, Debug, PartialEq)]
pub struct BrdfLut {
    resolution: usize,
    entries: Vec<[f32; 2]>,
}

impl BrdfLut {
    pub fn from_entries(resolution: usize, entries: Vec<[f32; 2]>) -> Result<Self, BrdfError> {
        if resolution < 2 {
            return Err(BrdfError::ResolutionTooSmall(resolution));
        }
        let expected = resolution * resolution;
        if entries.len() != expected {
            return Err(BrdfError::Truncated {
                expected: expected * 8,
                found: entries.len() * 8,
            });
        }
        if let Some(index) = entries
            .iter()
            .position(|e| !(e[0].is_finite() && e[1].is_finite()))
        {
            return Err(BrdfError::NonFinite { index });
        }
        Ok(Self {
            resolution,
            entries,
        })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn entries(&self) -> &[[f32; 2]] {
        &self.entries
    }

    /// Stored `(scale, bias)` at a grid node.
    pub fn entry(&self, cos_row: usize, rough_col: usize) -> (f64, f64) {
        let e = self.entries[cos_row * self.resolution + rough_col];
        (e[0] as f64, e[1] as f64)
    }

    /// Axis value of node `i` (shared by both axes).
    pub fn axis_value(&self, i: usize) -> f64 {
        lut_axis_value(i, self.resolution)
    }

    /// Bilinear `(scale, bias)` with edge clamping.
    pub fn sample(&self, cos_nv: f64, roughness: f64) -> (f64, f64) {
        let n = self.resolution;
        let to_index = |x: f64| {
            let t = (x.clamp(LUT_COS_MIN, 1.0) - LUT_COS_MIN) / (1.0 - LUT_COS_MIN);
            t * (n - 1) as f64
        };
        let fr = to_index(cos_nv);
        let fc = to_index(roughness);
        let r0 = (fr.floor() as usize).min(n - 1);
        let c0 = (fc.floor() as usize).min(n - 1);
        let r1 = (r0 + 1).min(n - 1);
        let c1 = (c0 + 1).min(n - 1);
        let tr = fr - r0 as f64;
        let tc = fc - c0 as f64;
        let (s00, b00) = self.entry(r0, c0);
        let (s01, b01) = self.entry(r0, c1);
        let (s10, b10) = self.entry(r1, c0);
        let (s11, b11) = self.entry(r1, c1);
        let bilerp = |a: f64, b: f64, c: f64, d: f64| {
            let top = a + (b - a) * tc;
            let bottom = c + (d - c) * tc;
            top + (bottom - top) * tr
        };
        (bilerp(s00, s01, s10, s11), bilerp(b00, b01, b10, b11))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(10 + self.entries.len() * 8);
        out.extend_from_slice(LUT_MAGIC);
        out.extend_from_slice(&(self.resolution as u32).to_le_bytes());
        for e in &self.entries {
            out.extend_from_slice(&e[0].to_le_bytes());
            out.extend_from_slice(&e[1].to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, BrdfError> {
        if bytes.len() < 10 {
            return Err(BrdfError::Truncated {
                expected: 10,
                found: bytes.len(),
            });
        }
        if &bytes[..6] != LUT_MAGIC {
            return Err(BrdfError::BadMagic);
        }
        let resolution = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
        let expected = 10 + resolution * resolution * 8;
        if bytes.len() < expected {
            return Err(BrdfError::Truncated {
                expected,
                found: bytes.len(),
            });
        }
        let entries = bytes[10..expected]
            .chunks_exact(8)
            .map(|c| {
                [
                    f32::from_le_bytes(c[..4].try_into().unwrap()),
                    f32::from_le_bytes(c[4..].try_into().unwrap()),
                ]
            })
            .collect();
        Self::from_entries(resolution, entries)
    }

    pub fn write_to(&self, path: impl AsRef<Path>) -> Result<(), BrdfError> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read_from(path: impl AsRef<Path>) -> Result<Self, BrdfError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

pub fn lut_axis_value(i: usize, resolution: usize) -> f64 {
    LUT_COS_MIN + (1.0 - LUT_COS_MIN) * i as f64 / (resolution - 1) as f64
}

/// Monte-Carlo estimate of the two split integrals for one `(n·v, roughness)`.
///
/// GGX importance sampling over a Hammersley set: midpoint-stratified in the
/// polar coordinate, radical-inverse azimuth rotated by a draw from `rng`.
/// Below-horizon samples contribute zero but still count toward the divisor.
pub fn integrate_split_sum(cos_nv: f64, roughness: f64, samples: usize, rng: &mut impl Rng) -> (f64, f64) {
    let cos_nv = cos_nv.clamp(1e-4, 1.0);
    let n = Vec3::z();
    let v = Vec3::new((1.0 - cos_nv * cos_nv).max(0.0).sqrt(), 0.0, cos_nv);
    let rough = roughness.max(ROUGHNESS_MIN);
    let shift2: f64 = rng.random();
    let (mut scale, mut bias) = (0.0, 0.0);
    for i in 0..samples {
        let u1 = (i as f64 + 0.5) / samples as f64;
        let u2 = (hammersley_radical(i as u32) + shift2).fract();
        let Some(s) = sample_ggx(&v, &n, rough, u1, u2) else {
            continue;
        };
        let cos_l = s.w_i.z;
        let cos_h = s.half.z;
        let v_h = v.dot(&s.half).max(0.0);
        let g = smith_geometry(cos_l, cos_nv, rough);
        let g_vis = g * v_h / (cos_h * cos_nv);
        let fc = (1.0 - v_h).powi(5);
        scale += (1.0 - fc) * g_vis;
        bias += fc * g_vis;
    }
    (scale / samples as f64, bias / samples as f64)
}

fn hammersley_radical(i: u32) -> f64 {
    i.reverse_bits() as f64 / 4_294_967_296.0
}

pub fn precompute_brdf_lut(resolution: usize, samples_per_entry: usize, seed: u64) -> Result<BrdfLut, BrdfError> {
    if resolution < 16 {
        return Err(BrdfError::ResolutionTooSmall(resolution));
    }
    if samples_per_entry < 256 {
        return Err(BrdfError::TooFewSamples(samples_per_entry));
    }
    let entries: Vec<[f32; 2]> = (0..resolution * resolution)
        .into_par_iter()
        .map(|idx| {
            let row = idx / resolution;
            let col = idx % resolution;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(idx as u64);
            let (s, b) = integrate_split_sum(
                lut_axis_value(row, resolution),
                lut_axis_value(col, resolution),
                samples_per_entry,
                &mut rng,
            );
            // Both integrals are bounded by the directional albedo, itself <= 1.
            [s.clamp(0.0, 1.0) as f32, b.clamp(0.0, 1.0) as f32]
        })
        .collect();
    BrdfLut::from_entries(resolution, entries)
}

/// `F_s = f0 * scale + bias` per channel.
pub fn lookup_brdf(lut: &BrdfLut, cos_nv: f64, roughness: f64, f0: &Rgb) -> Rgb {
    let (scale, bias) = lut.sample(cos_nv, roughness);
    f0.map(|f| f * scale + bias)
}
