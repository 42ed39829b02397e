//! Image metrics and the reconstruction losses, used for regression checks.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imagebuf::RadianceImage;
use crate::math::Vec3;
use crate::splat::GBuffer;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const PSNR_CAP: f64 = 99.0;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("image sizes differ: {a:?} vs {b:?}")]
    DimensionMismatch { a: (usize, usize), b: (usize, usize) },
    #[error("lambda_1 = {0} is outside [0, 1]")]
    BadWeight(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub lambda_1: f64,
    pub lambda_o: f64,
    pub lambda_n: f64,
    pub lambda_reg: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_1: 0.8,
            lambda_o: 0.1,
            lambda_n: 0.05,
            lambda_reg: 0.01,
        }
    }
}

fn same_dims(a: &RadianceImage, b: &RadianceImage) -> Result<(), MetricError> {
    if a.same_size(b) {
        Ok(())
    } else {
        Err(MetricError::DimensionMismatch {
            a: (a.width, a.height),
            b: (b.width, b.height),
        })
    }
}

/// Mean absolute difference over all channels.
pub fn l1(a: &RadianceImage, b: &RadianceImage) -> Result<f64, MetricError> {
    same_dims(a, b)?;
    let n = 3 * a.pixels.len();
    Ok(a.pixels.iter().zip(&b.pixels).map(|(p, q)| (p - q).abs().sum()).sum::<f64>() / n.max(1) as f64)
}

pub fn mse(a: &RadianceImage, b: &RadianceImage) -> Result<f64, MetricError> {
    same_dims(a, b)?;
    let n = 3 * a.pixels.len();
    Ok(a.pixels.iter().zip(&b.pixels).map(|(p, q)| (p - q).norm_squared()).sum::<f64>() / n.max(1) as f64)
}

pub fn psnr(a: &RadianceImage, b: &RadianceImage) -> Result<f64, MetricError> {
    let m = mse(a, b)?;
    Ok(if m <= 0.0 { PSNR_CAP } else { (10.0 * (1.0 / m).log10()).min(PSNR_CAP) })
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let r = (SSIM_WINDOW / 2) as f64;
    let mut k = [0.0; SSIM_WINDOW];
    for (i, v) in k.iter_mut().enumerate() {
        let x = i as f64 - r;
        *v = (-x * x / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.map(|v| v / s)
}

/// Separable Gaussian blur; taps falling outside the image are dropped and
/// the remaining weights renormalized.
fn blur(data: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as isize;
    let pass = |src: &[f64], horizontal: bool| -> Vec<f64> {
        let mut out = vec![0.0; src.len()];
        for y in 0..h {
            for x in 0..w {
                let (mut acc, mut wsum) = (0.0, 0.0);
                for (t, kv) in k.iter().enumerate() {
                    let o = t as isize - r;
                    let (sx, sy) = if horizontal { (x as isize + o, y as isize) } else { (x as isize, y as isize + o) };
                    if sx < 0 || sy < 0 || sx >= w as isize || sy >= h as isize {
                        continue;
                    }
                    acc += kv * src[sy as usize * w + sx as usize];
                    wsum += kv;
                }
                out[y * w + x] = acc / wsum;
            }
        }
        out
    };
    pass(&pass(data, true), false)
}

/// Mean SSIM over pixels and channels, dynamic range 1.
pub fn ssim(a: &RadianceImage, b: &RadianceImage) -> Result<f64, MetricError> {
    same_dims(a, b)?;
    let (w, h) = (a.width, a.height);
    if a.pixels.is_empty() {
        return Ok(1.0);
    }
    let k = gaussian_kernel();
    let mut total = 0.0;
    for c in 0..3 {
        let x: Vec<f64> = a.pixels.iter().map(|p| p[c]).collect();
        let y: Vec<f64> = b.pixels.iter().map(|p| p[c]).collect();
        let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
        let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
        let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();
        let (mx, my) = (blur(&x, w, h, &k), blur(&y, w, h, &k));
        let (sxx, syy, sxy) = (blur(&xx, w, h, &k), blur(&yy, w, h, &k), blur(&xy, w, h, &k));
        for i in 0..x.len() {
            let vx = sxx[i] - mx[i] * mx[i];
            let vy = syy[i] - my[i] * my[i];
            let cov = sxy[i] - mx[i] * my[i];
            let num = (2.0 * mx[i] * my[i] + SSIM_C1) * (2.0 * cov + SSIM_C2);
            let den = (mx[i] * mx[i] + my[i] * my[i] + SSIM_C1) * (vx + vy + SSIM_C2);
            total += num / den;
        }
    }
    Ok(total / (3 * a.pixels.len()) as f64)
}

/// `λ₁·L1 + (1 − λ₁)(1 − SSIM)`.
pub fn loss_rgb(render: &RadianceImage, gt: &RadianceImage, lambda_1: f64) -> Result<f64, MetricError> {
    if !(0.0..=1.0).contains(&lambda_1) {
        return Err(MetricError::BadWeight(lambda_1));
    }
    let l = l1(render, gt)?;
    let s = if lambda_1 < 1.0 { 1.0 - ssim(render, gt)? } else { 0.0 };
    Ok((lambda_1 * l + (1.0 - lambda_1) * s).max(0.0))
}

/// Mean of `(1 − accumulated alpha)²`.
pub fn loss_opacity(gb: &GBuffer) -> f64 {
    gb.accum_alpha.iter().map(|a| (1.0 - a).powi(2)).sum::<f64>() / gb.len().max(1) as f64
}

/// Mean `1 − n·n_ref` over pixels where both normals are non-zero.
pub fn loss_normal(computed: &[Vec3], reference: &[Vec3]) -> f64 {
    let (sum, n) = computed
        .iter()
        .zip(reference)
        .filter(|(a, b)| **a != Vec3::zeros() && **b != Vec3::zeros())
        .fold((0.0, 0usize), |(s, n), (a, b)| (s + 1.0 - a.dot(b), n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn tv_scalar(v: &[f64], w: usize, h: usize) -> f64 {
    let mut s = 0.0;
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if x + 1 < w {
                s += (v[i + 1] - v[i]).abs();
            }
            if y + 1 < h {
                s += (v[i + w] - v[i]).abs();
            }
        }
    }
    s
}

/// Total variation of albedo, roughness, metallic and γ, each normalized by pixel count.
pub fn loss_tv(gb: &GBuffer) -> f64 {
    let (w, h) = (gb.width, gb.height);
    let n = gb.len().max(1) as f64;
    let albedo: f64 = (0..3)
        .map(|c| {
            let ch: Vec<f64> = gb.albedo.iter().map(|a| a[c]).collect();
            tv_scalar(&ch, w, h)
        })
        .sum();
    (albedo + tv_scalar(&gb.roughness, w, h) + tv_scalar(&gb.metallic, w, h) + tv_scalar(&gb.gamma, w, h)) / n
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub rgb: f64,
    pub opacity: f64,
    pub normal: f64,
    pub tv: f64,
    pub total: f64,
}

/// Weighted objective; `reference_normals` may be omitted, which zeroes that term.
pub fn total_loss(render: &RadianceImage, gt: &RadianceImage, gb: &GBuffer, reference_normals: Option<&[Vec3]>, w: &LossWeights) -> Result<LossReport, MetricError> {
    let rgb = loss_rgb(render, gt, w.lambda_1)?;
    let opacity = loss_opacity(gb);
    let normal = reference_normals.map_or(0.0, |r| loss_normal(&gb.normal, r));
    let tv = loss_tv(gb);
    Ok(LossReport {
        rgb,
        opacity,
        normal,
        tv,
        total: rgb + w.lambda_o * opacity + w.lambda_n * normal + w.lambda_reg * tv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{rgb, splat3};

    fn gradient(w: usize, h: usize) -> RadianceImage {
        RadianceImage::from_fn(w, h, |x, y| rgb(x as f64 / w as f64, y as f64 / h as f64, 0.3))
    }

    #[test]
    fn rgb_loss_examples() {
        let a = gradient(16, 12);
        assert_eq!(loss_rgb(&a, &a, 0.8).unwrap(), 0.0);
        assert!(loss_rgb(&a, &a, 0.0).unwrap().abs() < 1e-12);
        let b = RadianceImage::from_fn(16, 12, |x, y| a.get(x, y) + splat3(0.1));
        assert!((loss_rgb(&a, &b, 1.0).unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(loss_rgb(&a, &b, 1.0), loss_rgb(&b, &a, 1.0));
        assert!(matches!(loss_rgb(&a, &gradient(3, 3), 1.0), Err(MetricError::DimensionMismatch { .. })));
        assert_eq!(loss_rgb(&a, &a, 1.5), Err(MetricError::BadWeight(1.5)));
    }

    #[test]
    fn ssim_drops_with_noise() {
        let a = gradient(24, 24);
        let b = RadianceImage::from_fn(24, 24, |x, y| a.get(x, y) + splat3(if (x + y) % 2 == 0 { 0.2 } else { -0.2 }));
        let s = ssim(&a, &b).unwrap();
        assert!(s < 0.9 && s > -1.0, "{s}");
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn psnr_examples() {
        let a = RadianceImage::filled(4, 4, splat3(0.5));
        assert_eq!(psnr(&a, &a).unwrap(), 99.0);
        let b = RadianceImage::filled(4, 4, splat3(0.6));
        assert!((psnr(&a, &b).unwrap() - 20.0).abs() < 1e-9);
        let z = RadianceImage::filled(4, 4, splat3(0.0));
        let o = RadianceImage::filled(4, 4, splat3(1.0));
        assert!(psnr(&z, &o).unwrap().abs() < 1e-12);
    }

    #[test]
    fn opacity_and_normal_examples() {
        let mut gb = GBuffer::new(3, 3);
        for (alpha, want) in [(1.0, 0.0), (0.0, 1.0), (0.5, 0.25)] {
            gb.accum_alpha.fill(alpha);
            assert!((loss_opacity(&gb) - want).abs() < 1e-12);
        }
        let n = vec![Vec3::z(); 4];
        assert_eq!(loss_normal(&n, &n), 0.0);
        assert!((loss_normal(&n, &vec![-Vec3::z(); 4]) - 2.0).abs() < 1e-12);
        assert!((loss_normal(&n, &vec![Vec3::x(); 4]) - 1.0).abs() < 1e-12);
        let mut partial = n.clone();
        partial[0] = Vec3::zeros();
        assert!((loss_normal(&partial, &vec![Vec3::x(); 4]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tv_examples() {
        let (w, h) = (8, 5);
        let mut gb = GBuffer::new(w, h);
        gb.albedo.fill(splat3(0.3));
        gb.roughness.fill(0.7);
        assert_eq!(loss_tv(&gb), 0.0);
        for y in 0..h {
            for x in 4..w {
                gb.metallic[y * w + x] = 1.0;
            }
        }
        let t = loss_tv(&gb);
        assert!((t - h as f64 / (w * h) as f64).abs() < 1e-12);
        for m in gb.metallic.iter_mut() {
            *m *= 2.0;
        }
        assert!((loss_tv(&gb) - 2.0 * t).abs() < 1e-12);
    }

    #[test]
    fn total_uses_weights() {
        let a = gradient(12, 12);
        let mut gb = GBuffer::new(12, 12);
        gb.accum_alpha.fill(0.5);
        let w = LossWeights::default();
        let r = total_loss(&a, &a, &gb, None, &w).unwrap();
        assert!((r.total - 0.1 * 0.25).abs() < 1e-12);
    }
}
