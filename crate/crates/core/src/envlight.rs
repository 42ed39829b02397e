//! Cubemap environment light with a box-filtered mip chain.
//!
//! Face order is `+X, -X, +Y, -Y, +Z, -Z`. Within a face, `(u, v)` follow the
//! usual cube-map convention (`v` grows downward):
//!
//! | face | major axis | `u` from | `v` from |
//! |------|------------|----------|----------|
//! | 0 +X | `+x`       | `-z`     | `-y`     |
//! | 1 -X | `-x`       | `+z`     | `-y`     |
//! | 2 +Y | `+y`       | `+x`     | `+z`     |
//! | 3 -Y | `-y`       | `+x`     | `-z`     |
//! | 4 +Z | `+z`       | `+x`     | `-y`     |
//! | 5 -Z | `-z`       | `-x`     | `-y`     |
//!
//! with `u = (s / |major| + 1) / 2` and likewise for `v`. When two or three
//! components share the largest magnitude the lower face index wins.
//!
//! Equirectangular maps use `+Y` as the pole: row `0` is straight up, column
//! `0` starts at azimuth `φ = 0` pointing along `+X`, and `φ` turns toward `+Z`.

use std::f64::consts::PI;
use std::sync::Arc;

use thiserror::Error;

use crate::imagebuf::RadianceImage;
use crate::math::{is_finite3, Rgb, Vec3};

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("cubemap face size {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("face {face} has {found} texels, expected {expected}")]
    FaceSize { face: usize, expected: usize, found: usize },
    #[error("environment contains {count} non-finite texels")]
    NonFinite { count: usize },
    #[error("environment contains {count} negative texels")]
    Negative { count: usize },
    #[error("equirect image is empty")]
    EmptyImage,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FaceUv {
    pub face: usize,
    pub u: f64,
    pub v: f64,
}

pub fn direction_to_face_uv(dir: &Vec3) -> FaceUv {
    let (ax, ay, az) = (dir.x.abs(), dir.y.abs(), dir.z.abs());
    let (face, ma, sc, tc) = if ax >= ay && ax >= az {
        if dir.x >= 0.0 {
            (0, ax, -dir.z, -dir.y)
        } else {
            (1, ax, dir.z, -dir.y)
        }
    } else if ay >= az {
        if dir.y >= 0.0 {
            (2, ay, dir.x, dir.z)
        } else {
            (3, ay, dir.x, -dir.z)
        }
    } else if dir.z >= 0.0 {
        (4, az, dir.x, -dir.y)
    } else {
        (5, az, -dir.x, -dir.y)
    };
    FaceUv {
        face,
        u: 0.5 * (sc / ma + 1.0),
        v: 0.5 * (tc / ma + 1.0),
    }
}

/// Unit direction through `(u, v)` on `face`.
pub fn face_uv_to_direction(face: usize, u: f64, v: f64) -> Vec3 {
    let sc = 2.0 * u - 1.0;
    let tc = 2.0 * v - 1.0;
    let d = match face {
        0 => Vec3::new(1.0, -tc, -sc),
        1 => Vec3::new(-1.0, -tc, sc),
        2 => Vec3::new(sc, 1.0, tc),
        3 => Vec3::new(sc, -1.0, -tc),
        4 => Vec3::new(sc, -tc, 1.0),
        5 => Vec3::new(-sc, -tc, -1.0),
        _ => panic!("cube face index {face} out of range"),
    };
    d.normalize()
}

/// One level of the mip chain: six square faces, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct MipLevel {
    pub size: usize,
    pub faces: [Vec<Rgb>; 6],
}

impl MipLevel {
    pub fn texel(&self, face: usize, x: usize, y: usize) -> Rgb {
        self.faces[face][y * self.size + x]
    }

    fn bilinear(&self, face: usize, u: f64, v: f64) -> Rgb {
        let n = self.size;
        let fx = (u * n as f64 - 0.5).clamp(0.0, (n - 1) as f64);
        let fy = (v * n as f64 - 0.5).clamp(0.0, (n - 1) as f64);
        let x0 = fx.floor() as usize;
        let y0 = fy.floor() as usize;
        let x1 = (x0 + 1).min(n - 1);
        let y1 = (y0 + 1).min(n - 1);
        let tx = fx - x0 as f64;
        let ty = fy - y0 as f64;
        let top = self.texel(face, x0, y0) * (1.0 - tx) + self.texel(face, x1, y0) * tx;
        let bottom = self.texel(face, x0, y1) * (1.0 - tx) + self.texel(face, x1, y1) * tx;
        top * (1.0 - ty) + bottom * ty
    }

    pub fn face_image(&self, face: usize) -> RadianceImage {
        RadianceImage {
            width: self.size,
            height: self.size,
            pixels: self.faces[face].clone(),
        }
    }

    pub fn mean(&self) -> Rgb {
        let total: Rgb = self.faces.iter().flatten().sum();
        total / (6 * self.size * self.size) as f64
    }
}

/// 2×2 box-filtered chain from `level0` down to 1×1.
pub fn build_mip_chain(level0: MipLevel) -> Result<Vec<MipLevel>, EnvError> {
    if !level0.size.is_power_of_two() {
        return Err(EnvError::NotPowerOfTwo(level0.size));
    }
    let mut chain = vec![level0];
    while chain.last().unwrap().size > 1 {
        let fine = chain.last().unwrap();
        let size = fine.size / 2;
        let faces = std::array::from_fn(|f| {
            let mut out = Vec::with_capacity(size * size);
            for y in 0..size {
                for x in 0..size {
                    let sum = fine.texel(f, 2 * x, 2 * y)
                        + fine.texel(f, 2 * x + 1, 2 * y)
                        + fine.texel(f, 2 * x, 2 * y + 1)
                        + fine.texel(f, 2 * x + 1, 2 * y + 1);
                    out.push(sum * 0.25);
                }
            }
            out
        });
        chain.push(MipLevel { size, faces });
    }
    Ok(chain)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cubemap {
    mips: Vec<MipLevel>,
}

impl Cubemap {
    pub fn from_faces(face_size: usize, faces: [Vec<Rgb>; 6]) -> Result<Self, EnvError> {
        if !face_size.is_power_of_two() {
            return Err(EnvError::NotPowerOfTwo(face_size));
        }
        for (face, data) in faces.iter().enumerate() {
            if data.len() != face_size * face_size {
                return Err(EnvError::FaceSize {
                    face,
                    expected: face_size * face_size,
                    found: data.len(),
                });
            }
        }
        let non_finite = faces.iter().flatten().filter(|t| !is_finite3(t)).count();
        if non_finite > 0 {
            return Err(EnvError::NonFinite { count: non_finite });
        }
        let negative = faces.iter().flatten().filter(|t| t.min() < 0.0).count();
        if negative > 0 {
            return Err(EnvError::Negative { count: negative });
        }
        let mips = build_mip_chain(MipLevel {
            size: face_size,
            faces,
        })?;
        Ok(Self { mips })
    }

    pub fn constant(face_size: usize, value: Rgb) -> Result<Self, EnvError> {
        let face = vec![value; face_size * face_size];
        Self::from_faces(face_size, std::array::from_fn(|_| face.clone()))
    }

    /// Fills every texel from a direction function evaluated at texel centers.
    pub fn from_fn(face_size: usize, f: impl Fn(&Vec3) -> Rgb) -> Result<Self, EnvError> {
        let faces = std::array::from_fn(|face| {
            let mut out = Vec::with_capacity(face_size * face_size);
            for y in 0..face_size {
                for x in 0..face_size {
                    let u = (x as f64 + 0.5) / face_size as f64;
                    let v = (y as f64 + 0.5) / face_size as f64;
                    out.push(f(&face_uv_to_direction(face, u, v)));
                }
            }
            out
        });
        Self::from_faces(face_size, faces)
    }

    pub fn face_size(&self) -> usize {
        self.mips[0].size
    }

    pub fn lambda_max(&self) -> f64 {
        (self.mips.len() - 1) as f64
    }

    pub fn mips(&self) -> &[MipLevel] {
        &self.mips
    }

    /// Trilinear lookup at a fractional mip level.
    pub fn sample_level(&self, dir: &Vec3, lambda: f64) -> Rgb {
        let fuv = direction_to_face_uv(dir);
        let lambda = lambda.clamp(0.0, self.lambda_max());
        let lo = lambda.floor() as usize;
        let hi = (lo + 1).min(self.mips.len() - 1);
        let t = lambda - lo as f64;
        let a = self.mips[lo].bilinear(fuv.face, fuv.u, fuv.v);
        if t == 0.0 || hi == lo {
            return a;
        }
        let b = self.mips[hi].bilinear(fuv.face, fuv.u, fuv.v);
        a * (1.0 - t) + b * t
    }

    /// Roughness-indexed query: mip level `log2(roughness + 1) * lambda_max`.
    pub fn sample_env(&self, dir: &Vec3, roughness: f64) -> Rgb {
        let lambda = (roughness.clamp(0.0, 1.0) + 1.0).log2() * self.lambda_max();
        self.sample_level(dir, lambda)
    }
}

/// Direction of the equirect pixel-space coordinate `(px, py)` (continuous, in pixels).
pub fn equirect_direction(px: f64, py: f64, width: usize, height: usize) -> Vec3 {
    let phi = px / width as f64 * 2.0 * PI;
    let theta = py / height as f64 * PI;
    Vec3::new(theta.sin() * phi.cos(), theta.cos(), theta.sin() * phi.sin())
}

/// Bilinear equirect lookup along `dir`, wrapping in azimuth.
pub fn sample_equirect(image: &RadianceImage, dir: &Vec3) -> Rgb {
    let d = dir.normalize();
    let theta = d.y.clamp(-1.0, 1.0).acos();
    let phi = d.z.atan2(d.x).rem_euclid(2.0 * PI);
    let (w, h) = (image.width, image.height);
    let fx = phi / (2.0 * PI) * w as f64 - 0.5;
    let fy = (theta / PI * h as f64 - 0.5).clamp(0.0, (h - 1) as f64);
    let x0f = fx.floor();
    let tx = fx - x0f;
    let x0 = (x0f as i64).rem_euclid(w as i64) as usize;
    let x1 = (x0 + 1) % w;
    let y0 = fy.floor() as usize;
    let y1 = (y0 + 1).min(h - 1);
    let ty = fy - y0 as f64;
    let top = image.get(x0, y0) * (1.0 - tx) + image.get(x1, y0) * tx;
    let bottom = image.get(x0, y1) * (1.0 - tx) + image.get(x1, y1) * tx;
    top * (1.0 - ty) + bottom * ty
}

/// Resamples a latitude-longitude radiance map onto a cubemap.
pub fn load_equirect(image: &RadianceImage, face_size: usize) -> Result<Cubemap, EnvError> {
    if image.width == 0 || image.height == 0 {
        return Err(EnvError::EmptyImage);
    }
    if !face_size.is_power_of_two() {
        return Err(EnvError::NotPowerOfTwo(face_size));
    }
    let non_finite = image.pixels.iter().filter(|p| !is_finite3(p)).count();
    if non_finite > 0 {
        return Err(EnvError::NonFinite { count: non_finite });
    }
    let negative = image.pixels.iter().filter(|p| p.min() < 0.0).count();
    if negative > 0 {
        return Err(EnvError::Negative { count: negative });
    }
    Cubemap::from_fn(face_size, |d| sample_equirect(image, d))
}

/// A cubemap plus a rotation about the world `+Y` axis.
#[derive(Clone, Debug)]
pub struct Environment {
    pub cubemap: Arc<Cubemap>,
    yaw: f64,
    cos_yaw: f64,
    sin_yaw: f64,
}

impl Environment {
    pub fn new(cubemap: Arc<Cubemap>, yaw: f64) -> Self {
        let yaw = yaw.rem_euclid(2.0 * PI);
        Self {
            cubemap,
            yaw,
            cos_yaw: yaw.cos(),
            sin_yaw: yaw.sin(),
        }
    }

    pub fn yaw(&self) -> f64 {
        self.yaw
    }

    /// Rotates a world direction into the cubemap's frame.
    fn to_map(&self, dir: &Vec3) -> Vec3 {
        if self.yaw == 0.0 {
            return *dir;
        }
        // inverse rotation about +Y
        let (c, s) = (self.cos_yaw, self.sin_yaw);
        Vec3::new(c * dir.x + s * dir.z, dir.y, -s * dir.x + c * dir.z)
    }

    pub fn sample(&self, dir: &Vec3, roughness: f64) -> Rgb {
        self.cubemap.sample_env(&self.to_map(dir), roughness)
    }
}
