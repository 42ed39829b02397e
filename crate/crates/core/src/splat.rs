//! Material Gaussians, the pinhole camera, tiled front-to-back compositing into
//! a G-buffer, and normal reconstruction.
//!
//! Camera space is `x` right, `y` down, `z` forward; pixel `(i, j)` has its
//! center at `(i + 0.5, j + 0.5)`.

use nalgebra::{Isometry3, Matrix2, Matrix3, Rotation3, Translation3, UnitQuaternion, Vector2};
use rayon::prelude::*;
use thiserror::Error;

use crate::brdf::MaterialParams;
use crate::math::{Rgb, Vec3};

pub const TILE_SIZE: usize = 16;
/// Per-pixel opacity ceiling.
pub const ALPHA_MAX: f64 = 0.99;
/// Compositing stops once transmittance drops below this.
pub const TRANSMITTANCE_MIN: f64 = 1e-4;
/// Screen-space covariance inflation in px².
pub const COV2D_INFLATION: f64 = 0.3;
/// Contributions below this opacity are dropped; it also sets the splat footprint.
pub const ALPHA_CUTOFF: f64 = 1e-7;

#[derive(Debug, Error, PartialEq)]
pub enum InvariantError {
    #[error("{field}: {reason}")]
    Field { field: &'static str, reason: String },
}

impl InvariantError {
    fn new(field: &'static str, reason: impl Into<String>) -> Self {
        Self::Field {
            field,
            reason: reason.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianPrimitive {
    pub mu: Vec3,
    pub rotation: UnitQuaternion<f64>,
    pub scale: Vec3,
    pub opacity: f64,
    pub material: MaterialParams,
    /// Consistency channel; composited but never used in shading.
    pub gamma: f64,
    pub group: String,
}

impl GaussianPrimitive {
    pub fn isotropic(mu: Vec3, scale: f64, opacity: f64, material: MaterialParams) -> Self {
        Self {
            mu,
            rotation: UnitQuaternion::identity(),
            scale: Vec3::repeat(scale),
            opacity,
            material,
            gamma: 0.0,
            group: String::new(),
        }
    }

    pub fn with_group(mut self, group: impl Into<String>) -> Self {
        self.group = group.into();
        self
    }

    pub fn validate(&self) -> Result<(), InvariantError> {
        if !(self.mu.iter().all(|c| c.is_finite())) {
            return Err(InvariantError::new("mu", "non-finite position"));
        }
        if !self.scale.iter().all(|&s| s > 0.0 && s.is_finite()) {
            return Err(InvariantError::new("scale", format!("components must be > 0, got {:?}", self.scale.as_slice())));
        }
        if !(0.0..=1.0).contains(&self.opacity) {
            return Err(InvariantError::new("opacity", format!("{} outside [0,1]", self.opacity)));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(InvariantError::new("gamma", format!("{} outside [0,1]", self.gamma)));
        }
        let m = &self.material;
        if !m.albedo.iter().all(|c| (0.0..=1.0).contains(c)) {
            return Err(InvariantError::new("albedo", "components outside [0,1]"));
        }
        if !(0.0..=1.0).contains(&m.roughness) {
            return Err(InvariantError::new("roughness", format!("{} outside [0,1]", m.roughness)));
        }
        if !(0.0..=1.0).contains(&m.metallic) {
            return Err(InvariantError::new("metallic", format!("{} outside [0,1]", m.metallic)));
        }
        Ok(())
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    /// `R S Sᵀ Rᵀ`.
    pub fn covariance(&self) -> Matrix3<f64> {
        let r = self.rotation_matrix();
        let s2 = Matrix3::from_diagonal(&self.scale.component_mul(&self.scale));
        r * s2 * r.transpose()
    }

    /// World-space direction of the shortest principal axis.
    pub fn shortest_axis(&self) -> Vec3 {
        let k = self.scale.imin();
        self.rotation_matrix().column(k).into_owned()
    }
}

/// Unnormalized density `exp(-½ (x-μ)ᵀ Σ⁻¹ (x-μ))`.
pub fn eval_gaussian(g: &GaussianPrimitive, x: &Vec3) -> f64 {
    let local = g.rotation.inverse_transform_vector(&(x - g.mu));
    let m: f64 = local.component_div(&g.scale).norm_squared();
    (-0.5 * m).exp()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Camera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub world_from_camera: Isometry3<f64>,
    pub near: f64,
    pub far: f64,
}

impl Camera {
    pub fn validate(&self) -> Result<(), InvariantError> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(InvariantError::new("fx/fy", "focal lengths must be positive"));
        }
        if !(self.near > 0.0 && self.near < self.far) {
            return Err(InvariantError::new("near/far", format!("need 0 < near < far, got {} / {}", self.near, self.far)));
        }
        if self.width == 0 || self.height == 0 {
            return Err(InvariantError::new("width/height", "viewport must be non-empty"));
        }
        Ok(())
    }

    /// Pinhole camera at `eye` looking at `target`; `fov_y` in radians.
    pub fn look_at(eye: Vec3, target: Vec3, up: Vec3, width: usize, height: usize, fov_y: f64) -> Self {
        let forward = (target - eye).normalize();
        let right = forward.cross(&up).normalize();
        let down = forward.cross(&right);
        let rot = Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[right, down, forward]));
        let f = 0.5 * height as f64 / (0.5 * fov_y).tan();
        Self {
            fx: f,
            fy: f,
            cx: 0.5 * width as f64,
            cy: 0.5 * height as f64,
            width,
            height,
            world_from_camera: Isometry3::from_parts(Translation3::from(eye), UnitQuaternion::from_rotation_matrix(&rot)),
            near: 0.05,
            far: 100.0,
        }
    }

    pub fn position(&self) -> Vec3 {
        self.world_from_camera.translation.vector
    }

    pub fn to_camera(&self, world: &Vec3) -> Vec3 {
        self.world_from_camera.inverse_transform_point(&(*world).into()).coords
    }

    pub fn to_world(&self, cam: &Vec3) -> Vec3 {
        self.world_from_camera.transform_point(&(*cam).into()).coords
    }

    pub fn rotate_to_world(&self, v: &Vec3) -> Vec3 {
        self.world_from_camera.rotation.transform_vector(v)
    }

    pub fn rotate_to_camera(&self, v: &Vec3) -> Vec3 {
        self.world_from_camera.rotation.inverse_transform_vector(v)
    }

    /// Continuous pixel coordinates of a camera-space point (`z > 0` assumed).
    pub fn project_camera(&self, p: &Vec3) -> Vector2<f64> {
        Vector2::new(self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy)
    }

    /// Camera-space point at continuous pixel `(px, py)` with camera depth `z`.
    pub fn unproject_camera(&self, px: f64, py: f64, z: f64) -> Vec3 {
        Vec3::new((px - self.cx) / self.fx * z, (py - self.cy) / self.fy * z, z)
    }

    pub fn unproject(&self, px: f64, py: f64, z: f64) -> Vec3 {
        self.to_world(&self.unproject_camera(px, py, z))
    }

    /// Unit world direction from the camera through continuous pixel `(px, py)`.
    pub fn view_dir(&self, px: f64, py: f64) -> Vec3 {
        self.rotate_to_world(&self.unproject_camera(px, py, 1.0).normalize())
    }

    pub fn in_viewport(&self, uv: &Vector2<f64>) -> bool {
        uv.x >= 0.0 && uv.y >= 0.0 && uv.x < self.width as f64 && uv.y < self.height as f64
    }
}

/// Screen-space footprint of one Gaussian.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Splat2d {
    pub mean: Vector2<f64>,
    pub cov: Matrix2<f64>,
    /// Camera-space depth of the center.
    pub z: f64,
}

/// EWA projection; `None` when the center lies outside `(near, far)`.
pub fn project_gaussian(g: &GaussianPrimitive, camera: &Camera) -> Option<Splat2d> {
    let pc = camera.to_camera(&g.mu);
    if pc.z <= camera.near || pc.z > camera.far {
        return None;
    }
    let w = camera.world_from_camera.rotation.inverse().to_rotation_matrix().into_inner();
    let cov_cam = w * g.covariance() * w.transpose();
    let (z, z2) = (pc.z, pc.z * pc.z);
    let j = nalgebra::Matrix2x3::new(
        camera.fx / z, 0.0, -camera.fx * pc.x / z2,
        0.0, camera.fy / z, -camera.fy * pc.y / z2,
    );
    let cov = j * cov_cam * j.transpose() + Matrix2::identity() * COV2D_INFLATION;
    Some(Splat2d {
        mean: camera.project_camera(&pc),
        cov,
        z,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct GBuffer {
    pub width: usize,
    pub height: usize,
    pub albedo: Vec<Rgb>,
    pub roughness: Vec<f64>,
    pub metallic: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Camera-space depth, `0` where nothing was composited.
    pub depth: Vec<f64>,
    /// World-space unit normal, zero where unavailable.
    pub normal: Vec<Vec3>,
    pub accum_alpha: Vec<f64>,
}

/// Coverage above which a pixel is treated as a surface.
pub const COVERAGE_THRESHOLD: f64 = 0.5;

impl GBuffer {
    pub fn new(width: usize, height: usize) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            albedo: vec![Rgb::zeros(); n],
            roughness: vec![0.0; n],
            metallic: vec![0.0; n],
            gamma: vec![0.0; n],
            depth: vec![0.0; n],
            normal: vec![Vec3::zeros(); n],
            accum_alpha: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn covered(&self, i: usize) -> bool {
        self.accum_alpha[i] > COVERAGE_THRESHOLD
    }

    pub fn shadeable(&self, i: usize) -> bool {
        self.covered(i) && self.depth[i] > 0.0 && self.normal[i] != Vec3::zeros()
    }

    pub fn material(&self, i: usize) -> MaterialParams {
        MaterialParams::new(self.albedo[i], self.roughness[i], self.metallic[i])
    }

    /// Copies every channel of pixel `i` from `other`.
    pub fn copy_pixel_from(&mut self, other: &GBuffer, i: usize) {
        self.albedo[i] = other.albedo[i];
        self.roughness[i] = other.roughness[i];
        self.metallic[i] = other.metallic[i];
        self.gamma[i] = other.gamma[i];
        self.depth[i] = other.depth[i];
        self.normal[i] = other.normal[i];
        self.accum_alpha[i] = other.accum_alpha[i];
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RasterStats {
    pub visible: usize,
    pub culled: usize,
    pub singular: usize,
}

struct Prepared {
    index: usize,
    mean: Vector2<f64>,
    conic: Matrix2<f64>,
    z: f64,
    opacity: f64,
    albedo: Rgb,
    roughness: f64,
    metallic: f64,
    gamma: f64,
    normal: Vec3,
    tiles: [usize; 4],
}

fn prepare(gaussians: &[GaussianPrimitive], camera: &Camera, stats: &mut RasterStats) -> Vec<Prepared> {
    let tiles_x = camera.width.div_ceil(TILE_SIZE);
    let tiles_y = camera.height.div_ceil(TILE_SIZE);
    let eye = camera.position();
    let mut out = Vec::with_capacity(gaussians.len());
    for (index, g) in gaussians.iter().enumerate() {
        let Some(s) = project_gaussian(g, camera) else {
            stats.culled += 1;
            continue;
        };
        let det = s.cov.determinant();
        if !(det.is_finite() && det > 1e-12) {
            stats.singular += 1;
            log::warn!("gaussian {index} has a singular screen covariance, skipped");
            continue;
        }
        let conic = s.cov.try_inverse().unwrap();
        if g.opacity < ALPHA_CUTOFF {
            stats.culled += 1;
            continue;
        }
        let half_trace = 0.5 * (s.cov[(0, 0)] + s.cov[(1, 1)]);
        let lambda_max = half_trace + (half_trace * half_trace - det).max(0.0).sqrt();
        let radius = (2.0 * lambda_max * (g.opacity / ALPHA_CUTOFF).ln()).sqrt();
        let x0 = ((s.mean.x - radius) / TILE_SIZE as f64).floor();
        let x1 = ((s.mean.x + radius) / TILE_SIZE as f64).floor();
        let y0 = ((s.mean.y - radius) / TILE_SIZE as f64).floor();
        let y1 = ((s.mean.y + radius) / TILE_SIZE as f64).floor();
        if x1 < 0.0 || y1 < 0.0 || x0 >= tiles_x as f64 || y0 >= tiles_y as f64 {
            stats.culled += 1;
            continue;
        }
        let clampi = |v: f64, hi: usize| v.clamp(0.0, (hi - 1) as f64) as usize;
        let mut normal = g.shortest_axis();
        if normal.dot(&(eye - g.mu)) < 0.0 {
            normal = -normal;
        }
        stats.visible += 1;
        out.push(Prepared {
            index,
            mean: s.mean,
            conic,
            z: s.z,
            opacity: g.opacity,
            albedo: g.material.albedo,
            roughness: g.material.roughness,
            metallic: g.material.metallic,
            gamma: g.gamma,
            normal,
            tiles: [clampi(x0, tiles_x), clampi(x1, tiles_x), clampi(y0, tiles_y), clampi(y1, tiles_y)],
        });
    }
    // front to back, ties by primitive index
    out.sort_by(|a, b| a.z.total_cmp(&b.z).then(a.index.cmp(&b.index)));
    out
}

#[derive(Clone, Copy, Default)]
struct PixelAccum {
    albedo: Rgb,
    roughness: f64,
    metallic: f64,
    gamma: f64,
    depth: f64,
    normal: Vec3,
    alpha: f64,
}

fn composite_tile(prepared: &[Prepared], list: &[u32], camera: &Camera, tile: (usize, usize)) -> Vec<(usize, PixelAccum)> {
    let (tx, ty) = tile;
    let x_end = ((tx + 1) * TILE_SIZE).min(camera.width);
    let y_end = ((ty + 1) * TILE_SIZE).min(camera.height);
    let mut out = Vec::with_capacity(TILE_SIZE * TILE_SIZE);
    for y in ty * TILE_SIZE..y_end {
        for x in tx * TILE_SIZE..x_end {
            let center = Vector2::new(x as f64 + 0.5, y as f64 + 0.5);
            let mut acc = PixelAccum::default();
            let mut transmittance = 1.0;
            for &k in list {
                let p = &prepared[k as usize];
                let d = center - p.mean;
                let power = -0.5 * (d.transpose() * p.conic * d)[(0, 0)];
                let alpha = (p.opacity * power.exp()).min(ALPHA_MAX);
                if alpha < ALPHA_CUTOFF {
                    continue;
                }
                let w = transmittance * alpha;
                acc.albedo += p.albedo * w;
                acc.roughness += p.roughness * w;
                acc.metallic += p.metallic * w;
                acc.gamma += p.gamma * w;
                acc.depth += p.z * w;
                acc.normal += p.normal * w;
                transmittance *= 1.0 - alpha;
                if transmittance < TRANSMITTANCE_MIN {
                    break;
                }
            }
            acc.alpha = 1.0 - transmittance;
            out.push((y * camera.width + x, acc));
        }
    }
    out
}

fn raster_core(gaussians: &[GaussianPrimitive], camera: &Camera) -> (Vec<PixelAccum>, RasterStats) {
    let mut stats = RasterStats::default();
    let prepared = prepare(gaussians, camera, &mut stats);
    let tiles_x = camera.width.div_ceil(TILE_SIZE);
    let tiles_y = camera.height.div_ceil(TILE_SIZE);
    let mut lists: Vec<Vec<u32>> = vec![Vec::new(); tiles_x * tiles_y];
    for (k, p) in prepared.iter().enumerate() {
        for ty in p.tiles[2]..=p.tiles[3] {
            for tx in p.tiles[0]..=p.tiles[1] {
                lists[ty * tiles_x + tx].push(k as u32);
            }
        }
    }
    let mut pixels = vec![PixelAccum::default(); camera.width * camera.height];
    let results: Vec<Vec<(usize, PixelAccum)>> = lists
        .par_iter()
        .enumerate()
        .map(|(t, list)| composite_tile(&prepared, list, camera, (t % tiles_x, t / tiles_x)))
        .collect();
    for tile in results {
        for (i, acc) in tile {
            pixels[i] = acc;
        }
    }
    (pixels, stats)
}

/// Composites material, depth and coverage channels; the normal channel is left zero.
///
/// Material channels hold `Σ Tᵢ αᵢ pᵢ` directly. Depth is the same weighted sum
/// divided by the coverage, so partially covered pixels still carry a depth
/// inside `[near, far]`.
pub fn rasterize(gaussians: &[GaussianPrimitive], camera: &Camera) -> (GBuffer, RasterStats) {
    let (pixels, stats) = raster_core(gaussians, camera);
    let mut gb = GBuffer::new(camera.width, camera.height);
    for (i, acc) in pixels.into_iter().enumerate() {
        gb.albedo[i] = acc.albedo;
        gb.roughness[i] = acc.roughness;
        gb.metallic[i] = acc.metallic;
        gb.gamma[i] = acc.gamma;
        gb.accum_alpha[i] = acc.alpha;
        gb.depth[i] = if acc.alpha > 0.0 { acc.depth / acc.alpha } else { 0.0 };
    }
    (gb, stats)
}

/// Alpha-composited per-Gaussian normals (shortest axis, camera-facing), renormalized.
pub fn composite_normals_per_gaussian(gaussians: &[GaussianPrimitive], camera: &Camera) -> Vec<Vec3> {
    let (pixels, _) = raster_core(gaussians, camera);
    pixels
        .into_iter()
        .map(|acc| {
            let len = acc.normal.norm();
            if len > 1e-12 {
                acc.normal / len
            } else {
                Vec3::zeros()
            }
        })
        .collect()
}

/// How the G-buffer normal channel is produced.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalSource {
    #[default]
    Depth,
    PerGaussian,
}

/// Fills the normal channel from finite differences of the depth channel.
///
/// Along each axis the neighbour with the smaller depth jump is used, which
/// keeps normals on either side of a depth edge on their own surface. Pixels
/// whose stencil has no valid depth keep a zero normal. Returns the number of
/// pixels with depth that could not be given a normal.
pub fn depth_to_normal(gbuffer: &mut GBuffer, camera: &Camera) -> usize {
    let (w, h) = (gbuffer.width, gbuffer.height);
    let depth = &gbuffer.depth;
    let point = |x: usize, y: usize| camera.unproject_camera(x as f64 + 0.5, y as f64 + 0.5, depth[y * w + x]);
    let normals: Vec<(Vec3, bool)> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let (x, y) = (i % w, i / w);
            if depth[i] <= 0.0 {
                return (Vec3::zeros(), false);
            }
            let p = point(x, y);
            let pick = |fwd: Option<usize>, back: Option<usize>, at: &dyn Fn(usize) -> usize, pt: &dyn Fn(usize) -> Vec3| {
                let fwd = fwd.filter(|&j| depth[at(j)] > 0.0).map(|j| pt(j) - p);
                let back = back.filter(|&j| depth[at(j)] > 0.0).map(|j| p - pt(j));
                match (fwd, back) {
                    (Some(f), Some(b)) => Some(if f.z.abs() <= b.z.abs() { f } else { b }),
                    (f, b) => f.or(b),
                }
            };
            let dx = pick(
                (x + 1 < w).then_some(x + 1),
                x.checked_sub(1),
                &|j| y * w + j,
                &|j| point(j, y),
            );
            let dy = pick(
                (y + 1 < h).then_some(y + 1),
                y.checked_sub(1),
                &|j| j * w + x,
                &|j| point(x, j),
            );
            let (Some(dx), Some(dy)) = (dx, dy) else {
                return (Vec3::zeros(), true);
            };
            let n = dx.cross(&dy);
            let len = n.norm();
            if len < 1e-12 {
                return (Vec3::zeros(), true);
            }
            let mut n = n / len;
            if n.dot(&p) > 0.0 {
                n = -n;
            }
            (camera.rotate_to_world(&n), false)
        })
        .collect();
    let mut failed = 0;
    for (i, (n, bad)) in normals.into_iter().enumerate() {
        gbuffer.normal[i] = n;
        failed += bad as usize;
    }
    failed
}
