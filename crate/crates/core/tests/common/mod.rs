//! Independent reference implementations and synthetic scenes shared by the
//! integration tests. Nothing here calls into the code paths it checks.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use lumisplat::brdf::MaterialParams;
use lumisplat::envlight::{Cubemap, Environment};
use lumisplat::math::{rgb, Rgb, Vec3};
use lumisplat::splat::{Camera, GBuffer, GaussianPrimitive};
use nalgebra::{Matrix2, Matrix3, UnitQuaternion, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Nodes and weights mapped onto `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(n);
    x.iter().zip(&w).map(|(x, w)| (0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w)).collect()
}

pub fn ndf(cos_h: f64, rho: f64) -> f64 {
    let a2 = rho * rho;
    let d = cos_h * cos_h * (a2 - 1.0) + 1.0;
    a2 / (PI * d * d)
}

pub fn g1(z: f64, rho: f64) -> f64 {
    let a2 = rho * rho;
    2.0 * z / (z + (a2 + (1.0 - a2) * z * z).sqrt())
}

/// Split-sum integrand pair `((1 − Fc)·f, Fc·f)` with `f = D G / (4 n·v)`,
/// i.e. the specular BRDF times `n·l` with the Fresnel factor removed.
fn split_sum_integrand(v: &Vec3, l: &Vec3, rho: f64) -> (f64, f64) {
    let (nv, nl) = (v.z, l.z);
    if nl <= 0.0 || nv <= 0.0 {
        return (0.0, 0.0);
    }
    let h = (v + l).normalize();
    let f = ndf(h.z, rho) * g1(nv, rho) * g1(nl, rho) / (4.0 * nv);
    let fc = (1.0 - v.dot(&h).clamp(0.0, 1.0)).powi(5);
    ((1.0 - fc) * f, fc * f)
}

/// Brute-force hemisphere integration with `n_cos × n_phi` uniform stratified
/// directions (one jittered sample per stratum).
pub fn split_sum_uniform(cos_v: f64, rho: f64, n_cos: usize, n_phi: usize, seed: u64) -> (f64, f64) {
    let v = Vec3::new((1.0 - cos_v * cos_v).max(0.0).sqrt(), 0.0, cos_v);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut a, mut b) = (0.0, 0.0);
    for i in 0..n_cos {
        for j in 0..n_phi {
            let mu = (i as f64 + rng.random::<f64>()) / n_cos as f64;
            let phi = 2.0 * PI * (j as f64 + rng.random::<f64>()) / n_phi as f64;
            let s = (1.0 - mu * mu).sqrt();
            let l = Vec3::new(s * phi.cos(), s * phi.sin(), mu);
            let (x, y) = split_sum_integrand(&v, &l, rho);
            a += x;
            b += y;
        }
    }
    let dw = 2.0 * PI / (n_cos * n_phi) as f64;
    (a * dw, b * dw)
}

/// Deterministic quadrature in half-vector space, accurate even for a
/// near-mirror lobe: `l = reflect(v, h)`, `dω_l = 4 (v·h) dω_h`.
pub fn split_sum_half_vector(cos_v: f64, rho: f64, n_theta: usize, n_phi: usize) -> (f64, f64) {
    let v = Vec3::new((1.0 - cos_v * cos_v).max(0.0).sqrt(), 0.0, cos_v);
    // substitute t = atan(tanθ_h / ρ) so nodes follow the lobe
    let (mut a, mut b) = (0.0, 0.0);
    for (t, wt) in gauss_legendre_on(n_theta, 0.0, 0.5 * PI) {
        let tan_h = rho * t.tan();
        let theta = tan_h.atan();
        let dtheta_dt = rho / (t.cos().powi(2) * (1.0 + tan_h * tan_h));
        for (phi, wp) in gauss_legendre_on(n_phi, 0.0, 2.0 * PI) {
            let h = Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
            let vh = v.dot(&h);
            if vh <= 0.0 {
                continue;
            }
            let l = h * (2.0 * vh) - v;
            let (x, y) = split_sum_integrand(&v, &l, rho);
            let jac = 4.0 * vh * theta.sin() * dtheta_dt;
            a += x * jac * wt * wp;
            b += y * jac * wt * wp;
        }
    }
    (a, b)
}

/// Camera-space EWA footprint computed from first principles.
pub struct Footprint {
    pub mean: Vector2<f64>,
    pub cov: Matrix2<f64>,
    pub z: f64,
}

pub fn footprint(g: &GaussianPrimitive, cam: &Camera) -> Option<Footprint> {
    let cam_from_world = cam.world_from_camera.inverse();
    let p = cam_from_world.transform_point(&g.mu.into());
    if p.z <= cam.near || p.z > cam.far {
        return None;
    }
    let r = g.rotation.to_rotation_matrix().into_inner();
    let s = Matrix3::from_diagonal(&g.scale);
    let sigma = r * s * s * r.transpose();
    let w = cam_from_world.rotation.to_rotation_matrix().into_inner();
    let sc = w * sigma * w.transpose();
    let j = nalgebra::Matrix2x3::new(cam.fx / p.z, 0.0, -cam.fx * p.x / (p.z * p.z), 0.0, cam.fy / p.z, -cam.fy * p.y / (p.z * p.z));
    let cov = j * sc * j.transpose() + Matrix2::identity() * 0.3;
    Some(Footprint {
        mean: Vector2::new(cam.fx * p.x / p.z + cam.cx, cam.fy * p.y / p.z + cam.cy),
        cov,
        z: p.z,
    })
}

/// Per-pixel front-to-back compositing `Σ Tᵢ αᵢ pᵢ` over every Gaussian.
pub fn raster_oracle(gs: &[GaussianPrimitive], cam: &Camera) -> GBuffer {
    let mut order: Vec<(usize, Footprint)> = gs.iter().enumerate().filter_map(|(i, g)| footprint(g, cam).map(|f| (i, f))).collect();
    order.sort_by(|a, b| a.1.z.partial_cmp(&b.1.z).unwrap().then(a.0.cmp(&b.0)));
    let mut gb = GBuffer::new(cam.width, cam.height);
    for y in 0..cam.height {
        for x in 0..cam.width {
            let px = Vector2::new(x as f64 + 0.5, y as f64 + 0.5);
            let mut t = 1.0;
            let (mut albedo, mut rough, mut metal, mut gamma, mut depth) = (Rgb::zeros(), 0.0, 0.0, 0.0, 0.0);
            for (i, f) in &order {
                let g = &gs[*i];
                let d = px - f.mean;
                let inv = f.cov.try_inverse().unwrap();
                let alpha = (g.opacity * (-0.5 * d.dot(&(inv * d))).exp()).min(0.99);
                let w = t * alpha;
                albedo += g.material.albedo * w;
                rough += g.material.roughness * w;
                metal += g.material.metallic * w;
                gamma += g.gamma * w;
                depth += f.z * w;
                t *= 1.0 - alpha;
                if t < 1e-4 {
                    break;
                }
            }
            let i = y * cam.width + x;
            gb.albedo[i] = albedo;
            gb.roughness[i] = rough;
            gb.metallic[i] = metal;
            gb.gamma[i] = gamma;
            gb.accum_alpha[i] = 1.0 - t;
            gb.depth[i] = if 1.0 - t > 0.0 { depth / (1.0 - t) } else { 0.0 };
        }
    }
    gb
}

pub fn random_unit(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

pub fn random_gaussian(rng: &mut impl Rng) -> GaussianPrimitive {
    let axis = nalgebra::Unit::new_normalize(random_unit(rng));
    GaussianPrimitive {
        mu: Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
        rotation: UnitQuaternion::from_axis_angle(&axis, rng.random_range(0.0..PI)),
        scale: Vec3::new(rng.random_range(0.05..0.5), rng.random_range(0.05..0.5), rng.random_range(0.01..0.3)),
        opacity: rng.random_range(0.05..1.0),
        material: MaterialParams::new(rgb(rng.random(), rng.random(), rng.random()), rng.random(), rng.random()),
        gamma: rng.random(),
        group: String::new(),
    }
}

pub fn angle_deg(a: &Vec3, b: &Vec3) -> f64 {
    a.normalize().dot(&b.normalize()).clamp(-1.0, 1.0).acos().to_degrees()
}

pub fn constant_env(value: Rgb) -> Environment {
    Environment::new(Arc::new(Cubemap::constant(8, value).unwrap()), 0.0)
}

/// Floor `y = 0` in front of a wall `z = WALL_Z`, seen from above the floor.
pub struct MirrorRoom {
    pub camera: Camera,
}

pub const WALL_Z: f64 = 4.0;
pub const ROOM_HALF_WIDTH: f64 = 3.0;
pub const ROOM_HEIGHT: f64 = 3.0;
pub const FLOOR_NEAR_Z: f64 = -2.0;
/// Bright patch on the wall: x range, y range.
pub const PATCH: ([f64; 2], [f64; 2]) = ([-0.6, 0.6], [0.4, 1.2]);

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Surface {
    Floor,
    Wall,
}

impl MirrorRoom {
    pub fn new(width: usize, height: usize) -> Self {
        let camera = Camera::look_at(Vec3::new(0.0, 1.2, -2.5), Vec3::new(0.0, 0.5, WALL_Z), Vec3::y(), width, height, 60f64.to_radians());
        Self { camera }
    }

    /// Nearest intersection with the room geometry.
    pub fn intersect(&self, o: &Vec3, d: &Vec3) -> Option<(f64, Surface)> {
        let mut best: Option<(f64, Surface)> = None;
        if d.y.abs() > 1e-12 {
            let t = -o.y / d.y;
            let p = o + d * t;
            if t > 1e-9 && p.x.abs() <= ROOM_HALF_WIDTH && p.z >= FLOOR_NEAR_Z && p.z <= WALL_Z {
                best = Some((t, Surface::Floor));
            }
        }
        if d.z.abs() > 1e-12 {
            let t = (WALL_Z - o.z) / d.z;
            let p = o + d * t;
            if t > 1e-9 && p.x.abs() <= ROOM_HALF_WIDTH && p.y >= 0.0 && p.y <= ROOM_HEIGHT && best.is_none_or(|(b, _)| t < b) {
                best = Some((t, Surface::Wall));
            }
        }
        best
    }

    pub fn normal(s: Surface) -> Vec3 {
        match s {
            Surface::Floor => Vec3::y(),
            Surface::Wall => -Vec3::z(),
        }
    }

    /// Analytic G-buffer: exact depth and normals, floor a mirror, wall diffuse.
    pub fn gbuffer(&self) -> (GBuffer, Vec<Option<Surface>>) {
        let cam = &self.camera;
        let mut gb = GBuffer::new(cam.width, cam.height);
        let mut surf = vec![None; gb.len()];
        let eye = cam.position();
        for y in 0..cam.height {
            for x in 0..cam.width {
                let i = y * cam.width + x;
                let d = cam.view_dir(x as f64 + 0.5, y as f64 + 0.5);
                let Some((t, s)) = self.intersect(&eye, &d) else {
                    continue;
                };
                let p = eye + d * t;
                gb.depth[i] = cam.to_camera(&p).z;
                gb.accum_alpha[i] = 1.0;
                gb.normal[i] = Self::normal(s);
                surf[i] = Some(s);
                match s {
                    Surface::Floor => {
                        gb.albedo[i] = rgb(0.9, 0.9, 0.9);
                        gb.roughness[i] = 0.01;
                        gb.metallic[i] = 1.0;
                    }
                    Surface::Wall => {
                        let in_patch = p.x >= PATCH.0[0] && p.x <= PATCH.0[1] && p.y >= PATCH.1[0] && p.y <= PATCH.1[1];
                        gb.albedo[i] = if in_patch { rgb(1.0, 0.9, 0.2) } else { rgb(0.3, 0.3, 0.35) };
                        gb.roughness[i] = 0.8;
                        gb.metallic[i] = 0.0;
                    }
                }
            }
        }
        (gb, surf)
    }

    /// Pixel position of the mirror reflection seen at floor pixel `(x, y)`,
    /// if the reflected ray hits visible wall geometry on screen.
    pub fn mirrored_uv(&self, x: usize, y: usize) -> Option<(Vector2<f64>, Vec3)> {
        let cam = &self.camera;
        let eye = cam.position();
        let d = cam.view_dir(x as f64 + 0.5, y as f64 + 0.5);
        let (t, s) = self.intersect(&eye, &d)?;
        if s != Surface::Floor {
            return None;
        }
        let p = eye + d * t;
        let r = d - Vec3::y() * (2.0 * d.y);
        let (t2, s2) = self.intersect(&p, &r)?;
        if s2 != Surface::Wall {
            return None;
        }
        let q = p + r * t2;
        let qc = cam.to_camera(&q);
        if qc.z <= cam.near {
            return None;
        }
        let uv = cam.project_camera(&qc);
        if !cam.in_viewport(&uv) {
            return None;
        }
        // the hit must be what the camera sees at that pixel
        let back = cam.view_dir(uv.x, uv.y);
        let (tv, sv) = self.intersect(&eye, &back)?;
        if sv != Surface::Wall || ((eye + back * tv) - q).norm() > 1e-6 {
            return None;
        }
        Some((uv, q))
    }
}

/// Gaussian version of the room: floor, wall and patch as separate groups.
pub fn mirror_room_gaussians(spacing: f64) -> Vec<GaussianPrimitive> {
    let mut gs = Vec::new();
    let flat = |mu: Vec3, rot: UnitQuaternion<f64>, mat: MaterialParams, group: &str| GaussianPrimitive {
        mu,
        rotation: rot,
        scale: Vec3::new(0.6 * spacing, 0.6 * spacing, 0.01 * spacing),
        opacity: 0.99,
        material: mat,
        gamma: 0.5,
        group: group.into(),
    };
    let floor_rot = UnitQuaternion::from_axis_angle(&Vec3::x_axis(), 0.5 * PI);
    let floor_mat = MaterialParams::new(rgb(0.9, 0.9, 0.9), 0.01, 1.0);
    let steps = |a: f64, b: f64| {
        let n = ((b - a) / spacing).round() as usize;
        (0..=n).map(move |k| a + k as f64 * spacing)
    };
    for z in steps(FLOOR_NEAR_Z, WALL_Z) {
        for x in steps(-ROOM_HALF_WIDTH, ROOM_HALF_WIDTH) {
            gs.push(flat(Vec3::new(x, 0.0, z), floor_rot, floor_mat, "floor"));
        }
    }
    let wall_mat = MaterialParams::new(rgb(0.3, 0.3, 0.35), 0.8, 0.0);
    let patch_mat = MaterialParams::new(rgb(1.0, 0.9, 0.2), 0.8, 0.0);
    for y in steps(0.0, ROOM_HEIGHT) {
        for x in steps(-ROOM_HALF_WIDTH, ROOM_HALF_WIDTH) {
            let in_patch = x >= PATCH.0[0] && x <= PATCH.0[1] && y >= PATCH.1[0] && y <= PATCH.1[1];
            let (mat, group) = if in_patch { (patch_mat, "patch") } else { (wall_mat, "wall") };
            gs.push(flat(Vec3::new(x, y, WALL_Z), UnitQuaternion::identity(), mat, group));
        }
    }
    gs
}

/// Environment with distinct colours per direction, for relighting checks.
pub fn sky_env(face: usize, yaw: f64) -> Environment {
    let cube = Cubemap::from_fn(face, |d| rgb(0.6 + 0.4 * d.x, 0.7 + 0.3 * d.y, 0.8 - 0.2 * d.z)).unwrap();
    Environment::new(Arc::new(cube), yaw)
}
