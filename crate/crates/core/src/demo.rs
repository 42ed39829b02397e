//! Built-in demo content: a mirror-floored room with a bright wall patch, a
//! procedural sky and a small insertable block.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::UnitQuaternion;

use crate::brdf::MaterialParams;
use crate::envlight::equirect_direction;
use crate::imagebuf::RadianceImage;
use crate::math::{rgb, Vec3};
use crate::sceneio::{write_pfm, EnvironmentSpec, GaussianSpec, PfmError, SceneDescription};
use crate::splat::{Camera, GaussianPrimitive};
use crate::ssr::RenderSettings;

pub const ROOM_HALF_WIDTH: f64 = 3.0;
pub const ROOM_HEIGHT: f64 = 3.0;
pub const FLOOR_NEAR_Z: f64 = -2.0;
pub const WALL_Z: f64 = 4.0;

fn flat(mu: Vec3, rotation: UnitQuaternion<f64>, size: f64, material: MaterialParams, group: &str) -> GaussianPrimitive {
    GaussianPrimitive {
        mu,
        rotation,
        scale: Vec3::new(0.6 * size, 0.6 * size, 0.01 * size),
        opacity: 0.99,
        material,
        gamma: 0.5,
        group: group.into(),
    }
}

fn grid(a: f64, b: f64, spacing: f64) -> impl Iterator<Item = f64> {
    let n = ((b - a) / spacing).round() as usize;
    (0..=n).map(move |k| a + k as f64 * spacing)
}

/// Flat Gaussians tiling a metal floor (`floor`), a grey back wall (`wall`) and
/// a yellow patch on it (`patch`).
pub fn mirror_room(spacing: f64) -> Vec<GaussianPrimitive> {
    let floor_rot = UnitQuaternion::from_axis_angle(&Vec3::x_axis(), 0.5 * PI);
    let floor = MaterialParams::new(rgb(0.9, 0.9, 0.9), 0.02, 1.0);
    let wall = MaterialParams::new(rgb(0.3, 0.3, 0.35), 0.8, 0.0);
    let patch = MaterialParams::new(rgb(1.0, 0.9, 0.2), 0.8, 0.0);
    let mut gs = Vec::new();
    for z in grid(FLOOR_NEAR_Z, WALL_Z, spacing) {
        for x in grid(-ROOM_HALF_WIDTH, ROOM_HALF_WIDTH, spacing) {
            gs.push(flat(Vec3::new(x, 0.0, z), floor_rot, spacing, floor, "floor"));
        }
    }
    for y in grid(0.0, ROOM_HEIGHT, spacing) {
        for x in grid(-ROOM_HALF_WIDTH, ROOM_HALF_WIDTH, spacing) {
            let in_patch = x.abs() <= 0.6 && (0.4..=1.2).contains(&y);
            let (m, g) = if in_patch { (patch, "patch") } else { (wall, "wall") };
            gs.push(flat(Vec3::new(x, y, WALL_Z), UnitQuaternion::identity(), spacing, m, g));
        }
    }
    gs
}

/// View from above the floor towards the wall.
pub fn room_camera(width: usize, height: usize) -> Camera {
    let mut cam = Camera::look_at(Vec3::new(0.0, 1.2, -2.5), Vec3::new(0.0, 0.5, WALL_Z), Vec3::y(), width, height, 60f64.to_radians());
    cam.far = 12.0;
    cam
}

/// Red cube of Gaussians hovering above the floor, group `block`.
pub fn block(center: Vec3, half: f64) -> Vec<GaussianPrimitive> {
    let red = MaterialParams::new(rgb(0.9, 0.1, 0.08), 0.4, 0.0);
    let n = 4;
    let step = 2.0 * half / n as f64;
    let mut gs = Vec::new();
    for i in 0..=n {
        for j in 0..=n {
            for k in 0..=n {
                let p = Vec3::new(i as f64, j as f64, k as f64) * step - Vec3::repeat(half);
                gs.push(GaussianPrimitive::isotropic(center + p, 0.6 * step, 0.95, red).with_group("block"));
            }
        }
    }
    gs
}

/// Equirectangular sky: blue gradient, dark ground and a warm sun towards `+X`.
pub fn sky(width: usize, height: usize) -> RadianceImage {
    let sun = Vec3::new(1.0, 0.5, 0.2).normalize();
    RadianceImage::from_fn(width, height, |x, y| {
        let d = equirect_direction(x as f64 + 0.5, y as f64 + 0.5, width, height);
        let base = if d.y >= 0.0 { rgb(0.5, 0.7, 1.0) * (0.6 + 0.6 * d.y) } else { rgb(0.25, 0.22, 0.2) };
        base + rgb(8.0, 6.5, 4.0) * d.dot(&sun).max(0.0).powi(64)
    })
}

pub fn room_scene(width: usize, height: usize, spacing: f64, environment: EnvironmentSpec) -> SceneDescription {
    SceneDescription {
        gaussians: mirror_room(spacing),
        cameras: vec![room_camera(width, height)],
        environment,
        settings: RenderSettings::default(),
        base_dir: PathBuf::from("."),
        warnings: Vec::new(),
    }
}

/// Paths written by [`write_room_assets`].
#[derive(Clone, Debug)]
pub struct RoomAssets {
    pub scene: PathBuf,
    pub sky: PathBuf,
    pub block: PathBuf,
}

/// Writes `room.json`, `sky.pfm` and the insertable `block.json` into `dir`.
pub fn write_room_assets(dir: &Path, width: usize, height: usize, spacing: f64) -> Result<RoomAssets, PfmError> {
    fs::create_dir_all(dir)?;
    let sky_path = dir.join("sky.pfm");
    write_pfm(&sky(128, 64), &sky_path)?;
    let env = EnvironmentSpec {
        constant: None,
        pfm: Some("sky.pfm".into()),
        face_size: 32,
        ..Default::default()
    };
    let scene = dir.join("room.json");
    fs::write(&scene, room_scene(width, height, spacing, env).to_json())?;
    let block_path = dir.join("block.json");
    let specs: Vec<GaussianSpec> = block(Vec3::new(-1.2, 0.6, 2.0), 0.35).iter().map(GaussianSpec::from_primitive).collect();
    fs::write(&block_path, serde_json::to_string(&specs).expect("gaussians serialize"))?;
    Ok(RoomAssets { scene, sky: sky_path, block: block_path })
}
