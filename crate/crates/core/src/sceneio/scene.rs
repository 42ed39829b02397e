//! Versioned JSON scene description.
//!
//! ```json
//! {
//!   "version": 1,
//!   "gaussians": [
//!     { "mu": [0, 0, 0], "rotation": [1, 0, 0, 0], "scale": [0.1, 0.1, 0.01],
//!       "opacity": 0.9, "albedo": [0.8, 0.8, 0.8], "roughness": 0.3,
//!       "metallic": 0.0, "gamma": 0.0, "group": "floor" }
//!   ],
//!   "cameras": [
//!     { "width": 256, "height": 256, "eye": [0, 1, -4], "target": [0, 0, 0],
//!       "up": [0, 1, 0], "fov_y_deg": 45 }
//!   ],
//!   "environment": { "constant": [1, 1, 1], "yaw": 0.0, "face_size": 32 },
//!   "settings": { "n_samples": 8 }
//! }
//! ```
//!
//! `rotation` is a unit quaternion `[w, x, y, z]`; norms off by more than
//! `1e-3` are rejected rather than renormalized. Cameras are either look-at
//! (`eye`, `target`, optional `up`, `fov_y_deg`) or explicit (`fx`, `fy`, `cx`,
//! `cy`, `position`, `rotation` giving world-from-camera with x right, y down,
//! z forward). The environment is a `constant` radiance or an equirectangular
//! `pfm` path relative to the scene file. Unknown keys are ignored and reported.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::{Isometry3, Quaternion, Translation3, UnitQuaternion};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::pfm::{read_pfm, PfmError};
use crate::brdf::MaterialParams;
use crate::envlight::{load_equirect, Cubemap, EnvError, Environment};
use crate::math::{Rgb, Vec3};
use crate::splat::{Camera, GaussianPrimitive};
use crate::ssr::RenderSettings;

pub const SCENE_VERSION: u32 = 1;
pub const QUATERNION_TOLERANCE: f64 = 1e-3;
pub const DEFAULT_FACE_SIZE: usize = 64;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("unsupported scene version {0}")]
    UnsupportedVersion(u32),
    #[error("{at}: {reason}")]
    Invalid { at: String, reason: String },
    #[error("environment asset {0} not found")]
    MissingAsset(PathBuf),
    #[error("environment: {0}")]
    Env(#[from] EnvError),
    #[error("environment image: {0}")]
    Pfm(#[from] PfmError),
}

fn invalid(at: impl Into<String>, reason: impl Into<String>) -> SceneError {
    SceneError::Invalid {
        at: at.into(),
        reason: reason.into(),
    }
}

type Extra = BTreeMap<String, Value>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub mu: [f64; 3],
    #[serde(default = "identity_quat")]
    pub rotation: [f64; 4],
    pub scale: [f64; 3],
    pub opacity: f64,
    pub albedo: [f64; 3],
    pub roughness: f64,
    pub metallic: f64,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default)]
    pub group: String,
    #[serde(flatten, skip_serializing)]
    pub extra: Extra,
}

fn identity_quat() -> [f64; 4] {
    [1.0, 0.0, 0.0, 0.0]
}

fn unit_quaternion(q: [f64; 4]) -> Result<UnitQuaternion<f64>, String> {
    if !q.iter().all(|c| c.is_finite()) {
        return Err("non-finite quaternion".into());
    }
    let quat = Quaternion::new(q[0], q[1], q[2], q[3]);
    let norm = quat.norm();
    if (norm - 1.0).abs() > QUATERNION_TOLERANCE {
        return Err(format!("quaternion norm {norm:.4} is not 1"));
    }
    Ok(UnitQuaternion::new_normalize(quat))
}

fn quat_wxyz(q: &UnitQuaternion<f64>) -> [f64; 4] {
    [q.w, q.i, q.j, q.k]
}

impl GaussianSpec {
    pub fn to_primitive(&self) -> Result<GaussianPrimitive, (&'static str, String)> {
        let all_finite = self.mu.iter().chain(&self.scale).chain(&self.albedo).chain([&self.opacity, &self.roughness, &self.metallic, &self.gamma]).all(|v| v.is_finite());
        if !all_finite {
            return Err(("value", "non-finite number".into()));
        }
        let rotation = unit_quaternion(self.rotation).map_err(|r| ("rotation", r))?;
        let g = GaussianPrimitive {
            mu: Vec3::from(self.mu),
            rotation,
            scale: Vec3::from(self.scale),
            opacity: self.opacity,
            material: MaterialParams {
                albedo: Rgb::from(self.albedo),
                roughness: self.roughness,
                metallic: self.metallic,
            },
            gamma: self.gamma,
            group: self.group.clone(),
        };
        g.validate().map_err(|e| {
            let crate::splat::InvariantError::Field { field, reason } = e;
            (field, reason)
        })?;
        Ok(g)
    }

    pub fn from_primitive(g: &GaussianPrimitive) -> Self {
        let m = &g.material;
        Self {
            mu: g.mu.into(),
            rotation: quat_wxyz(&g.rotation),
            scale: g.scale.into(),
            opacity: g.opacity,
            albedo: m.albedo.into(),
            roughness: m.roughness,
            metallic: m.metallic,
            gamma: g.gamma,
            group: g.group.clone(),
            extra: Extra::new(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CameraSpec {
    pub width: usize,
    pub height: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eye: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub up: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fov_y_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fx: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cx: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub near: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub far: Option<f64>,
    #[serde(flatten, skip_serializing)]
    pub extra: Extra,
}

impl CameraSpec {
    pub fn to_camera(&self) -> Result<Camera, (&'static str, String)> {
        let mut cam = if let (Some(eye), Some(target)) = (self.eye, self.target) {
            let fov = self.fov_y_deg.ok_or(("fov_y_deg", "required with eye/target".to_string()))?;
            if !(fov > 0.0 && fov < 180.0) {
                return Err(("fov_y_deg", format!("{fov} outside (0, 180)")));
            }
            let (eye, target) = (Vec3::from(eye), Vec3::from(target));
            let up = Vec3::from(self.up.unwrap_or([0.0, 1.0, 0.0]));
            let fwd = target - eye;
            if fwd.norm() < 1e-12 {
                return Err(("target", "coincides with eye".into()));
            }
            if fwd.normalize().cross(&up).norm() < 1e-9 {
                return Err(("up", "parallel to the viewing direction".into()));
            }
            Camera::look_at(eye, target, up, self.width, self.height, fov.to_radians())
        } else {
            let need = |v: Option<f64>, name: &'static str| v.ok_or((name, "required when eye/target are absent".to_string()));
            let rotation = unit_quaternion(self.rotation.unwrap_or_else(identity_quat)).map_err(|r| ("rotation", r))?;
            let position = Vec3::from(self.position.unwrap_or([0.0; 3]));
            Camera {
                fx: need(self.fx, "fx")?,
                fy: need(self.fy, "fy")?,
                cx: self.cx.unwrap_or(0.5 * self.width as f64),
                cy: self.cy.unwrap_or(0.5 * self.height as f64),
                width: self.width,
                height: self.height,
                world_from_camera: Isometry3::from_parts(Translation3::from(position), rotation),
                near: 0.05,
                far: 100.0,
            }
        };
        if let Some(n) = self.near {
            cam.near = n;
        }
        if let Some(f) = self.far {
            cam.far = f;
        }
        cam.validate().map_err(|e| {
            let crate::splat::InvariantError::Field { field, reason } = e;
            (field, reason)
        })?;
        Ok(cam)
    }

    /// Explicit-pose spec reproducing `cam` exactly.
    pub fn from_camera(cam: &Camera) -> Self {
        Self {
            width: cam.width,
            height: cam.height,
            fx: Some(cam.fx),
            fy: Some(cam.fy),
            cx: Some(cam.cx),
            cy: Some(cam.cy),
            position: Some(cam.world_from_camera.translation.vector.into()),
            rotation: Some(quat_wxyz(&cam.world_from_camera.rotation)),
            near: Some(cam.near),
            far: Some(cam.far),
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pfm: Option<PathBuf>,
    #[serde(default)]
    pub yaw: f64,
    #[serde(default = "default_face_size")]
    pub face_size: usize,
    #[serde(flatten, skip_serializing)]
    pub extra: Extra,
}

fn default_face_size() -> usize {
    DEFAULT_FACE_SIZE
}

impl Default for EnvironmentSpec {
    fn default() -> Self {
        Self {
            constant: Some([1.0; 3]),
            pfm: None,
            yaw: 0.0,
            face_size: DEFAULT_FACE_SIZE,
            extra: Extra::new(),
        }
    }
}

impl EnvironmentSpec {
    pub fn constant(value: Rgb) -> Self {
        Self {
            constant: Some(value.into()),
            ..Default::default()
        }
    }

    fn check(&self) -> Result<(), SceneError> {
        match (&self.constant, &self.pfm) {
            (Some(_), Some(_)) => return Err(invalid("environment", "give either `constant` or `pfm`, not both")),
            (None, None) => return Err(invalid("environment", "needs `constant` or `pfm`")),
            (Some(c), None) if !c.iter().all(|v| v.is_finite() && *v >= 0.0) => return Err(invalid("environment.constant", "radiance must be finite and non-negative")),
            _ => {}
        }
        if !self.yaw.is_finite() {
            return Err(invalid("environment.yaw", "non-finite"));
        }
        if !self.face_size.is_power_of_two() {
            return Err(invalid("environment.face_size", format!("{} is not a power of two", self.face_size)));
        }
        Ok(())
    }

    /// Cubemap for this spec; `pfm` paths resolve against `base_dir`.
    pub fn load_cubemap(&self, base_dir: &Path) -> Result<Cubemap, SceneError> {
        self.check()?;
        if let Some(c) = self.constant {
            return Ok(Cubemap::constant(self.face_size, Rgb::from(c))?);
        }
        let path = base_dir.join(self.pfm.as_ref().expect("checked"));
        if !path.is_file() {
            return Err(SceneError::MissingAsset(path));
        }
        let img = read_pfm(&path)?;
        Ok(load_equirect(&img, self.face_size)?)
    }

    pub fn load(&self, base_dir: &Path) -> Result<Environment, SceneError> {
        Ok(Environment::new(Arc::new(self.load_cubemap(base_dir)?), self.yaw))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneFile {
    pub version: u32,
    pub gaussians: Vec<GaussianSpec>,
    pub cameras: Vec<CameraSpec>,
    #[serde(default)]
    pub environment: EnvironmentSpec,
    #[serde(default)]
    pub settings: RenderSettings,
    #[serde(flatten, skip_serializing)]
    pub extra: Extra,
}

/// Validated scene.
#[derive(Clone, Debug)]
pub struct SceneDescription {
    pub gaussians: Vec<GaussianPrimitive>,
    pub cameras: Vec<Camera>,
    pub environment: EnvironmentSpec,
    pub settings: RenderSettings,
    /// Directory relative asset paths resolve against.
    pub base_dir: PathBuf,
    /// Ignored unknown keys, as dotted paths.
    pub warnings: Vec<String>,
}

impl SceneDescription {
    pub fn load_environment(&self) -> Result<Environment, SceneError> {
        self.environment.load(&self.base_dir)
    }

    pub fn to_file(&self) -> SceneFile {
        SceneFile {
            version: SCENE_VERSION,
            gaussians: self.gaussians.iter().map(GaussianSpec::from_primitive).collect(),
            cameras: self.cameras.iter().map(CameraSpec::from_camera).collect(),
            environment: self.environment.clone(),
            settings: self.settings.clone(),
            extra: Extra::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("scene serializes")
    }
}

fn parse_error(e: serde_json::Error) -> SceneError {
    SceneError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

fn note_extra(prefix: &str, extra: &Extra, warnings: &mut Vec<String>) {
    warnings.extend(extra.keys().map(|k| if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") }));
}

pub fn parse_scene(text: &str, base_dir: &Path) -> Result<SceneDescription, SceneError> {
    // read the version first so a future schema fails with the right error
    let raw: Value = serde_json::from_str(text).map_err(parse_error)?;
    match raw.get("version").map(|v| v.as_u64()) {
        None => return Err(invalid("version", "missing")),
        Some(Some(v)) if v == SCENE_VERSION as u64 => {}
        Some(Some(v)) => return Err(SceneError::UnsupportedVersion(v.min(u32::MAX as u64) as u32)),
        Some(None) => return Err(invalid("version", "must be an unsigned integer")),
    }
    let file: SceneFile = serde_json::from_str(text).map_err(parse_error)?;
    let mut warnings = Vec::new();
    note_extra("", &file.extra, &mut warnings);
    note_extra("environment", &file.environment.extra, &mut warnings);

    let mut gaussians = Vec::with_capacity(file.gaussians.len());
    for (i, spec) in file.gaussians.iter().enumerate() {
        note_extra(&format!("gaussians[{i}]"), &spec.extra, &mut warnings);
        let g = spec.to_primitive().map_err(|(field, reason)| invalid(format!("gaussians[{i}].{field}"), reason))?;
        gaussians.push(g);
    }
    if file.cameras.is_empty() {
        return Err(invalid("cameras", "at least one camera is required"));
    }
    let mut cameras = Vec::with_capacity(file.cameras.len());
    for (i, spec) in file.cameras.iter().enumerate() {
        note_extra(&format!("cameras[{i}]"), &spec.extra, &mut warnings);
        cameras.push(spec.to_camera().map_err(|(field, reason)| invalid(format!("cameras[{i}].{field}"), reason))?);
    }
    file.settings.validate().map_err(|e| invalid("settings", e.to_string()))?;
    file.environment.check()?;
    if let Some(p) = &file.environment.pfm {
        let path = base_dir.join(p);
        if !path.is_file() {
            return Err(SceneError::MissingAsset(path));
        }
    }
    for w in &warnings {
        log::warn!("ignoring unknown scene field `{w}`");
    }
    Ok(SceneDescription {
        gaussians,
        cameras,
        environment: file.environment,
        settings: file.settings,
        base_dir: base_dir.to_path_buf(),
        warnings,
    })
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<SceneDescription, SceneError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| SceneError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scene(&text, path.parent().unwrap_or(Path::new(".")))
}

/// Parses a bare JSON array of Gaussians (an insertable group).
pub fn parse_gaussians(text: &str) -> Result<Vec<GaussianPrimitive>, SceneError> {
    let specs: Vec<GaussianSpec> = serde_json::from_str(text).map_err(parse_error)?;
    specs
        .iter()
        .enumerate()
        .map(|(i, s)| s.to_primitive().map_err(|(field, reason)| invalid(format!("gaussians[{i}].{field}"), reason)))
        .collect()
}
