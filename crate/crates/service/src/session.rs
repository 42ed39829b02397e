//! Mutable editing session and the immutable per-revision snapshots rendered from it.

use std::collections::BTreeMap;
use std::path::{Component, Path, PathBuf};
use std::sync::Arc;

use lumisplat::brdf::BrdfLut;
use lumisplat::edit::{apply_overrides, groups, EditError, MaterialOverride, Overrides};
use lumisplat::envlight::{load_equirect, Environment};
use lumisplat::pipeline::{render_frame, Frame, FrameRequest, RenderError};
use lumisplat::sceneio::{encode_png, read_gbuffer_manifest, CameraSpec, EnvironmentSpec, GaussianSpec, LayerError, PfmError, PfmImage, SceneDescription, SceneError};
use lumisplat::splat::{Camera, GBuffer, GaussianPrimitive};
use lumisplat::ssr::RenderSettings;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("unknown group `{0}`")]
    UnknownGroup(String),
    #[error("no inserted object with id {0}")]
    UnknownInsert(u64),
    #[error("asset `{0}` not found")]
    MissingAsset(String),
    #[error("{0}")]
    Invalid(String),
    #[error("malformed asset `{name}`: {reason}")]
    MalformedAsset { name: String, reason: String },
    #[error("layer is {layer:?} but the camera renders {camera:?}")]
    DimensionMismatch { layer: (usize, usize), camera: (usize, usize) },
}

impl SessionError {
    /// HTTP status class: 404 for unresolvable references, 422 otherwise.
    pub fn is_not_found(&self) -> bool {
        matches!(self, SessionError::UnknownGroup(_) | SessionError::UnknownInsert(_) | SessionError::MissingAsset(_))
    }
}

impl From<EditError> for SessionError {
    fn from(e: EditError) -> Self {
        match e {
            EditError::UnknownGroup(g) => SessionError::UnknownGroup(g),
            e => SessionError::Invalid(e.to_string()),
        }
    }
}

/// Body of an environment change; exactly one of `name` and `constant`, or
/// neither to only rotate.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentRequest {
    /// Equirectangular PFM relative to the asset directory.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub constant: Option<[f64; 3]>,
    #[serde(default)]
    pub yaw: Option<f64>,
}

/// Body of an insertion: a baked G-buffer layer or a Gaussian group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum InsertRequest {
    /// G-buffer manifest path relative to the asset directory.
    Manifest(String),
    /// JSON array of Gaussians relative to the asset directory.
    GaussiansFile(String),
    Gaussians(Vec<GaussianSpec>),
}

#[derive(Clone, Debug)]
enum InsertKind {
    Layer(Arc<GBuffer>),
    Gaussians(Arc<Vec<GaussianPrimitive>>),
}

#[derive(Clone, Debug)]
struct Insert {
    source: String,
    kind: InsertKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InsertSummary {
    pub id: u64,
    pub kind: String,
    pub source: String,
    /// Gaussians in the group, or pixels the layer covers.
    pub size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSummary {
    pub name: String,
    pub yaw: f64,
}

/// What `GET /state` reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateSummary {
    pub revision: u64,
    pub gaussians: usize,
    pub groups: Vec<String>,
    pub cameras: usize,
    pub camera: CameraSpec,
    pub width: usize,
    pub height: usize,
    pub settings: RenderSettings,
    pub environment: EnvironmentSummary,
    pub overrides: Overrides,
    pub inserts: Vec<InsertSummary>,
}

/// Everything one render needs, frozen at a revision.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub revision: u64,
    pub gaussians: Arc<Vec<GaussianPrimitive>>,
    pub layers: Arc<Vec<GBuffer>>,
    pub camera: Camera,
    pub env: Environment,
    pub settings: RenderSettings,
}

/// A rendered snapshot with its encoded final frame.
#[derive(Debug)]
pub struct Rendered {
    pub revision: u64,
    pub frame: Frame,
    pub png: Vec<u8>,
}

impl Snapshot {
    pub fn render(&self, lut: &BrdfLut) -> Result<Rendered, RenderError> {
        let frame = render_frame(&FrameRequest {
            gaussians: &self.gaussians,
            camera: &self.camera,
            env: &self.env,
            lut,
            settings: &self.settings,
            layers: &self.layers,
        })?;
        let png = encode_png(&frame.ldr);
        Ok(Rendered { revision: self.revision, frame, png })
    }
}

pub struct Session {
    scene: SceneDescription,
    asset_dir: PathBuf,
    overrides: Overrides,
    env_name: String,
    env: Environment,
    settings: RenderSettings,
    camera: Camera,
    inserts: BTreeMap<u64, Insert>,
    next_insert: u64,
    revision: u64,
    edited: Arc<Vec<GaussianPrimitive>>,
    any_path: bool,
}

fn describe_env(spec: &EnvironmentSpec) -> String {
    match (&spec.pfm, spec.constant) {
        (Some(p), _) => p.display().to_string(),
        (None, Some(c)) => format!("constant {c:?}"),
        _ => String::new(),
    }
}

impl Session {
    /// Fresh session at revision 0 using the scene's first camera; relative
    /// asset names resolve against `asset_dir`.
    pub fn new(scene: SceneDescription, asset_dir: impl Into<PathBuf>) -> Result<Self, SceneError> {
        let env = scene.load_environment()?;
        let camera = scene.cameras[0].clone();
        let mut s = Self {
            env_name: describe_env(&scene.environment),
            env,
            settings: scene.settings.clone(),
            camera,
            asset_dir: asset_dir.into(),
            overrides: Overrides::new(),
            inserts: BTreeMap::new(),
            next_insert: 1,
            revision: 0,
            edited: Arc::new(Vec::new()),
            any_path: false,
            scene,
        };
        s.rebuild_gaussians().expect("no overrides yet");
        Ok(s)
    }

    /// Lets asset names be arbitrary paths (absolute, or relative to the
    /// asset directory with `..`), for local command-line use.
    pub fn allow_any_path(mut self) -> Self {
        self.any_path = true;
        self
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn camera(&self) -> &Camera {
        &self.camera
    }

    pub fn scene(&self) -> &SceneDescription {
        &self.scene
    }

    fn all_gaussians(&self) -> Vec<GaussianPrimitive> {
        let mut gs = self.scene.gaussians.clone();
        for ins in self.inserts.values() {
            if let InsertKind::Gaussians(g) = &ins.kind {
                gs.extend(g.iter().cloned());
            }
        }
        gs
    }

    fn rebuild_gaussians(&mut self) -> Result<(), SessionError> {
        self.edited = Arc::new(apply_overrides(&self.all_gaussians(), &self.overrides)?);
        Ok(())
    }

    fn bump(&mut self) -> u64 {
        self.revision += 1;
        self.revision
    }

    pub fn groups(&self) -> Vec<String> {
        groups(&self.edited)
    }

    /// Merges `patch` into the group's override; an empty patch still counts as a mutation.
    pub fn patch_material(&mut self, group: &str, patch: &MaterialOverride) -> Result<u64, SessionError> {
        if self.groups().binary_search_by(|g| g.as_str().cmp(group)).is_err() {
            return Err(SessionError::UnknownGroup(group.to_string()));
        }
        patch.validate()?;
        let merged = self.overrides.get(group).cloned().unwrap_or_default().merged(patch);
        let previous = self.overrides.insert(group.to_string(), merged);
        if let Err(e) = self.rebuild_gaussians() {
            match previous {
                Some(p) => self.overrides.insert(group.to_string(), p),
                None => self.overrides.remove(group),
            };
            return Err(e);
        }
        Ok(self.bump())
    }

    /// Resolves `name` inside the asset directory, refusing to escape it.
    fn resolve(&self, name: &str) -> Result<PathBuf, SessionError> {
        let rel = Path::new(name);
        let escapes = rel.components().any(|c| !matches!(c, Component::Normal(_) | Component::CurDir));
        if name.is_empty() || (escapes && !self.any_path) {
            return Err(SessionError::MissingAsset(name.to_string()));
        }
        let path = self.asset_dir.join(rel);
        if path.is_file() {
            Ok(path)
        } else {
            Err(SessionError::MissingAsset(name.to_string()))
        }
    }

    fn face_size(&self) -> usize {
        self.scene.environment.face_size
    }

    fn check_yaw(yaw: Option<f64>) -> Result<(), SessionError> {
        match yaw {
            Some(y) if !y.is_finite() => Err(SessionError::Invalid("yaw must be finite".into())),
            _ => Ok(()),
        }
    }

    pub fn set_environment(&mut self, req: &EnvironmentRequest) -> Result<u64, SessionError> {
        Self::check_yaw(req.yaw)?;
        let yaw = req.yaw.unwrap_or(self.env.yaw());
        let (name, cube) = match (&req.name, req.constant) {
            (Some(_), Some(_)) => return Err(SessionError::Invalid("give either `name` or `constant`".into())),
            (Some(name), None) => {
                let path = self.resolve(name)?;
                let malformed = |reason: String| SessionError::MalformedAsset { name: name.clone(), reason };
                let bytes = std::fs::read(&path).map_err(|e| malformed(e.to_string()))?;
                let img = PfmImage::decode(&bytes).map_err(|e| malformed(e.to_string()))?;
                if img.channels != 3 {
                    return Err(malformed("environment must be an RGB PFM".into()));
                }
                let cube = load_equirect(&img.to_radiance(), self.face_size()).map_err(|e| malformed(e.to_string()))?;
                (name.clone(), Arc::new(cube))
            }
            (None, Some(c)) => {
                if !c.iter().all(|v| v.is_finite() && *v >= 0.0) {
                    return Err(SessionError::Invalid("constant radiance must be finite and non-negative".into()));
                }
                let cube = lumisplat::envlight::Cubemap::constant(self.face_size(), c.into()).map_err(|e| SessionError::Invalid(e.to_string()))?;
                (format!("constant {c:?}"), Arc::new(cube))
            }
            (None, None) => (self.env_name.clone(), self.env.cubemap.clone()),
        };
        self.env = Environment::new(cube, yaw);
        self.env_name = name;
        Ok(self.bump())
    }

    /// Environment from an uploaded PFM body.
    pub fn upload_environment(&mut self, name: &str, bytes: &[u8], yaw: Option<f64>) -> Result<u64, SessionError> {
        Self::check_yaw(yaw)?;
        let malformed = |reason: String| SessionError::MalformedAsset { name: name.to_string(), reason };
        let img = PfmImage::decode(bytes).map_err(|e: PfmError| malformed(e.to_string()))?;
        if img.channels != 3 {
            return Err(malformed("environment must be an RGB PFM".into()));
        }
        let cube = load_equirect(&img.to_radiance(), self.face_size()).map_err(|e| malformed(e.to_string()))?;
        self.env = Environment::new(Arc::new(cube), yaw.unwrap_or(self.env.yaw()));
        self.env_name = name.to_string();
        Ok(self.bump())
    }

    fn check_layer(&self, gb: &GBuffer) -> Result<(), SessionError> {
        let camera = (self.camera.width, self.camera.height);
        if (gb.width, gb.height) != camera {
            return Err(SessionError::DimensionMismatch { layer: (gb.width, gb.height), camera });
        }
        Ok(())
    }

    /// Adds an object; returns `(id, revision)`.
    pub fn insert(&mut self, req: &InsertRequest) -> Result<(u64, u64), SessionError> {
        let id = self.next_insert;
        let parse_group = |specs: &[GaussianSpec]| -> Result<Vec<GaussianPrimitive>, SessionError> {
            if specs.is_empty() {
                return Err(SessionError::Invalid("empty Gaussian group".into()));
            }
            specs
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let mut g = s.to_primitive().map_err(|(f, r)| SessionError::Invalid(format!("gaussians[{i}].{f}: {r}")))?;
                    if g.group.is_empty() {
                        g.group = format!("inserted-{id}");
                    }
                    Ok(g)
                })
                .collect()
        };
        let insert = match req {
            InsertRequest::Manifest(name) => {
                let path = self.resolve(name)?;
                let gb = read_gbuffer_manifest(&path).map_err(|e| match e {
                    LayerError::Io { .. } => SessionError::MissingAsset(name.clone()),
                    e => SessionError::MalformedAsset { name: name.clone(), reason: e.to_string() },
                })?;
                self.check_layer(&gb)?;
                Insert {
                    source: name.clone(),
                    kind: InsertKind::Layer(Arc::new(gb)),
                }
            }
            InsertRequest::GaussiansFile(name) => {
                let path = self.resolve(name)?;
                let malformed = |reason: String| SessionError::MalformedAsset { name: name.clone(), reason };
                let text = std::fs::read_to_string(&path).map_err(|e| malformed(e.to_string()))?;
                let specs: Vec<GaussianSpec> = serde_json::from_str(&text).map_err(|e| malformed(e.to_string()))?;
                Insert {
                    source: name.clone(),
                    kind: InsertKind::Gaussians(Arc::new(parse_group(&specs)?)),
                }
            }
            InsertRequest::Gaussians(specs) => Insert {
                source: "inline".into(),
                kind: InsertKind::Gaussians(Arc::new(parse_group(specs)?)),
            },
        };
        self.inserts.insert(id, insert);
        self.next_insert += 1;
        self.rebuild_gaussians()?;
        Ok((id, self.bump()))
    }

    /// Removes an inserted object and any override left without a group.
    pub fn remove_insert(&mut self, id: u64) -> Result<u64, SessionError> {
        self.inserts.remove(&id).ok_or(SessionError::UnknownInsert(id))?;
        let known = groups(&self.all_gaussians());
        self.overrides.retain(|g, _| known.binary_search(g).is_ok());
        self.rebuild_gaussians()?;
        Ok(self.bump())
    }

    /// Applies the fields present in `patch` (a JSON object) to the settings.
    pub fn patch_settings(&mut self, patch: &Value) -> Result<u64, SessionError> {
        let Value::Object(fields) = patch else {
            return Err(SessionError::Invalid("settings patch must be a JSON object".into()));
        };
        let mut current = serde_json::to_value(&self.settings).expect("settings serialize");
        let obj = current.as_object_mut().expect("settings are an object");
        for (k, v) in fields {
            if !obj.contains_key(k) {
                return Err(SessionError::Invalid(format!("unknown setting `{k}`")));
            }
            obj.insert(k.clone(), v.clone());
        }
        let settings: RenderSettings = serde_json::from_value(current).map_err(|e| SessionError::Invalid(e.to_string()))?;
        settings.validate().map_err(|e| SessionError::Invalid(e.to_string()))?;
        self.settings = settings;
        Ok(self.bump())
    }

    pub fn settings(&self) -> &RenderSettings {
        &self.settings
    }

    pub fn set_settings(&mut self, settings: RenderSettings) -> Result<u64, SessionError> {
        settings.validate().map_err(|e| SessionError::Invalid(e.to_string()))?;
        self.settings = settings;
        Ok(self.bump())
    }

    /// Replaces the camera pose; layers pin the image size.
    pub fn set_camera(&mut self, spec: &CameraSpec) -> Result<u64, SessionError> {
        let cam = spec.to_camera().map_err(|(f, r)| SessionError::Invalid(format!("camera.{f}: {r}")))?;
        for ins in self.inserts.values() {
            if let InsertKind::Layer(gb) = &ins.kind {
                if (gb.width, gb.height) != (cam.width, cam.height) {
                    return Err(SessionError::DimensionMismatch {
                        layer: (gb.width, gb.height),
                        camera: (cam.width, cam.height),
                    });
                }
            }
        }
        self.camera = cam;
        Ok(self.bump())
    }

    /// Picks one of the scene's cameras.
    pub fn select_camera(&mut self, index: usize) -> Result<u64, SessionError> {
        let cam = self.scene.cameras.get(index).ok_or_else(|| SessionError::Invalid(format!("camera index {index} out of range ({} cameras)", self.scene.cameras.len())))?;
        self.set_camera(&CameraSpec::from_camera(cam))
    }

    pub fn snapshot(&self) -> Snapshot {
        let layers = self
            .inserts
            .values()
            .filter_map(|i| match &i.kind {
                InsertKind::Layer(gb) => Some((**gb).clone()),
                InsertKind::Gaussians(_) => None,
            })
            .collect();
        Snapshot {
            revision: self.revision,
            gaussians: self.edited.clone(),
            layers: Arc::new(layers),
            camera: self.camera.clone(),
            env: self.env.clone(),
            settings: self.settings.clone(),
        }
    }

    pub fn summary(&self) -> StateSummary {
        let inserts = self
            .inserts
            .iter()
            .map(|(&id, ins)| {
                let (kind, size) = match &ins.kind {
                    InsertKind::Layer(gb) => ("layer", (0..gb.len()).filter(|&i| gb.covered(i)).count()),
                    InsertKind::Gaussians(g) => ("gaussians", g.len()),
                };
                InsertSummary {
                    id,
                    kind: kind.into(),
                    source: ins.source.clone(),
                    size,
                }
            })
            .collect();
        StateSummary {
            revision: self.revision,
            gaussians: self.edited.len(),
            groups: self.groups(),
            cameras: self.scene.cameras.len(),
            camera: CameraSpec::from_camera(&self.camera),
            width: self.camera.width,
            height: self.camera.height,
            settings: self.settings.clone(),
            environment: EnvironmentSummary {
                name: self.env_name.clone(),
                yaw: self.env.yaw(),
            },
            overrides: self.overrides.clone(),
            inserts,
        }
    }
}
