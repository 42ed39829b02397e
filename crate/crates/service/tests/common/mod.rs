#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use lumisplat::brdf::precompute_brdf_lut;
use lumisplat::demo::{write_room_assets, RoomAssets};
use lumisplat::sceneio::load_scene;
use lumisplat_service::{AppState, Session};
use tempfile::TempDir;

pub const SIZE: usize = 48;

pub struct Fixture {
    pub dir: TempDir,
    pub assets: RoomAssets,
    pub state: Arc<AppState>,
}

impl Fixture {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let assets = write_room_assets(dir.path(), SIZE, SIZE, 0.3).unwrap();
        let scene = load_scene(&assets.scene).unwrap();
        let session = Session::new(scene, dir.path()).unwrap();
        let lut = Arc::new(precompute_brdf_lut(32, 256, 0).unwrap());
        let state = AppState::new(session, lut);
        Self { dir, assets, state }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}
