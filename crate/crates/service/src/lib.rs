//! Single-session editing service: one scene per process, mutated over HTTP and
//! streamed as rendered frames over a WebSocket. See [`http`] for the routes.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use lumisplat::brdf::{precompute_brdf_lut, BrdfLut, LUT_DEFAULT_RESOLUTION, LUT_DEFAULT_SAMPLES};
use lumisplat::sceneio::load_scene;

pub mod http;
pub mod session;

pub use http::{router, AppState};
pub use session::{EnvironmentRequest, InsertRequest, Session, SessionError, Snapshot, StateSummary};

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub addr: SocketAddr,
    pub scene: PathBuf,
    /// Root for environment and insertion assets; defaults to the scene's directory.
    pub asset_dir: Option<PathBuf>,
    /// Precomputed BRDF table; computed at startup when absent.
    pub lut: Option<PathBuf>,
    pub camera: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("scene: {0}")]
    Scene(#[from] lumisplat::sceneio::SceneError),
    #[error("lut: {0}")]
    Lut(#[from] lumisplat::brdf::BrdfError),
    #[error("{0}")]
    Session(#[from] SessionError),
    #[error("server: {0}")]
    Io(#[from] std::io::Error),
}

/// Loads the scene and BRDF table into a ready application state.
pub fn build_state(config: &ServiceConfig) -> Result<Arc<AppState>, ServiceError> {
    let scene = load_scene(&config.scene)?;
    let asset_dir = config.asset_dir.clone().unwrap_or_else(|| scene.base_dir.clone());
    let lut = match &config.lut {
        Some(p) => BrdfLut::read_from(p)?,
        None => precompute_brdf_lut(LUT_DEFAULT_RESOLUTION, LUT_DEFAULT_SAMPLES, 0)?,
    };
    let mut session = Session::new(scene, asset_dir)?;
    if config.camera != 0 {
        session.select_camera(config.camera)?;
    }
    Ok(AppState::new(session, Arc::new(lut)))
}

/// Serves until the process is interrupted.
pub async fn serve(config: ServiceConfig) -> Result<(), ServiceError> {
    let state = build_state(&config)?;
    let listener = tokio::net::TcpListener::bind(config.addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}
