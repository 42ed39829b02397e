//! Routes.
//!
//! | method | path                    | body                                   | reply                      |
//! |--------|-------------------------|----------------------------------------|----------------------------|
//! | GET    | `/state`                |                                        | [`StateSummary`]           |
//! | PATCH  | `/materials/{group}`    | [`MaterialOverride`]                   | `{"revision"}`             |
//! | PUT    | `/environment`          | [`EnvironmentRequest`]                 | `{"revision"}`             |
//! | PUT    | `/environment/upload`   | raw PFM, query `name`, `yaw`           | `{"revision"}`             |
//! | POST   | `/insert`               | [`InsertRequest`]                      | `{"id", "revision"}`       |
//! | DELETE | `/insert/{id}`          |                                        | `{"revision"}`             |
//! | PUT    | `/settings`             | partial `RenderSettings` object        | `{"revision"}`             |
//! | PUT    | `/camera`               | `CameraSpec`                           | `{"revision"}`             |
//! | GET    | `/frame.png`            |                                        | PNG, `x-revision` header   |
//! | GET    | `/channels/{name}.png`  | name: G-buffer channel or `hit_mask`   | PNG, `x-revision` header   |
//! | GET    | `/ws`                   | WebSocket                              | binary frames              |
//!
//! Errors reply `{"error": message}` with 404 for unknown groups, inserts and
//! assets and 422 for invalid values. WebSocket clients send
//! `{"camera": CameraSpec}` text messages; every frame is an 8-byte
//! little-endian revision followed by PNG bytes.

use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::rejection::JsonRejection;
use axum::extract::ws::{CloseFrame, Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, patch, post, put};
use axum::{Json, Router};
use lumisplat::brdf::BrdfLut;
use lumisplat::edit::MaterialOverride;
use lumisplat::sceneio::{channel_image, encode_png, mask_image, CameraSpec, Channel};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::watch;

use crate::session::{EnvironmentRequest, InsertRequest, Rendered, Session, SessionError, Snapshot};

pub const PROTOCOL_ERROR: u16 = 1002;

pub struct AppState {
    session: Mutex<Session>,
    lut: Arc<BrdfLut>,
    snapshots: watch::Sender<Arc<Snapshot>>,
    cache: Mutex<Option<Arc<Rendered>>>,
}

impl AppState {
    pub fn new(session: Session, lut: Arc<BrdfLut>) -> Arc<Self> {
        let (snapshots, _) = watch::channel(Arc::new(session.snapshot()));
        Arc::new(Self {
            session: Mutex::new(session),
            lut,
            snapshots,
            cache: Mutex::new(None),
        })
    }

    pub fn latest(&self) -> Arc<Snapshot> {
        self.snapshots.borrow().clone()
    }

    /// Runs one mutation under the session lock and publishes the new snapshot
    /// before releasing it, so snapshots go out in revision order.
    pub fn mutate<T>(&self, f: impl FnOnce(&mut Session) -> Result<T, SessionError>) -> Result<T, SessionError> {
        let mut session = self.session.lock().expect("session lock");
        let out = f(&mut session)?;
        self.snapshots.send_replace(Arc::new(session.snapshot()));
        Ok(out)
    }

    pub fn read<T>(&self, f: impl FnOnce(&Session) -> T) -> T {
        f(&self.session.lock().expect("session lock"))
    }

    /// Frame for `snap`, rendered at most once per revision.
    pub fn render(&self, snap: &Snapshot) -> Result<Arc<Rendered>, String> {
        if let Some(r) = self.cache.lock().expect("cache lock").as_ref().filter(|r| r.revision == snap.revision) {
            return Ok(r.clone());
        }
        let rendered = Arc::new(snap.render(&self.lut).map_err(|e| e.to_string())?);
        let mut cache = self.cache.lock().expect("cache lock");
        if cache.as_ref().is_none_or(|c| c.revision < rendered.revision) {
            *cache = Some(rendered.clone());
        }
        Ok(rendered)
    }

    pub fn subscribe(&self) -> watch::Receiver<Arc<Snapshot>> {
        self.snapshots.subscribe()
    }
}

type Shared = Arc<AppState>;

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let status = if e.is_not_found() { StatusCode::NOT_FOUND } else { StatusCode::UNPROCESSABLE_ENTITY };
        ApiError(status, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        let status = match e {
            JsonRejection::JsonSyntaxError(_) => StatusCode::BAD_REQUEST,
            JsonRejection::MissingJsonContentType(_) => StatusCode::UNSUPPORTED_MEDIA_TYPE,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError(status, e.body_text())
    }
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> T {
    tokio::task::spawn_blocking(f).await.expect("blocking task panicked")
}

async fn mutate<T: Send + 'static>(state: Shared, f: impl FnOnce(&mut Session) -> Result<T, SessionError> + Send + 'static) -> Result<T, ApiError> {
    Ok(blocking(move || state.mutate(f)).await?)
}

fn revision(r: u64) -> Json<Value> {
    Json(json!({ "revision": r }))
}

async fn get_state(State(state): State<Shared>) -> Response {
    Json(state.read(|s| s.summary())).into_response()
}

async fn patch_material(State(state): State<Shared>, Path(group): Path<String>, body: Result<Json<MaterialOverride>, JsonRejection>) -> Result<Json<Value>, ApiError> {
    // an unknown group wins over a bad body
    if state.read(|s| s.groups().binary_search(&group).is_err()) {
        return Err(SessionError::UnknownGroup(group).into());
    }
    let Json(patch) = body?;
    mutate(state, move |s| s.patch_material(&group, &patch)).await.map(revision)
}

async fn put_environment(State(state): State<Shared>, body: Result<Json<EnvironmentRequest>, JsonRejection>) -> Result<Json<Value>, ApiError> {
    let Json(req) = body?;
    mutate(state, move |s| s.set_environment(&req)).await.map(revision)
}

#[derive(Deserialize)]
struct UploadQuery {
    name: Option<String>,
    yaw: Option<f64>,
}

async fn upload_environment(State(state): State<Shared>, Query(q): Query<UploadQuery>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let name = q.name.unwrap_or_else(|| "upload".into());
    mutate(state, move |s| s.upload_environment(&name, &body, q.yaw)).await.map(revision)
}

async fn post_insert(State(state): State<Shared>, body: Result<Json<InsertRequest>, JsonRejection>) -> Result<Json<Value>, ApiError> {
    let Json(req) = body?;
    let (id, rev) = mutate(state, move |s| s.insert(&req)).await?;
    Ok(Json(json!({ "id": id, "revision": rev })))
}

async fn delete_insert(State(state): State<Shared>, Path(id): Path<u64>) -> Result<Json<Value>, ApiError> {
    mutate(state, move |s| s.remove_insert(id)).await.map(revision)
}

async fn put_settings(State(state): State<Shared>, body: Result<Json<Value>, JsonRejection>) -> Result<Json<Value>, ApiError> {
    let Json(patch) = body?;
    mutate(state, move |s| s.patch_settings(&patch)).await.map(revision)
}

async fn put_camera(State(state): State<Shared>, body: Result<Json<CameraSpec>, JsonRejection>) -> Result<Json<Value>, ApiError> {
    let Json(spec) = body?;
    mutate(state, move |s| s.set_camera(&spec)).await.map(revision)
}

async fn current_frame(state: &Shared) -> Result<Arc<Rendered>, ApiError> {
    let snap = state.latest();
    let st = state.clone();
    blocking(move || st.render(&snap)).await.map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e))
}

fn png_response(bytes: Vec<u8>, rev: u64) -> Response {
    let mut res = bytes.into_response();
    let headers = res.headers_mut();
    headers.insert(header::CONTENT_TYPE, HeaderValue::from_static("image/png"));
    headers.insert("x-revision", HeaderValue::from(rev));
    res
}

async fn get_frame(State(state): State<Shared>) -> Result<Response, ApiError> {
    let r = current_frame(&state).await?;
    Ok(png_response(r.png.clone(), r.revision))
}

async fn get_channel(State(state): State<Shared>, Path(file): Path<String>) -> Result<Response, ApiError> {
    let name = file.strip_suffix(".png").unwrap_or(&file).to_string();
    let channel = Channel::parse(&name);
    if channel.is_none() && name != "hit_mask" {
        return Err(ApiError(StatusCode::NOT_FOUND, format!("unknown channel `{name}`")));
    }
    let r = current_frame(&state).await?;
    let snap = state.latest();
    let gb = &r.frame.gbuffer;
    let img = match channel {
        Some(c) => channel_image(gb, c, &snap.camera),
        None => mask_image(gb.width, gb.height, &r.frame.hit_mask()),
    };
    Ok(png_response(encode_png(&img), r.revision))
}

pub fn frame_message(r: &Rendered) -> Vec<u8> {
    let mut msg = Vec::with_capacity(8 + r.png.len());
    msg.extend_from_slice(&r.revision.to_le_bytes());
    msg.extend_from_slice(&r.png);
    msg
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ClientMessage {
    camera: CameraSpec,
}

async fn ws_upgrade(State(state): State<Shared>, ws: WebSocketUpgrade) -> Response {
    ws.on_upgrade(move |socket| stream_frames(state, socket))
}

async fn close(mut socket: WebSocket, code: u16, reason: String) {
    let _ = socket
        .send(Message::Close(Some(CloseFrame {
            code,
            reason: reason.into(),
        })))
        .await;
}

/// Pushes the frame for the newest snapshot whenever one appears; snapshots
/// published while a render is running are coalesced into the next one.
async fn stream_frames(state: Shared, mut socket: WebSocket) {
    let mut rx = state.subscribe();
    let mut sent = None::<u64>;
    rx.mark_changed();
    loop {
        tokio::select! {
            changed = rx.changed() => {
                if changed.is_err() {
                    return;
                }
                let snap = rx.borrow_and_update().clone();
                if sent.is_some_and(|s| s >= snap.revision) {
                    continue;
                }
                let st = state.clone();
                let rendered = match blocking(move || st.render(&snap)).await {
                    Ok(r) => r,
                    Err(e) => return close(socket, 1011, e).await,
                };
                if socket.send(Message::Binary(frame_message(&rendered).into())).await.is_err() {
                    return;
                }
                sent = Some(rendered.revision);
            }
            msg = socket.recv() => {
                match msg {
                    None | Some(Err(_)) | Some(Ok(Message::Close(_))) => return,
                    Some(Ok(Message::Ping(_) | Message::Pong(_))) => {}
                    Some(Ok(Message::Text(text))) => {
                        let parsed = serde_json::from_str::<ClientMessage>(text.as_str()).map_err(|e| e.to_string());
                        let applied = match parsed {
                            Ok(m) => {
                                let st = state.clone();
                                blocking(move || st.mutate(|s| s.set_camera(&m.camera))).await.map_err(|e| e.to_string())
                            }
                            Err(e) => Err(e),
                        };
                        if let Err(e) = applied {
                            return close(socket, PROTOCOL_ERROR, e).await;
                        }
                    }
                    Some(Ok(Message::Binary(_))) => return close(socket, PROTOCOL_ERROR, "binary messages are not accepted".into()).await,
                }
            }
        }
    }
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/state", get(get_state))
        .route("/materials/{group}", patch(patch_material))
        .route("/environment", put(put_environment))
        .route("/environment/upload", put(upload_environment))
        .route("/insert", post(post_insert))
        .route("/insert/{id}", delete(delete_insert))
        .route("/settings", put(put_settings))
        .route("/camera", put(put_camera))
        .route("/frame.png", get(get_frame))
        .route("/channels/{file}", get(get_channel))
        .route("/ws", get(ws_upgrade))
        .with_state(state)
}
