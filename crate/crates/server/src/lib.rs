//! HTTP review service over a finished inspection.
//!
//! | route | purpose |
//! |---|---|
//! | `GET /api/site` | live [`SiteHealthReport`] under current verdicts |
//! | `GET /api/detections?severity=&class=&verdict=` | WGS84 features with color band and loss |
//! | `GET /api/detections/{id}` | one feature |
//! | `POST /api/detections/{id}/verdict` | `{"verdict": "...", "note": "..."}`, answers with the updated site |
//! | `GET /api/verdicts` | review state per detection |
//! | `GET /api/tables`, `GET /api/panels` | pipeline overlays as written |
//! | `GET /api/overlays/{name}` | extra GeoJSON from `overlays/` (e.g. inverter blocks) |
//! | `GET /tiles/{ir,rgb}/{z}/{x}/{y}.png` | web-mercator raster tiles |

pub mod session;
pub mod tiles;

#[cfg(test)]
mod testutil;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use pvinspect_core::analytics::SiteHealthReport;
use pvinspect_core::detect::Verdict;
use pvinspect_core::pipeline;
use serde::Deserialize;
use tower_http::cors::{AllowOrigin, CorsLayer};

pub use session::{DetectionFilter, ReviewSession, VerdictOutcome, VerdictRecord};
pub use tiles::{LayerKind, TileLayers};

#[derive(Debug, thiserror::Error)]
pub enum ServerError {
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    Internal(String),
}

impl IntoResponse for ServerError {
    fn into_response(self) -> Response {
        let status = match self {
            Self::NotFound(_) => StatusCode::NOT_FOUND,
            Self::BadRequest(_) => StatusCode::BAD_REQUEST,
            Self::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(serde_json::json!({ "error": self.to_string() }))).into_response()
    }
}

/// Shared server state. Reads take the session lock shared; verdict writes
/// take it exclusively, which serializes journal appends and report rebuilds.
#[derive(Debug)]
pub struct AppState {
    results_dir: PathBuf,
    session: Option<RwLock<ReviewSession>>,
    layers: TileLayers,
}

impl AppState {
    /// Opens a results directory. A directory without results still serves,
    /// answering 404 on the API.
    pub fn open(results_dir: &Path) -> Result<Self, ServerError> {
        let session = match ReviewSession::open(results_dir) {
            Ok(s) => Some(RwLock::new(s)),
            Err(ServerError::NotFound(msg)) => {
                tracing::warn!("{msg}");
                None
            }
            Err(e) => return Err(e),
        };
        let mut layers = TileLayers::default();
        if let Ok(m) = pipeline::read_manifest(results_dir) {
            if let Some(stretch) = m.stretch_range_c {
                layers.ir = Some(tiles::Layer::thermal(&m.config.inputs.ir, stretch)?);
            }
            if let Some(rgb) = &m.config.inputs.rgb {
                match tiles::Layer::visible(rgb) {
                    Ok(l) => layers.rgb = Some(l),
                    Err(e) => tracing::warn!("RGB layer unavailable: {e}"),
                }
            }
        }
        Ok(Self { results_dir: results_dir.to_path_buf(), session, layers })
    }

    fn session(&self) -> Result<&RwLock<ReviewSession>, ServerError> {
        self.session.as_ref().ok_or_else(|| ServerError::NotFound(format!("no results in {}", self.results_dir.display())))
    }

    fn read<T>(&self, f: impl FnOnce(&ReviewSession) -> T) -> Result<T, ServerError> {
        let lock = self.session()?.read().map_err(|_| ServerError::Internal("session lock poisoned".into()))?;
        Ok(f(&lock))
    }

    pub fn report(&self) -> Result<SiteHealthReport, ServerError> {
        self.read(|s| s.report().clone())
    }

    pub fn set_verdict(&self, id: &str, verdict: Verdict, note: &str) -> Result<VerdictOutcome, ServerError> {
        let mut lock = self.session()?.write().map_err(|_| ServerError::Internal("session lock poisoned".into()))?;
        lock.set_verdict(id, verdict, note)
    }
}

/// CORS origin policy for the review console.
#[derive(Debug, Clone, Default)]
pub enum CorsOrigin {
    #[default]
    Any,
    Exact(String),
}

pub fn router(state: Arc<AppState>, cors: &CorsOrigin) -> Result<Router, ServerError> {
    let origin = match cors {
        CorsOrigin::Any => AllowOrigin::any(),
        CorsOrigin::Exact(o) => AllowOrigin::exact(HeaderValue::from_str(o).map_err(|e| ServerError::BadRequest(format!("bad CORS origin: {e}")))?),
    };
    let cors = CorsLayer::new().allow_origin(origin).allow_methods([Method::GET, Method::POST]).allow_headers([header::CONTENT_TYPE]);
    Ok(Router::new()
        .route("/api/site", get(get_site))
        .route("/api/detections", get(list_detections))
        .route("/api/detections/{id}", get(get_detection))
        .route("/api/detections/{id}/verdict", post(post_verdict))
        .route("/api/verdicts", get(get_verdicts))
        .route("/api/tables", get(get_tables))
        .route("/api/panels", get(get_panels))
        .route("/api/overlays/{name}", get(get_overlay))
        .route("/tiles/{layer}/{z}/{x}/{y}", get(get_tile))
        .layer(cors)
        .with_state(state))
}

/// Binds `addr` and serves until ctrl-c.
pub async fn serve(results_dir: &Path, addr: SocketAddr, cors: CorsOrigin) -> anyhow::Result<()> {
    let state = Arc::new(AppState::open(results_dir)?);
    let app = router(state, &cors)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("serving {} on http://{}", results_dir.display(), listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

type Shared = State<Arc<AppState>>;

async fn get_site(State(st): Shared) -> Result<Json<SiteHealthReport>, ServerError> {
    st.report().map(Json)
}

async fn list_detections(State(st): Shared, Query(q): Query<HashMap<String, String>>) -> Result<Response, ServerError> {
    let filter = DetectionFilter::from_query(&q)?;
    let fc = st.read(|s| s.detections_geojson(&filter))?;
    Ok(geojson_response(serde_json::to_vec(&fc)))
}

async fn get_detection(State(st): Shared, UrlPath(id): UrlPath<String>) -> Result<Response, ServerError> {
    let f = st.read(|s| s.detection_feature(&id))?.ok_or_else(|| ServerError::NotFound(format!("unknown detection {id}")))?;
    Ok(geojson_response(serde_json::to_vec(&f)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct VerdictBody {
    verdict: String,
    #[serde(default)]
    note: String,
}

async fn post_verdict(State(st): Shared, UrlPath(id): UrlPath<String>, body: Bytes) -> Result<Json<VerdictOutcome>, ServerError> {
    if !st.read(|s| s.contains(&id))? {
        return Err(ServerError::NotFound(format!("unknown detection {id}")));
    }
    let body: VerdictBody = serde_json::from_slice(&body).map_err(|e| ServerError::BadRequest(format!("bad verdict body: {e}")))?;
    let verdict: Verdict = body.verdict.parse().map_err(|_| ServerError::BadRequest(format!("invalid verdict {:?}", body.verdict)))?;
    let st2 = st.clone();
    tokio::task::spawn_blocking(move || st2.set_verdict(&id, verdict, &body.note))
        .await
        .map_err(|e| ServerError::Internal(e.to_string()))?
        .map(Json)
}

async fn get_verdicts(State(st): Shared) -> Result<Response, ServerError> {
    let v = st.read(|s| serde_json::to_vec(s.verdicts()))?;
    Ok(json_response(v))
}

fn file_response(path: &Path) -> Result<Response, ServerError> {
    match std::fs::read(path) {
        Ok(bytes) => Ok(([(header::CONTENT_TYPE, "application/geo+json")], bytes).into_response()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(ServerError::NotFound(format!("{} not found", path.display()))),
        Err(e) => Err(ServerError::Internal(e.to_string())),
    }
}

async fn get_tables(State(st): Shared) -> Result<Response, ServerError> {
    file_response(&st.results_dir.join(pipeline::TABLES_FILE))
}

async fn get_panels(State(st): Shared) -> Result<Response, ServerError> {
    file_response(&st.results_dir.join(pipeline::PANELS_FILE))
}

/// Optional overlays (an electrical layout, say) dropped into `overlays/`
/// as `<name>.geojson`; served as-is with no analytics attached.
async fn get_overlay(State(st): Shared, UrlPath(name): UrlPath<String>) -> Result<Response, ServerError> {
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
        return Err(ServerError::NotFound(format!("unknown overlay {name:?}")));
    }
    file_response(&st.results_dir.join("overlays").join(format!("{name}.geojson")))
}

async fn get_tile(State(st): Shared, UrlPath((layer, z, x, y)): UrlPath<(String, String, String, String)>) -> Result<Response, ServerError> {
    let kind: LayerKind = layer.parse()?;
    let num = |s: &str| s.parse::<u64>().map_err(|_| ServerError::BadRequest(format!("bad tile coordinate {s:?}")));
    let y = y.strip_suffix(".png").ok_or_else(|| ServerError::NotFound("tiles are served as .png".into()))?;
    let (z, x, y) = (num(&z)?, num(&x)?, num(y)?);
    let z = u32::try_from(z).map_err(|_| ServerError::BadRequest("zoom out of range".into()))?;
    if st.layers.get(kind).is_none() {
        return Err(ServerError::NotFound(format!("layer {layer} not available")));
    }
    let pixels = tokio::task::spawn_blocking(move || st.layers.get(kind).expect("checked").render(z, x, y))
        .await
        .map_err(|e| ServerError::Internal(e.to_string()))??;
    match pixels {
        None => Ok(StatusCode::NO_CONTENT.into_response()),
        Some(rgba) => Ok(([(header::CONTENT_TYPE, "image/png")], tiles::encode_png(&rgba)?).into_response()),
    }
}

fn geojson_response(bytes: serde_json::Result<Vec<u8>>) -> Response {
    match bytes {
        Ok(b) => ([(header::CONTENT_TYPE, "application/geo+json")], b).into_response(),
        Err(e) => ServerError::Internal(e.to_string()).into_response(),
    }
}

fn json_response(bytes: serde_json::Result<Vec<u8>>) -> Response {
    match bytes {
        Ok(b) => ([(header::CONTENT_TYPE, "application/json")], b).into_response(),
        Err(e) => ServerError::Internal(e.to_string()).into_response(),
    }
}
