use std::collections::HashMap;
use std::future::Future;
use std::net::{IpAddr, SocketAddr, TcpListener as StdListener};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Instant;

use axum::body::{Bytes, HttpBody};
use axum::extract::{ConnectInfo, Path as UrlPath, Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::oneshot;

use crate::error::{Error, Result};
use crate::smoke::{list_event_thumbnails, load_report};
use crate::store::DataRoot;
use crate::telemetry::{parse_time, SensorReading, Station, TelemetryStore, WindReading};
use crate::thumbnail::{render_thumbnail, ThumbnailSpec};
use crate::timelapse::{Dataset, DatasetId, DirFrames, TileAddress, TileStore};
use crate::usage::AccessLogEntry;

use super::{AccessLogWriter, ServiceConfig};

/// Source of request timestamps. Tests inject a fake one.
pub type Clock = Arc<dyn Fn() -> DateTime<Utc> + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(Utc::now)
}

/// Per-IP token bucket; `rate` tokens per second, burst of `max(rate, 1)`.
struct RateLimiter {
    rate: f64,
    buckets: Mutex<HashMap<IpAddr, (f64, Instant)>>,
}

impl RateLimiter {
    fn allow(&self, ip: IpAddr) -> bool {
        if self.rate == 0.0 {
            return true;
        }
        let burst = self.rate.max(1.0);
        let now = Instant::now();
        let mut buckets = self.buckets.lock().unwrap_or_else(|e| e.into_inner());
        if buckets.len() > 100_000 {
            buckets.retain(|_, (tokens, at)| *tokens + now.duration_since(*at).as_secs_f64() * self.rate < burst);
        }
        let (tokens, at) = buckets.entry(ip).or_insert((burst, now));
        *tokens = (*tokens + now.duration_since(*at).as_secs_f64() * self.rate).min(burst);
        *at = now;
        if *tokens >= 1.0 {
            *tokens -= 1.0;
            true
        } else {
            false
        }
    }
}

struct AppState {
    root: DataRoot,
    telemetry: Arc<TelemetryStore>,
    log: AccessLogWriter,
    limiter: RateLimiter,
    admin_token: Option<String>,
    trust_forwarded_for: bool,
    clock: Clock,
}

/// Client address as used for logging and rate limiting.
#[derive(Debug, Clone, Copy)]
struct ClientIp(IpAddr);

/// A configured service, ready to be routed or served.
#[derive(Clone)]
pub struct Service {
    state: Arc<AppState>,
}

impl Service {
    pub fn new(config: &ServiceConfig) -> Result<Self> {
        Self::with_clock(config, system_clock())
    }

    pub fn with_clock(config: &ServiceConfig, clock: Clock) -> Result<Self> {
        config.validate()?;
        let root = DataRoot::new(&config.data_root);
        let telemetry = Arc::new(TelemetryStore::open(root.telemetry_journal())?);
        let log = AccessLogWriter::open(&config.access_log_path())?;
        Ok(Service {
            state: Arc::new(AppState {
                root,
                telemetry,
                log,
                limiter: RateLimiter {
                    rate: config.thumbnail_rate_limit,
                    buckets: Mutex::new(HashMap::new()),
                },
                admin_token: config.admin_token.clone(),
                trust_forwarded_for: config.trust_forwarded_for,
                clock,
            }),
        })
    }

    pub fn telemetry(&self) -> &TelemetryStore {
        &self.state.telemetry
    }

    pub fn router(&self) -> Router {
        Router::new()
            .route("/tiles/{dataset}/{level}/{row}/{col}", get(get_tile))
            .route("/thumbnail", get(get_thumbnail))
            .route("/api/thumbnail", post(create_thumbnail))
            .route("/api/smoke/{dataset}", get(get_smoke))
            .route("/api/datasets", get(list_datasets))
            .route("/api/datasets/{dataset}", get(get_dataset))
            .route("/api/datasets/{dataset}/frame", get(get_frame_index))
            .route("/api/stations", get(list_stations).post(post_stations))
            .route("/api/readings", post(post_readings))
            .route("/api/wind", post(post_wind))
            .route("/api/smell", get(list_smell).post(post_smell))
            .route("/api/series", get(get_series))
            .route("/api/context", get(get_context))
            .fallback(|| async { ApiError(Error::NotFound("route".into())) })
            .layer(middleware::from_fn_with_state(self.state.clone(), access_log))
            .with_state(self.state.clone())
    }

    /// Serve on `listener` until `shutdown` resolves.
    pub async fn serve(
        self,
        listener: tokio::net::TcpListener,
        shutdown: impl Future<Output = ()> + Send + 'static,
    ) -> std::io::Result<()> {
        let app = self.router();
        axum::serve(listener, app.into_make_service_with_connect_info::<SocketAddr>())
            .with_graceful_shutdown(shutdown)
            .await
    }
}

/// A service running on its own runtime thread; stops when dropped.
pub struct RunningService {
    pub addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<std::io::Result<()>>>,
}

impl RunningService {
    pub fn url(&self, path: &str) -> String {
        format!("http://{}{path}", self.addr)
    }

    pub fn stop(mut self) -> std::io::Result<()> {
        self.shutdown_inner()
    }

    fn shutdown_inner(&mut self) -> std::io::Result<()> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        match self.thread.take() {
            Some(t) => t.join().unwrap_or_else(|_| Err(std::io::Error::other("server thread panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for RunningService {
    fn drop(&mut self) {
        let _ = self.shutdown_inner();
    }
}

/// Bind `listen` (port 0 picks a free port) and serve in the background.
pub fn spawn(service: Service, listen: SocketAddr) -> Result<RunningService> {
    let std_listener = StdListener::bind(listen).map_err(|e| Error::io(listen.to_string(), e))?;
    let addr = std_listener.local_addr().map_err(|e| Error::io(listen.to_string(), e))?;
    std_listener
        .set_nonblocking(true)
        .map_err(|e| Error::io(listen.to_string(), e))?;
    let (tx, rx) = oneshot::channel::<()>();
    let thread = std::thread::Builder::new()
        .name("plumewatch-http".into())
        .spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(std_listener)?;
                service
                    .serve(listener, async {
                        let _ = rx.await;
                    })
                    .await
            })
        })
        .map_err(|e| Error::io("server thread", e))?;
    Ok(RunningService {
        addr,
        shutdown: Some(tx),
        thread: Some(thread),
    })
}

/// Serve `config.listen` until Ctrl-C.
pub fn run_until_interrupted(config: &ServiceConfig) -> Result<()> {
    let service = Service::new(config)?;
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Error::io("tokio runtime", e))?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(config.listen)
            .await
            .map_err(|e| Error::io(config.listen.to_string(), e))?;
        let addr = listener.local_addr().map_err(|e| Error::io(config.listen.to_string(), e))?;
        log::info!("listening on http://{addr}");
        println!("listening on http://{addr}");
        service
            .serve(listener, async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| Error::io(addr.to_string(), e))
    })
}

struct ApiError(Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            Error::Invalid { .. } => StatusCode::BAD_REQUEST,
            Error::NotFound(_) => StatusCode::NOT_FOUND,
            Error::Unsupported(_) => StatusCode::NOT_IMPLEMENTED,
            Error::NoInformation(_) => StatusCode::UNPROCESSABLE_ENTITY,
            Error::Io { .. } | Error::Image { .. } | Error::Encode(_) => {
                log::error!("{}", self.0);
                StatusCode::INTERNAL_SERVER_ERROR
            }
        };
        (status, Json(json!({ "error": self.0.to_string() }))).into_response()
    }
}

fn status_error(status: StatusCode, message: &str) -> Response {
    (status, Json(json!({ "error": message }))).into_response()
}

type ApiResult<T> = std::result::Result<T, ApiError>;

/// Run blocking work (file I/O, rendering) off the async workers.
async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    F: FnOnce() -> Result<T> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(Error::Encode(format!("worker failed: {e}"))))?
        .map_err(ApiError)
}

fn client_ip(state: &AppState, peer: IpAddr, headers: &HeaderMap) -> IpAddr {
    if state.trust_forwarded_for {
        let forwarded = headers
            .get("x-forwarded-for")
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.split(',').next())
            .and_then(|v| v.trim().parse().ok());
        if let Some(ip) = forwarded {
            return ip;
        }
    }
    peer
}

async fn access_log(
    State(state): State<Arc<AppState>>,
    ConnectInfo(peer): ConnectInfo<SocketAddr>,
    mut req: Request,
    next: Next,
) -> Response {
    let ip = client_ip(&state, peer.ip(), req.headers());
    req.extensions_mut().insert(ClientIp(ip));
    let mut entry = {
        let header = |name: header::HeaderName| {
            req.headers()
                .get(name)
                .and_then(|v| v.to_str().ok())
                .map(str::to_owned)
        };
        AccessLogEntry {
            ip,
            request_time: (state.clock)().fixed_offset(),
            method: req.method().to_string(),
            path_and_query: req
                .uri()
                .path_and_query()
                .map_or_else(|| "/".to_owned(), |p| p.as_str().to_owned()),
            status: 0,
            bytes: None,
            referer: header(header::REFERER),
            user_agent: header(header::USER_AGENT),
        }
    };
    let response = next.run(req).await;
    entry.status = response.status().as_u16();
    entry.bytes = response.body().size_hint().exact();
    if let Err(e) = state.log.append(&entry) {
        log::error!("access log: {e}");
    }
    response
}

fn dataset_id(raw: &str) -> ApiResult<DatasetId> {
    DatasetId::new(raw).map_err(|_| ApiError(Error::NotFound(format!("dataset {raw:?}"))))
}

fn parse_json<T: DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError(Error::invalid("body", e.to_string())))
}

/// The 401 response for a missing or wrong admin token, if any.
fn deny_unless_admin(state: &AppState, headers: &HeaderMap) -> Option<Response> {
    let Some(token) = &state.admin_token else {
        return None;
    };
    let given = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    (given != Some(token.as_str())).then(|| status_error(StatusCode::UNAUTHORIZED, "admin token required"))
}

fn query_param<'a>(q: &'a HashMap<String, String>, name: &str) -> ApiResult<&'a str> {
    q.get(name)
        .map(String::as_str)
        .ok_or_else(|| ApiError(Error::invalid(name, "missing")))
}

fn query_number<T: std::str::FromStr>(q: &HashMap<String, String>, name: &str, default: T) -> ApiResult<T> {
    match q.get(name) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|_| ApiError(Error::invalid(name, format!("{v:?} is not a number")))),
    }
}

fn query_time(q: &HashMap<String, String>, name: &str) -> ApiResult<DateTime<Utc>> {
    let raw = query_param(q, name)?;
    parse_time(raw).map_err(|_| ApiError(Error::invalid(name, format!("{raw:?} is not an RFC 3339 timestamp"))))
}

async fn get_tile(
    State(state): State<Arc<AppState>>,
    UrlPath((dataset, level, row, col)): UrlPath<(String, u32, u32, u32)>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Response> {
    let id = dataset_id(&dataset)?;
    let address = TileAddress {
        level,
        row,
        col,
        frame_start: query_number(&q, "startFrame", 0)?,
        frame_count: query_number(&q, "nframes", 1)?,
    };
    let root = state.root.clone();
    let bytes = blocking(move || {
        let store = TileStore::open_dataset(&root, &id)?;
        Ok(store.get_tile(address)?.to_bytes())
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, "application/octet-stream")], bytes).into_response())
}

async fn get_thumbnail(
    State(state): State<Arc<AppState>>,
    axum::Extension(ClientIp(ip)): axum::Extension<ClientIp>,
    req: Request,
) -> ApiResult<Response> {
    let url = req
        .uri()
        .path_and_query()
        .map_or_else(String::new, |p| p.as_str().to_owned());
    let spec = ThumbnailSpec::decode_url(&url)?;
    if !state.limiter.allow(ip) {
        return Ok(status_error(StatusCode::TOO_MANY_REQUESTS, "thumbnail rate limit exceeded"));
    }
    let root = state.root.clone();
    let gif = blocking(move || {
        let dataset = root.load_dataset(&spec.dataset_id)?;
        render_thumbnail(&spec, &dataset, &DirFrames::new(&root, &dataset))
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, "image/gif")], gif).into_response())
}

async fn create_thumbnail(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<Response> {
    let spec: ThumbnailSpec = parse_json(&body)?;
    spec.validate()?;
    if spec.format == crate::thumbnail::OutputFormat::Mp4 {
        return Err(ApiError(Error::Unsupported("mp4 thumbnails".into())));
    }
    let root = state.root.clone();
    let url = blocking(move || {
        let dataset = root.load_dataset(&spec.dataset_id)?;
        spec.validate_for(&dataset)?;
        Ok(spec.encode_url())
    })
    .await?;
    Ok((StatusCode::CREATED, Json(json!({ "url": url }))).into_response())
}

#[derive(Serialize)]
struct SmokeEventView {
    url: String,
    #[serde(flatten)]
    event: crate::smoke::SmokeEvent,
}

#[derive(Serialize)]
struct SmokeFrameView {
    frame_index: usize,
    smoke_pixel_count: u64,
    is_daytime: bool,
}

async fn get_smoke(State(state): State<Arc<AppState>>, UrlPath(dataset): UrlPath<String>) -> ApiResult<Response> {
    let id = dataset_id(&dataset)?;
    let root = state.root.clone();
    let body = blocking(move || {
        root.load_dataset(&id)?;
        let frames: Vec<SmokeFrameView> = load_report(&root, &id)?
            .map(|r| r.frames)
            .unwrap_or_default()
            .into_iter()
            .map(|f| SmokeFrameView {
                frame_index: f.frame_index,
                smoke_pixel_count: f.smoke_pixel_count,
                is_daytime: f.is_daytime,
            })
            .collect();
        let events: Vec<SmokeEventView> = list_event_thumbnails(&root, &id)?
            .into_iter()
            .map(|(url, event)| SmokeEventView { url, event })
            .collect();
        Ok(json!({ "dataset_id": id, "frames": frames, "events": events }))
    })
    .await?;
    Ok(Json(body).into_response())
}

/// What the dashboard needs to list and open a dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub id: DatasetId,
    pub capture_date: chrono::NaiveDate,
    pub capture_interval_s: u32,
    pub frame_width: u32,
    pub frame_height: u32,
    pub frame_count: usize,
    pub start_time: Option<DateTime<Utc>>,
    pub end_time: Option<DateTime<Utc>>,
    pub missing_frames: u64,
    pub tile_size: Option<u32>,
    pub num_levels: Option<u32>,
}

fn summarize_dataset(root: &DataRoot, d: &Dataset) -> DatasetSummary {
    let pyramid = TileStore::open_dataset(root, &d.id).ok();
    DatasetSummary {
        id: d.id.clone(),
        capture_date: d.capture_date,
        capture_interval_s: d.capture_interval_s,
        frame_width: d.frame_width,
        frame_height: d.frame_height,
        frame_count: d.frame_count(),
        start_time: d.start_time(),
        end_time: d.frames.last().map(|f| f.capture_time),
        missing_frames: d.missing.iter().map(|m| u64::from(m.estimated_missing)).sum(),
        tile_size: pyramid.as_ref().map(|p| p.pyramid().tile_size),
        num_levels: pyramid.as_ref().map(|p| p.pyramid().num_levels),
    }
}

async fn list_datasets(State(state): State<Arc<AppState>>) -> ApiResult<Json<Vec<DatasetSummary>>> {
    let root = state.root.clone();
    let list = blocking(move || {
        Ok(root
            .list_datasets()?
            .iter()
            .map(|d| summarize_dataset(&root, d))
            .collect())
    })
    .await?;
    Ok(Json(list))
}

async fn get_dataset(
    State(state): State<Arc<AppState>>,
    UrlPath(dataset): UrlPath<String>,
) -> ApiResult<Json<DatasetSummary>> {
    let id = dataset_id(&dataset)?;
    let root = state.root.clone();
    let summary = blocking(move || Ok(summarize_dataset(&root, &root.load_dataset(&id)?))).await?;
    Ok(Json(summary))
}

async fn get_frame_index(
    State(state): State<Arc<AppState>>,
    UrlPath(dataset): UrlPath<String>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Response> {
    let id = dataset_id(&dataset)?;
    let t = query_time(&q, "t")?;
    let root = state.root.clone();
    let dataset = blocking(move || root.load_dataset(&id)).await?;
    let index = dataset.frame_index_at(t);
    let first = dataset.start_time();
    let last = dataset.frames.last().map(|f| f.capture_time);
    let clamped = first.is_some_and(|s| t < s) || last.is_some_and(|l| t > l);
    Ok(Json(json!({
        "frame_index": index,
        "capture_time": dataset.frames.get(index).map(|f| f.capture_time),
        "clamped": clamped,
    }))
    .into_response())
}

async fn list_stations(State(state): State<Arc<AppState>>) -> Json<Vec<Station>> {
    Json(state.telemetry.stations())
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x],
            OneOrMany::Many(xs) => xs,
        }
    }
}

async fn post_stations(State(state): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> ApiResult<Response> {
    if let Some(denied) = deny_unless_admin(&state, &headers) {
        return Ok(denied);
    }
    let stations = parse_json::<OneOrMany<Station>>(&body)?.into_vec();
    let store = state.telemetry.clone();
    let n = blocking(move || {
        let n = stations.len();
        for s in stations {
            store.register_station(s)?;
        }
        Ok(n)
    })
    .await?;
    Ok((StatusCode::CREATED, Json(json!({ "accepted": n }))).into_response())
}

async fn post_readings(State(state): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> ApiResult<Response> {
    if let Some(denied) = deny_unless_admin(&state, &headers) {
        return Ok(denied);
    }
    let batch: Vec<SensorReading> = parse_json::<OneOrMany<SensorReading>>(&body)?.into_vec();
    let store = state.telemetry.clone();
    let n = blocking(move || store.ingest_readings(batch)).await?;
    Ok((StatusCode::CREATED, Json(json!({ "accepted": n }))).into_response())
}

async fn post_wind(State(state): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> ApiResult<Response> {
    if let Some(denied) = deny_unless_admin(&state, &headers) {
        return Ok(denied);
    }
    let batch: Vec<WindReading> = parse_json::<OneOrMany<WindReading>>(&body)?.into_vec();
    let store = state.telemetry.clone();
    let n = blocking(move || store.ingest_wind_batch(batch)).await?;
    Ok((StatusCode::CREATED, Json(json!({ "accepted": n }))).into_response())
}

/// Body of `POST /api/smell`; the id is assigned by the server and a
/// missing time means "now".
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SmellSubmission {
    #[serde(default)]
    t: Option<DateTime<Utc>>,
    severity: i64,
    #[serde(default)]
    note: Option<String>,
    #[serde(default)]
    reporter_token: Option<String>,
}

async fn post_smell(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<Response> {
    let s: SmellSubmission = parse_json(&body)?;
    let t = s.t.unwrap_or_else(|| (state.clock)());
    let store = state.telemetry.clone();
    let report = blocking(move || store.submit_smell_report(s.severity, t, s.note, s.reporter_token)).await?;
    Ok((StatusCode::CREATED, Json(report)).into_response())
}

async fn list_smell(State(state): State<Arc<AppState>>) -> Response {
    Json(state.telemetry.smell_reports()).into_response()
}

async fn get_series(
    State(state): State<Arc<AppState>>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Response> {
    let stations: Vec<String> = query_param(&q, "stations")?
        .split(',')
        .filter(|s| !s.is_empty())
        .map(str::to_owned)
        .collect();
    let t0 = query_time(&q, "t0")?;
    let t1 = query_time(&q, "t1")?;
    let bucket: i64 = query_number(&q, "bucket", 3600)?;
    let series = state.telemetry.query_series(&stations, t0, t1, bucket)?;
    Ok(Json(series).into_response())
}

async fn get_context(
    State(state): State<Arc<AppState>>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Response> {
    let t = query_time(&q, "t")?;
    Ok(Json(state.telemetry.query_context(t)).into_response())
}
