//! HTTP front end for the orchestrator. Handlers forward work to the single
//! core thread through a [`CoreHandle`] and translate results into JSON.

use std::path::{Path, PathBuf};
use std::time::Duration;

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use inflight_core::intent::ComplianceProfileTable;
use inflight_core::orchestrator::{CoreHandle, CoreThread, Orchestrator, OrchestratorError};
use inflight_core::southbound::{FaultConfig, Southbound, TransportError};
use inflight_core::topology::{load_topology, TopologyError, TopologyEvent};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

/// Startup settings. Every field can come from the TOML config file; the
/// daemon's flags override it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "snake_case", deny_unknown_fields)]
pub struct ServiceConfig {
    pub port: u16,
    pub topology: PathBuf,
    pub compliance: PathBuf,
    pub log: PathBuf,
    /// Southbound message journal. Defaults to `southbound.log` next to the event log.
    pub southbound_log: Option<PathBuf>,
    pub install_timeout_ms: u64,
    /// Fault spec in the same format as the `INFLIGHT_FAULTS` variable.
    pub faults: Option<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            port: 8080,
            topology: "topologies/acino-ring.json".into(),
            compliance: "config/compliance.json".into(),
            log: "logs/events.log".into(),
            southbound_log: None,
            install_timeout_ms: 2000,
            faults: None,
        }
    }
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, StartupError> {
        toml::from_str(text).map_err(|e| StartupError::Config(e.to_string()))
    }

    pub fn journal_path(&self) -> PathBuf {
        self.southbound_log.clone().unwrap_or_else(|| {
            self.log
                .parent()
                .unwrap_or_else(|| Path::new("."))
                .join("southbound.log")
        })
    }
}

#[derive(Debug, Error)]
pub enum StartupError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {reason}")]
    File { path: PathBuf, reason: String },
    #[error("fault spec: {0}")]
    Faults(String),
    #[error("event log {path}: {source}")]
    Recovery {
        path: PathBuf,
        #[source]
        source: OrchestratorError,
    },
}

fn read_file(path: &Path) -> Result<String, StartupError> {
    std::fs::read_to_string(path).map_err(|e| StartupError::File {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Loads the topology and compliance files, replays the event log and
/// starts the core thread. `env_faults` is merged over the config's faults.
pub fn start_core(
    config: &ServiceConfig,
    env_faults: Option<&str>,
) -> Result<(CoreHandle, CoreThread), StartupError> {
    let topology = load_topology(&read_file(&config.topology)?).map_err(|e| StartupError::File {
        path: config.topology.clone(),
        reason: e.to_string(),
    })?;
    let profiles = ComplianceProfileTable::from_json(&read_file(&config.compliance)?).map_err(|e| {
        StartupError::File {
            path: config.compliance.clone(),
            reason: e.to_string(),
        }
    })?;
    let journal = config.journal_path();
    let mut southbound = Southbound::actors(&topology, Duration::from_millis(config.install_timeout_ms))
        .with_journal(&journal)
        .map_err(|e| StartupError::File {
            path: journal.clone(),
            reason: e.to_string(),
        })?;
    let spec: Vec<&str> = [config.faults.as_deref(), env_faults].into_iter().flatten().collect();
    let faults: FaultConfig = spec
        .join(",")
        .parse()
        .map_err(|e| StartupError::Faults(format!("{e}")))?;
    southbound
        .apply_faults(&faults)
        .map_err(|e| StartupError::Faults(e.to_string()))?;
    if let Some(dir) = config.log.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| StartupError::File {
            path: dir.to_path_buf(),
            reason: e.to_string(),
        })?;
    }
    let orch = Orchestrator::recover(topology, profiles, southbound, &config.log).map_err(|source| {
        StartupError::Recovery {
            path: config.log.clone(),
            source,
        }
    })?;
    Ok(CoreHandle::spawn(orch))
}

/// An error rendered as `{"error": ..., "code": ...}` with a status code.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl ToString) -> Self {
        Self {
            status,
            body: json!({"error": message.to_string(), "code": code}),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<OrchestratorError> for ApiError {
    fn from(e: OrchestratorError) -> Self {
        match &e {
            OrchestratorError::Validation(v) => ApiError {
                status: StatusCode::BAD_REQUEST,
                body: json!({"errors": v.errors}),
            },
            OrchestratorError::UnknownIntent(_) => ApiError::new(StatusCode::NOT_FOUND, "UnknownIntent", e),
            OrchestratorError::Transition { .. } => ApiError::new(StatusCode::CONFLICT, "IllegalTransition", e),
            OrchestratorError::Topology(TopologyError::UnknownLink(_)) => {
                ApiError::new(StatusCode::NOT_FOUND, "UnknownLink", e)
            }
            OrchestratorError::Topology(TopologyError::UnknownSite(_)) => {
                ApiError::new(StatusCode::NOT_FOUND, "UnknownSite", e)
            }
            OrchestratorError::Topology(_) => ApiError::new(StatusCode::BAD_REQUEST, "Topology", e),
            OrchestratorError::Transport(t) => t.clone().into(),
            OrchestratorError::Log(_) | OrchestratorError::Replay { .. } => {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "EventLog", e)
            }
        }
    }
}

impl From<TransportError> for ApiError {
    fn from(e: TransportError) -> Self {
        match e {
            TransportError::UnknownDevice(_) => ApiError::new(StatusCode::NOT_FOUND, "UnknownDevice", e),
            TransportError::Timeout { .. } => ApiError::new(StatusCode::GATEWAY_TIMEOUT, "DeviceTimeout", e),
            TransportError::Malformed { .. } => ApiError::new(StatusCode::BAD_GATEWAY, "DeviceError", e),
        }
    }
}

type ApiResult = Result<Response, ApiError>;

/// Runs `f` on the core thread without blocking the async runtime.
async fn core<R, F>(handle: &CoreHandle, f: F) -> Result<R, ApiError>
where
    F: FnOnce(&mut Orchestrator) -> R + Send + 'static,
    R: Send + 'static,
{
    let handle = handle.clone();
    tokio::task::spawn_blocking(move || handle.call(f))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e))
}

fn ok(value: impl Serialize) -> ApiResult {
    Ok(Json(serde_json::to_value(value).expect("response serializes")).into_response())
}

async fn submit_intent(State(h): State<CoreHandle>, Json(request): Json<Value>) -> ApiResult {
    let (id, state) = core(&h, move |o| {
        let id = o.submit(&request)?;
        let state = o.intent(&id).map(|i| i.state);
        Ok::<_, OrchestratorError>((id, state))
    })
    .await??;
    Ok((StatusCode::CREATED, Json(json!({"id": id, "state": state}))).into_response())
}

async fn list_intents(State(h): State<CoreHandle>) -> ApiResult {
    ok(core(&h, |o| o.intents().cloned().collect::<Vec<_>>()).await?)
}

async fn get_intent(State(h): State<CoreHandle>, UrlPath(id): UrlPath<String>) -> ApiResult {
    let intent = core(&h, {
        let id = id.clone();
        move |o| o.intent(&id).cloned()
    })
    .await?;
    intent.map_or_else(|| Err(OrchestratorError::UnknownIntent(id).into()), ok)
}

async fn withdraw_intent(State(h): State<CoreHandle>, UrlPath(id): UrlPath<String>) -> ApiResult {
    let state = core(&h, move |o| {
        o.withdraw(&id)?;
        Ok::<_, OrchestratorError>(o.intent(&id).map(|i| json!({"id": i.id, "state": i.state})))
    })
    .await??;
    ok(state)
}

async fn get_service(State(h): State<CoreHandle>, UrlPath(id): UrlPath<String>) -> ApiResult {
    let record = core(&h, {
        let id = id.clone();
        move |o| o.service(&id).cloned()
    })
    .await?;
    match record {
        Some(r) => ok(r),
        None => Err(ApiError::new(
            StatusCode::NOT_FOUND,
            "NoService",
            format!("no service installed for {id}"),
        )),
    }
}

async fn explain(State(h): State<CoreHandle>, Json(request): Json<Value>) -> ApiResult {
    ok(core(&h, move |o| o.explain(&request)).await??)
}

async fn get_topology(State(h): State<CoreHandle>) -> ApiResult {
    ok(core(&h, |o| topology_snapshot(o)).await?)
}

fn topology_snapshot(o: &Orchestrator) -> Value {
    let mut doc = serde_json::to_value(o.topology().to_document()).expect("topology serializes");
    doc["revision"] = json!(o.topology().revision());
    doc
}

async fn post_event(State(h): State<CoreHandle>, Json(event): Json<TopologyEvent>) -> ApiResult {
    let results = core(&h, move |o| {
        let affected = o.handle_event(event)?;
        let results: Vec<Value> = affected
            .iter()
            .map(|id| json!({"intentId": id, "state": o.intent(id).map(|i| i.state)}))
            .collect();
        Ok::<_, OrchestratorError>(json!({"revision": o.topology().revision(), "results": results}))
    })
    .await??;
    ok(results)
}

async fn get_device(State(h): State<CoreHandle>, UrlPath(id): UrlPath<String>) -> ApiResult {
    ok(core(&h, move |o| o.device(&id)).await??)
}

#[derive(Debug, Deserialize)]
struct TraceQuery {
    src: String,
    dst: String,
}

async fn get_trace(State(h): State<CoreHandle>, Query(q): Query<TraceQuery>) -> ApiResult {
    ok(core(&h, move |o| o.trace(&q.src, &q.dst)).await??)
}

pub fn router(handle: CoreHandle) -> Router {
    Router::new()
        .route("/intents", post(submit_intent).get(list_intents))
        .route("/intents/{id}", get(get_intent).delete(withdraw_intent))
        .route("/services/{id}", get(get_service))
        .route("/explain", post(explain))
        .route("/topology", get(get_topology))
        .route("/topology/events", post(post_event))
        .route("/devices/{id}", get(get_device))
        .route("/trace", get(get_trace))
        .with_state(handle)
}

/// Serves the API on `listener` until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    handle: CoreHandle,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(handle))
        .with_graceful_shutdown(shutdown)
        .await
}

/// A server running on its own runtime thread, for embedding and tests.
pub struct RunningServer {
    pub addr: std::net::SocketAddr,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl RunningServer {
    /// Starts the core and serves on `addr` (port 0 picks a free port).
    pub fn start(config: &ServiceConfig, addr: std::net::SocketAddr) -> Result<Self, StartupError> {
        let (handle, core_thread) = start_core(config, None)?;
        let std_listener = std::net::TcpListener::bind(addr).map_err(|e| StartupError::Config(format!("bind {addr}: {e}")))?;
        std_listener
            .set_nonblocking(true)
            .map_err(|e| StartupError::Config(e.to_string()))?;
        let addr = std_listener.local_addr().map_err(|e| StartupError::Config(e.to_string()))?;
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            let runtime = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()
                .expect("tokio runtime");
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(std_listener).expect("listener");
                let _ = serve(listener, handle, async {
                    let _ = rx.await;
                })
                .await;
            });
            drop(runtime);
            core_thread.join();
        });
        Ok(Self {
            addr,
            shutdown: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Stops serving and waits until the core thread has exited.
    pub fn stop(mut self) {
        self.shutdown_and_join();
    }

    fn shutdown_and_join(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for RunningServer {
    fn drop(&mut self) {
        self.shutdown_and_join();
    }
}
