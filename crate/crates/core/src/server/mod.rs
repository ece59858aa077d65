//! HTTP surface: sessions, uploads, streamed turns, intervention, reports
//! and knowledge entries.

mod error;

use std::collections::HashMap;
use std::convert::Infallible;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Multipart, Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use parking_lot::Mutex;
use serde::Deserialize;
use serde_json::json;
use tokio::sync::mpsc;
use tokio_stream::wrappers::UnboundedReceiverStream;
use tokio_stream::StreamExt;

pub use error::ApiError;

use crate::agents::PromptSet;
use crate::config::ApiConfig;
use crate::error::{Error, Result};
use crate::kernel::{Kernel, KernelManager};
use crate::knowledge::{Embedder, KnowledgeBase};
use crate::llm::{ModelBackend, OpenAiClient};
use crate::orchestrator::{KnowledgeHook, Orchestrator, TurnEvent, TurnEventKind, TurnStatus};
use crate::profiler::{profile, Table};
use crate::report::{generate_report, ReportTemplate};
use crate::store::{FsSessionStore, SessionEvent, SessionStore};

type ApiResult<T> = std::result::Result<T, ApiError>;

pub struct AppState {
    pub config: ApiConfig,
    pub store: Arc<dyn SessionStore>,
    pub kernels: KernelManager,
    pub orchestrator: Arc<Orchestrator>,
    pub knowledge: Arc<KnowledgeBase>,
    pub embedder: Arc<dyn Embedder>,
    pub report_templates: Vec<ReportTemplate>,
    in_flight: Mutex<HashMap<String, Arc<AtomicBool>>>,
}

/// Held while a session is busy; clears the flag when dropped.
struct BusyGuard(Arc<AtomicBool>);

impl Drop for BusyGuard {
    fn drop(&mut self) {
        self.0.store(false, Ordering::Release);
    }
}

impl AppState {
    pub fn new(
        config: ApiConfig,
        programmer: Arc<dyn ModelBackend>,
        inspector: Arc<dyn ModelBackend>,
        embedder: Arc<dyn Embedder>,
    ) -> Result<Self> {
        config.validate()?;
        config.prepare_dirs()?;
        let store: Arc<dyn SessionStore> = Arc::new(FsSessionStore::open(&config.storage_root)?);
        let knowledge = Arc::new(KnowledgeBase::open_dir(&config.knowledge_dir)?);
        let prompts = match &config.templates_dir {
            Some(dir) => PromptSet::load_dir(dir)?,
            None => PromptSet::default(),
        };
        let report_dir = config.templates_dir.as_ref().map(|d| d.join("reports"));
        let report_templates = ReportTemplate::load_all(report_dir.as_deref())?;
        let orchestrator = Arc::new(Orchestrator {
            programmer,
            inspector,
            prompts: Arc::new(prompts),
            config: config.loop_config.clone(),
            knowledge: Some(KnowledgeHook { base: knowledge.clone(), embedder: embedder.clone(), threshold: config.theta }),
        });
        Ok(Self {
            kernels: KernelManager::new(config.kernel.clone()),
            config,
            store,
            orchestrator,
            knowledge,
            embedder,
            report_templates,
            in_flight: Mutex::new(HashMap::new()),
        })
    }

    /// Builds model clients from the configured endpoints.
    pub fn from_config(config: ApiConfig) -> Result<Self> {
        let programmer: Arc<dyn ModelBackend> = Arc::new(OpenAiClient::new(config.model.clone())?);
        let inspector: Arc<dyn ModelBackend> = match &config.inspector_model {
            Some(m) => Arc::new(OpenAiClient::new(m.clone())?),
            None => programmer.clone(),
        };
        let embedder = config.embedder.build();
        Self::new(config, programmer, inspector, embedder)
    }

    fn try_busy(&self, session_id: &str) -> ApiResult<BusyGuard> {
        let flag = self.in_flight.lock().entry(session_id.to_string()).or_default().clone();
        if flag.compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire).is_err() {
            return Err(ApiError::new(StatusCode::CONFLICT, "busy", "a turn is already in flight for this session"));
        }
        Ok(BusyGuard(flag))
    }

    /// The session's kernel, started on demand. A fresh kernel for a session
    /// that already ran turns means earlier state is gone, which is logged.
    fn kernel_for(&self, session_id: &str) -> Result<Arc<Kernel>> {
        if let Some(k) = self.kernels.get(session_id) {
            return Ok(k);
        }
        let record = self.store.load_session(session_id)?;
        let workspace = self.store.workspace_dir(session_id)?;
        let kernel = self.kernels.get_or_start(session_id, &workspace)?;
        if !record.turns.is_empty() && !record.state_reset_pending {
            self.store.append_event(
                session_id,
                SessionEvent::KernelReset { reason: "a new kernel was started; variables from earlier turns are gone".into() },
            )?;
        }
        Ok(kernel)
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    let body_limit = state.config.upload_limit.saturating_add(1 << 20);
    Router::new()
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/data", post(upload_data))
        .route("/sessions/{id}/messages", post(post_message))
        .route("/sessions/{id}/intervention", post(post_intervention))
        .route("/sessions/{id}/artifacts/{name}", get(get_artifact))
        .route("/sessions/{id}/report", post(post_report))
        .route("/report-templates", get(list_templates))
        .route("/knowledge", get(list_knowledge).post(add_knowledge))
        .route("/knowledge/match", post(match_knowledge))
        .route("/knowledge/{id}", put(update_knowledge).delete(delete_knowledge))
        .layer(DefaultBodyLimit::max(body_limit))
        .with_state(state)
}

/// Runs the service until interrupted.
pub async fn serve(config: ApiConfig) -> Result<()> {
    let bind = config.bind_address;
    let state = Arc::new(AppState::from_config(config)?);
    let listener = tokio::net::TcpListener::bind(bind).await?;
    tracing::info!(address = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state.clone()))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    tokio::task::spawn_blocking(move || state.kernels.shutdown_all()).await.ok();
    Ok(())
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal_error", e.to_string()))?
        .map_err(ApiError::from)
}

async fn create_session(State(st): State<Arc<AppState>>) -> ApiResult<(StatusCode, Json<serde_json::Value>)> {
    let id = blocking(move || st.store.create_session()).await?;
    Ok((StatusCode::CREATED, Json(json!({ "id": id }))))
}

async fn list_sessions(State(st): State<Arc<AppState>>) -> ApiResult<Response> {
    let list = blocking(move || st.store.list_sessions()).await?;
    Ok(Json(list).into_response())
}

async fn get_session(State(st): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    let record = blocking(move || st.store.load_session(&id)).await?;
    Ok(Json(record).into_response())
}

fn upload_name(raw: Option<&str>) -> String {
    raw.and_then(|n| Path::new(n).file_name())
        .and_then(|n| n.to_str())
        .filter(|n| !n.is_empty() && !n.starts_with('.'))
        .unwrap_or("data.csv")
        .to_string()
}

async fn upload_data(State(st): State<Arc<AppState>>, UrlPath(id): UrlPath<String>, mut form: Multipart) -> ApiResult<Response> {
    let limit = st.config.upload_limit;
    let mut upload: Option<(String, Bytes)> = None;
    loop {
        let field = match form.next_field().await {
            Ok(Some(f)) => f,
            Ok(None) => break,
            Err(e) => return Err(ApiError::new(e.status(), "ingest_error", e.body_text())),
        };
        if field.file_name().is_none() && field.name() != Some("file") {
            continue;
        }
        let name = upload_name(field.file_name());
        let bytes = field.bytes().await.map_err(|e| ApiError::new(e.status(), "ingest_error", e.body_text()))?;
        upload = Some((name, bytes));
        break;
    }
    let (name, bytes) = upload.ok_or_else(|| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "ingest_error", "no file field"))?;
    if bytes.len() > limit {
        return Err(ApiError::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            "too_large",
            format!("upload of {} bytes exceeds the {limit}-byte limit", bytes.len()),
        ));
    }
    let guard = st.try_busy(&id)?;
    let profile = blocking(move || {
        let _guard = guard;
        st.store.load_session(&id)?;
        let table = Table::from_bytes(&name, &bytes, None)?;
        let profile = profile(&table)?;
        st.store.save_artifact(&id, &name, &bytes)?;
        st.store.append_event(&id, SessionEvent::DatasetAttached { path: name, profile: Some(profile.clone()) })?;
        Ok(profile)
    })
    .await?;
    Ok(Json(profile).into_response())
}

#[derive(Deserialize)]
struct MessageBody {
    text: String,
}

#[derive(Deserialize)]
struct InterventionBody {
    code: String,
}

fn sse_event(e: &TurnEvent) -> Event {
    Event::default()
        .event(e.kind.as_str())
        .id(e.seq.to_string())
        .json_data(e)
        .unwrap_or_else(|_| Event::default().event("error").data("unserializable event"))
}

/// Runs `work` on a blocking thread and streams the events it emits. If it
/// fails without emitting a terminal event, one `error` event closes the
/// stream.
fn stream_turn<F>(guard: BusyGuard, work: F) -> Response
where
    F: FnOnce(&mut dyn FnMut(&TurnEvent)) -> Result<()> + Send + 'static,
{
    let (tx, rx) = mpsc::unbounded_channel::<TurnEvent>();
    tokio::task::spawn_blocking(move || {
        let _guard = guard;
        let mut next_seq = 0;
        let mut terminal = false;
        let result = {
            let mut sink = |e: &TurnEvent| {
                next_seq = e.seq + 1;
                terminal |= e.kind.is_terminal();
                let _ = tx.send(e.clone());
            };
            work(&mut sink)
        };
        if let Err(e) = result {
            if !terminal {
                let _ = tx.send(TurnEvent {
                    seq: next_seq,
                    kind: TurnEventKind::Error,
                    payload: json!({ "kind": ApiError::from(e).kind, "message": "turn failed before completion" }),
                });
            }
        }
    });
    let stream = UnboundedReceiverStream::new(rx).map(|e| Ok::<_, Infallible>(sse_event(&e)));
    Sse::new(stream).keep_alive(KeepAlive::default()).into_response()
}

async fn post_message(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Json(body): Json<MessageBody>,
) -> ApiResult<Response> {
    if body.text.trim().is_empty() {
        return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_request", "message text is empty"));
    }
    let guard = st.try_busy(&id)?;
    let (st2, id2) = (st.clone(), id.clone());
    let kernel = blocking(move || st2.kernel_for(&id2)).await?;
    Ok(stream_turn(guard, move |sink| {
        st.orchestrator.run_turn(st.store.as_ref(), &kernel, &id, &body.text, sink).map(drop)
    }))
}

async fn post_intervention(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Json(body): Json<InterventionBody>,
) -> ApiResult<Response> {
    if body.code.trim().is_empty() {
        return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_request", "code is empty"));
    }
    let guard = st.try_busy(&id)?;
    let (st2, id2) = (st.clone(), id.clone());
    let kernel = blocking(move || {
        let record = st2.store.load_session(&id2)?;
        let waiting = record.last_turn().and_then(|t| t.effective_status()) == Some(TurnStatus::NeedsIntervention);
        if !waiting {
            return Err(Error::Precondition("the last turn does not need intervention".into()));
        }
        st2.kernel_for(&id2)
    })
    .await?;
    Ok(stream_turn(guard, move |sink| {
        st.orchestrator.apply_human_intervention(st.store.as_ref(), &kernel, &id, &body.code, sink).map(drop)
    }))
}

fn content_type(name: &str) -> &'static str {
    match Path::new(name).extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("svg") => "image/svg+xml",
        Some("csv") => "text/csv; charset=utf-8",
        Some("md") => "text/markdown; charset=utf-8",
        Some("txt" | "log") => "text/plain; charset=utf-8",
        Some("json") => "application/json",
        Some("html") => "text/html; charset=utf-8",
        _ => "application/octet-stream",
    }
}

async fn get_artifact(State(st): State<Arc<AppState>>, UrlPath((id, name)): UrlPath<(String, String)>) -> ApiResult<Response> {
    let ct = content_type(&name);
    let bytes = blocking(move || st.store.read_artifact(&id, &name)).await?;
    Ok(([(header::CONTENT_TYPE, ct)], bytes).into_response())
}

#[derive(Deserialize, Default)]
struct ReportBody {
    #[serde(default)]
    template: Option<String>,
}

async fn post_report(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Option<Json<ReportBody>>,
) -> ApiResult<Response> {
    let body = body.map(|Json(b)| b).unwrap_or_default();
    let template = match body.template {
        None => st.report_templates[0].clone(),
        Some(name) => st
            .report_templates
            .iter()
            .find(|t| t.name == name)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("report template {name:?}")))?,
    };
    let guard = st.try_busy(&id)?;
    let doc = blocking(move || {
        let _guard = guard;
        let o = &st.orchestrator;
        generate_report(&o.prompts, st.store.as_ref(), &id, &template, o.programmer.as_ref())
    })
    .await?;
    Ok(Json(doc).into_response())
}

async fn list_templates(State(st): State<Arc<AppState>>) -> Json<Vec<ReportTemplate>> {
    Json(st.report_templates.clone())
}

#[derive(Deserialize)]
struct KnowledgeBody {
    description: String,
    code: String,
}

#[derive(Deserialize)]
struct MatchBody {
    instruction: String,
    #[serde(default)]
    threshold: Option<f64>,
}

async fn list_knowledge(State(st): State<Arc<AppState>>) -> Response {
    Json(st.knowledge.list_entries()).into_response()
}

async fn add_knowledge(State(st): State<Arc<AppState>>, Json(body): Json<KnowledgeBody>) -> ApiResult<Response> {
    let entry = blocking(move || {
        let id = st.knowledge.add_entry(&body.description, &body.code)?;
        st.knowledge.get(&id).ok_or_else(|| Error::NotFound(id))
    })
    .await?;
    Ok((StatusCode::CREATED, Json(entry)).into_response())
}

async fn update_knowledge(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Json(body): Json<KnowledgeBody>,
) -> ApiResult<Response> {
    let entry = blocking(move || {
        st.knowledge.update_entry(&id, &body.description, &body.code)?;
        st.knowledge.get(&id).ok_or_else(|| Error::NotFound(id))
    })
    .await?;
    Ok(Json(entry).into_response())
}

async fn delete_knowledge(State(st): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<StatusCode> {
    blocking(move || st.knowledge.remove_entry(&id)).await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn match_knowledge(State(st): State<Arc<AppState>>, Json(body): Json<MatchBody>) -> ApiResult<Response> {
    let result = blocking(move || {
        let theta = body.threshold.unwrap_or(st.config.theta);
        st.knowledge.match_instruction(&body.instruction, theta, st.embedder.as_ref())
    })
    .await?;
    Ok(Json(result).into_response())
}
