//! HTTP/JSON front end for training models and running live interviews.
//!
//! Models are persisted as canonical model JSON under a data directory and
//! reloaded at startup; sessions live in memory. See `docs/api.md` for the
//! endpoint reference.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use fpqm_core::dataset::{encode_with_schema, load_csv, parse_csv, preprocess, PreprocessSpec, RawTable, DEFAULT_BINS};
use fpqm_core::metrics::evaluate;
use fpqm_core::session::run_batch;
use fpqm_core::{
    Dataset, DatasetError, EvaluationReport, FpqmModel, ModelError, Session, SessionError, StepOutcome, Verification,
};
use serde::{Deserialize, Serialize};

pub mod wire;

use wire::*;

pub const DEFAULT_LISTEN: &str = "127.0.0.1:8760";
pub const DATA_DIR_ENV: &str = "FPQM_DATA_DIR";

/// `$FPQM_DATA_DIR`, else `./fpqm-data`.
pub fn default_data_dir() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("fpqm-data"))
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, error: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                error: error.into(),
                attribute: None,
                label: None,
            },
        }
    }

    fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("unknown {what} {id:?}"))
    }

    fn unprocessable(error: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, error)
    }

    fn out_of_domain(attribute: &str, label: &str) -> Self {
        let mut e = Self::unprocessable(format!("{label:?} is not a value of {attribute}"));
        e.body.attribute = Some(attribute.to_string());
        e.body.label = Some(label.to_string());
        e
    }

    fn internal(error: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, error.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        Self::new(r.status(), r.body_text())
    }
}

impl From<DatasetError> for ApiError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Io { .. } => Self::new(StatusCode::BAD_REQUEST, e.to_string()),
            other => Self::unprocessable(other.to_string()),
        }
    }
}

impl From<ModelError> for ApiError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Io(_) => Self::internal(e),
            other => Self::unprocessable(other.to_string()),
        }
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug)]
pub struct StoredModel {
    pub id: String,
    pub name: String,
    pub created_at: u64,
    pub model: Arc<FpqmModel>,
}

impl StoredModel {
    fn summary(&self) -> ModelSummary {
        ModelSummary::new(&self.id, &self.name, self.created_at, &self.model)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelMeta {
    name: String,
    created_at: u64,
}

struct LiveSession {
    model_id: String,
    session: Session,
    history: Vec<StepView>,
}

impl LiveSession {
    fn status(&self) -> SessionStatus {
        if self.session.is_finished() {
            SessionStatus::Finished
        } else {
            SessionStatus::AwaitingAnswer
        }
    }

    fn view(&self, id: &str) -> SessionView {
        let schema = self.session.model().schema();
        SessionView {
            session_id: id.to_string(),
            model_id: self.model_id.clone(),
            sigma: self.session.sigma(),
            status: self.status(),
            n_attributes: schema.len(),
            resolved: self.session.visit_order().len(),
            pending: self
                .session
                .pending()
                .map(|attribute| StepView::new(&StepOutcome::Ask { attribute }, schema)),
            history: self.history.clone(),
            corrections: self.session.corrections().to_vec(),
        }
    }
}

/// Shared state: an append-only model store and the live sessions.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    data_dir: Option<PathBuf>,
    models: RwLock<HashMap<String, Arc<StoredModel>>>,
    sessions: RwLock<HashMap<String, Arc<Mutex<LiveSession>>>>,
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl AppState {
    /// Nothing is written to disk.
    pub fn in_memory() -> Self {
        Self::with_dir(None)
    }

    /// Persists models under `data_dir/models` and loads the ones already
    /// there.
    pub fn open(data_dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let data_dir = data_dir.into();
        let models_dir = data_dir.join("models");
        std::fs::create_dir_all(&models_dir)?;
        let state = Self::with_dir(Some(data_dir));
        let mut models = state.inner.models.write().expect("fresh lock");
        for entry in std::fs::read_dir(&models_dir)? {
            let path = entry?.path();
            let Some(id) = path
                .file_name()
                .and_then(|f| f.to_str())
                .and_then(|f| f.strip_suffix(".json"))
                .filter(|id| !id.ends_with(".meta"))
            else {
                continue;
            };
            let model = FpqmModel::load(&path).map_err(|e| std::io::Error::other(format!("{}: {e}", path.display())))?;
            let meta = std::fs::read_to_string(models_dir.join(format!("{id}.meta.json")))
                .ok()
                .and_then(|text| serde_json::from_str::<ModelMeta>(&text).ok())
                .unwrap_or(ModelMeta {
                    name: id.to_string(),
                    created_at: 0,
                });
            models.insert(
                id.to_string(),
                Arc::new(StoredModel {
                    id: id.to_string(),
                    name: meta.name,
                    created_at: meta.created_at,
                    model: Arc::new(model),
                }),
            );
        }
        drop(models);
        Ok(state)
    }

    fn with_dir(data_dir: Option<PathBuf>) -> Self {
        Self {
            inner: Arc::new(Inner {
                data_dir,
                models: RwLock::new(HashMap::new()),
                sessions: RwLock::new(HashMap::new()),
            }),
        }
    }

    pub fn model(&self, id: &str) -> Option<Arc<StoredModel>> {
        self.inner.models.read().expect("model store lock").get(id).cloned()
    }

    /// Stores a model under a fresh id, writing it to disk first when the
    /// state is persistent.
    pub fn insert_model(&self, name: Option<String>, model: FpqmModel) -> Result<Arc<StoredModel>, ModelError> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let stored = Arc::new(StoredModel {
            name: name.unwrap_or_else(|| id.clone()),
            id: id.clone(),
            created_at: now(),
            model: Arc::new(model),
        });
        if let Some(dir) = &self.inner.data_dir {
            let models_dir = dir.join("models");
            std::fs::create_dir_all(&models_dir)?;
            let meta = ModelMeta {
                name: stored.name.clone(),
                created_at: stored.created_at,
            };
            std::fs::write(
                models_dir.join(format!("{id}.meta.json")),
                serde_json::to_string_pretty(&meta).expect("plain data"),
            )?;
            let tmp = models_dir.join(format!(".{id}.json.tmp"));
            stored.model.save(&tmp)?;
            std::fs::rename(&tmp, models_dir.join(format!("{id}.json")))?;
        }
        self.inner
            .models
            .write()
            .expect("model store lock")
            .insert(id, Arc::clone(&stored));
        Ok(stored)
    }

    fn session(&self, id: &str) -> ApiResult<Arc<Mutex<LiveSession>>> {
        self.inner
            .sessions
            .read()
            .expect("session table lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("session", id))
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/models", post(create_model).get(list_models))
        .route("/api/models/{id}", get(get_model))
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}", get(get_session))
        .route("/api/sessions/{id}/answers", post(answer))
        .route("/api/sessions/{id}/verify", post(verify))
        .route("/api/sessions/{id}/report", get(report))
        .route("/api/evaluate", post(evaluate_model))
        .with_state(state)
}

/// Serves until Ctrl-C.
pub async fn serve(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

fn read_source(source: &DatasetSource) -> ApiResult<RawTable> {
    match (&source.csv, &source.dataset_path) {
        (Some(text), None) => Ok(parse_csv(text.as_bytes(), source.has_header)?),
        (None, Some(path)) => Ok(load_csv(path, source.has_header)?),
        _ => Err(ApiError::unprocessable("give exactly one of `csv` or `dataset_path`")),
    }
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(ApiError::internal)?
}

async fn create_model(
    State(state): State<AppState>,
    body: Result<Json<CreateModel>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<ModelSummary>)> {
    let Json(req) = body?;
    let stored = blocking(move || {
        let raw = read_source(&req.source)?;
        let spec = req
            .preprocess
            .clone()
            .unwrap_or_else(|| PreprocessSpec::all_nominal(&raw.headers));
        let dataset = preprocess(&raw, &spec, req.bins.unwrap_or(DEFAULT_BINS))?;
        let model = FpqmModel::build(&dataset, req.config)?;
        Ok(state.insert_model(req.name, model)?)
    })
    .await?;
    Ok((StatusCode::CREATED, Json(stored.summary())))
}

async fn list_models(State(state): State<AppState>) -> Json<Vec<ModelSummary>> {
    let models = state.inner.models.read().expect("model store lock");
    let mut out: Vec<ModelSummary> = models.values().map(|m| m.summary()).collect();
    out.sort_by(|a, b| a.created_at.cmp(&b.created_at).then_with(|| a.id.cmp(&b.id)));
    Json(out)
}

async fn get_model(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<ModelSummary>> {
    let stored = state.model(&id).ok_or_else(|| ApiError::not_found("model", &id))?;
    Ok(Json(stored.summary()))
}

fn session_error(e: SessionError, model: &FpqmModel) -> ApiError {
    let schema = model.schema();
    match e {
        SessionError::Finished | SessionError::NotPending { .. } | SessionError::NotPredicted(_) => {
            let message = match e {
                SessionError::NotPending { expected, got } => format!(
                    "waiting for an answer to {}, not {}",
                    schema[expected].name,
                    schema.get(got).map_or("an unknown attribute", |a| a.name.as_str())
                ),
                SessionError::NotPredicted(a) => format!("{} was asked, not predicted", schema[a].name),
                other => other.to_string(),
            };
            ApiError::new(StatusCode::CONFLICT, message)
        }
        SessionError::OutOfDomain { attribute, value } => {
            ApiError::out_of_domain(&schema[attribute].name, &value.to_string())
        }
        other => ApiError::unprocessable(other.to_string()),
    }
}

fn resolve_attribute(model: &FpqmModel, attribute: &AttributeRef) -> ApiResult<usize> {
    let found = match attribute {
        AttributeRef::Index(i) => (*i < model.n_attributes()).then_some(*i),
        AttributeRef::Name(name) => model.schema().iter().position(|a| &a.name == name),
    };
    found.ok_or_else(|| {
        let shown = match attribute {
            AttributeRef::Index(i) => i.to_string(),
            AttributeRef::Name(n) => n.clone(),
        };
        ApiError::unprocessable(format!("unknown attribute {shown:?}"))
    })
}

fn resolve_value(model: &FpqmModel, attribute: usize, value: &ValueRef) -> ApiResult<usize> {
    let schema = &model.schema()[attribute];
    match value {
        ValueRef::Index(v) if *v < schema.size() => Ok(*v),
        ValueRef::Index(v) => Err(ApiError::out_of_domain(&schema.name, &v.to_string())),
        ValueRef::Label(label) => schema
            .value_of(label)
            .ok_or_else(|| ApiError::out_of_domain(&schema.name, label)),
    }
}

async fn create_session(
    State(state): State<AppState>,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<SessionCreated>)> {
    let Json(req) = body?;
    let stored = state
        .model(&req.model_id)
        .ok_or_else(|| ApiError::not_found("model", &req.model_id))?;
    let (session, first) =
        Session::start(Arc::clone(&stored.model), req.sigma).map_err(|e| session_error(e, &stored.model))?;
    let step = StepView::new(&first, stored.model.schema());
    let id = uuid::Uuid::new_v4().simple().to_string();
    let live = LiveSession {
        model_id: stored.id.clone(),
        session,
        history: vec![step.clone()],
    };
    state
        .inner
        .sessions
        .write()
        .expect("session table lock")
        .insert(id.clone(), Arc::new(Mutex::new(live)));
    Ok((
        StatusCode::CREATED,
        Json(SessionCreated {
            session_id: id,
            status: SessionStatus::AwaitingAnswer,
            step,
        }),
    ))
}

async fn get_session(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<SessionView>> {
    let live = state.session(&id)?;
    let live = live.lock().expect("session lock");
    Ok(Json(live.view(&id)))
}

async fn answer(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<Answer>, JsonRejection>,
) -> ApiResult<Json<AnswerResponse>> {
    let live = state.session(&id)?;
    let Json(req) = body?;
    let mut live = live.lock().expect("session lock");
    let model = Arc::clone(live.session.model());
    if live.session.is_finished() {
        return Err(session_error(SessionError::Finished, &model));
    }
    let attribute = resolve_attribute(&model, &req.attribute)?;
    let value = resolve_value(&model, attribute, &req.value)?;
    let steps = live
        .session
        .submit_answer(attribute, value)
        .map_err(|e| session_error(e, &model))?;
    let steps: Vec<StepView> = steps.iter().map(|s| StepView::new(s, model.schema())).collect();
    live.history.extend(steps.iter().cloned());
    Ok(Json(AnswerResponse {
        status: live.status(),
        steps,
    }))
}

async fn verify(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<Verify>, JsonRejection>,
) -> ApiResult<Json<SessionView>> {
    let live = state.session(&id)?;
    let Json(req) = body?;
    let mut live = live.lock().expect("session lock");
    let model = Arc::clone(live.session.model());
    let attribute = resolve_attribute(&model, &req.attribute)?;
    let outcome = match (req.confirmed, &req.corrected_value) {
        (Some(true), None) => Verification::Confirmed,
        (None | Some(false), Some(value)) => Verification::Corrected(resolve_value(&model, attribute, value)?),
        _ => {
            return Err(ApiError::unprocessable(
                "give either `confirmed: true` or a `corrected_value`",
            ))
        }
    };
    live.session
        .record_verification(attribute, outcome)
        .map_err(|e| session_error(e, &model))?;
    Ok(Json(live.view(&id)))
}

async fn report(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Report>> {
    let live = state.session(&id)?;
    let live = live.lock().expect("session lock");
    let result = live.session.result().ok_or_else(|| {
        ApiError::new(StatusCode::CONFLICT, "the interview is not finished yet")
    })?;
    let schema = live.session.model().schema();
    let final_labels = result
        .final_values
        .iter()
        .zip(schema)
        .map(|(&v, a)| a.domain[v].clone())
        .collect();
    Ok(Json(Report {
        session_id: id,
        result,
        final_labels,
    }))
}

/// Encodes a test table against the model's frozen labels.
pub fn encode_for_model(raw: &RawTable, model: &FpqmModel) -> Result<Dataset, DatasetError> {
    encode_with_schema(raw, model.schema())
}

/// Runs every row as a batch interview and scores the result.
pub fn evaluate_dataset(model: &FpqmModel, test: &Dataset, sigma: f64, beta: f64) -> ApiResult<EvaluationReport> {
    let results = test
        .rows()
        .map(|row| run_batch(model, row, sigma))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| session_error(e, model))?;
    evaluate(&results, test, beta).map_err(|e| ApiError::unprocessable(e.to_string()))
}

async fn evaluate_model(
    State(state): State<AppState>,
    body: Result<Json<EvaluateRequest>, JsonRejection>,
) -> ApiResult<Json<EvaluationReport>> {
    let Json(req) = body?;
    let stored = state
        .model(&req.model_id)
        .ok_or_else(|| ApiError::not_found("model", &req.model_id))?;
    let report = blocking(move || {
        let raw = read_source(&req.source)?;
        let test = encode_for_model(&raw, &stored.model)?;
        evaluate_dataset(&stored.model, &test, req.sigma, req.beta)
    })
    .await?;
    Ok(Json(report))
}

/// Path of a persisted model inside a data directory.
pub fn model_path(data_dir: &Path, id: &str) -> PathBuf {
    data_dir.join("models").join(format!("{id}.json"))
}
