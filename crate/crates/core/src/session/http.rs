//! JSON-over-HTTP front end for [`ExperimentService`].
//!
//! | method | path | body | reply |
//! |---|---|---|---|
//! | GET | `/api/sessions` | | `[Session]` |
//! | GET | `/api/questions` | | question bank |
//! | POST | `/api/register` | `{"slot": 0}` | `{"subject_id", "session"}` |
//! | POST | `/api/subjects/{id}/start` | | `SubjectView` |
//! | GET | `/api/subjects/{id}` | | `SubjectView` |
//! | POST | `/api/subjects/{id}/send` | `{"amount", "expected_seq"?}` | `SubjectView` |
//! | POST | `/api/subjects/{id}/return` | `{"amount", "expected_seq"?}` | `SubjectView` |
//! | POST | `/api/subjects/{id}/answer` | `{"type", ..., "expected_seq"?}` | `SubjectView` |
//! | POST | `/api/subjects/{id}/debrief` | `{"suspected_bot", "expected_seq"?}` | `SubjectView` |
//! | POST | `/api/admin/sessions/{slot}/open` | | `Session` |
//! | POST | `/api/admin/sessions/{slot}/close` | | `Session` |
//! | POST | `/api/admin/export` | | summary plus the three CSV documents |
//! | POST | `/api/admin/lottery` | | `LotteryDraw` |
//! | GET, PUT | `/api/admin/strategy-table` | TOML text | TOML text / `{"version"}` |
//!
//! Errors come back as `{"error": message, "code": kind}`.

use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use super::flow::{FlowError, Submission};
use super::service::{summary, ExperimentService, ExportSummary, ServiceError, Session, SubjectView};
use crate::questionnaire::QuestionBank;

pub struct AppState {
    service: Mutex<ExperimentService>,
    export_dir: Option<PathBuf>,
}

impl AppState {
    pub fn new(service: ExperimentService, export_dir: Option<PathBuf>) -> Arc<AppState> {
        Arc::new(AppState { service: Mutex::new(service), export_dir })
    }

    /// The single writer every request goes through.
    pub fn lock(&self) -> MutexGuard<'_, ExperimentService> {
        self.service.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
    }
}

type Shared = Arc<AppState>;

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub code: String,
}

pub struct ApiError(ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError(e)
    }
}

impl ApiError {
    fn status_and_code(&self) -> (StatusCode, &'static str) {
        use ServiceError as S;
        match &self.0 {
            S::UnknownSubject(_) | S::UnknownSession(_) => (StatusCode::NOT_FOUND, "not_found"),
            S::StaleSequence { .. } => (StatusCode::CONFLICT, "stale_sequence"),
            S::DoubleAssignment(_) => (StatusCode::CONFLICT, "double_assignment"),
            S::SessionState { .. } => (StatusCode::CONFLICT, "session_state"),
            S::Lottery(_) => (StatusCode::CONFLICT, "no_eligible_subjects"),
            S::Flow(
                FlowError::WrongStage { .. }
                | FlowError::NotYourMove(_)
                | FlowError::StageOrder { .. }
                | FlowError::NotAssigned
                | FlowError::AlreadyAssigned,
            ) => (StatusCode::CONFLICT, "out_of_order"),
            S::Flow(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_input"),
            S::Strategy(_) | S::InvalidConfig(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_input"),
            S::Export(_) | S::Io(_) | S::Replay { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, code) = self.status_and_code();
        (status, Json(ErrorBody { error: self.0.to_string(), code: code.to_string() })).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Debug, Serialize, Deserialize)]
pub struct RegisterRequest {
    pub slot: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RegisterReply {
    pub subject_id: String,
    pub session: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AmountRequest {
    pub amount: f64,
    #[serde(default)]
    pub expected_seq: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AnswerRequest {
    #[serde(flatten)]
    pub submission: Submission,
    #[serde(default)]
    pub expected_seq: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DebriefRequest {
    pub suspected_bot: bool,
    #[serde(default)]
    pub expected_seq: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ExportReply {
    #[serde(flatten)]
    pub summary: ExportSummary,
    pub trust_long: String,
    pub discount_long: String,
    pub certainty_long: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub written_to: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct VersionReply {
    pub version: String,
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/api/sessions", get(list_sessions))
        .route("/api/questions", get(questions))
        .route("/api/register", post(register))
        .route("/api/subjects/{id}", get(snapshot))
        .route("/api/subjects/{id}/start", post(start))
        .route("/api/subjects/{id}/send", post(send))
        .route("/api/subjects/{id}/return", post(give_back))
        .route("/api/subjects/{id}/answer", post(answer))
        .route("/api/subjects/{id}/debrief", post(debrief))
        .route("/api/admin/sessions/{slot}/open", post(open_session))
        .route("/api/admin/sessions/{slot}/close", post(close_session))
        .route("/api/admin/export", post(export))
        .route("/api/admin/lottery", post(lottery))
        .route("/api/admin/strategy-table", get(get_strategy).put(put_strategy))
        .with_state(state)
}

async fn list_sessions(State(s): State<Shared>) -> Json<Vec<Session>> {
    Json(s.lock().sessions().to_vec())
}

async fn questions(State(s): State<Shared>) -> Json<QuestionBank> {
    Json(s.lock().bank().clone())
}

async fn register(State(s): State<Shared>, Json(req): Json<RegisterRequest>) -> ApiResult<RegisterReply> {
    let id = s.lock().register(req.slot)?;
    Ok(Json(RegisterReply { subject_id: id, session: req.slot }))
}

async fn snapshot(State(s): State<Shared>, Path(id): Path<String>) -> ApiResult<SubjectView> {
    Ok(Json(s.lock().view(&id)?))
}

async fn start(State(s): State<Shared>, Path(id): Path<String>) -> ApiResult<SubjectView> {
    Ok(Json(s.lock().start(&id)?))
}

async fn send(State(s): State<Shared>, Path(id): Path<String>, Json(r): Json<AmountRequest>) -> ApiResult<SubjectView> {
    Ok(Json(s.lock().submit(&id, &Submission::Send { amount: r.amount }, r.expected_seq)?))
}

async fn give_back(
    State(s): State<Shared>,
    Path(id): Path<String>,
    Json(r): Json<AmountRequest>,
) -> ApiResult<SubjectView> {
    Ok(Json(s.lock().submit(&id, &Submission::Return { amount: r.amount }, r.expected_seq)?))
}

async fn answer(State(s): State<Shared>, Path(id): Path<String>, Json(r): Json<AnswerRequest>) -> ApiResult<SubjectView> {
    Ok(Json(s.lock().submit(&id, &r.submission, r.expected_seq)?))
}

async fn debrief(
    State(s): State<Shared>,
    Path(id): Path<String>,
    Json(r): Json<DebriefRequest>,
) -> ApiResult<SubjectView> {
    let sub = Submission::Debrief { suspected_bot: r.suspected_bot };
    Ok(Json(s.lock().submit(&id, &sub, r.expected_seq)?))
}

async fn open_session(State(s): State<Shared>, Path(slot): Path<usize>) -> ApiResult<Session> {
    let mut svc = s.lock();
    svc.open_session(slot)?;
    Ok(Json(svc.sessions()[slot].clone()))
}

async fn close_session(State(s): State<Shared>, Path(slot): Path<usize>) -> ApiResult<Session> {
    let mut svc = s.lock();
    svc.close_session(slot)?;
    Ok(Json(svc.sessions()[slot].clone()))
}

async fn export(State(s): State<Shared>) -> ApiResult<ExportReply> {
    let tables = s.lock().export()?;
    let written_to = match &s.export_dir {
        Some(dir) => {
            tables.write_to(dir).map_err(ServiceError::from)?;
            Some(dir.display().to_string())
        }
        None => None,
    };
    Ok(Json(ExportReply {
        summary: summary(&tables),
        trust_long: tables.trust_long,
        discount_long: tables.discount_long,
        certainty_long: tables.certainty_long,
        written_to,
    }))
}

async fn lottery(State(s): State<Shared>) -> ApiResult<super::lottery::LotteryDraw> {
    Ok(Json(s.lock().draw_lottery()?))
}

async fn get_strategy(State(s): State<Shared>) -> impl IntoResponse {
    let text = s.lock().strategy().to_toml_string();
    ([(header::CONTENT_TYPE, "application/toml")], text)
}

async fn put_strategy(State(s): State<Shared>, body: String) -> ApiResult<VersionReply> {
    let version = s.lock().upload_strategy_table(&body)?;
    Ok(Json(VersionReply { version }))
}

/// Serves until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, state: Shared) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}
