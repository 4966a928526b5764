//! JSON API and server-sent event stream.

use std::convert::Infallible;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream, StreamExt};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::broadcast::error::RecvError;

use cpg_core::analytics::survey::write_metrics;
use cpg_core::{Message, ModalChoice};

use crate::gateway::GatewayError;
use crate::session::{
    aggregate_metrics, metrics_records, Condition, MetricsFilter, ServiceError, SessionService,
    SessionStatus, SessionView,
};

pub fn router(service: Arc<SessionService>) -> Router {
    Router::new()
        .route("/tasks", get(list_tasks))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/messages", post(post_message))
        .route("/sessions/{id}/modal", post(post_modal))
        .route("/sessions/{id}/end", post(post_end))
        .route("/sessions/{id}/metrics", get(get_metrics))
        .route("/sessions/{id}/events", get(get_events))
        .route("/metrics", get(get_aggregate))
        .route("/metrics.csv", get(get_metrics_csv))
        .with_state(service)
}

pub struct ApiError(ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        Self(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, code) = match &self.0 {
            ServiceError::UnknownTask(_) => (StatusCode::NOT_FOUND, "unknown-task"),
            ServiceError::UnknownSession(_) => (StatusCode::NOT_FOUND, "unknown-session"),
            ServiceError::SessionNotActive(_) => (StatusCode::CONFLICT, "session-not-active"),
            ServiceError::ModalPending(_) => (StatusCode::CONFLICT, "modal-pending"),
            ServiceError::Modal(_) => (StatusCode::CONFLICT, "choice-without-prompt"),
            ServiceError::EmptyMessage => (StatusCode::BAD_REQUEST, "empty-message"),
            ServiceError::Backend(GatewayError::Timeout { .. }) => {
                (StatusCode::GATEWAY_TIMEOUT, "backend-timeout")
            }
            ServiceError::Backend(_) => (StatusCode::BAD_GATEWAY, "backend-error"),
            ServiceError::Store(_) | ServiceError::Fold(_) => {
                (StatusCode::INTERNAL_SERVER_ERROR, "storage-error")
            }
        };
        if status.is_server_error() {
            tracing::error!(error = %self.0, "request failed");
        }
        // Never reveal the modal phase.
        let message = match &self.0 {
            ServiceError::Modal(_) => "no completion prompt is pending".to_string(),
            other => other.to_string(),
        };
        let body = json!({ "error": code, "message": message });
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct TaskSummary {
    id: String,
    goal: String,
    description: String,
    subtask_count: u32,
}

async fn list_tasks(State(svc): State<Arc<SessionService>>) -> Json<Vec<TaskSummary>> {
    Json(
        svc.tasks()
            .map(|t| TaskSummary {
                id: t.id.clone(),
                goal: t.goal.clone(),
                description: t.description.clone(),
                subtask_count: t.step_count(),
            })
            .collect(),
    )
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct CreateSession {
    task_id: String,
    condition: Condition,
}

async fn create_session(
    State(svc): State<Arc<SessionService>>,
    Json(req): Json<CreateSession>,
) -> ApiResult<(StatusCode, Json<SessionView>)> {
    let view = svc.create_session(&req.task_id, req.condition).await?;
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_session(
    State(svc): State<Arc<SessionService>>,
    Path(id): Path<String>,
) -> ApiResult<Json<SessionView>> {
    Ok(Json(svc.view(&id).await?))
}

#[derive(Deserialize)]
struct PostMessage {
    text: String,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct TurnResponse {
    reply: Message,
    events: Vec<Value>,
    session: SessionView,
}

async fn post_message(
    State(svc): State<Arc<SessionService>>,
    Path(id): Path<String>,
    Json(req): Json<PostMessage>,
) -> ApiResult<Json<TurnResponse>> {
    let outcome = svc.submit_turn(&id, &req.text).await?;
    let session = svc.view(&id).await?;
    let events = outcome
        .events
        .iter()
        .filter_map(|e| e.external(session.condition))
        .collect();
    Ok(Json(TurnResponse {
        reply: outcome.reply,
        events,
        session,
    }))
}

#[derive(Deserialize)]
struct PostModal {
    choice: ModalChoice,
}

async fn post_modal(
    State(svc): State<Arc<SessionService>>,
    Path(id): Path<String>,
    Json(req): Json<PostModal>,
) -> ApiResult<Json<SessionView>> {
    svc.respond_modal(&id, req.choice).await?;
    Ok(Json(svc.view(&id).await?))
}

#[derive(Deserialize, Default)]
struct PostEnd {
    #[serde(default)]
    status: Option<SessionStatus>,
    #[serde(default)]
    reason: Option<String>,
}

async fn post_end(
    State(svc): State<Arc<SessionService>>,
    Path(id): Path<String>,
    body: Option<Json<PostEnd>>,
) -> ApiResult<Json<SessionView>> {
    let req = body.map(|Json(b)| b).unwrap_or_default();
    let status = req.status.unwrap_or(SessionStatus::Completed);
    let reason = req.reason.as_deref().unwrap_or("ended-by-client");
    svc.end_session(&id, status, reason).await?;
    Ok(Json(svc.view(&id).await?))
}

async fn get_metrics(
    State(svc): State<Arc<SessionService>>,
    Path(id): Path<String>,
) -> ApiResult<Json<Value>> {
    let metrics = svc.metrics(&id).await?;
    Ok(Json(serde_json::to_value(metrics).expect("metrics serialize")))
}

#[derive(Deserialize, Default)]
#[serde(rename_all = "camelCase")]
struct AggregateQuery {
    condition: Option<Condition>,
    #[serde(default)]
    completed_only: bool,
}

async fn get_aggregate(
    State(svc): State<Arc<SessionService>>,
    Query(q): Query<AggregateQuery>,
) -> ApiResult<Json<Value>> {
    let all = svc.all_metrics().await?;
    let filter = MetricsFilter {
        condition: q.condition,
        completed_only: q.completed_only,
    };
    Ok(Json(
        serde_json::to_value(aggregate_metrics(&all, &filter)).expect("serializable"),
    ))
}

async fn get_metrics_csv(State(svc): State<Arc<SessionService>>) -> ApiResult<Response> {
    let all = svc.all_metrics().await?;
    let csv = write_metrics(&metrics_records(&all));
    Ok(([(header::CONTENT_TYPE, "text/csv")], csv).into_response())
}

#[derive(Deserialize, Default)]
struct EventsQuery {
    after: Option<u64>,
}

/// Backlog after `?after=` (or `Last-Event-ID`), then live events. Each SSE
/// message has the event sequence as id and the event kind as type.
async fn get_events(
    State(svc): State<Arc<SessionService>>,
    Path(id): Path<String>,
    Query(q): Query<EventsQuery>,
    headers: HeaderMap,
) -> ApiResult<Sse<impl Stream<Item = Result<Event, Infallible>>>> {
    let rx = svc.subscribe();
    let condition = svc.state(&id).await?.condition;
    let backlog = svc.events(&id)?;
    let after = q.after.or_else(|| {
        headers
            .get("last-event-id")
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.parse().ok())
    });
    let seen = backlog.last().map(|e| e.sequence);
    let to_sse = move |e: &crate::session::SessionEvent| {
        e.external(condition).map(|value| {
            Event::default()
                .id(e.sequence.to_string())
                .event(e.body.kind())
                .json_data(value)
                .expect("event serializes")
        })
    };
    let past: Vec<Event> = backlog
        .iter()
        .filter(|e| after.is_none_or(|a| e.sequence > a))
        .filter_map(&to_sse)
        .collect();
    let live = stream::unfold(rx, |mut rx| async move {
        loop {
            match rx.recv().await {
                Ok(e) => return Some((e, rx)),
                Err(RecvError::Lagged(n)) => tracing::warn!(skipped = n, "event stream lagged"),
                Err(RecvError::Closed) => return None,
            }
        }
    })
    .filter_map(move |e| {
        let fresh = e.session_id == id && seen.is_none_or(|s| e.sequence > s);
        let out = if fresh { to_sse(&e) } else { None };
        async move { out }
    });
    let all = stream::iter(past).chain(live).map(Ok);
    Ok(Sse::new(all).keep_alive(KeepAlive::default()))
}
