//! HTTP routes.

use std::collections::HashMap;
use std::path::Path;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::header;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use refgame_core::Answer;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use tower_http::services::ServeDir;

use crate::error::ApiError;
use crate::records::ResultsFilter;
use crate::state::{AppState, CreateSession, GuessRequest};

/// Routes, plus the web bundle at `/` when `static_dir` is given.
pub fn router(state: AppState, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/answer", post(submit_answer))
        .route("/sessions/{id}/guess", post(submit_guess))
        .route("/results", get(results))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

// Bodies are parsed by hand so malformed input gets the same error shape as
// every other failure.
fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed body: {e}")))
}

async fn create_session(
    State(state): State<AppState>,
    body: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let req: CreateSession = parse_body(&body)?;
    Ok(Json(state.create_session(req)?))
}

async fn get_session(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(state.get_session(&id)?))
}

#[derive(Deserialize)]
struct AnswerBody {
    answer: String,
}

async fn submit_answer(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let req: AnswerBody = parse_body(&body)?;
    let answer: Answer = req
        .answer
        .parse()
        .map_err(|_| ApiError::bad_request(format!("answer must be yes, no or na, got {:?}", req.answer)))?;
    Ok(Json(state.submit_answer(&id, answer)?))
}

async fn submit_guess(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let req: GuessRequest = parse_body(&body)?;
    Ok(Json(state.submit_guess(&id, req)?))
}

async fn results(
    State(state): State<AppState>,
    Query(params): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    if let Some(f) = params.get("format").filter(|f| f.as_str() != "csv") {
        return Err(ApiError::bad_request(format!("unsupported format {f:?}")));
    }
    let filter = ResultsFilter {
        provenance: params
            .get("provenance")
            .map(|p| p.parse())
            .transpose()
            .map_err(ApiError::bad_request)?,
        annotator_id: params.get("annotator_id").cloned(),
    };
    let csv = state.export(&filter)?;
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], csv).into_response())
}
