use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};

use agenda_core::backends::protocol::{
    EmbedBody, EmbedResponse, ErrorBody, ScoreBody, ScoreResponse, TranslateBody, TranslateResponse,
};
use agenda_core::backends::BackendError;

use crate::Backends;

fn error(status: StatusCode, e: &BackendError) -> Response {
    let (error, index) = match e {
        BackendError::Batch { failed, source } => (source.to_string(), failed.first().copied()),
        e => (e.to_string(), None),
    };
    (status, Json(ErrorBody { error, index })).into_response()
}

fn status_of(e: &BackendError) -> StatusCode {
    match e {
        BackendError::InvalidInput(_) | BackendError::Unsupported(_) => StatusCode::UNPROCESSABLE_ENTITY,
        BackendError::Batch { source, .. } => status_of(source),
        _ => StatusCode::BAD_GATEWAY,
    }
}

fn bad_body(r: JsonRejection) -> Response {
    let body = ErrorBody { error: r.body_text(), index: None };
    (StatusCode::UNPROCESSABLE_ENTITY, Json(body)).into_response()
}

fn missing(what: &str) -> Response {
    let body = ErrorBody { error: format!("no {what} configured"), index: None };
    (StatusCode::NOT_FOUND, Json(body)).into_response()
}

async fn run<T, R>(f: impl FnOnce() -> Result<T, BackendError> + Send + 'static, wrap: impl FnOnce(T) -> R) -> Response
where
    T: Send + 'static,
    R: IntoResponse,
{
    match tokio::task::spawn_blocking(f).await {
        Ok(Ok(v)) => wrap(v).into_response(),
        Ok(Err(e)) => error(status_of(&e), &e),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, &BackendError::Model(e.to_string())),
    }
}

async fn score(State(b): State<Arc<Backends>>, body: Result<Json<ScoreBody>, JsonRejection>) -> Response {
    let Json(body) = match body {
        Ok(b) => b,
        Err(r) => return bad_body(r),
    };
    let Some(s) = b.scorer.clone() else { return missing("scorer") };
    run(move || s.score_batch(&body.pairs), |v| {
        Json(ScoreResponse { scores: v.into_iter().map(|s| s.value()).collect() })
    })
    .await
}

async fn embed(State(b): State<Arc<Backends>>, body: Result<Json<EmbedBody>, JsonRejection>) -> Response {
    let Json(body) = match body {
        Ok(b) => b,
        Err(r) => return bad_body(r),
    };
    let Some(e) = b.embedder.clone() else { return missing("embedder") };
    run(move || e.embed_batch(&body.texts), |v| {
        Json(EmbedResponse { embeddings: v.into_iter().map(|e| e.values().to_vec()).collect() })
    })
    .await
}

async fn translate(State(b): State<Arc<Backends>>, body: Result<Json<TranslateBody>, JsonRejection>) -> Response {
    let Json(body) = match body {
        Ok(b) => b,
        Err(r) => return bad_body(r),
    };
    let Some(t) = b.translator.clone() else { return missing("translator") };
    run(
        move || {
            body.texts
                .iter()
                .enumerate()
                .map(|(i, text)| {
                    t.translate(text, &body.src, &body.tgt).map_err(|e| BackendError::Batch {
                        failed: vec![i],
                        source: Box::new(e),
                    })
                })
                .collect::<Result<Vec<_>, _>>()
        },
        |translations| Json(TranslateResponse { translations }),
    )
    .await
}

/// `/v1/score`, `/v1/embed` and `/v1/translate` over the given backends.
/// Item failures report the first failing index in the error body.
pub fn backend_router(backends: Backends) -> Router {
    Router::new()
        .route("/v1/score", post(score))
        .route("/v1/embed", post(embed))
        .route("/v1/translate", post(translate))
        .with_state(Arc::new(backends))
}
