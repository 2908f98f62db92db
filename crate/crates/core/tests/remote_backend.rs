//! The HTTP client against a throwaway axum server speaking the `/v1` protocol.

use std::net::SocketAddr;
use std::time::Duration;

use agenda_core::backends::protocol::{
    EmbedBody, EmbedResponse, ErrorBody, ScoreBody, ScoreResponse, TranslateBody, TranslateResponse,
};
use agenda_core::backends::remote::RemoteBackend;
use agenda_core::backends::{BackendDescriptor, BackendError, EmbedRequest, Embedder, ScoreRequest, Scorer, Translator};
use axum::http::StatusCode;
use axum::routing::post;
use axum::{Json, Router};

type Reply<T> = Result<Json<T>, (StatusCode, Json<ErrorBody>)>;

async fn score(Json(body): Json<ScoreBody>) -> Reply<ScoreResponse> {
    let mut scores = Vec::new();
    for (i, p) in body.pairs.iter().enumerate() {
        match p.premise.as_str() {
            "explode" => {
                return Err((
                    StatusCode::INTERNAL_SERVER_ERROR,
                    Json(ErrorBody { error: "model crashed".into(), index: Some(i) }),
                ))
            }
            "overflow" => scores.push(1.3),
            "slow" => {
                tokio::time::sleep(Duration::from_millis(800)).await;
                scores.push(0.5);
            }
            "short" => return Ok(Json(ScoreResponse { scores: vec![] })),
            _ => scores.push(p.hypothesis.len() as f64 / 100.0),
        }
    }
    Ok(Json(ScoreResponse { scores }))
}

async fn embed(Json(body): Json<EmbedBody>) -> Reply<EmbedResponse> {
    let embeddings = body
        .texts
        .iter()
        .map(|t| if t.text == "wide" { vec![1.0, 2.0, 3.0] } else { vec![t.text.len() as f64, 1.0] })
        .collect();
    Ok(Json(EmbedResponse { embeddings }))
}

async fn translate(Json(body): Json<TranslateBody>) -> Reply<TranslateResponse> {
    if body.tgt != "fr" {
        return Err((
            StatusCode::UNPROCESSABLE_ENTITY,
            Json(ErrorBody { error: format!("unsupported target {}", body.tgt), index: None }),
        ));
    }
    Ok(Json(TranslateResponse {
        translations: body.texts.iter().map(|t| format!("[fr] {t}")).collect(),
    }))
}

fn serve() -> SocketAddr {
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let app = Router::new()
                .route("/v1/score", post(score))
                .route("/v1/embed", post(embed))
                .route("/v1/translate", post(translate));
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    rx.recv().unwrap()
}

fn client(addr: SocketAddr, timeout_ms: u64, batch: usize) -> RemoteBackend {
    RemoteBackend::new(format!("http://{addr}/"), timeout_ms, batch).unwrap()
}

#[test]
fn scores_round_trip_in_order() {
    let c = client(serve(), 5_000, 2);
    let pairs: Vec<ScoreRequest> = (1..=5)
        .map(|i| ScoreRequest::new("Every vote counts.", &"h".repeat(i * 10), "en"))
        .collect();
    let got: Vec<f64> = c.score_batch(&pairs).unwrap().into_iter().map(|s| s.value()).collect();
    assert_eq!(got, [0.1, 0.2, 0.3, 0.4, 0.5]);
    assert_eq!(c.score("p", &"h".repeat(70), "en").unwrap().value(), 0.7);
}

#[test]
fn out_of_range_score_is_a_protocol_error() {
    let c = client(serve(), 5_000, 8);
    let err = c.score("overflow", "h", "en").unwrap_err();
    assert!(matches!(err, BackendError::Protocol(_)), "{err:?}");
    let err = c.score("short", "h", "en").unwrap_err();
    assert!(matches!(err, BackendError::Protocol(_)), "{err:?}");
}

#[test]
fn item_errors_map_to_batch_indices() {
    let c = client(serve(), 5_000, 2);
    let pairs = [
        ScoreRequest::new("ok", "h", "en"),
        ScoreRequest::new("ok", "h", "en"),
        ScoreRequest::new("ok", "h", "en"),
        ScoreRequest::new("explode", "h", "en"),
    ];
    let err = c.score_batch(&pairs).unwrap_err();
    assert_eq!(err.failed_indices(), &[3]);
    match err {
        BackendError::Batch { source, .. } => match *source {
            BackendError::Remote { status, index, message } => {
                assert_eq!((status, index), (500, Some(1)));
                assert_eq!(message, "model crashed");
            }
            other => panic!("unexpected source {other:?}"),
        },
        other => panic!("unexpected {other:?}"),
    }
    let single = c.score("explode", "h", "en").unwrap_err();
    assert!(matches!(single, BackendError::Remote { status: 500, .. }));
}

#[test]
fn slow_backend_times_out() {
    let c = client(serve(), 150, 4);
    let err = c.score("slow", "h", "en").unwrap_err();
    assert_eq!(err, BackendError::Timeout(150));
}

#[test]
fn unreachable_backend_is_unavailable() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    let err = client(addr, 1_000, 4).score("p", "h", "en").unwrap_err();
    assert!(matches!(err, BackendError::Unavailable(_)), "{err:?}");
}

#[test]
fn embeddings_and_translations() {
    let addr = serve();
    let d = BackendDescriptor::remote(format!("http://{addr}"));
    let emb = d.build_embedder().unwrap();
    let req = |t: &str| EmbedRequest { text: t.into(), lang: "en".into() };
    let v = emb.embed_batch(&[req("abc"), req("abcd")]).unwrap();
    assert_eq!(v[1].values(), &[4.0, 1.0]);
    let mixed = emb.embed_batch(&[req("abc"), req("wide")]).unwrap_err();
    assert!(matches!(mixed, BackendError::Protocol(_)));

    let mt = d.build_translator().unwrap();
    assert_eq!(mt.translate("Every vote counts.", "en", "fr").unwrap(), "[fr] Every vote counts.");
    let err = mt.translate("x", "en", "de").unwrap_err();
    assert!(matches!(err, BackendError::Remote { status: 422, .. }));
    assert!(matches!(mt.translate("  ", "en", "fr"), Err(BackendError::InvalidInput(_))));
}
