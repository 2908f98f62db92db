//! HTTP/JSON facade over classification, bootstrap ranking and the
//! annotation review queue.
//!
//! | method | path | body / query | result |
//! |---|---|---|---|
//! | GET | `/healthz` | | liveness |
//! | GET | `/schema` | | label schema |
//! | POST | `/classify` | `{"messages", "tau" \| "calibration", "mode"?, "source"?}` | predictions |
//! | GET | `/annotation/next` | `?annotator=` or `X-Annotator` | candidate, or 204 |
//! | POST | `/annotation/{id}/decision` | `{"annotator","labels","version","round"?}` | record |
//! | GET | `/annotation/disagreements` | `?round=` | open disagreements |
//! | POST | `/annotation/{id}/consensus` | `{"annotator","labels" \| "discard","version"}` | record |
//! | GET | `/stats/agreement` | `?round=` | queue counts and Cohen's kappa |
//! | POST | `/bootstrap/run` | bootstrap settings, optional inline corpus | new round |
//! | GET | `/export` | `?round=` | labeled messages, or 409 with open ids |
//!
//! State lives in a [`ReviewStore`] under the data directory, so a restarted
//! service replays its logs and answers identically.
//!
//! [`backend_router`] separately exposes any scorer/embedder/translator over
//! the `/v1` protocol understood by the remote backend client.
//!
//! Examples: `annotation_server` walks a review round in-process or serves
//! on an address; `remote_backend` pairs [`backend_router`] with the remote
//! client.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::Router;

use agenda_core::backends::{Embedder, Scorer, Translator};
use agenda_core::bootstrap::ReviewStore;
use agenda_core::LabelSchema;

mod backend_api;
mod error;
mod routes;

pub use backend_api::backend_router;
pub use error::{ApiError, ApiResult};
pub use routes::{BootstrapRunRequest, BootstrapRunResponse, CalibrationRef, ClassifyMode, ClassifyRequest};

/// Backends the service may call. Endpoints needing a missing one answer 503.
#[derive(Clone, Default)]
pub struct Backends {
    pub scorer: Option<Arc<dyn Scorer>>,
    pub embedder: Option<Arc<dyn Embedder>>,
    pub translator: Option<Arc<dyn Translator>>,
}

pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub schema: LabelSchema,
    pub backends: Backends,
    /// Unlabeled JSON Lines files used by `/bootstrap/run` when the request
    /// carries no messages. Each file is sampled separately.
    pub corpus_files: Vec<PathBuf>,
    /// Allow cross-origin browser clients.
    pub cors: bool,
}

impl ServiceConfig {
    pub fn new(data_dir: impl Into<PathBuf>, schema: LabelSchema) -> Self {
        ServiceConfig {
            data_dir: data_dir.into(),
            schema,
            backends: Backends::default(),
            corpus_files: Vec::new(),
            cors: false,
        }
    }
}

pub(crate) struct Inner {
    pub schema: LabelSchema,
    pub store: Mutex<ReviewStore>,
    pub backends: Backends,
    pub corpus_files: Vec<PathBuf>,
    pub data_dir: PathBuf,
}

#[derive(Clone)]
pub struct AppState(pub(crate) Arc<Inner>);

impl AppState {
    pub(crate) fn store(&self) -> ApiResult<MutexGuard<'_, ReviewStore>> {
        self.0
            .store
            .lock()
            .map_err(|_| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", "review store lock poisoned"))
    }
}

/// Opens (and replays) the review store and builds the API router.
pub fn app(cfg: ServiceConfig) -> agenda_core::Result<Router> {
    let store = ReviewStore::open(&cfg.data_dir, cfg.schema.clone())?;
    let state = AppState(Arc::new(Inner {
        schema: cfg.schema,
        store: Mutex::new(store),
        backends: cfg.backends,
        corpus_files: cfg.corpus_files,
        data_dir: cfg.data_dir,
    }));
    let router = Router::new()
        .route("/healthz", get(routes::healthz))
        .route("/schema", get(routes::schema))
        .route("/classify", post(routes::classify))
        .route("/annotation/next", get(routes::next_candidate))
        .route("/annotation/disagreements", get(routes::disagreements))
        .route("/annotation/{id}/decision", post(routes::decision))
        .route("/annotation/{id}/consensus", post(routes::consensus))
        .route("/stats/agreement", get(routes::stats))
        .route("/bootstrap/run", post(routes::bootstrap_run))
        .route("/export", get(routes::export))
        .with_state(state);
    Ok(if cfg.cors {
        router.layer(tower_http::cors::CorsLayer::permissive())
    } else {
        router
    })
}

/// Serves `router` until Ctrl-C.
pub async fn serve(addr: SocketAddr, router: Router) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

/// Blocking wrapper around [`serve`] for non-async callers.
pub fn serve_blocking(addr: SocketAddr, router: Router) -> std::io::Result<()> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?
        .block_on(serve(addr, router))
}
