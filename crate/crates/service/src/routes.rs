use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use serde_json::json;

use agenda_core::bootstrap::{
    rank_candidates, sample_per_file, AnchorText, BootstrapConfig, Candidate, ConsensusInput,
    DecisionInput,
};
use agenda_core::classify::{
    classify_by_similarity, predict, score_messages, check_tau, SimilaritySource,
    ThresholdCalibration,
};
use agenda_core::{io, Dataset, Message};

use crate::error::{ApiError, ApiResult};
use crate::AppState;

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

fn unavailable(what: &str) -> ApiError {
    ApiError::new(
        StatusCode::SERVICE_UNAVAILABLE,
        "backend",
        format!("no {what} backend configured"),
    )
}

pub async fn healthz(State(st): State<AppState>) -> ApiResult<Json<serde_json::Value>> {
    let store = st.store()?;
    Ok(Json(json!({
        "status": "ok",
        "round": store.queue().current_round(),
        "candidates": store.queue().candidates().len(),
    })))
}

pub async fn schema(State(st): State<AppState>) -> Json<agenda_core::LabelSchema> {
    Json(st.0.schema.clone())
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum CalibrationRef {
    Inline(ThresholdCalibration),
    /// Path to a calibration file, relative to the data directory.
    Path(String),
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifyMode {
    #[default]
    Entailment,
    Similarity,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyRequest {
    pub messages: Vec<Message>,
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default)]
    pub calibration: Option<CalibrationRef>,
    #[serde(default)]
    pub mode: ClassifyMode,
    #[serde(default)]
    pub source: Option<SimilaritySource>,
}

pub async fn classify(
    State(st): State<AppState>,
    body: Result<Json<ClassifyRequest>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(req) = body?;
    let tau = match (&req.tau, &req.calibration) {
        (Some(t), None) => *t,
        (None, Some(CalibrationRef::Inline(c))) => c.tau,
        (None, Some(CalibrationRef::Path(p))) => {
            ThresholdCalibration::load(st.0.data_dir.join(p))?.tau
        }
        _ => return Err(ApiError::invalid("give exactly one of `tau` or `calibration`")),
    };
    check_tau(tau)?;
    if req.messages.is_empty() {
        return Ok(Json(Vec::<agenda_core::classify::Prediction>::new()).into_response());
    }
    let ds = Dataset::new(req.messages, &st.0.schema)?;
    let preds = match req.mode {
        ClassifyMode::Entailment => {
            let scorer = st.0.backends.scorer.clone().ok_or_else(|| unavailable("scorer"))?;
            let st = st.clone();
            blocking(move || {
                let m = score_messages(ds.messages(), &st.0.schema, &scorer)?;
                Ok(predict(&m, &st.0.schema, tau)?)
            })
            .await?
        }
        ClassifyMode::Similarity => {
            let emb = st.0.backends.embedder.clone().ok_or_else(|| unavailable("embedder"))?;
            let source = req.source.unwrap_or(SimilaritySource::Hypothesis);
            let st = st.clone();
            blocking(move || Ok(classify_by_similarity(ds.messages(), &st.0.schema, &emb, source, tau)?.1))
                .await?
        }
    };
    Ok(Json(preds).into_response())
}

#[derive(Debug, Deserialize)]
pub struct AnnotatorQuery {
    annotator: Option<String>,
}

#[derive(Serialize)]
struct CandidateView<'a> {
    #[serde(flatten)]
    candidate: &'a Candidate,
    /// Definition of the suggested label in the message's language.
    definition: Option<&'a str>,
}

pub async fn next_candidate(
    State(st): State<AppState>,
    headers: HeaderMap,
    q: Result<Query<AnnotatorQuery>, QueryRejection>,
) -> ApiResult<Response> {
    let Query(q) = q?;
    let annotator = q
        .annotator
        .or_else(|| headers.get("x-annotator").and_then(|v| v.to_str().ok()).map(str::to_owned))
        .filter(|a| !a.trim().is_empty())
        .ok_or_else(|| ApiError::invalid("missing annotator (query `annotator` or header X-Annotator)"))?;
    let store = st.store()?;
    let Some(c) = store.queue().next_for(&annotator) else {
        return Ok(StatusCode::NO_CONTENT.into_response());
    };
    let definition = st
        .0
        .schema
        .get(&c.suggested_label)
        .and_then(|l| l.definition.get(&c.message.lang))
        .map(String::as_str);
    Ok(Json(CandidateView { candidate: c, definition }).into_response())
}

fn write_result(rec: agenda_core::bootstrap::AnnotationRecord, c: &Candidate) -> Json<serde_json::Value> {
    Json(json!({ "record": rec, "status": c.status, "version": c.version }))
}

pub async fn decision(
    State(st): State<AppState>,
    Path(id): Path<u64>,
    body: Result<Json<DecisionInput>, JsonRejection>,
) -> ApiResult<Json<serde_json::Value>> {
    let Json(input) = body?;
    blocking(move || {
        let mut store = st.store()?;
        let rec = store.record_decision(id, &input, now_ms())?;
        Ok(write_result(rec, store.queue().get(id).expect("candidate just written")))
    })
    .await
}

pub async fn consensus(
    State(st): State<AppState>,
    Path(id): Path<u64>,
    body: Result<Json<ConsensusInput>, JsonRejection>,
) -> ApiResult<Json<serde_json::Value>> {
    let Json(input) = body?;
    blocking(move || {
        let mut store = st.store()?;
        let rec = store.resolve(id, &input, now_ms())?;
        Ok(write_result(rec, store.queue().get(id).expect("candidate just written")))
    })
    .await
}

#[derive(Debug, Deserialize)]
pub struct RoundQuery {
    round: Option<u32>,
}

fn round_of(st: &AppState, q: Result<Query<RoundQuery>, QueryRejection>) -> ApiResult<u32> {
    let Query(q) = q?;
    Ok(q.round.unwrap_or(st.store()?.queue().current_round()))
}

pub async fn disagreements(
    State(st): State<AppState>,
    q: Result<Query<RoundQuery>, QueryRejection>,
) -> ApiResult<Json<serde_json::Value>> {
    let round = round_of(&st, q)?;
    let store = st.store()?;
    let ids = store.queue().disagreements(round);
    let candidates: Vec<&Candidate> = ids.iter().filter_map(|&i| store.queue().get(i)).collect();
    Ok(Json(json!({ "round": round, "ids": ids, "candidates": candidates })))
}

pub async fn stats(
    State(st): State<AppState>,
    q: Result<Query<RoundQuery>, QueryRejection>,
) -> ApiResult<Json<agenda_core::bootstrap::QueueStats>> {
    let round = round_of(&st, q)?;
    Ok(Json(st.store()?.queue().stats(round)?))
}

pub async fn export(
    State(st): State<AppState>,
    q: Result<Query<RoundQuery>, QueryRejection>,
) -> ApiResult<Json<agenda_core::bootstrap::ExportResult>> {
    let round = round_of(&st, q)?;
    let store = st.store()?;
    let open = store.queue().disagreements(round);
    if !open.is_empty() {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "precondition",
            format!("round {round} has {} unresolved disagreements", open.len()),
        )
        .with_extra(json!({ "disagreements": open })));
    }
    Ok(Json(store.queue().export_labeled(round)?))
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapRunRequest {
    #[serde(default)]
    pub k_per_label: Option<usize>,
    #[serde(default)]
    pub source_text: Option<AnchorText>,
    #[serde(default)]
    pub target_labels: Option<Vec<String>>,
    #[serde(default)]
    pub sample_fraction: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Inline corpus, treated as one file. Defaults to the configured corpus files.
    #[serde(default)]
    pub messages: Option<Vec<Message>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapRunResponse {
    pub round: u32,
    pub n_sampled: usize,
    pub n_candidates: usize,
    pub n_below_cutoff: usize,
    pub below_cutoff_file: String,
    pub config: BootstrapConfig,
}

pub async fn bootstrap_run(
    State(st): State<AppState>,
    body: Result<Json<BootstrapRunRequest>, JsonRejection>,
) -> ApiResult<Json<BootstrapRunResponse>> {
    let Json(req) = body?;
    let embedder = st.0.backends.embedder.clone().ok_or_else(|| unavailable("embedder"))?;
    let mut cfg = BootstrapConfig::new(req.seed.unwrap_or(0));
    cfg.k_per_label = req.k_per_label.unwrap_or(cfg.k_per_label);
    cfg.source_text = req.source_text.unwrap_or(cfg.source_text);
    cfg.sample_fraction = req.sample_fraction.unwrap_or(cfg.sample_fraction);
    cfg.target_labels = req.target_labels;
    cfg.validate(&st.0.schema)?;

    blocking(move || {
        let files: Vec<Vec<Message>> = match req.messages {
            Some(m) => vec![m],
            None if st.0.corpus_files.is_empty() => {
                return Err(ApiError::invalid("no corpus configured and no messages given"))
            }
            None => st
                .0
                .corpus_files
                .iter()
                .map(io::read_jsonl::<Message>)
                .collect::<Result<_, _>>()?,
        };
        let corpus: Vec<Message> = files.iter().flatten().cloned().collect();
        // validates ids, languages and pair links across the whole corpus
        Dataset::new(corpus.clone(), &st.0.schema)?;
        let sampled = sample_per_file(&files, cfg.sample_fraction, cfg.seed)?;
        let ranking = rank_candidates(&sampled, &st.0.schema, &embedder, &cfg)?;
        let mut store = st.store()?;
        let round = store.add_round(&ranking, &corpus)?;
        let side: PathBuf = st.0.data_dir.join(format!("below_cutoff_round{round}.jsonl"));
        io::write_jsonl(&side, &ranking.below_cutoff)?;
        Ok(Json(BootstrapRunResponse {
            round,
            n_sampled: sampled.len(),
            n_candidates: ranking.selected.len(),
            n_below_cutoff: ranking.below_cutoff.len(),
            below_cutoff_file: side.display().to_string(),
            config: cfg,
        }))
    })
    .await
}
