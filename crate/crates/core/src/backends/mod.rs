//! Inference contracts: entailment scoring, text embedding, machine translation.
//!
//! Each contract has three implementations selected by a [`BackendDescriptor`]:
//!
//! * `mock`: pure functions of (input, seed, fixture table), for tests and demos;
//! * `local`: an ONNX graph plus `tokenizer.json`, run in-process with tract;
//! * `remote`: JSON over HTTP (`POST /v1/score`, `/v1/embed`, `/v1/translate`).
//!
//! Scores are validated, never clipped: a remote value outside `[0, 1]` is a
//! protocol error rather than a score.

use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[cfg(feature = "local")]
pub mod local;
pub mod mock;
pub mod protocol;
#[cfg(feature = "remote")]
pub mod remote;

pub use mock::{MockEmbedder, MockFixtures, MockScorer, MockTranslator};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),

    #[error("backend timed out after {0} ms")]
    Timeout(u64),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("backend returned {status}: {message}")]
    Remote {
        status: u16,
        message: String,
        index: Option<usize>,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("batch items {failed:?} failed: {source}")]
    Batch {
        failed: Vec<usize>,
        #[source]
        source: Box<BackendError>,
    },
}

impl BackendError {
    /// Indices of failed batch items, if this is a batch failure.
    pub fn failed_indices(&self) -> &[usize] {
        match self {
            BackendError::Batch { failed, .. } => failed,
            _ => &[],
        }
    }
}

pub type BackendResult<T> = Result<T, BackendError>;

/// Probability that the hypothesis is entailed by the premise.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct EntailmentScore(f64);

impl EntailmentScore {
    pub fn new(p: f64) -> BackendResult<Self> {
        if p.is_finite() && (0.0..=1.0).contains(&p) {
            Ok(EntailmentScore(p))
        } else {
            Err(BackendError::Protocol(format!("score {p} outside [0, 1]")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> BackendResult<Self> {
        if values.is_empty() {
            return Err(BackendError::Protocol("empty embedding".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(BackendError::Protocol("non-finite embedding value".into()));
        }
        Ok(EmbeddingVector(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub premise: String,
    pub hypothesis: String,
    pub lang: String,
}

impl ScoreRequest {
    pub fn new(premise: &str, hypothesis: &str, lang: &str) -> Self {
        ScoreRequest {
            premise: premise.to_owned(),
            hypothesis: hypothesis.to_owned(),
            lang: lang.to_owned(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub text: String,
    pub lang: String,
}

pub(crate) fn check_pair(premise: &str, hypothesis: &str) -> BackendResult<()> {
    if premise.trim().is_empty() || hypothesis.trim().is_empty() {
        return Err(BackendError::InvalidInput(
            "premise and hypothesis must be non-empty".into(),
        ));
    }
    Ok(())
}

pub(crate) fn check_text(text: &str) -> BackendResult<()> {
    if text.trim().is_empty() {
        return Err(BackendError::InvalidInput("text must be non-empty".into()));
    }
    Ok(())
}

/// Runs `f` over every item, collecting all failures into one
/// [`BackendError::Batch`].
pub(crate) fn map_items<T, R>(
    items: &[T],
    mut f: impl FnMut(&T) -> BackendResult<R>,
) -> BackendResult<Vec<R>> {
    let mut out = Vec::with_capacity(items.len());
    let mut failed = Vec::new();
    let mut first = None;
    for (i, item) in items.iter().enumerate() {
        match f(item) {
            Ok(r) => out.push(r),
            Err(e) => {
                failed.push(i);
                first.get_or_insert(e);
            }
        }
    }
    match first {
        None => Ok(out),
        Some(e) => Err(BackendError::Batch {
            failed,
            source: Box::new(e),
        }),
    }
}

/// Entailment scorer. Handles are shared across threads.
pub trait Scorer: Send + Sync {
    fn score(&self, premise: &str, hypothesis: &str, lang: &str) -> BackendResult<EntailmentScore>;

    /// Order-preserving; equivalent to calling [`Scorer::score`] per item.
    fn score_batch(&self, pairs: &[ScoreRequest]) -> BackendResult<Vec<EntailmentScore>> {
        map_items(pairs, |p| self.score(&p.premise, &p.hypothesis, &p.lang))
    }
}

pub trait Embedder: Send + Sync {
    fn embed(&self, text: &str, lang: &str) -> BackendResult<EmbeddingVector>;

    fn embed_batch(&self, texts: &[EmbedRequest]) -> BackendResult<Vec<EmbeddingVector>> {
        map_items(texts, |t| self.embed(&t.text, &t.lang))
    }
}

pub trait Translator: Send + Sync {
    fn translate(&self, text: &str, src_lang: &str, tgt_lang: &str) -> BackendResult<String>;
}

impl<T: Scorer + ?Sized> Scorer for Arc<T> {
    fn score(&self, p: &str, h: &str, lang: &str) -> BackendResult<EntailmentScore> {
        (**self).score(p, h, lang)
    }

    fn score_batch(&self, pairs: &[ScoreRequest]) -> BackendResult<Vec<EntailmentScore>> {
        (**self).score_batch(pairs)
    }
}

impl<T: Embedder + ?Sized> Embedder for Arc<T> {
    fn embed(&self, text: &str, lang: &str) -> BackendResult<EmbeddingVector> {
        (**self).embed(text, lang)
    }

    fn embed_batch(&self, texts: &[EmbedRequest]) -> BackendResult<Vec<EmbeddingVector>> {
        (**self).embed_batch(texts)
    }
}

impl<T: Translator + ?Sized> Translator for Arc<T> {
    fn translate(&self, text: &str, src: &str, tgt: &str) -> BackendResult<String> {
        (**self).translate(text, src, tgt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Mock,
    Local,
    Remote,
}

/// Where a backend lives and how to talk to it.
///
/// The string form accepted by [`FromStr`] is one of
/// `mock`, `mock:<fixtures.json>`, `local:<model-dir>`, `http(s)://...`,
/// or a path to a JSON file holding the serialized descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendDescriptor {
    pub kind: BackendKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uri: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
    /// Embedding dimension of the mock embedder.
    #[serde(default = "default_dim")]
    pub dim: usize,
}

fn default_timeout() -> u64 {
    30_000
}

fn default_batch() -> usize {
    32
}

fn default_dim() -> usize {
    64
}

impl BackendDescriptor {
    pub fn mock() -> Self {
        BackendDescriptor {
            kind: BackendKind::Mock,
            uri: None,
            path: None,
            timeout_ms: default_timeout(),
            batch_size: default_batch(),
            seed: 0,
            dim: default_dim(),
        }
    }

    pub fn remote(uri: impl Into<String>) -> Self {
        BackendDescriptor {
            kind: BackendKind::Remote,
            uri: Some(uri.into()),
            ..Self::mock()
        }
    }

    pub fn local(path: impl Into<PathBuf>) -> Self {
        BackendDescriptor {
            kind: BackendKind::Local,
            path: Some(path.into()),
            ..Self::mock()
        }
    }

    pub fn validate(&self) -> BackendResult<()> {
        if self.batch_size == 0 {
            return Err(BackendError::InvalidInput("batch_size must be positive".into()));
        }
        match self.kind {
            BackendKind::Remote if self.uri.is_none() => {
                Err(BackendError::InvalidInput("remote backend requires a uri".into()))
            }
            BackendKind::Local if self.path.is_none() => {
                Err(BackendError::InvalidInput("local backend requires a path".into()))
            }
            BackendKind::Mock if self.dim == 0 => {
                Err(BackendError::InvalidInput("mock dim must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn build_scorer(&self) -> BackendResult<Arc<dyn Scorer>> {
        self.validate()?;
        match self.kind {
            BackendKind::Mock => Ok(Arc::new(MockScorer::new(self.seed).with_fixtures(&self.fixtures()?))),
            BackendKind::Local => build_local_scorer(self),
            BackendKind::Remote => build_remote(self).map(|r| r as Arc<dyn Scorer>),
        }
    }

    pub fn build_embedder(&self) -> BackendResult<Arc<dyn Embedder>> {
        self.validate()?;
        match self.kind {
            BackendKind::Mock => Ok(Arc::new(
                MockEmbedder::new(self.dim, self.seed).with_fixtures(&self.fixtures()?)?,
            )),
            BackendKind::Local => build_local_embedder(self),
            BackendKind::Remote => build_remote(self).map(|r| r as Arc<dyn Embedder>),
        }
    }

    pub fn build_translator(&self) -> BackendResult<Arc<dyn Translator>> {
        self.validate()?;
        match self.kind {
            BackendKind::Mock => Ok(Arc::new(MockTranslator::new().with_fixtures(&self.fixtures()?))),
            BackendKind::Local => Err(BackendError::Unsupported(
                "local runtime does not provide translation; use a remote backend".into(),
            )),
            BackendKind::Remote => build_remote(self).map(|r| r as Arc<dyn Translator>),
        }
    }

    fn fixtures(&self) -> BackendResult<MockFixtures> {
        match &self.path {
            Some(p) => MockFixtures::load(p),
            None => Ok(MockFixtures::default()),
        }
    }
}

impl FromStr for BackendDescriptor {
    type Err = BackendError;

    fn from_str(s: &str) -> BackendResult<Self> {
        let d = if s == "mock" {
            Self::mock()
        } else if let Some(path) = s.strip_prefix("mock:") {
            BackendDescriptor {
                path: Some(path.into()),
                ..Self::mock()
            }
        } else if let Some(path) = s.strip_prefix("local:") {
            Self::local(path)
        } else if s.starts_with("http://") || s.starts_with("https://") {
            Self::remote(s)
        } else if s.ends_with(".json") {
            let text = std::fs::read_to_string(s)
                .map_err(|e| BackendError::InvalidInput(format!("{s}: {e}")))?;
            serde_json::from_str(&text)
                .map_err(|e| BackendError::InvalidInput(format!("{s}: {e}")))?
        } else {
            return Err(BackendError::InvalidInput(format!(
                "unrecognized backend descriptor `{s}`"
            )));
        };
        d.validate()?;
        Ok(d)
    }
}

#[cfg(feature = "remote")]
fn build_remote(d: &BackendDescriptor) -> BackendResult<Arc<remote::RemoteBackend>> {
    Ok(Arc::new(remote::RemoteBackend::from_descriptor(d)?))
}

#[cfg(not(feature = "remote"))]
fn build_remote(_: &BackendDescriptor) -> BackendResult<Arc<mock::MockScorer>> {
    Err(BackendError::Unsupported("built without the `remote` feature".into()))
}

#[cfg(feature = "local")]
fn build_local_scorer(d: &BackendDescriptor) -> BackendResult<Arc<dyn Scorer>> {
    let path = d.path.as_ref().expect("validated");
    Ok(Arc::new(local::LocalModel::load(path, d.batch_size)?))
}

#[cfg(feature = "local")]
fn build_local_embedder(d: &BackendDescriptor) -> BackendResult<Arc<dyn Embedder>> {
    let path = d.path.as_ref().expect("validated");
    Ok(Arc::new(local::LocalModel::load(path, d.batch_size)?))
}

#[cfg(not(feature = "local"))]
fn build_local_scorer(_: &BackendDescriptor) -> BackendResult<Arc<dyn Scorer>> {
    Err(BackendError::Unsupported("built without the `local` feature".into()))
}

#[cfg(not(feature = "local"))]
fn build_local_embedder(_: &BackendDescriptor) -> BackendResult<Arc<dyn Embedder>> {
    Err(BackendError::Unsupported("built without the `local` feature".into()))
}
