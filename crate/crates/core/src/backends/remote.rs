//! JSON-over-HTTP client for the `/v1/*` backend protocol.

use std::time::Duration;

use reqwest::blocking::Client;
use serde::de::DeserializeOwned;
use serde::Serialize;

use super::protocol::{
    EmbedBody, EmbedResponse, ErrorBody, ScoreBody, ScoreResponse, TranslateBody,
    TranslateResponse,
};
use super::{
    check_pair, check_text, BackendDescriptor, BackendError, BackendResult, EmbedRequest,
    Embedder, EmbeddingVector, EntailmentScore, ScoreRequest, Scorer, Translator,
};

/// One client serves all three contracts; the server decides which it supports.
#[derive(Debug, Clone)]
pub struct RemoteBackend {
    base: String,
    client: Client,
    timeout_ms: u64,
    batch_size: usize,
}

impl RemoteBackend {
    pub fn new(base: impl Into<String>, timeout_ms: u64, batch_size: usize) -> BackendResult<Self> {
        let client = Client::builder()
            .timeout(Duration::from_millis(timeout_ms))
            .build()
            .map_err(|e| BackendError::Unavailable(e.to_string()))?;
        Ok(RemoteBackend {
            base: base.into().trim_end_matches('/').to_owned(),
            client,
            timeout_ms,
            batch_size: batch_size.max(1),
        })
    }

    pub fn from_descriptor(d: &BackendDescriptor) -> BackendResult<Self> {
        let uri = d
            .uri
            .as_deref()
            .ok_or_else(|| BackendError::InvalidInput("remote backend requires a uri".into()))?;
        Self::new(uri, d.timeout_ms, d.batch_size)
    }

    fn post<B: Serialize, R: DeserializeOwned>(&self, path: &str, body: &B) -> BackendResult<R> {
        let url = format!("{}{path}", self.base);
        let resp = self.client.post(&url).json(body).send().map_err(|e| {
            if e.is_timeout() {
                BackendError::Timeout(self.timeout_ms)
            } else {
                BackendError::Unavailable(format!("{url}: {e}"))
            }
        })?;
        let status = resp.status();
        let bytes = resp.bytes().map_err(|e| {
            if e.is_timeout() {
                BackendError::Timeout(self.timeout_ms)
            } else {
                BackendError::Unavailable(format!("{url}: {e}"))
            }
        })?;
        if !status.is_success() {
            let (message, index) = match serde_json::from_slice::<ErrorBody>(&bytes) {
                Ok(b) => (b.error, b.index),
                Err(_) => (String::from_utf8_lossy(&bytes).into_owned(), None),
            };
            return Err(BackendError::Remote {
                status: status.as_u16(),
                message,
                index,
            });
        }
        serde_json::from_slice(&bytes)
            .map_err(|e| BackendError::Protocol(format!("{url}: malformed response: {e}")))
    }

    /// Splits `items` into `batch_size` chunks, re-basing item-level error
    /// indices onto the full input.
    fn chunked<T, R>(
        &self,
        items: &[T],
        mut call: impl FnMut(&[T]) -> BackendResult<Vec<R>>,
    ) -> BackendResult<Vec<R>> {
        let mut out = Vec::with_capacity(items.len());
        for (c, chunk) in items.chunks(self.batch_size).enumerate() {
            let start = c * self.batch_size;
            match call(chunk) {
                Ok(rs) if rs.len() == chunk.len() => out.extend(rs),
                Ok(rs) => {
                    return Err(BackendError::Protocol(format!(
                        "expected {} results, got {}",
                        chunk.len(),
                        rs.len()
                    )))
                }
                Err(e) => {
                    let failed = match &e {
                        BackendError::Remote {
                            index: Some(i), ..
                        } if *i < chunk.len() => vec![start + i],
                        _ => (start..start + chunk.len()).collect(),
                    };
                    return Err(BackendError::Batch {
                        failed,
                        source: Box::new(e),
                    });
                }
            }
        }
        Ok(out)
    }
}

fn unbatch<T>(r: BackendResult<Vec<T>>) -> BackendResult<T> {
    match r {
        Ok(mut v) => v
            .pop()
            .ok_or_else(|| BackendError::Protocol("empty response".into())),
        Err(BackendError::Batch { source, .. }) => Err(*source),
        Err(e) => Err(e),
    }
}

impl Scorer for RemoteBackend {
    fn score(&self, premise: &str, hypothesis: &str, lang: &str) -> BackendResult<EntailmentScore> {
        unbatch(self.score_batch(&[ScoreRequest::new(premise, hypothesis, lang)]))
    }

    fn score_batch(&self, pairs: &[ScoreRequest]) -> BackendResult<Vec<EntailmentScore>> {
        for p in pairs {
            check_pair(&p.premise, &p.hypothesis)?;
        }
        self.chunked(pairs, |chunk| {
            let resp: ScoreResponse = self.post(
                "/v1/score",
                &ScoreBody {
                    pairs: chunk.to_vec(),
                },
            )?;
            resp.scores.into_iter().map(EntailmentScore::new).collect()
        })
    }
}

impl Embedder for RemoteBackend {
    fn embed(&self, text: &str, lang: &str) -> BackendResult<EmbeddingVector> {
        unbatch(self.embed_batch(&[EmbedRequest {
            text: text.to_owned(),
            lang: lang.to_owned(),
        }]))
    }

    fn embed_batch(&self, texts: &[EmbedRequest]) -> BackendResult<Vec<EmbeddingVector>> {
        for t in texts {
            check_text(&t.text)?;
        }
        let out = self.chunked(texts, |chunk| {
            let resp: EmbedResponse = self.post(
                "/v1/embed",
                &EmbedBody {
                    texts: chunk.to_vec(),
                },
            )?;
            resp.embeddings.into_iter().map(EmbeddingVector::new).collect()
        })?;
        if let Some(first) = out.first() {
            if out.iter().any(|v| v.dim() != first.dim()) {
                return Err(BackendError::Protocol("embeddings of mixed dimension".into()));
            }
        }
        Ok(out)
    }
}

impl Translator for RemoteBackend {
    fn translate(&self, text: &str, src: &str, tgt: &str) -> BackendResult<String> {
        check_text(text)?;
        let resp: TranslateResponse = self.post(
            "/v1/translate",
            &TranslateBody {
                texts: vec![text.to_owned()],
                src: src.to_owned(),
                tgt: tgt.to_owned(),
            },
        )?;
        match resp.translations.as_slice() {
            [t] if !t.is_empty() => Ok(t.clone()),
            [_] => Err(BackendError::Protocol("empty translation".into())),
            other => Err(BackendError::Protocol(format!(
                "expected 1 translation, got {}",
                other.len()
            ))),
        }
    }
}
