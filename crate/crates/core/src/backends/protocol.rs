//! Wire types of the remote backend protocol.
//!
//! ```text
//! POST /v1/score     {"pairs":[{"premise","hypothesis","lang"}]}  -> {"scores":[p, ...]}
//! POST /v1/embed     {"texts":[{"text","lang"}]}                  -> {"embeddings":[[x, ...], ...]}
//! POST /v1/translate {"texts":[...],"src","tgt"}                  -> {"translations":[...]}
//! non-2xx            {"error":"...","index":n?}
//! ```

use serde::{Deserialize, Serialize};

use super::{EmbedRequest, ScoreRequest};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreBody {
    pub pairs: Vec<ScoreRequest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedBody {
    pub texts: Vec<EmbedRequest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub embeddings: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslateBody {
    pub texts: Vec<String>,
    pub src: String,
    pub tgt: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslateResponse {
    pub translations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
}
