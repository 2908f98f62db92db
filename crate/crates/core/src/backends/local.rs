//! In-process ONNX backend.
//!
//! A model directory holds three files:
//!
//! * `model.onnx`: the exported graph;
//! * `tokenizer.json`: a Hugging Face `tokenizers` definition;
//! * `backend.json`: a [`Manifest`] naming the tensor roles.
//!
//! Entailment graphs take a premise/hypothesis pair and emit one row per
//! input, either logits (softmaxed here) or probabilities. Embedding graphs
//! emit either one pooled vector per input or token embeddings, which are
//! mean-pooled over the attention mask.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use tokenizers::{Encoding, Tokenizer, TruncationParams};
use tract_onnx::prelude::*;

use super::{
    check_pair, check_text, BackendError, BackendResult, EmbedRequest, Embedder, EmbeddingVector,
    EntailmentScore, ScoreRequest, Scorer,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Entailment,
    Embedding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    Logits,
    Probabilities,
    TokenEmbeddings,
    SentenceEmbedding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub task: Task,
    /// Role (`input_ids`, `attention_mask`, `token_type_ids`) → graph input name.
    pub inputs: BTreeMap<String, String>,
    pub output: String,
    pub output_kind: OutputKind,
    /// Column of the entailment class in the classifier output.
    #[serde(default)]
    pub entailment_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_length: Option<usize>,
}

const ROLES: [&str; 3] = ["input_ids", "attention_mask", "token_type_ids"];

fn model_err(e: impl std::fmt::Display) -> BackendError {
    BackendError::Model(e.to_string())
}

pub struct LocalModel {
    manifest: Manifest,
    tokenizer: Tokenizer,
    plan: Arc<TypedRunnableModel>,
    /// Role feeding each graph input, in graph order.
    input_roles: Vec<&'static str>,
    output_slot: usize,
    batch_size: usize,
}

impl std::fmt::Debug for LocalModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LocalModel")
            .field("manifest", &self.manifest)
            .field("batch_size", &self.batch_size)
            .finish_non_exhaustive()
    }
}

impl LocalModel {
    pub fn load(dir: impl AsRef<Path>, batch_size: usize) -> BackendResult<Self> {
        let dir = dir.as_ref();
        let manifest_path = dir.join("backend.json");
        let text = std::fs::read_to_string(&manifest_path)
            .map_err(|e| BackendError::Unavailable(format!("{}: {e}", manifest_path.display())))?;
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| BackendError::Model(format!("{}: {e}", manifest_path.display())))?;
        match (manifest.task, manifest.output_kind) {
            (Task::Entailment, OutputKind::Logits | OutputKind::Probabilities)
            | (Task::Embedding, OutputKind::TokenEmbeddings | OutputKind::SentenceEmbedding) => {}
            (task, kind) => {
                return Err(BackendError::Model(format!(
                    "output kind {kind:?} does not fit task {task:?}"
                )))
            }
        }
        if !manifest.inputs.contains_key("input_ids") {
            return Err(BackendError::Model("manifest lacks an input_ids input".into()));
        }
        if let Some(role) = manifest.inputs.keys().find(|r| !ROLES.contains(&r.as_str())) {
            return Err(BackendError::Model(format!("unknown input role `{role}`")));
        }

        let mut tokenizer = Tokenizer::from_file(dir.join("tokenizer.json")).map_err(model_err)?;
        if let Some(max_length) = manifest.max_length {
            tokenizer
                .with_truncation(Some(TruncationParams {
                    max_length,
                    ..Default::default()
                }))
                .map_err(model_err)?;
        }
        tokenizer.with_padding(None);

        let model = tract_onnx::onnx()
            .model_for_path(dir.join("model.onnx"))
            .map_err(model_err)?
            .into_optimized()
            .map_err(model_err)?;
        let mut input_roles = Vec::new();
        for outlet in model.input_outlets().map_err(model_err)? {
            let name = &model.node(outlet.node).name;
            let role = manifest
                .inputs
                .iter()
                .find(|(_, n)| *n == name)
                .and_then(|(r, _)| ROLES.iter().find(|x| **x == r.as_str()))
                .ok_or_else(|| BackendError::Model(format!("graph input `{name}` has no role")))?;
            input_roles.push(*role);
        }
        let output_slot = model
            .output_outlets()
            .map_err(model_err)?
            .iter()
            .position(|o| {
                model.node(o.node).name == manifest.output
                    || model.outlet_label(*o) == Some(manifest.output.as_str())
            })
            .ok_or_else(|| {
                BackendError::Model(format!("graph has no output `{}`", manifest.output))
            })?;
        let plan = model.into_runnable().map_err(model_err)?;
        Ok(LocalModel {
            manifest,
            tokenizer,
            plan,
            input_roles,
            output_slot,
            batch_size: batch_size.max(1),
        })
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    fn require(&self, task: Task) -> BackendResult<()> {
        if self.manifest.task != task {
            return Err(BackendError::Unsupported(format!(
                "model is configured for {:?}, not {task:?}",
                self.manifest.task
            )));
        }
        Ok(())
    }

    /// Pads a chunk of encodings to a common length and runs the graph.
    /// Returns the raw output and the attention mask used.
    fn run(&self, encodings: &[Encoding]) -> BackendResult<(tract_ndarray::ArrayD<f32>, Vec<Vec<i64>>)> {
        let batch = encodings.len();
        let seq = encodings.iter().map(|e| e.get_ids().len()).max().unwrap_or(0).max(1);
        let mut ids = vec![0i64; batch * seq];
        let mut mask = vec![0i64; batch * seq];
        let mut types = vec![0i64; batch * seq];
        let mut masks = Vec::with_capacity(batch);
        for (b, enc) in encodings.iter().enumerate() {
            let mut row_mask = vec![0i64; seq];
            for (t, ((&id, &m), &ty)) in enc
                .get_ids()
                .iter()
                .zip(enc.get_attention_mask())
                .zip(enc.get_type_ids())
                .enumerate()
            {
                ids[b * seq + t] = i64::from(id);
                mask[b * seq + t] = i64::from(m);
                types[b * seq + t] = i64::from(ty);
                row_mask[t] = i64::from(m);
            }
            masks.push(row_mask);
        }
        let mut inputs: TVec<TValue> = tvec![];
        for role in &self.input_roles {
            let data = match *role {
                "input_ids" => &ids,
                "attention_mask" => &mask,
                _ => &types,
            };
            let t = Tensor::from_shape(&[batch, seq], data).map_err(model_err)?;
            inputs.push(t.into());
        }
        let outputs = self.plan.run(inputs).map_err(model_err)?;
        let out = outputs
            .get(self.output_slot)
            .ok_or_else(|| BackendError::Model("missing output tensor".into()))?;
        let view = out.to_plain_array_view::<f32>().map_err(model_err)?;
        if view.shape().first() != Some(&batch) {
            return Err(BackendError::Model(format!(
                "output batch dimension {:?} does not match {batch}",
                view.shape()
            )));
        }
        Ok((view.to_owned(), masks))
    }

    fn entailment_probs(&self, out: &tract_ndarray::ArrayD<f32>) -> BackendResult<Vec<EntailmentScore>> {
        let shape = out.shape();
        if shape.len() != 2 {
            return Err(BackendError::Model(format!("expected [batch, classes], got {shape:?}")));
        }
        let classes = shape[1];
        let idx = self.manifest.entailment_index;
        if classes > 1 && idx >= classes {
            return Err(BackendError::Model(format!(
                "entailment_index {idx} out of range for {classes} classes"
            )));
        }
        let mut scores = Vec::with_capacity(shape[0]);
        for row in out.outer_iter() {
            let row: Vec<f64> = row.iter().map(|&x| f64::from(x)).collect();
            let p = match (self.manifest.output_kind, classes) {
                (OutputKind::Logits, 1) => 1.0 / (1.0 + (-row[0]).exp()),
                (OutputKind::Logits, _) => {
                    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let exps: Vec<f64> = row.iter().map(|x| (x - max).exp()).collect();
                    exps[idx] / exps.iter().sum::<f64>()
                }
                (_, 1) => row[0],
                _ => row[idx],
            };
            scores.push(EntailmentScore::new(p)?);
        }
        Ok(scores)
    }

    fn pooled(&self, out: &tract_ndarray::ArrayD<f32>, masks: &[Vec<i64>]) -> BackendResult<Vec<EmbeddingVector>> {
        let shape = out.shape().to_vec();
        match (self.manifest.output_kind, shape.len()) {
            (OutputKind::SentenceEmbedding, 2) => out
                .outer_iter()
                .map(|row| EmbeddingVector::new(row.iter().map(|&x| f64::from(x)).collect()))
                .map(|r| r.map_err(|e| BackendError::Model(e.to_string())))
                .collect(),
            (OutputKind::TokenEmbeddings, 3) => {
                let dim = shape[2];
                let mut vecs = Vec::with_capacity(shape[0]);
                for (b, tokens) in out.outer_iter().enumerate() {
                    let mut acc = vec![0.0f64; dim];
                    let mut count = 0.0;
                    for (t, tok) in tokens.outer_iter().enumerate() {
                        if masks[b].get(t).copied().unwrap_or(0) == 0 {
                            continue;
                        }
                        count += 1.0;
                        for (a, &x) in acc.iter_mut().zip(tok.iter()) {
                            *a += f64::from(x);
                        }
                    }
                    if count > 0.0 {
                        acc.iter_mut().for_each(|a| *a /= count);
                    }
                    vecs.push(EmbeddingVector::new(acc).map_err(|e| BackendError::Model(e.to_string()))?);
                }
                Ok(vecs)
            }
            (kind, rank) => Err(BackendError::Model(format!(
                "output of rank {rank} does not fit {kind:?}"
            ))),
        }
    }
}

impl Scorer for LocalModel {
    fn score(&self, premise: &str, hypothesis: &str, lang: &str) -> BackendResult<EntailmentScore> {
        let mut v = self.score_batch(&[ScoreRequest::new(premise, hypothesis, lang)])?;
        Ok(v.remove(0))
    }

    fn score_batch(&self, pairs: &[ScoreRequest]) -> BackendResult<Vec<EntailmentScore>> {
        self.require(Task::Entailment)?;
        for p in pairs {
            check_pair(&p.premise, &p.hypothesis)?;
        }
        let mut out = Vec::with_capacity(pairs.len());
        for chunk in pairs.chunks(self.batch_size) {
            let encodings = chunk
                .iter()
                .map(|p| {
                    self.tokenizer
                        .encode((p.premise.as_str(), p.hypothesis.as_str()), true)
                        .map_err(model_err)
                })
                .collect::<BackendResult<Vec<_>>>()?;
            let (raw, _) = self.run(&encodings)?;
            out.extend(self.entailment_probs(&raw)?);
        }
        Ok(out)
    }
}

impl Embedder for LocalModel {
    fn embed(&self, text: &str, lang: &str) -> BackendResult<EmbeddingVector> {
        let mut v = self.embed_batch(&[EmbedRequest {
            text: text.to_owned(),
            lang: lang.to_owned(),
        }])?;
        Ok(v.remove(0))
    }

    fn embed_batch(&self, texts: &[EmbedRequest]) -> BackendResult<Vec<EmbeddingVector>> {
        self.require(Task::Embedding)?;
        for t in texts {
            check_text(&t.text)?;
        }
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.batch_size) {
            let encodings = chunk
                .iter()
                .map(|t| self.tokenizer.encode(t.text.as_str(), true).map_err(model_err))
                .collect::<BackendResult<Vec<_>>>()?;
            let (raw, masks) = self.run(&encodings)?;
            out.extend(self.pooled(&raw, &masks)?);
        }
        Ok(out)
    }
}
